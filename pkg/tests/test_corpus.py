import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwreply import corpus as C
from kwreply.corpus import ConversationPair as Pair


def dicts(emotion, topic):
    return C.load_dictionaries(emotion, topic)


# vocab ---------------------------------------------------------------------

def test_vocab_reserved_ids():
    v = C.Vocab.build([["b", "a"], ["a", "c"]])
    assert [v.id(t) for t in C.RESERVED] == [0, 1, 2, 3]
    assert v.encode(["a", "zzz"]) == [4, C.UNK]
    assert C.Vocab.from_list(v.to_list()).to_list() == v.to_list()


def test_vocab_ids_do_not_depend_on_order():
    assert C.Vocab.build([["x", "y"], ["z"]]).to_list() == C.Vocab.build([["z"], ["y", "x"]]).to_list()


def test_vocab_from_list_checks_reserved():
    with pytest.raises(C.CorpusFormatError):
        C.Vocab.from_list(["a", "b", "c", "d"])


# dictionaries --------------------------------------------------------------

def test_overlap_goes_to_emotion():
    ed, td = dicts({"joy": "Happy"}, {"joy": "t3", "tax": "t3"})
    assert "joy" in ed and "joy" not in td
    assert td.words(3) == ["tax"]


def test_disjoint_sources_pass_through():
    ed, td = dicts({"sad": "Sad", "glad": "Happy"}, {"tax": 0, "bill": "1"})
    assert ed.category == {"sad": 3, "glad": 0}
    assert td.category == {"tax": 0, "bill": 1}


@pytest.mark.parametrize("emo, top", [({"x": "Bored"}, {"y": 0}), ({"x": "Happy"}, {"y": "t10"}), ({}, {"y": 0})])
def test_bad_dictionaries(emo, top):
    with pytest.raises(C.CorpusFormatError):
        dicts(emo, top)


def test_topic_lists_capped():
    ed, td = C.load_dictionaries({"e": "Sad"}, [(f"w{i}", 0) for i in range(150)])
    assert len(td.words(0)) == 100


def test_reference_scale_emotion_dictionary():
    emo = [(f"e{i}", C.EMOTIONS[i % 7]) for i in range(27466)]
    ed, _ = dicts(emo, {"tax": 0})
    assert len(ed) == 27466


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcdefghij"), min_size=1, unique=True),
       st.lists(st.sampled_from("abcdefghij"), min_size=1, unique=True))
def test_dictionaries_disjoint(ews, tws):
    ed, td = dicts([(w, "Fear") for w in ews], [(w, 2) for w in tws])
    assert not set(ed.category) & set(td.category)


# marking -------------------------------------------------------------------

def test_mark_forward_example():
    ed, td = dicts({"furious": "Angry"}, {"tax": "t0"})
    pair = Pair(("what", "happened"), tuple("the tax bill made me furious".split()))
    m = C.mark_pair(pair, ed, td, {})
    assert (m.topic_keyword, m.topic_index) == ("tax", 1)
    assert (m.emotion_keyword, m.emotion_index) == ("furious", 5)
    assert m.direction == C.FORWARD
    assert m.middle == ("bill", "made", "me")
    assert m.left == ("the",) and m.right == ()
    assert m.emotion_category == 5 and m.topic_category == 0


def test_mark_picks_rarest():
    ed, td = dicts({"sad": "Sad"}, {"tax": 0, "levy": 0})
    m = C.mark_pair(Pair(("x",), ("tax", "and", "levy", "sad")), ed, td, {"tax": 500, "levy": 3})
    assert m.topic_keyword == "levy"


def test_mark_tie_goes_leftmost():
    ed, td = dicts({"sad": "Sad"}, {"tax": 0, "levy": 0})
    m = C.mark_pair(Pair(("x",), ("tax", "and", "levy", "sad")), ed, td, {"tax": 4, "levy": 4})
    assert m.topic_keyword == "tax" and m.topic_index == 0


def test_mark_backward_reverses():
    ed, td = dicts({"sad": "Sad"}, {"tax": 0})
    m = C.mark_pair(Pair(("x",), ("so", "sad", "about", "the", "tax", "again")), ed, td, {})
    assert m.direction == C.BACKWARD
    assert m.left == ("again",)
    assert m.middle == ("the", "about")
    assert m.right == ("so",)
    assert m.reassemble() == ["so", "sad", "about", "the", "tax", "again"]


def test_mark_needs_both_types():
    ed, td = dicts({"sad": "Sad"}, {"tax": 0})
    assert C.mark_pair(Pair(("x",), ("only", "sad")), ed, td, {}) is None
    assert C.mark_pair(Pair(("x",), ("only", "tax")), ed, td, {}) is None


def test_pair_must_be_nonempty():
    with pytest.raises(C.CorpusDataError):
        Pair((), ("a",))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "c", "joy", "fear", "tax", "rent"]), min_size=1, max_size=12),
       st.dictionaries(st.sampled_from(["joy", "fear", "tax", "rent"]), st.integers(0, 5)))
def test_marking_round_trip(reply, freq):
    ed, td = dicts({"joy": "Happy", "fear": "Fear"}, {"tax": 1, "rent": 2})
    m = C.mark_pair(Pair(("p",), tuple(reply)), ed, td, freq)
    has_e = any(w in ("joy", "fear") for w in reply)
    has_t = any(w in ("tax", "rent") for w in reply)
    assert (m is None) == (not (has_e and has_t))
    if m is not None:
        assert m.reassemble() == list(reply)
        assert m.emotion_index != m.topic_index
        assert (m.direction == C.FORWARD) == (m.topic_index < m.emotion_index)


# filter / split --------------------------------------------------------------

def toy_pairs(n_markable, n_plain):
    good = [Pair(("p", str(i)), ("the", "tax", "is", "sad")) for i in range(n_markable)]
    bad = [Pair(("p", str(i)), ("nothing", "here")) for i in range(n_plain)]
    pairs = good + bad
    random.Random(0).shuffle(pairs)
    return pairs


def test_retention_exact():
    ed, td = dicts({"sad": "Sad"}, {"tax": 0})
    split = C.filter_and_split(toy_pairs(40, 60), ed, td, seed=0, val_size=5, test_size=5)
    assert split.stats["retention"] == 0.40
    assert (len(split.train), len(split.val), len(split.test)) == (30, 5, 5)


def test_split_is_seeded_and_disjoint():
    ed, td = dicts({"sad": "Sad"}, {"tax": 0})
    pairs = toy_pairs(40, 0)
    a = C.filter_and_split(pairs, ed, td, seed=3, val_size=5, test_size=7)
    b = C.filter_and_split(pairs, ed, td, seed=3, val_size=5, test_size=7)
    assert a.indices == b.indices
    assert a.stats["retention"] == 1.0
    all_idx = a.indices["train"] + a.indices["val"] + a.indices["test"]
    assert sorted(all_idx) == list(range(40))


def test_split_too_small():
    ed, td = dicts({"sad": "Sad"}, {"tax": 0})
    with pytest.raises(C.CorpusDataError):
        C.filter_and_split(toy_pairs(5, 10), ed, td, seed=0, val_size=3, test_size=2)


def test_marking_ignores_pair_order():
    sc = C.synth_corpus(1, 60)
    ed, td = sc.dictionaries()
    freq = C.reply_frequencies(sc.pairs)
    freq_rev = C.reply_frequencies(sc.pairs[::-1])
    for p in sc.pairs:
        assert C.mark_pair(p, ed, td, freq) == C.mark_pair(p, ed, td, freq_rev)


# files ---------------------------------------------------------------------

def test_corpus_file_round_trip(tmp_path):
    sc = C.synth_corpus(0, 20)
    paths = C.write_synth_files(tmp_path, sc)
    assert C.read_corpus(paths["corpus"]) == sc.pairs
    assert C.read_dictionary_file(paths["emotion_dict"]) == sc.emotion_items
    assert C.read_stopwords(paths["stopwords"]) == sc.stopwords


def test_corpus_file_errors(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("no tab here\n")
    with pytest.raises(C.CorpusFormatError):
        C.read_corpus(bad)
    bad.write_text("post\t   \n")
    with pytest.raises(C.CorpusFormatError):
        C.read_corpus(bad)


# synthetic corpus ------------------------------------------------------------

def test_synth_deterministic():
    assert C.synth_corpus(7, 50).pairs == C.synth_corpus(7, 50).pairs
    assert C.synth_corpus(7, 50).pairs != C.synth_corpus(8, 50).pairs


def test_synth_all_markable_and_balanced():
    sc = C.synth_corpus(0, 1000)
    ed, td = sc.dictionaries()
    split = C.filter_and_split(sc.pairs, ed, td, seed=0, val_size=0, test_size=0)
    assert split.stats["retention"] == 1.0
    assert 450 <= split.stats["forward"] <= 550
    assert 450 <= split.stats["backward"] <= 550


def test_synth_one_keyword_of_each_type():
    sc = C.synth_corpus(2, 200)
    ed, td = sc.dictionaries()
    for p in sc.pairs:
        assert sum(w in ed for w in p.reply) == 1
        assert sum(w in td for w in p.reply) == 1


def test_synth_labels_match_marking():
    sc = C.synth_corpus(4, 100)
    ed, td = sc.dictionaries()
    freq = C.reply_frequencies(sc.pairs)
    assert [C.mark_pair(p, ed, td, freq).direction for p in sc.pairs] == sc.directions


def test_synth_vocab_too_small():
    with pytest.raises(C.CorpusDataError):
        C.synth_corpus(0, 10, vocab_size=C.synth_min_vocab() - 1)
    C.synth_corpus(0, 10, vocab_size=C.synth_min_vocab())
