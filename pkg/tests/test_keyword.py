import numpy as np
import pytest

from kwreply import numcore as nc
from kwreply.corpus import N_EMOTIONS, N_TOPICS
from kwreply.encoder import encode, init_encoder
from kwreply.keyword import (KeywordConfigError, classifier_logits, classifier_loss, classify_emotion, init_classifier,
                             init_keyword, keyword_logits, predict_emotion_keyword, predict_topic_keyword,
                             support_mask)
from kwreply.numcore import Graph, ParamStore

V, E, H, CAT = 20, 4, 4, 3
ET_WORDS = [4, 5, 6]
TP_WORDS = [10, 11, 12, 13]


@pytest.fixture
def store():
    s = ParamStore()
    rng = np.random.default_rng(0)
    init_encoder(s, rng, V, E, H)
    init_keyword(s, rng, V, H, CAT)
    init_classifier(s, rng, V, E, H)
    return s


def test_shapes(store):
    assert store["kw.cat_et"].shape == (N_EMOTIONS, CAT)
    assert store["kw.cat_tp"].shape == (N_TOPICS, CAT)
    assert store["kw.out_et.W"].shape == (V, H + CAT)
    assert "kw.out_et.b" not in store


def test_support_and_normalization(store):
    g = Graph(store)
    enc = encode(g, [1, 2, 3])
    et = predict_emotion_keyword(g, enc, 2, support_mask(V, ET_WORDS))
    tp = predict_topic_keyword(g, enc, 7, support_mask(V, TP_WORDS))
    for pred, words in ((et, ET_WORDS), (tp, TP_WORDS)):
        assert abs(pred.distribution.sum() - 1) < 1e-6
        off = np.delete(pred.distribution, words)
        assert not off.any()
        assert pred.token in words
    assert et.token != tp.token


def test_zero_projection_is_uniform(store):
    store["kw.out_et.W"][...] = 0
    store["kw.out_tp.W"][...] = 0
    g = Graph(store)
    enc = encode(g, [1, 2])
    et = predict_emotion_keyword(g, enc, 0, support_mask(V, ET_WORDS))
    tp = predict_topic_keyword(g, enc, 0, support_mask(V, TP_WORDS))
    np.testing.assert_allclose(et.distribution[ET_WORDS], 1 / 3, atol=1e-6)
    np.testing.assert_allclose(tp.distribution[TP_WORDS], 1 / 4, atol=1e-6)


def test_logits_are_linear_in_context_and_category_row(store):
    g = Graph(store)
    enc = encode(g, [7, 8])
    logits = keyword_logits(g, enc, "tp", 4).value
    x = np.concatenate([enc.context.value, store["kw.cat_tp"][4]])
    np.testing.assert_allclose(logits, store["kw.out_tp.W"] @ x, atol=1e-6)
    assert not np.allclose(logits, keyword_logits(g, enc, "tp", 5).value)


def test_empty_support_is_config_error(store):
    g = Graph(store)
    enc = encode(g, [1])
    with pytest.raises(KeywordConfigError):
        predict_emotion_keyword(g, enc, 0, support_mask(V, []))


def test_category_out_of_range(store):
    g = Graph(store)
    enc = encode(g, [1])
    with pytest.raises(nc.NumcoreError):
        keyword_logits(g, enc, "et", 7)


def test_classifier_distribution(store):
    cat, dist = classify_emotion(store, [3, 4, 5])
    assert dist.shape == (7,) and abs(dist.sum() - 1) < 1e-6 and (dist >= 0).all()
    assert cat == int(np.argmax(dist))


def test_classifier_uniform_ties_to_happy(store):
    store["emo.out.W"][...] = 0
    store["emo.out.b"][...] = 0
    cat, dist = classify_emotion(store, [1, 2])
    assert cat == 0
    np.testing.assert_allclose(dist, 1 / 7, atol=1e-7)


def test_classifier_empty_post(store):
    with pytest.raises(nc.NumcoreError):
        classifier_logits(Graph(store), [])


def test_classifier_overfits_cue_words():
    # 20 posts, the cue word decides the category
    rng = np.random.default_rng(0)
    s = ParamStore()
    init_classifier(s, rng, 30, 8, 8)
    data = [([int(rng.integers(10, 30)), 3 + c, int(rng.integers(10, 30))], c) for c in range(7) for _ in range(3)][:20]
    opt = nc.Adam(s.names(), lr=0.05)
    for _ in range(60):
        for ids, c in data:
            g = Graph(s)
            opt.step(s, g.backward(classifier_loss(g, ids, c)))
    assert all(classify_emotion(s, ids)[0] == c for ids, c in data)


def test_trained_predictors_are_confident(trained):
    model, marked, _ = trained
    for m in marked:
        _, _, _, _, et, tp = model.predict_keywords(list(m.pair.post))
        assert model.vocab.itos[et.token] == m.emotion_keyword
        assert model.vocab.itos[tp.token] == m.topic_keyword
        assert et.distribution[et.token] > 0.9 and tp.distribution[tp.token] > 0.9
