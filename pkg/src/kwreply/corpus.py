"""Corpus handling: vocabulary, keyword dictionaries, pair marking and splits.

Text is expected pre-segmented; tokens are whitespace separated.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

PAD, UNK, EOS, EOM = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<eos>", "<eom>")

EMOTIONS = ("Happy", "Like", "Surprise", "Sad", "Fear", "Angry", "Disgust")
N_EMOTIONS = len(EMOTIONS)
N_TOPICS = 10
TOPIC_WORDS_PER_CATEGORY = 100

FORWARD, BACKWARD = "forward", "backward"


class CorpusFormatError(ValueError):
    pass


class CorpusDataError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return text.split()


class Vocab:
    def __init__(self, words: Iterable[str] = ()):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {w: i for i, w in enumerate(self.itos)}
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        idx = self.stoi.get(word)
        if idx is None:
            idx = len(self.itos)
            self.itos.append(word)
            self.stoi[word] = idx
        return idx

    def __len__(self):
        return len(self.itos)

    def __contains__(self, word):
        return word in self.stoi

    def id(self, word: str) -> int:
        return self.stoi.get(word, UNK)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, UNK) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]], extra: Iterable[str] = ()) -> "Vocab":
        # sorted insertion keeps ids independent of corpus order
        words = set(extra)
        for toks in token_lists:
            words.update(toks)
        words.difference_update(RESERVED)
        return cls(sorted(words))

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, items: Sequence[str]) -> "Vocab":
        if tuple(items[:4]) != RESERVED:
            raise CorpusFormatError("vocabulary does not start with the reserved tokens")
        return cls(items[4:])


@dataclass
class EmotionDictionary:
    category: dict[str, int] = field(default_factory=dict)

    def __contains__(self, word):
        return word in self.category

    def __len__(self):
        return len(self.category)

    def words(self, cat: int | None = None) -> list[str]:
        if cat is None:
            return sorted(self.category)
        return sorted(w for w, c in self.category.items() if c == cat)


@dataclass
class TopicDictionary:
    lists: dict[int, list[str]] = field(default_factory=dict)
    truncated: bool = False

    @property
    def category(self) -> dict[str, int]:
        key = tuple((k, tuple(ws)) for k, ws in sorted(self.lists.items()))
        cached = self.__dict__.get("_cat")
        if cached is None or cached[0] != key:
            cached = (key, {w: k for k, ws in self.lists.items() for w in ws})
            self.__dict__["_cat"] = cached
        return cached[1]

    def __contains__(self, word):
        return word in self.category

    def __len__(self):
        return sum(len(ws) for ws in self.lists.values())

    def words(self, cat: int | None = None) -> list[str]:
        if cat is None:
            return sorted(self.category)
        return list(self.lists.get(cat, []))


def _emotion_id(label) -> int:
    if isinstance(label, int) or (isinstance(label, str) and label.isdigit()):
        idx = int(label)
        if 0 <= idx < N_EMOTIONS:
            return idx
    elif isinstance(label, str):
        for i, name in enumerate(EMOTIONS):
            if name.lower() == label.lower():
                return i
    raise CorpusFormatError(f"unknown emotion category {label!r}")


def _topic_id(label) -> int:
    if isinstance(label, str):
        text = label[1:] if label[:1] in ("t", "T") else label
        if text.isdigit():
            label = int(text)
    if isinstance(label, int) and 0 <= label < N_TOPICS:
        return label
    raise CorpusFormatError(f"unknown topic category {label!r}")


def load_dictionaries(emotion_source: Mapping[str, object] | Iterable[tuple[str, object]],
                      topic_source: Mapping[str, object] | Iterable[tuple[str, object]],
                      per_topic: int = TOPIC_WORDS_PER_CATEGORY):
    """Build both dictionaries; words listed in both stay emotion words only."""
    e_items = list(emotion_source.items() if isinstance(emotion_source, Mapping) else emotion_source)
    t_items = list(topic_source.items() if isinstance(topic_source, Mapping) else topic_source)
    if not e_items or not t_items:
        raise CorpusFormatError("dictionary sources must be non-empty")
    ed = EmotionDictionary({w: _emotion_id(c) for w, c in e_items})
    lists: dict[int, list[str]] = {}
    seen = set()
    for w, c in t_items:
        k = _topic_id(c)
        if w in ed.category or w in seen:
            continue
        seen.add(w)
        bucket = lists.setdefault(k, [])
        if len(bucket) < per_topic:
            bucket.append(w)
    return ed, TopicDictionary(lists)


def read_dictionary_file(path) -> list[tuple[str, str]]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusFormatError(f"{path}:{lineno}: expected 'word<TAB>category'")
            items.append((parts[0], parts[1]))
    return items


def write_dictionary_file(path, items: Iterable[tuple[str, object]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w, c in items:
            fh.write(f"{w}\t{c}\n")


@dataclass(frozen=True)
class ConversationPair:
    post: tuple[str, ...]
    reply: tuple[str, ...]

    def __post_init__(self):
        if not self.post or not self.reply:
            raise CorpusDataError("post and reply must both be non-empty")


@dataclass(frozen=True)
class MarkedPair:
    pair: ConversationPair
    emotion_keyword: str
    emotion_index: int
    topic_keyword: str
    topic_index: int
    left: tuple[str, ...]  # side before the topic keyword, canonical orientation
    middle: tuple[str, ...]
    right: tuple[str, ...]  # side after the emotion keyword, canonical orientation
    direction: str
    emotion_category: int
    topic_category: int

    def canonical(self) -> list[str]:
        return [*self.left, self.topic_keyword, *self.middle, self.emotion_keyword, *self.right]

    def reassemble(self) -> list[str]:
        seq = self.canonical()
        return seq if self.direction == FORWARD else seq[::-1]


def _pick(reply: Sequence[str], candidates: Iterable[int], freq: Mapping[str, int]) -> int | None:
    best = None
    for i in candidates:
        if best is None or freq.get(reply[i], 0) < freq.get(reply[best], 0):
            best = i
    return best


def mark_pair(pair: ConversationPair, ed: EmotionDictionary, td: TopicDictionary,
              corpus_freq: Mapping[str, int]) -> MarkedPair | None:
    """Choose the rarest emotion and topic keyword in the reply and segment it.

    Returns None when the reply lacks either keyword type.
    """
    reply = pair.reply
    tcat = td.category
    e_idx = _pick(reply, (i for i, w in enumerate(reply) if w in ed.category), corpus_freq)
    t_idx = _pick(reply, (i for i, w in enumerate(reply) if w in tcat), corpus_freq)
    if e_idx is None or t_idx is None:
        return None
    if t_idx < e_idx:
        direction = FORWARD
        seq, ti, ei = list(reply), t_idx, e_idx
    else:
        direction = BACKWARD
        n = len(reply)
        seq, ti, ei = list(reply[::-1]), n - 1 - t_idx, n - 1 - e_idx
    return MarkedPair(
        pair=pair,
        emotion_keyword=reply[e_idx],
        emotion_index=e_idx,
        topic_keyword=reply[t_idx],
        topic_index=t_idx,
        left=tuple(seq[:ti]),
        middle=tuple(seq[ti + 1 : ei]),
        right=tuple(seq[ei + 1 :]),
        direction=direction,
        emotion_category=ed.category[reply[e_idx]],
        topic_category=tcat[reply[t_idx]],
    )


def reply_frequencies(pairs: Iterable[ConversationPair]) -> Counter:
    freq: Counter = Counter()
    for p in pairs:
        freq.update(p.reply)
    return freq


@dataclass
class CorpusSplit:
    train: list[MarkedPair]
    val: list[MarkedPair]
    test: list[MarkedPair]
    indices: dict[str, list[int]]
    stats: dict


def filter_and_split(pairs: Sequence[ConversationPair], ed: EmotionDictionary, td: TopicDictionary,
                     seed: int, val_size: int, test_size: int) -> CorpusSplit:
    freq = reply_frequencies(pairs)
    kept: list[tuple[int, MarkedPair]] = []
    for i, p in enumerate(pairs):
        m = mark_pair(p, ed, td, freq)
        if m is not None:
            kept.append((i, m))
    n_total, n_kept = len(pairs), len(kept)
    stats = {
        "total": n_total,
        "retained": n_kept,
        "retention": (n_kept / n_total) if n_total else 0.0,
        "forward": sum(m.direction == FORWARD for _, m in kept),
        "backward": sum(m.direction == BACKWARD for _, m in kept),
    }
    if val_size < 0 or test_size < 0 or val_size + test_size >= n_kept:
        raise CorpusDataError(
            f"only {n_kept} of {n_total} pairs are markable; cannot hold out "
            f"{val_size} validation + {test_size} test pairs"
        )
    order = np.random.default_rng(seed).permutation(n_kept)
    val_pos = sorted(order[:val_size].tolist())
    test_pos = sorted(order[val_size : val_size + test_size].tolist())
    train_pos = sorted(order[val_size + test_size :].tolist())
    pick = lambda pos: [kept[j] for j in pos]
    parts = {"train": pick(train_pos), "val": pick(val_pos), "test": pick(test_pos)}
    stats.update({k: len(v) for k, v in parts.items()})
    return CorpusSplit(
        train=[m for _, m in parts["train"]],
        val=[m for _, m in parts["val"]],
        test=[m for _, m in parts["test"]],
        indices={k: [i for i, _ in v] for k, v in parts.items()},
        stats=stats,
    )


# ---------------------------------------------------------------------------
# files


def read_corpus(path) -> list[ConversationPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusFormatError(f"{path}:{lineno}: expected 'post<TAB>reply'")
            post, reply = tokenize(parts[0]), tokenize(parts[1])
            if not post or not reply:
                raise CorpusFormatError(f"{path}:{lineno}: empty post or reply")
            pairs.append(ConversationPair(tuple(post), tuple(reply)))
    return pairs


def write_corpus(path, pairs: Iterable[ConversationPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(" ".join(p.post) + "\t" + " ".join(p.reply) + "\n")


def read_stopwords(path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def write_manifest(path, split: CorpusSplit) -> None:
    Path(path).write_text(json.dumps({"splits": split.indices, "stats": split.stats},
                                     indent=2, sort_keys=True), encoding="utf-8")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# synthetic corpus

_FWD_MIDDLES = (("makes", "me"), ("is", "so"), ("feels",))
_BWD_MIDDLES = (("about", "the"), ("with", "my"), ("over",))
_FWD_LEFT = ((), ("the",), ("my",))          # by topic category
_FWD_RIGHT = ((), ("today",), ("now", "!"))  # by emotion category
_BWD_LEAD = ((), ("so",), ("i", "am"))       # natural-order lead before the emotion word, by emotion category
_BWD_TAIL = ((), ("again",), ("lately",))    # natural-order tail after the topic word, by topic category
_POST_QUESTION = {FORWARD: "did", BACKWARD: "why"}
_FUNCTION_WORDS = sorted({w for group in (_FWD_MIDDLES, _BWD_MIDDLES, _FWD_LEFT, _FWD_RIGHT,
                                          _BWD_LEAD, _BWD_TAIL) for t in group for w in t}
                         | set(_POST_QUESTION.values()))
_PER_CATEGORY_COST = 2 * (N_TOPICS + N_EMOTIONS)
_BASE_COST = len(_FUNCTION_WORDS) + 2 * N_TOPICS


@dataclass
class SynthCorpus:
    pairs: list[ConversationPair]
    emotion_items: list[tuple[str, str]]
    topic_items: list[tuple[str, str]]
    stopwords: set[str]
    directions: list[str]

    def dictionaries(self):
        return load_dictionaries(self.emotion_items, self.topic_items)


def synth_min_vocab() -> int:
    return _BASE_COST + _PER_CATEGORY_COST


def synth_corpus(seed: int, n_pairs: int, vocab_size: int = 120) -> SynthCorpus:
    """Deterministic template corpus with one planted keyword of each type per reply.

    Every keyword has a dedicated cue word in the post, the post's opening
    word tells the reply direction, and side/middle fillers are functions of
    the keyword categories, so the whole reply is recoverable from the post.
    """
    if n_pairs < 1:
        raise CorpusDataError("n_pairs must be >= 1")
    per_cat = (vocab_size - _BASE_COST) // _PER_CATEGORY_COST
    if per_cat < 1:
        raise CorpusDataError(f"vocab_size must be at least {synth_min_vocab()} to host both dictionaries")
    rng = np.random.default_rng(seed)
    topic_kw = [[f"t{k}w{j}" for j in range(per_cat)] for k in range(N_TOPICS)]
    topic_cue = [[f"t{k}c{j}" for j in range(per_cat)] for k in range(N_TOPICS)]
    topic_ctx = [(f"t{k}x0", f"t{k}x1") for k in range(N_TOPICS)]
    emo_kw = [[f"e{c}w{j}" for j in range(per_cat)] for c in range(N_EMOTIONS)]
    emo_cue = [[f"e{c}c{j}" for j in range(per_cat)] for c in range(N_EMOTIONS)]

    # exact balance of directions, then shuffled
    directions = [FORWARD] * (n_pairs // 2) + [BACKWARD] * (n_pairs - n_pairs // 2)
    rng.shuffle(directions)
    pairs = []
    for d in directions:
        t = int(rng.integers(N_TOPICS))
        e = int(rng.integers(N_EMOTIONS))
        a = int(rng.integers(per_cat))
        b = int(rng.integers(per_cat))
        tw, ew = topic_kw[t][a], emo_kw[e][b]
        post = (_POST_QUESTION[d], topic_ctx[t][0], topic_cue[t][a], topic_ctx[t][1], emo_cue[e][b])
        if d == FORWARD:
            reply = (*_FWD_LEFT[t % 3], tw, *_FWD_MIDDLES[e % 3], ew, *_FWD_RIGHT[e % 3])
        else:
            reply = (*_BWD_LEAD[e % 3], ew, *_BWD_MIDDLES[e % 3], tw, *_BWD_TAIL[t % 3])
        pairs.append(ConversationPair(post, reply))
    emotion_items = [(w, EMOTIONS[c]) for c in range(N_EMOTIONS) for w in emo_kw[c]]
    topic_items = [(w, str(k)) for k in range(N_TOPICS) for w in topic_kw[k]]
    return SynthCorpus(pairs, emotion_items, topic_items, set(_FUNCTION_WORDS), list(directions))


def write_synth_files(directory, corpus: SynthCorpus) -> dict[str, str]:
    """Write a synthetic corpus as the on-disk formats the CLI reads."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": directory / "corpus.tsv",
        "emotion_dict": directory / "emotion.dict",
        "topic_dict": directory / "topic.dict",
        "stopwords": directory / "stopwords.txt",
    }
    write_corpus(paths["corpus"], corpus.pairs)
    write_dictionary_file(paths["emotion_dict"], corpus.emotion_items)
    write_dictionary_file(paths["topic_dict"], corpus.topic_items)
    paths["stopwords"].write_text("".join(f"{w}\n" for w in sorted(corpus.stopwords)), encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
