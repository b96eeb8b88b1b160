"""Three-stage decoder that grows a reply outward from two keywords.

Stage 1 runs a GRU from the emotion keyword over the reversed middle span and
keeps its states.  Stage 2 generates the middle span left-to-right from the
topic keyword, attending over the stage-1 states at every step.  Stage 3 runs
two independent encoder-decoder pairs over ``[topic, middle, emotion]`` and
its reversal to produce the right and left sides.

Every stage works in two modes: teacher-forced (``targets`` given, one
cross-entropy node per predicted token is collected in ``losses``) or greedy
free-run (``targets`` is None).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import EOM, EOS, PAD, UNK
from .encoder import EMBEDDING, EncoderOutput, gru_step, init_gru, init_linear, linear, run_gru
from .numcore import Graph, Node, NumcoreError, ParamStore

MAX_MIDDLE_LEN = 10
MAX_SIDE_LEN = 10

STAGE_PREFIXES = {
    "step1": "s1.",
    "step2": "s2.",
    "seq2seq_a": "s3a.",
    "seq2seq_b": "s3b.",
}


def init_decoder(store: ParamStore, rng: np.random.Generator, vocab_size: int, emb_dim: int,
                 hidden_dim: int, att_dim: int) -> None:
    init_linear(store, rng, "s1.init", hidden_dim, hidden_dim)
    init_gru(store, rng, "s1.gru", emb_dim, hidden_dim)
    init_linear(store, rng, "s1.out", hidden_dim, vocab_size)

    init_linear(store, rng, "s2.init", hidden_dim, hidden_dim)
    init_gru(store, rng, "s2.gru", emb_dim, hidden_dim)
    store.init_uniform("s2.att.v", (att_dim,), rng)
    store.init_uniform("s2.att.W", (att_dim, hidden_dim), rng)
    store.init_uniform("s2.att.U", (att_dim, hidden_dim), rng)
    init_linear(store, rng, "s2.out", 2 * hidden_dim, vocab_size)

    for side in ("s3a", "s3b"):
        init_gru(store, rng, side + ".enc", emb_dim, hidden_dim)
        init_gru(store, rng, side + ".dec", emb_dim, hidden_dim)
        init_linear(store, rng, side + ".out", hidden_dim, vocab_size)


def _greedy(logits: np.ndarray, banned: Iterable[int]) -> int:
    scores = np.array(logits, dtype=np.float64)
    scores[list(banned)] = -np.inf
    return int(np.argmax(scores))


def _no_middle_end(keywords: Sequence[int]) -> tuple[int, ...]:
    return (PAD, UNK, EOS, *keywords)


def _no_side_end(keywords: Sequence[int]) -> tuple[int, ...]:
    return (PAD, UNK, EOM, *keywords)


@dataclass
class MiddleDraft:
    states: list[Node]
    tokens: list[int]  # right-to-left draft, discarded after decoding
    losses: list[Node] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.states)

    def state_values(self) -> np.ndarray:
        return np.stack([s.value for s in self.states])


@dataclass
class AttentionRow:
    weights: np.ndarray
    energies: np.ndarray
    context: np.ndarray


@dataclass
class MiddleResult:
    tokens: list[int]
    states: list[Node]
    attention: list[AttentionRow]
    keys: np.ndarray  # the stage-1 states attended over
    losses: list[Node] = field(default_factory=list)


@dataclass
class SidesResult:
    right: list[int]  # after the emotion keyword
    left: list[int]   # before the topic keyword, natural reading order
    encoder_lengths: tuple[int, int]
    losses: list[Node] = field(default_factory=list)


def step1_emotion_states(g: Graph, w_et: int, enc: EncoderOutput, targets: Sequence[int] | None = None,
                         max_len: int = MAX_MIDDLE_LEN, keywords: Sequence[int] = ()) -> MiddleDraft:
    """Emotion-side states.  ``targets`` is the middle span reversed."""
    table = g.p(EMBEDDING)
    h = g.tanh(linear(g, "s1.init", enc.context))
    h = gru_step(g, "s1.gru", g.embed(table, w_et), h)
    states, tokens, losses = [h], [], []
    if targets is not None:
        for tgt in (*targets, EOM):
            losses.append(g.softmax_xent(linear(g, "s1.out", h), tgt))
            if tgt == EOM:
                break
            h = gru_step(g, "s1.gru", g.embed(table, tgt), h)
            states.append(h)
            tokens.append(tgt)
    else:
        banned = _no_middle_end(keywords)
        while len(tokens) < max_len:
            tok = _greedy(linear(g, "s1.out", h).value, banned)
            if tok == EOM:
                break
            tokens.append(tok)
            h = gru_step(g, "s1.gru", g.embed(table, tok), h)
            states.append(h)
    return MiddleDraft(states, tokens, losses)


def emotion_attention(g: Graph, s_prev: Node, keys: Node) -> Node:
    """Context over the stage-1 states; weights and energies ride in ``node.aux``."""
    if keys.value.shape[0] == 0:
        raise NumcoreError("attention needs at least one emotion-side state")
    return g.attention(s_prev, keys, g.p("s2.att.v"), g.p("s2.att.W"), g.p("s2.att.U"))


def step2_middle(g: Graph, w_tp: int, enc: EncoderOutput, draft: MiddleDraft,
                 targets: Sequence[int] | None = None, max_len: int = MAX_MIDDLE_LEN,
                 keywords: Sequence[int] = ()) -> MiddleResult:
    table = g.p(EMBEDDING)
    keys = g.stack(draft.states)
    s = g.tanh(linear(g, "s2.init", enc.context))
    prev = w_tp
    tokens, states, rows, losses = [], [], [], []
    banned = _no_middle_end(keywords)
    teacher = None if targets is None else [*targets, EOM]
    for j in range(len(teacher) if teacher is not None else max_len):
        c = emotion_attention(g, s, keys)
        s = gru_step(g, "s2.gru", g.embed(table, prev), s)
        states.append(s)
        rows.append(AttentionRow(c.aux["weights"], c.aux["energies"], c.value))
        logits = linear(g, "s2.out", g.concat([s, c]))
        if teacher is not None:
            tok = teacher[j]
            losses.append(g.softmax_xent(logits, tok))
        else:
            tok = _greedy(logits.value, banned)
        if tok == EOM:
            break
        tokens.append(tok)
        prev = tok
    return MiddleResult(tokens, states, rows, keys.value, losses)


def _seq2seq(g: Graph, prefix: str, source: Sequence[int], targets: Sequence[int] | None,
             max_len: int, banned: Sequence[int]) -> tuple[list[int], list[Node]]:
    table = g.p(EMBEDDING)
    h = run_gru(g, prefix + ".enc", EMBEDDING, source)[-1]
    prev = source[-1]
    out, losses = [], []
    teacher = None if targets is None else [*targets, EOS]
    for j in range(len(teacher) if teacher is not None else max_len):
        h = gru_step(g, prefix + ".dec", g.embed(table, prev), h)
        logits = linear(g, prefix + ".out", h)
        if teacher is not None:
            tok = teacher[j]
            losses.append(g.softmax_xent(logits, tok))
        else:
            tok = _greedy(logits.value, banned)
        if tok == EOS:
            break
        out.append(tok)
        prev = tok
    return out, losses


def step3_sides(g: Graph, w_tp: int, middle: Sequence[int], w_et: int,
                right_targets: Sequence[int] | None = None, left_targets: Sequence[int] | None = None,
                max_len: int = MAX_SIDE_LEN) -> SidesResult:
    """Right side from ``[w_tp, middle, w_et]``; left side grown outward from ``[w_et, middle reversed, w_tp]``.

    ``left_targets`` are in natural reading order.
    """
    banned = _no_side_end((w_tp, w_et))
    src_a = [w_tp, *middle, w_et]
    src_b = [w_et, *reversed(middle), w_tp]
    right, loss_a = _seq2seq(g, "s3a", src_a, right_targets, max_len, banned)
    rev_targets = None if left_targets is None else list(reversed(left_targets))
    left_rev, loss_b = _seq2seq(g, "s3b", src_b, rev_targets, max_len, banned)
    return SidesResult(right, left_rev[::-1], (len(src_a), len(src_b)), loss_a + loss_b)


@dataclass
class Decoded:
    draft: MiddleDraft
    middle: MiddleResult
    sides: SidesResult

    @property
    def losses(self) -> list[Node]:
        return self.draft.losses + self.middle.losses + self.sides.losses


def decode(g: Graph, enc: EncoderOutput, w_tp: int, w_et: int, max_middle_len: int = MAX_MIDDLE_LEN,
           max_side_len: int = MAX_SIDE_LEN) -> Decoded:
    """Free-run all three stages."""
    kws = (w_tp, w_et)
    draft = step1_emotion_states(g, w_et, enc, max_len=max_middle_len, keywords=kws)
    middle = step2_middle(g, w_tp, enc, draft, max_len=max_middle_len, keywords=kws)
    sides = step3_sides(g, w_tp, middle.tokens, w_et, max_len=max_side_len)
    return Decoded(draft, middle, sides)


def teacher_forced(g: Graph, enc: EncoderOutput, w_tp: int, w_et: int, left: Sequence[int],
                   middle: Sequence[int], right: Sequence[int]) -> Decoded:
    draft = step1_emotion_states(g, w_et, enc, targets=list(reversed(middle)))
    mid = step2_middle(g, w_tp, enc, draft, targets=list(middle))
    sides = step3_sides(g, w_tp, list(middle), w_et, right_targets=list(right), left_targets=list(left))
    return Decoded(draft, mid, sides)
