"""GRU post encoder and the small recurrent helpers the other networks share."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numcore import Graph, Node, NumcoreError, ParamStore

EMBEDDING = "embedding"


def init_gru(store: ParamStore, rng: np.random.Generator, prefix: str, in_dim: int, hidden: int) -> None:
    store.init_uniform(prefix + ".W", (3 * hidden, in_dim), rng)
    store.init_uniform(prefix + ".U", (3 * hidden, hidden), rng)
    store.init_zeros(prefix + ".b", (3 * hidden,))


def init_linear(store: ParamStore, rng: np.random.Generator, prefix: str, in_dim: int, out_dim: int,
                bias: bool = True) -> None:
    store.init_uniform(prefix + ".W", (out_dim, in_dim), rng)
    if bias:
        store.init_zeros(prefix + ".b", (out_dim,))


def gru_step(g: Graph, prefix: str, x: Node, h: Node) -> Node:
    return g.gru(x, h, g.p(prefix + ".W"), g.p(prefix + ".U"), g.p(prefix + ".b"))


def linear(g: Graph, prefix: str, x: Node) -> Node:
    b = prefix + ".b"
    return g.linear(g.p(prefix + ".W"), x, g.p(b) if b in g.params else None)


def run_gru(g: Graph, prefix: str, embedding: str, ids: Sequence[int], h0: Node | None = None) -> list[Node]:
    """Left-to-right GRU over embedded ids; returns every hidden state."""
    table = g.p(embedding)
    H = g.params[prefix + ".U"].shape[1]
    h = h0 if h0 is not None else g.const(np.zeros(H))
    states = []
    for t in ids:
        h = gru_step(g, prefix, g.embed(table, t), h)
        states.append(h)
    return states


@dataclass
class EncoderOutput:
    states: list[Node]
    context: Node  # elementwise sum of the states

    @property
    def length(self) -> int:
        return len(self.states)

    def state_values(self) -> np.ndarray:
        return np.stack([s.value for s in self.states])


def init_encoder(store: ParamStore, rng: np.random.Generator, vocab_size: int, emb_dim: int,
                 hidden_dim: int) -> None:
    """Shared word embedding plus the encoder GRU."""
    store.init_uniform(EMBEDDING, (vocab_size, emb_dim), rng)
    init_gru(store, rng, "enc.gru", emb_dim, hidden_dim)


def encode(g: Graph, post_ids: Sequence[int], prefix: str = "enc.gru", embedding: str = EMBEDDING) -> EncoderOutput:
    if len(post_ids) == 0:
        raise NumcoreError("cannot encode an empty post")
    V = g.params[embedding].shape[0]
    if any(not 0 <= t < V for t in post_ids):
        raise NumcoreError("post token id out of vocabulary range")
    states = run_gru(g, prefix, embedding, post_ids)
    context = states[0] if len(states) == 1 else g.add_n(states)
    return EncoderOutput(states, context)
