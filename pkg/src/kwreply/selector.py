"""Assemble the five reply segments and choose between forward and reversed order."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import BACKWARD, FORWARD
from .encoder import init_gru, run_gru
from .numcore import Graph, Node, NumcoreError, ParamStore

BRANCHES = {"forward": "dir.f.", "backward": "dir.b."}


def assemble(left: Sequence, w_tp, middle: Sequence, w_et, right: Sequence) -> tuple[list, list]:
    y_f = [*left, w_tp, *middle, w_et, *right]
    return y_f, y_f[::-1]


@dataclass
class AssembledReply:
    forward: list
    backward: list
    score: float   # probability that the forward arrangement is the right one
    chosen: str

    @property
    def tokens(self) -> list:
        return self.forward if self.chosen == FORWARD else self.backward


def init_selector(store: ParamStore, rng: np.random.Generator, vocab_size: int, emb_dim: int,
                  hidden_dim: int) -> None:
    store.init_uniform("dir.embedding", (vocab_size, emb_dim), rng)
    init_gru(store, rng, "dir.f.gru", emb_dim, hidden_dim)
    init_gru(store, rng, "dir.b.gru", emb_dim, hidden_dim)
    store.init_uniform("dir.W", (1, 2 * hidden_dim), rng)


def branch_summary(g: Graph, branch: str, ids: Sequence[int]) -> Node:
    """Sum of the branch GRU's states over the sequence, from a zero state."""
    if len(ids) == 0:
        raise NumcoreError("direction selector needs a non-empty sequence")
    states = run_gru(g, BRANCHES[branch] + "gru", "dir.embedding", ids)
    return states[0] if len(states) == 1 else g.add_n(states)


def selector_logit(g: Graph, y_f: Sequence[int], y_b: Sequence[int]) -> Node:
    pooled = g.concat([branch_summary(g, "forward", y_f), branch_summary(g, "backward", y_b)])
    return g.linear(g.p("dir.W"), pooled)


def select_direction(params: ParamStore, y_f: Sequence[int], y_b: Sequence[int]) -> AssembledReply:
    g = Graph(params)
    logit = float(selector_logit(g, y_f, y_b).value[0])
    score = 1.0 / (1.0 + np.exp(-logit)) if logit >= 0 else np.exp(logit) / (1.0 + np.exp(logit))
    # keep saturated logits strictly inside (0, 1)
    score = min(max(score, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))
    return AssembledReply(list(y_f), list(y_b), float(score), FORWARD if score >= 0.5 else BACKWARD)


def selector_loss(g: Graph, y_f: Sequence[int], y_b: Sequence[int], direction: str) -> Node:
    return g.sigmoid_bce(selector_logit(g, y_f, y_b), 1.0 if direction == FORWARD else 0.0)
