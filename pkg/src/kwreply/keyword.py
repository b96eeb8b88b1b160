"""Post emotion classifier and the two dictionary-restricted keyword predictors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import N_EMOTIONS, N_TOPICS
from .encoder import EncoderOutput, init_gru, init_linear, linear, run_gru
from .numcore import Graph, Node, NumcoreError, ParamStore, softmax


class KeywordConfigError(ValueError):
    pass


def init_keyword(store: ParamStore, rng: np.random.Generator, vocab_size: int, hidden_dim: int,
                 cat_dim: int) -> None:
    store.init_uniform("kw.cat_et", (N_EMOTIONS, cat_dim), rng)
    store.init_uniform("kw.cat_tp", (N_TOPICS, cat_dim), rng)
    init_linear(store, rng, "kw.out_et", hidden_dim + cat_dim, vocab_size, bias=False)
    init_linear(store, rng, "kw.out_tp", hidden_dim + cat_dim, vocab_size, bias=False)


def support_mask(vocab_size: int, ids: Sequence[int]) -> np.ndarray:
    mask = np.zeros(vocab_size, dtype=bool)
    mask[list(ids)] = True
    return mask


def keyword_logits(g: Graph, enc: EncoderOutput, kind: str, category: int) -> Node:
    """W [h~ ; k_category] for ``kind`` in {"et", "tp"}."""
    n_cat = N_EMOTIONS if kind == "et" else N_TOPICS
    if not 0 <= category < n_cat:
        raise NumcoreError(f"category {category} out of range for {kind}")
    row = g.embed(g.p(f"kw.cat_{kind}"), category)
    return linear(g, f"kw.out_{kind}", g.concat([enc.context, row]))


@dataclass
class KeywordPrediction:
    token: int
    distribution: np.ndarray  # over the full vocabulary, zero off the dictionary support


def _predict(g, enc, kind, category, mask) -> KeywordPrediction:
    if mask is None or not mask.any():
        raise KeywordConfigError(f"no {kind} dictionary words in the vocabulary")
    logits = keyword_logits(g, enc, kind, category)
    dist = softmax(logits.value, mask)
    return KeywordPrediction(int(np.argmax(dist)), dist)


def predict_emotion_keyword(g: Graph, enc: EncoderOutput, category: int, mask: np.ndarray) -> KeywordPrediction:
    return _predict(g, enc, "et", category, mask)


def predict_topic_keyword(g: Graph, enc: EncoderOutput, category: int, mask: np.ndarray) -> KeywordPrediction:
    return _predict(g, enc, "tp", category, mask)


def keyword_loss(g: Graph, enc: EncoderOutput, kind: str, category: int, target: int, mask: np.ndarray) -> Node:
    return g.softmax_xent(keyword_logits(g, enc, kind, category), target, mask)


# ---------------------------------------------------------------------------
# emotion category classifier (stand-alone GRU + softmax)


def init_classifier(store: ParamStore, rng: np.random.Generator, vocab_size: int, emb_dim: int,
                    hidden_dim: int) -> None:
    store.init_uniform("emo.embedding", (vocab_size, emb_dim), rng)
    init_gru(store, rng, "emo.gru", emb_dim, hidden_dim)
    init_linear(store, rng, "emo.out", hidden_dim, N_EMOTIONS)


def classifier_logits(g: Graph, post_ids: Sequence[int]) -> Node:
    if len(post_ids) == 0:
        raise NumcoreError("cannot classify an empty post")
    states = run_gru(g, "emo.gru", "emo.embedding", post_ids)
    pooled = states[0] if len(states) == 1 else g.add_n(states)
    return linear(g, "emo.out", pooled)


def classify_emotion(params: ParamStore, post_ids: Sequence[int]) -> tuple[int, np.ndarray]:
    g = Graph(params)
    dist = softmax(classifier_logits(g, post_ids).value)
    # np.argmax returns the first maximum, i.e. the lowest category id on ties
    return int(np.argmax(dist)), dist


def classifier_loss(g: Graph, post_ids: Sequence[int], category: int) -> Node:
    return g.softmax_xent(classifier_logits(g, post_ids), category)
