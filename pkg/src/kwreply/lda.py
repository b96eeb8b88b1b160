"""LDA topic model trained by collapsed Gibbs sampling."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from . import numcore
from .corpus import TopicDictionary

log = logging.getLogger(__name__)

INFER_SWEEPS = 20


class LdaError(ValueError):
    pass


@dataclass
class LdaModel:
    K: int
    alpha: float
    beta: float
    words: list[str]            # model vocabulary, index = word id
    n_dk: np.ndarray            # (D, K)
    n_kw: np.ndarray            # (K, V)
    n_k: np.ndarray             # (K,)
    docs: list[np.ndarray]      # word ids per document
    z: list[np.ndarray]         # topic per token
    seed: int = 0

    def __post_init__(self):
        self.word_id = {w: i for i, w in enumerate(self.words)}

    @property
    def V(self) -> int:
        return len(self.words)

    def conditional(self, d: int, i: int) -> np.ndarray:
        """Normalized sampling distribution for token i of doc d, that token excluded."""
        w = self.docs[d][i]
        k_old = self.z[d][i]
        ndk = self.n_dk[d].astype(np.float64)
        nkw = self.n_kw[:, w].astype(np.float64)
        nk = self.n_k.astype(np.float64)
        ndk[k_old] -= 1
        nkw[k_old] -= 1
        nk[k_old] -= 1
        p = (ndk + self.alpha) * (nkw + self.beta) / (nk + self.V * self.beta)
        return p / p.sum()

    def check_counts(self) -> None:
        if (self.n_dk < 0).any() or (self.n_kw < 0).any() or (self.n_k < 0).any():
            raise AssertionError("negative count")
        if not np.array_equal(self.n_kw.sum(axis=1), self.n_k):
            raise AssertionError("topic-word counts do not sum to topic totals")
        lengths = np.array([len(d) for d in self.docs])
        if not np.array_equal(self.n_dk.sum(axis=1), lengths):
            raise AssertionError("doc-topic counts do not sum to document lengths")
        n_kw = np.zeros_like(self.n_kw)
        n_dk = np.zeros_like(self.n_dk)
        for d, (ws, zs) in enumerate(zip(self.docs, self.z)):
            np.add.at(n_kw, (zs, ws), 1)
            np.add.at(n_dk, (d, zs), 1)
        if not (np.array_equal(n_kw, self.n_kw) and np.array_equal(n_dk, self.n_dk)):
            raise AssertionError("counts disagree with token assignments")

    # persistence -----------------------------------------------------------
    def to_tensors(self, prefix: str = "lda.") -> tuple[dict[str, np.ndarray], dict]:
        lengths = np.array([len(d) for d in self.docs], dtype=np.int32)
        flat_w = np.concatenate(self.docs) if self.docs else np.zeros(0, np.int32)
        flat_z = np.concatenate(self.z) if self.z else np.zeros(0, np.int32)
        tensors = {
            prefix + "n_kw": self.n_kw,
            prefix + "n_k": self.n_k,
            prefix + "n_dk": self.n_dk,
            prefix + "doc_lengths": lengths,
            prefix + "tokens": flat_w,
            prefix + "assignments": flat_z,
        }
        # the container cannot store zero-size arrays
        tensors = {k: v for k, v in tensors.items() if v.size}
        meta = {"K": self.K, "alpha": self.alpha, "beta": self.beta, "words": self.words, "seed": self.seed,
                "n_docs": len(self.docs)}
        return tensors, meta

    @classmethod
    def from_tensors(cls, tensors: dict, meta: dict, prefix: str = "lda.") -> "LdaModel":
        K, words = int(meta["K"]), list(meta["words"])
        n_docs = int(meta.get("n_docs", 0))
        lengths = tensors.get(prefix + "doc_lengths", np.zeros(0, np.int32))
        flat_w = tensors.get(prefix + "tokens", np.zeros(0, np.int32))
        flat_z = tensors.get(prefix + "assignments", np.zeros(0, np.int32))
        bounds = np.concatenate([[0], np.cumsum(lengths)]).astype(int)
        docs = [flat_w[bounds[i] : bounds[i + 1]].astype(np.int64) for i in range(len(lengths))]
        z = [flat_z[bounds[i] : bounds[i + 1]].astype(np.int64) for i in range(len(lengths))]
        n_dk = tensors.get(prefix + "n_dk", np.zeros((n_docs, K), np.int32))
        return cls(K, float(meta["alpha"]), float(meta["beta"]), words,
                   n_dk.astype(np.int64), tensors[prefix + "n_kw"].astype(np.int64),
                   tensors[prefix + "n_k"].astype(np.int64), docs, z, int(meta.get("seed", 0)))

    def save(self, path) -> None:
        tensors, meta = self.to_tensors()
        numcore.save_container(path, tensors, {"lda": meta})

    @classmethod
    def load(cls, path) -> "LdaModel":
        tensors, meta = numcore.load_container(path)
        return cls.from_tensors(tensors, meta["lda"])


def high_frequency_words(docs: Iterable[Sequence[str]], fraction: float = 0.01) -> set[str]:
    """The top ``fraction`` of word types by corpus frequency (at least one type)."""
    counts = Counter(w for d in docs for w in d)
    if not counts:
        return set()
    n = max(1, int(round(len(counts) * fraction)))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {w for w, _ in ranked[:n]}


def filter_docs(docs: Sequence[Sequence[str]], stopwords: Iterable[str] = (),
                high_freq_fraction: float = 0.01) -> list[list[str]]:
    stop = set(stopwords)
    docs = [[w for w in d if w not in stop] for d in docs]
    if high_freq_fraction > 0:
        drop = high_frequency_words(docs, high_freq_fraction)
        docs = [[w for w in d if w not in drop] for d in docs]
    return docs


def _sweep(model: LdaModel, rng: np.random.Generator) -> None:
    alpha, beta = model.alpha, model.beta
    vbeta = model.V * beta
    n_dk, n_kw, n_k = model.n_dk, model.n_kw, model.n_k
    for d, (ws, zs) in enumerate(zip(model.docs, model.z)):
        if len(ws) == 0:
            continue
        us = rng.random(len(ws))
        ndk = n_dk[d]
        for i in range(len(ws)):
            w, k = ws[i], zs[i]
            ndk[k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            p = (ndk + alpha) * (n_kw[:, w] + beta) / (n_k + vbeta)
            cum = np.cumsum(p)
            k = int(np.searchsorted(cum, us[i] * cum[-1], side="right"))
            if k >= model.K:
                k = model.K - 1
            zs[i] = k
            ndk[k] += 1
            n_kw[k, w] += 1
            n_k[k] += 1


def gibbs_train(docs: Sequence[Sequence[str]], K: int = 10, alpha: float | None = None, beta: float = 0.01,
                iterations: int = 200, seed: int = 0, callback=None) -> LdaModel:
    """Fit LDA on already-filtered token lists.

    ``callback(model, sweep)`` runs after every sweep (and once with sweep 0
    after the random initialization).
    """
    if K < 2:
        raise LdaError("K must be >= 2")
    if alpha is None:
        alpha = 50.0 / K
    words = sorted({w for d in docs for w in d})
    if not words:
        raise LdaError("empty vocabulary after filtering")
    word_id = {w: i for i, w in enumerate(words)}
    rng = np.random.default_rng(seed)
    id_docs = [np.array([word_id[w] for w in d], dtype=np.int64) for d in docs]
    z = [rng.integers(K, size=len(d)).astype(np.int64) for d in id_docs]
    n_dk = np.zeros((len(id_docs), K), dtype=np.int64)
    n_kw = np.zeros((K, len(words)), dtype=np.int64)
    for d, (ws, zs) in enumerate(zip(id_docs, z)):
        np.add.at(n_kw, (zs, ws), 1)
        np.add.at(n_dk, (d, zs), 1)
    model = LdaModel(K, float(alpha), float(beta), words, n_dk, n_kw, n_kw.sum(axis=1), id_docs, z, seed)
    if callback:
        callback(model, 0)
    for it in range(1, iterations + 1):
        _sweep(model, rng)
        if callback:
            callback(model, it)
    return model


def log_likelihood(model: LdaModel) -> float:
    """Collapsed joint log p(w, z) up to constants that do not depend on z."""
    a, b = model.alpha, model.beta
    word_part = gammaln(model.n_kw + b).sum() - gammaln(model.n_k + model.V * b).sum()
    doc_part = gammaln(model.n_dk + a).sum() - gammaln(model.n_dk.sum(axis=1) + model.K * a).sum()
    return float(word_part + doc_part)


def gibbs_train_restarts(docs: Sequence[Sequence[str]], restarts: int = 1, seed: int = 0, **kwargs) -> LdaModel:
    """Run ``restarts`` independent chains and keep the most likely one."""
    best, best_ll = None, -np.inf
    for r in range(max(1, restarts)):
        model = gibbs_train(docs, seed=seed + r, **kwargs)
        ll = log_likelihood(model)
        log.debug("lda restart %d log-likelihood %.2f", r, ll)
        if ll > best_ll:
            best, best_ll = model, ll
    return best


def infer_topic(model: LdaModel, post: Sequence[str], sweeps: int = INFER_SWEEPS,
                seed: int | None = None) -> tuple[int, np.ndarray]:
    """Fold-in Gibbs sampling for a new document against frozen topic-word counts."""
    ids = [model.word_id[w] for w in post if w in model.word_id]
    if not ids:
        dist = np.full(model.K, 1.0 / model.K)
        return 0, dist
    rng = np.random.default_rng(model.seed if seed is None else seed)
    ws = np.array(ids)
    phi = (model.n_kw[:, ws] + model.beta) / (model.n_k[:, None] + model.V * model.beta)  # (K, n)
    zs = rng.integers(model.K, size=len(ws))
    ndk = np.bincount(zs, minlength=model.K).astype(np.float64)
    for _ in range(sweeps):
        us = rng.random(len(ws))
        for i in range(len(ws)):
            ndk[zs[i]] -= 1
            p = (ndk + model.alpha) * phi[:, i]
            cum = np.cumsum(p)
            k = min(int(np.searchsorted(cum, us[i] * cum[-1], side="right")), model.K - 1)
            zs[i] = k
            ndk[k] += 1
    dist = (ndk + model.alpha) / (len(ws) + model.K * model.alpha)
    return int(np.argmax(dist)), dist


def extract_topic_dictionary(model: LdaModel, stopwords: Iterable[str] = (), per_topic: int = 100,
                             high_freq_fraction: float = 0.01) -> TopicDictionary:
    """Top ``per_topic`` words per topic by count (ties broken by word id)."""
    stop = set(stopwords)
    totals = model.n_kw.sum(axis=0)
    n_high = max(1, int(round(model.V * high_freq_fraction))) if high_freq_fraction > 0 else 0
    order = sorted(range(model.V), key=lambda w: (-totals[w], w))
    drop = {model.words[w] for w in order[:n_high]} | stop
    eligible = [w for w in range(model.V) if model.words[w] not in drop]
    lists: dict[int, list[str]] = {}
    truncated = False
    taken: set[int] = set()
    for k in range(model.K):
        cand = sorted((w for w in eligible if model.n_kw[k, w] > 0 and w not in taken),
                      key=lambda w: (-model.n_kw[k, w], w))
        chosen = cand[:per_topic]
        if len(chosen) < per_topic:
            truncated = True
        taken.update(chosen)
        lists[k] = [model.words[w] for w in chosen]
    if truncated:
        log.warning("fewer than %d eligible words for at least one topic", per_topic)
    return TopicDictionary(lists, truncated=truncated)


def align_topics(model: LdaModel, td: TopicDictionary) -> list[int]:
    """Map each LDA topic to the dictionary category whose words it holds most of."""
    mapping = []
    for k in range(model.K):
        best, best_mass = 0, -1
        for cat in sorted(td.lists):
            mass = sum(int(model.n_kw[k, model.word_id[w]]) for w in td.lists[cat] if w in model.word_id)
            if mass > best_mass:
                best, best_mass = cat, mass
        mapping.append(best)
    return mapping


def topic_purity(model: LdaModel, groups: Sequence[set[str]]) -> list[float]:
    """For each word group, the share of its tokens held by its majority topic."""
    out = []
    for g in groups:
        ids = [model.word_id[w] for w in g if w in model.word_id]
        counts = model.n_kw[:, ids].sum(axis=1)
        out.append(float(counts.max() / counts.sum()) if counts.sum() else 0.0)
    return out
