"""Embedding-based reply similarity and distinct-n diversity.

Embedding metrics return ``None`` when either sentence has no word in the
table; corpus scoring counts those pairs as skipped.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


class EmbeddingTable:
    def __init__(self, vectors: Mapping[str, Sequence[float]], source: str = "external file"):
        self.vectors = {w: np.asarray(v, dtype=np.float64) for w, v in vectors.items()}
        dims = {v.shape for v in self.vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"mixed embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop()[0] if dims else 0
        self.source = source

    def __contains__(self, word):
        return word in self.vectors

    def lookup(self, word: str) -> tuple[np.ndarray, bool]:
        """(vector, missing); unknown words give a zero vector with missing=True."""
        v = self.vectors.get(word)
        if v is None:
            return np.zeros(self.dim), True
        return v, False

    def matrix(self, tokens: Sequence[str]) -> np.ndarray:
        rows = [self.vectors[t] for t in tokens if t in self.vectors]
        return np.array(rows).reshape(len(rows), self.dim)

    @classmethod
    def from_file(cls, path) -> "EmbeddingTable":
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) < 2:
                    raise ValueError(f"{path}:{lineno}: expected 'word v1 ... vD'")
                vectors[parts[0]] = [float(x) for x in parts[1:]]
        return cls(vectors, source="external file")

    @classmethod
    def from_matrix(cls, words: Sequence[str], matrix: np.ndarray, skip: Iterable[str] = ()) -> "EmbeddingTable":
        skip = set(skip)
        return cls({w: matrix[i] for i, w in enumerate(words) if w not in skip}, source="model-embeddings")


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _pair(candidate, reference, table):
    c, r = table.matrix(candidate), table.matrix(reference)
    if len(c) == 0 or len(r) == 0:
        return None
    return c, r


def embedding_average(candidate: Sequence[str], reference: Sequence[str], table: EmbeddingTable) -> float | None:
    mats = _pair(candidate, reference, table)
    if mats is None:
        return None
    c, r = mats
    return _cosine(c.mean(axis=0), r.mean(axis=0))


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def greedy_matching(candidate: Sequence[str], reference: Sequence[str], table: EmbeddingTable) -> float | None:
    mats = _pair(candidate, reference, table)
    if mats is None:
        return None
    c, r = (_unit_rows(m) for m in mats)
    sims = c @ r.T
    return float((sims.max(axis=1).mean() + sims.max(axis=0).mean()) / 2.0)


def extrema(m: np.ndarray) -> np.ndarray:
    """Per dimension, the value of largest magnitude (ties go to the positive one)."""
    hi, lo = m.max(axis=0), m.min(axis=0)
    return np.where(hi >= -lo, hi, lo)


def vector_extrema(candidate: Sequence[str], reference: Sequence[str], table: EmbeddingTable) -> float | None:
    mats = _pair(candidate, reference, table)
    if mats is None:
        return None
    c, r = mats
    return _cosine(extrema(c), extrema(r))


def distinct_n(replies: Sequence[Sequence[str]], n: int) -> float | None:
    """Distinct n-grams over total n-grams, pooled across the whole corpus."""
    if not replies:
        raise ValueError("distinct_n needs at least one reply")
    seen = set()
    total = 0
    for rep in replies:
        for i in range(len(rep) - n + 1):
            seen.add(tuple(rep[i : i + n]))
            total += 1
    if total == 0:
        return None
    return len(seen) / total


@dataclass
class MetricReport:
    greedy_matching: float | None
    embedding_average: float | None
    vector_extrema: float | None
    distinct_1: float | None
    distinct_2: float | None
    evaluated_pairs: int
    skipped_pairs: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["greedy_matching", "embedding_average", "vector_extrema", "distinct_1", "distinct_2",
                 "evaluated_pairs", "skipped_pairs"],
    "properties": {
        "greedy_matching": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "embedding_average": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "vector_extrema": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "distinct_1": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "distinct_2": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "evaluated_pairs": {"type": "integer", "minimum": 0},
        "skipped_pairs": {"type": "integer", "minimum": 0},
    },
}


def score_corpus(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]],
                 table: EmbeddingTable) -> MetricReport:
    if len(candidates) != len(references):
        raise ValueError("candidate and reference counts differ")
    ga, ea, ve = [], [], []
    skipped = 0
    for cand, ref in zip(candidates, references):
        e = embedding_average(cand, ref, table)
        if e is None:
            skipped += 1
            continue
        ea.append(e)
        ga.append(greedy_matching(cand, ref, table))
        ve.append(vector_extrema(cand, ref, table))
    mean = lambda xs: float(np.mean(xs)) if xs else None
    return MetricReport(
        greedy_matching=mean(ga),
        embedding_average=mean(ea),
        vector_extrema=mean(ve),
        distinct_1=distinct_n(candidates, 1) if candidates else None,
        distinct_2=distinct_n(candidates, 2) if candidates else None,
        evaluated_pairs=len(ea),
        skipped_pairs=skipped,
    )
