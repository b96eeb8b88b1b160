import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from kwreply import metrics as M


def table_of(d):
    return M.EmbeddingTable(d)


def random_case(rng):
    words = [f"w{i}" for i in range(8)]
    dim = int(rng.integers(1, 5))
    vecs = {w: rng.normal(size=dim).round(3).tolist() for w in words}
    pool = words + ["oov"]
    sent = lambda: [pool[i] for i in rng.integers(len(pool), size=int(rng.integers(1, 6)))]
    return vecs, sent(), sent()


def test_worked_distinct_example():
    reps = [["a", "b", "a"], ["b", "c"]]
    assert M.distinct_n(reps, 1) == 0.6
    assert M.distinct_n(reps, 2) == 1.0


def test_distinct_degenerate():
    assert M.distinct_n([["x"]] * 4, 1) == 0.25
    assert M.distinct_n([["x"], ["y"]], 2) is None
    with pytest.raises(ValueError):
        M.distinct_n([], 1)


def test_distinct_permutation_invariant():
    reps = [["a", "b"], ["c", "a", "a"], ["b"]]
    assert M.distinct_n(reps, 1) == M.distinct_n(reps[::-1], 1)
    assert M.distinct_n(reps, 2) == M.distinct_n(reps[::-1], 2)


def test_embedding_average_examples():
    t = table_of({"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [1.0, 1.0], "d": [2.0, -1.0]})
    assert abs(M.embedding_average(["a", "b"], ["a", "b"], t) - 1) < 1e-6
    assert abs(M.embedding_average(["a"], ["b"], t)) < 1e-6
    # means (0.5, 0.5) and (0.5, 1): cosine = 0.75 / (sqrt(0.5) * sqrt(1.25))
    assert abs(M.embedding_average(["a", "b"], ["c", "b"], t) - 0.75 / (math.sqrt(0.5) * math.sqrt(1.25))) < 1e-6
    # means (0.5, 0.5) and (1.5, 0)
    assert abs(M.embedding_average(["a", "b"], ["c", "d"], t) - 0.75 / (math.sqrt(0.5) * 1.5)) < 1e-6


def test_greedy_matching_examples():
    t = table_of({"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [1.0, 1.0]})
    assert abs(M.greedy_matching(["a", "c"], ["a", "c"], t) - 1) < 1e-6
    assert abs(M.greedy_matching(["a"], ["b"], t)) < 1e-6
    # candidate {a, b} vs reference {c}: each candidate word scores 1/sqrt2; c scores 1/sqrt2
    assert abs(M.greedy_matching(["a", "b"], ["c"], t) - 1 / math.sqrt(2)) < 1e-6
    # candidate {a, c} vs reference {a}: (1 + 1/sqrt2)/2 one way, 1 the other
    assert abs(M.greedy_matching(["a", "c"], ["a"], t) - ((1 + 1 / math.sqrt(2)) / 2 + 1) / 2) < 1e-6


def test_vector_extrema_examples():
    t = table_of({"a": [1.0, 0.0], "b": [0.0, 1.0], "p": [0.5, -2.0], "q": [-0.7, 1.0], "r": [1.0, 1.0]})
    assert abs(M.vector_extrema(["a"], ["a"], t) - 1) < 1e-6
    assert abs(M.vector_extrema(["a"], ["b"], t)) < 1e-6
    # extrema of {p, q} = (-0.7, -2.0); of {r} = (1, 1)
    want = (-0.7 - 2.0) / (math.hypot(0.7, 2.0) * math.sqrt(2))
    assert abs(M.vector_extrema(["p", "q"], ["r"], t) - want) < 1e-6


def test_extrema_tie_goes_positive():
    np.testing.assert_array_equal(M.extrema(np.array([[2.0, -1.0], [-2.0, 1.0]])), [2.0, 1.0])


def test_missing_words_skip():
    t = table_of({"a": [1.0, 0.0]})
    for fn in (M.embedding_average, M.greedy_matching, M.vector_extrema):
        assert fn(["zz"], ["a"], t) is None
    vec, missing = t.lookup("zz")
    assert missing and not vec.any()


@pytest.mark.parametrize("fn", ["embedding_average", "greedy_matching", "vector_extrema"])
def test_embedding_metrics_match_oracle(fn):
    rng = np.random.default_rng(7)
    for _ in range(100):
        vecs, cand, ref = random_case(rng)
        got = getattr(M, fn)(cand, ref, table_of(vecs))
        want = getattr(oracles, fn)(cand, ref, vecs)
        if want is None:
            assert got is None
        else:
            assert abs(got - want) < 1e-6


@pytest.mark.parametrize("n", [1, 2])
def test_distinct_matches_oracle(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        reps = [[f"t{i}" for i in rng.integers(5, size=int(rng.integers(0, 5)))] for _ in range(int(rng.integers(1, 5)))]
        got, want = M.distinct_n(reps, n), oracles.distinct_n(reps, n)
        assert got == want or abs(got - want) < 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_embedding_metrics_symmetric_and_bounded(seed):
    vecs, cand, ref = random_case(np.random.default_rng(seed))
    t = table_of(vecs)
    for fn in (M.embedding_average, M.greedy_matching, M.vector_extrema):
        a, b = fn(cand, ref, t), fn(ref, cand, t)
        if a is not None:
            assert abs(a - b) < 1e-9 and -1 <= a <= 1
            assert abs(fn(cand, cand, t) - 1) < 1e-6 or not any(np.any(vecs[w]) for w in cand if w in vecs)


def test_table_file(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("a 1 0\nb 0 1\n\n")
    t = M.EmbeddingTable.from_file(p)
    assert t.dim == 2 and t.source == "external file"
    p.write_text("a 1 0\nb 0\n")
    with pytest.raises(ValueError):
        M.EmbeddingTable.from_file(p)


def test_score_corpus_report():
    t = table_of({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    rep = M.score_corpus([["a"], ["zz"], ["a", "b"]], [["a"], ["a"], ["b"]], t)
    assert rep.evaluated_pairs == 2 and rep.skipped_pairs == 1
    assert abs(rep.embedding_average - (1 + 1 / math.sqrt(2)) / 2) < 1e-9
    assert rep.distinct_1 == 3 / 4
    jsonschema.validate(json.loads(rep.to_json()), M.REPORT_SCHEMA)


def test_score_corpus_length_mismatch():
    with pytest.raises(ValueError):
        M.score_corpus([["a"]], [], table_of({"a": [1.0]}))
