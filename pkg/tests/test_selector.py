import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwreply import numcore as nc
from kwreply.corpus import BACKWARD, FORWARD
from kwreply.numcore import Graph, ParamStore
from kwreply.selector import (assemble, branch_summary, init_selector, select_direction, selector_loss)

V, E, H = 12, 4, 4


def make_store(seed=0, scale=None):
    s = ParamStore()
    init_selector(s, np.random.default_rng(seed), V, E, H)
    if scale is not None:
        r = np.random.default_rng(seed + 1)
        for k in s:
            s[k][...] = r.normal(size=s[k].shape) * scale
    return s


def test_assemble_examples():
    assert assemble([], "T", [], "E", []) == (["T", "E"], ["E", "T"])
    y_f, y_b = assemble(["a"], "T", ["b"], "E", ["c"])
    assert y_f == ["a", "T", "b", "E", "c"]
    assert y_b == y_f[::-1]


@given(st.lists(st.integers(4, 9)), st.lists(st.integers(4, 9)), st.lists(st.integers(4, 9)))
def test_assemble_reversal_is_involution(left, mid, right):
    y_f, y_b = assemble(left, 10, mid, 11, right)
    assert y_b[::-1] == y_f
    assert y_f.count(10) == 1 and y_f.count(11) == 1


def test_branch_parameters_disjoint():
    s = make_store()
    f = {n for n in s if n.startswith("dir.f.")}
    b = {n for n in s if n.startswith("dir.b.")}
    assert f and b and not f & b


def test_zero_projection_ties_forward():
    s = make_store(scale=1.0)
    s["dir.W"][...] = 0
    r = select_direction(s, [1, 2, 3], [3, 2, 1])
    assert r.score == 0.5 and r.chosen == FORWARD and r.tokens == [1, 2, 3]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 50))
def test_score_in_open_interval(seed, scale):
    s = make_store(seed=seed % 7, scale=1.0)
    s["dir.W"][...] *= scale
    r = select_direction(s, [1, 5, 2, 7], [7, 2, 5, 1])
    assert 0.0 < r.score < 1.0
    assert (r.chosen == FORWARD) == (r.score >= 0.5)
    assert r.tokens == (r.forward if r.chosen == FORWARD else r.backward)


def test_saturated_score_stays_inside():
    s = make_store(scale=3.0)
    s["dir.W"][...] = 1e4
    assert 0.0 < select_direction(s, [1, 2], [2, 1]).score < 1.0


def test_summary_is_sum_of_branch_states():
    s = make_store(scale=0.7)
    ids = [3, 1, 4, 1, 5]
    g = Graph(s)
    got = branch_summary(g, "backward", ids).value
    h, total = np.zeros(H), np.zeros(H)
    for t in ids:
        h = nc.gru_cell(s["dir.embedding"][t], h, s["dir.b.gru.W"], s["dir.b.gru.U"], s["dir.b.gru.b"])
        total += h
    np.testing.assert_allclose(got, total, atol=1e-6)


def test_empty_sequence():
    with pytest.raises(nc.NumcoreError):
        select_direction(make_store(), [], [])


def test_deterministic():
    s = make_store(scale=1.0)
    assert select_direction(s, [1, 2, 3], [3, 2, 1]) == select_direction(s, [1, 2, 3], [3, 2, 1])


def test_learns_order_cue():
    # forward iff token 4 precedes token 5 in y_f
    rng = np.random.default_rng(0)
    s = make_store(seed=3)
    data = []
    for _ in range(60):
        fill = [int(t) for t in rng.integers(6, V, size=3)]
        fwd = bool(rng.integers(2))
        y_f = fill[:1] + ([4, 5] if fwd else [5, 4]) + fill[1:]
        data.append((y_f, y_f[::-1], FORWARD if fwd else BACKWARD))
    opt = nc.Adam(s.names(), lr=0.02)
    for _ in range(30):
        for y_f, y_b, d in data:
            g = Graph(s)
            opt.step(s, g.backward(selector_loss(g, y_f, y_b, d)))
    acc = np.mean([select_direction(s, y_f, y_b).chosen == d for y_f, y_b, d in data])
    assert acc == 1.0
