import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ngsp import engine
from ngsp.engine import ACC, CONS, FAR, FrontSegment, SolverState
from ngsp.grid import Grid, NodeIndex
from ngsp.speed import ProblemSpec, custom_field, make_problem

ISO = make_problem(ProblemSpec("isotropic"))
ISO2 = make_problem(ProblemSpec("isotropic", scale=2.0))
HJB1 = make_problem(ProblemSpec("hjb1"))


def block_state(n=5, lo=1, hi=3):
    g = Grid(n)
    targets = [NodeIndex(i, j) for j in range(lo, hi + 1) for i in range(lo, hi + 1)]
    st_ = engine.initialize(g, targets)
    for k in range(g.size):
        if st_.labels[k] != ACC:
            engine.push(st_, k, 1.0)
    return st_


# -- initialize / labels ------------------------------------------------------

def test_initialize_counts():
    s = engine.initialize(Grid(101), [NodeIndex(50, 50)])
    labels = np.frombuffer(bytes(s.labels), dtype=np.uint8)
    assert (labels == ACC).sum() == 1 and (labels == FAR).sum() == 10200
    assert s.u[s.grid.linear(NodeIndex(50, 50))] == 0.0
    assert s.heap == []


def test_initialize_two_and_duplicate_targets():
    g = Grid(11)
    s = engine.initialize(g, [NodeIndex(1, 1), NodeIndex(8, 3), NodeIndex(1, 1)])
    assert s.accept_count == 2
    assert s.u[g.linear(NodeIndex(1, 1))] == s.u[g.linear(NodeIndex(8, 3))] == 0.0
    with pytest.raises(ValueError):
        engine.initialize(g, [])


def test_double_accept_is_an_error():
    s = engine.initialize(Grid(5), [NodeIndex(2, 2)])
    with pytest.raises(RuntimeError):
        engine.accept(s, s.grid.linear(NodeIndex(2, 2)), 0.0)


# -- accepted front -----------------------------------------------------------

def test_single_node_front():
    s = engine.initialize(Grid(5), [NodeIndex(2, 2)])
    assert engine.accepted_front_nodes(s) == [NodeIndex(2, 2)]
    assert engine.front_segments(s) == []  # isolated AFF node


def test_fully_accepted_grid_has_no_front():
    g = Grid(4, 4, 0, 3, 0, 3)
    s = engine.initialize(g, [g.unravel(k) for k in range(g.size)])
    assert engine.accepted_front_nodes(s) == []


def test_block_perimeter():
    s = block_state()
    aff = engine.accepted_front_nodes(s)
    assert len(aff) == 8 and NodeIndex(2, 2) not in aff
    segs = engine.front_segments(s)
    assert len(segs) == 8
    assert len({frozenset((x.a, x.b)) for x in segs}) == 8
    for x in segs:
        assert s.label(x.a) == ACC and s.label(x.b) == ACC


def test_two_adjacent_front_nodes_one_segment():
    s = engine.initialize(Grid(5), [NodeIndex(1, 1), NodeIndex(2, 1)])
    assert engine.front_segments(s) == [FrontSegment(NodeIndex(1, 1), NodeIndex(2, 1))]


def _point_segment(px, py, ax, ay, bx, by):
    ex, ey = bx - ax, by - ay
    t = max(0.0, min(1.0, ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)))
    return math.hypot(ax + t * ex - px, ay + t * ey - py)


def test_near_front_radius_examples():
    g = Grid(11, 11, 0.0, 1.0, 0.0, 1.0)  # dx = 0.1
    column = [NodeIndex(2, j) for j in range(11)] + [NodeIndex(9, j) for j in range(11)]
    s = engine.initialize(g, column)
    x = NodeIndex(0, 5)
    near = engine.near_front(s, x, g.h * 2.0)
    assert FrontSegment(NodeIndex(2, 5), NodeIndex(2, 6)) in near  # 0.2 < 0.283
    assert all(seg.a.i == 2 for seg in near)  # column 9 is far beyond the radius
    assert engine.near_front(s, x, 0.19) == []


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 120), min_size=1, max_size=60),
       st.integers(0, 120), st.floats(0.05, 0.6))
def test_near_front_matches_brute_force(acc, xk, radius):
    g = Grid(11)
    s = engine.initialize(g, sorted(set(acc)))
    if s.labels[xk] == ACC:
        return
    x = g.unravel(xk)
    px, py = engine.position(g, xk)
    expect = []
    for seg in engine.front_segments(s):
        ax, ay = engine.position(g, g.linear(seg.a))
        bx, by = engine.position(g, g.linear(seg.b))
        d = _point_segment(px, py, ax, ay, bx, by)
        if abs(d - radius) < 1e-9:
            return  # too close to call
        if d < radius:
            expect.append(seg)
    got = engine.near_front(s, x, radius)
    assert sorted(got, key=repr) == sorted(expect, key=repr)


# -- heap ---------------------------------------------------------------------

def test_pop_min_and_ties():
    s = SolverState(Grid(5))
    for k, v in ((3, 3.0), (7, 1.0), (9, 2.0)):
        engine.push(s, k, v)
    assert engine.pop_min_considered(s) == 7
    s2 = SolverState(Grid(5))
    engine.push(s2, 12, 1.0)
    engine.push(s2, 4, 1.0)
    assert engine.pop_min_considered(s2) == 4


def test_stale_entries_skipped():
    s = SolverState(Grid(5))
    engine.push(s, 6, 5.0)
    engine.push(s, 6, 2.0)
    assert engine.pop_min_considered(s) == 6
    engine.accept(s, 6, 2.0)
    assert engine.pop_min_considered(s) is None


def test_push_keeps_the_minimum():
    s = SolverState(Grid(5))
    engine.push(s, 3, 1.0)
    engine.push(s, 3, 4.0)
    assert s.v[3] == 1.0 and s.labels[3] == CONS
    engine.push(s, 4, math.inf)
    assert s.labels[4] == FAR


# -- updates -----------------------------------------------------------------

def test_segment_update_examples():
    val, lam = engine.segment_update((0, 0), (1, 1), 0.0, (1, -1), 0.0, ISO)
    assert val == pytest.approx(1.0) and lam == pytest.approx(0.5)
    val, lam = engine.segment_update((0, 0), (1, 0), 0.0, (1, 1), 10.0, ISO)
    assert val == pytest.approx(1.0) and lam == 1.0
    val, _ = engine.segment_update((0, 0), (1, 1), 0.0, (1, -1), 0.0, ISO2)
    assert val == pytest.approx(0.5)


def test_segment_update_errors():
    with pytest.raises(ValueError):
        engine.segment_update((0, 0), (1, 0), math.inf, (1, 1), 0.0, ISO)
    with pytest.raises(ValueError):
        engine.segment_update((0, 0.5), (0, 0), 0.0, (0, 1), 0.0, ISO)


def test_collinear_point_beyond_segment():
    val, lam = engine.segment_update((0, 0), (0, -1), 0.0, (0, -2), 0.0, ISO)
    assert val == pytest.approx(1.0) and lam == pytest.approx(1.0)


def test_direct_neighbor_examples():
    assert engine.direct_neighbor_update((0, 0), (0.01, 0), 0.0, ISO) == pytest.approx(0.01)
    assert engine.direct_neighbor_update((0, 0), (0.01, 0.01), 0.0, ISO) == \
        pytest.approx(math.sqrt(2) * 0.01)
    # shipped exponent -1/2: f((1,0)) = 1/sqrt(26), so travel is 0.01 * sqrt(26)
    assert engine.direct_neighbor_update((0, 0), (0.01, 0), 3.0, HJB1) == \
        pytest.approx(3 + 0.01 * math.sqrt(26))
    plus = make_problem(ProblemSpec("hjb1", {"exponent": 0.5}))
    assert engine.direct_neighbor_update((0, 0), (0.01, 0), 3.0, plus) == \
        pytest.approx(3 + 0.01 / math.sqrt(26))
    with pytest.raises(ValueError):
        engine.direct_neighbor_update((0, 0), (0, 0), 0.0, ISO)


FIELDS = [make_problem(ProblemSpec(n)) for n in ("isotropic", "hjb1", "hjb2", "hjb3", "hjb4", "hjb5")]
FIELDS.append(make_problem(ProblemSpec("hjb1", {"exponent": 0.5})))


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(FIELDS), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4),
       st.integers(-3, 3), st.integers(-3, 3), st.booleans(),
       st.floats(0, 0.2), st.floats(0, 0.2))
def test_segment_update_bounds(field, x, y, p, q, horizontal, ua, ub):
    dx = 0.02
    b = (x + p * dx, y + q * dx)
    a = (b[0] + dx, b[1]) if horizontal else (b[0], b[1] + dx)
    on_line = (q == 0 and p in (-1, 0)) if horizontal else (p == 0 and q in (-1, 0))
    if on_line:
        return
    val, lam = engine.segment_update((x, y), a, ua, b, ub, field)
    assert 0.0 <= lam <= 1.0
    ends = min(engine.direct_neighbor_update((x, y), a, ua, field),
               engine.direct_neighbor_update((x, y), b, ub, field))
    assert val <= ends + 1e-12
    dist = _point_segment(x, y, *a, *b)
    assert val >= min(ua, ub) + dist / field.f2_bound - 1e-12


def test_generic_segment_matches_elliptic():
    rng = np.random.default_rng(3)
    f = HJB1
    plain = custom_field(f.func, f.f1_bound, f.f2_bound)
    for _ in range(200):
        x = rng.uniform(-0.3, 0.3, 2)
        b = x + rng.integers(-3, 4, 2) * 0.01 + np.array([0.0, 0.005])
        a = b + (0.01, 0.0)
        ua, ub = rng.uniform(0, 0.1, 2)
        v1, _ = engine.segment_update(tuple(x), tuple(a), ua, tuple(b), ub, f)
        v2, _ = engine.segment_update(tuple(x), tuple(a), ua, tuple(b), ub, plain)
        assert v2 == pytest.approx(v1, abs=1e-10)
