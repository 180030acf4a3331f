import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ngsp import engine, neighbor_gradient as ng, oum
from ngsp.analysis import exact_hjb1_grid, grid_coordinates
from ngsp.engine import ACC, INF
from ngsp.grid import Grid, NodeIndex
from ngsp.solve import solve
from ngsp.speed import ProblemSpec, UnitDirection, custom_field, make_problem

ISO = make_problem(ProblemSpec("isotropic"))
HJB1 = make_problem(ProblemSpec("hjb1"))


def planted(grid, values, acc):
    s = engine.initialize(grid, acc)
    flat = np.asarray(values).ravel()
    for k in s.order:
        s.u[k] = float(flat[k])
    return s


def wrap(d):
    return abs((d + math.pi) % (2 * math.pi) - math.pi)


# -- gradients ---------------------------------------------------------------

def test_gradient_exact_on_linear_field():
    g = Grid(7)
    X, Y = grid_coordinates(g)
    s = planted(g, 2 * X + 3 * Y, [g.unravel(k) for k in range(g.size)])
    for idx in (NodeIndex(3, 3), NodeIndex(0, 0), NodeIndex(6, 2)):
        gs = ng.update_gradient(s, idx)
        assert gs.dx_component == pytest.approx(2.0, abs=1e-12)
        assert gs.dy_component == pytest.approx(3.0, abs=1e-12)
        assert gs.owner == idx


def test_one_sided_and_missing_gradients():
    g = Grid(11, 11, 0.0, 1.0, 0.0, 1.0)  # dx = 0.1
    s = planted(g, np.zeros(g.shape), [NodeIndex(4, 5), NodeIndex(5, 5)])
    s.u[g.linear(NodeIndex(4, 5))] = 0.9
    s.u[g.linear(NodeIndex(5, 5))] = 1.0
    gs = ng.update_gradient(s, NodeIndex(5, 5))
    assert gs.dx_component == pytest.approx(1.0)
    assert gs.dy_component == 0.0
    with pytest.raises(ValueError):
        ng.update_gradient(s, NodeIndex(0, 0))


def test_stencil_switches_to_central_after_acceptance():
    g = Grid(11, 11, 0.0, 1.0, 0.0, 1.0)
    s = planted(g, np.zeros(g.shape), [NodeIndex(3, 5), NodeIndex(4, 5)])
    s.u[g.linear(NodeIndex(3, 5))] = 0.0
    s.u[g.linear(NodeIndex(4, 5))] = 0.1
    assert ng.update_gradient(s, NodeIndex(4, 5)).dx_component == pytest.approx(1.0)
    k = g.linear(NodeIndex(5, 5))
    engine.push(s, k, 0.3)
    ng.accept_and_relax(s, k, ISO)
    # central now: (0.3 - 0.0) / 0.2
    assert s.gx[g.linear(NodeIndex(4, 5))] == pytest.approx(1.5)


# -- Hamiltonian minimizer ----------------------------------------------------

def brute_angle(g, x, field, n=1_000_000):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    a1, a2 = np.cos(th), np.sin(th)
    phi = (g[0] * a1 + g[1] * a2) * field.evaluate(np.full(n, x[0]), np.full(n, x[1]), a1, a2)
    c = th[np.argmin(phi)]
    fine = np.linspace(c - 2 * np.pi / n, c + 2 * np.pi / n, 2001)
    b1, b2 = np.cos(fine), np.sin(fine)
    phi = (g[0] * b1 + g[1] * b2) * field.evaluate(np.full(2001, x[0]), np.full(2001, x[1]), b1, b2)
    return fine[np.argmin(phi)]


def test_minimizer_isotropic():
    a = ng.hamiltonian_minimizer((1.0, 0.0), (0, 0), ISO).a
    assert a[0] == pytest.approx(-1.0) and a[1] == pytest.approx(0.0, abs=1e-12)
    const = custom_field(lambda x, y, a1, a2: 3.0, 3.0, 3.0)
    for gvec in ((0.3, -2.0), (-1.0, -1.0), (5.0, 0.1)):
        a = ng.hamiltonian_minimizer(gvec, (0.1, 0.1), const).a
        nrm = math.hypot(*gvec)
        assert wrap(math.atan2(a[1], a[0]) - math.atan2(-gvec[1] / nrm, -gvec[0] / nrm)) < 1e-6


def test_minimizer_zero_gradient_tie_break():
    assert ng.hamiltonian_minimizer((0.0, 0.0), (0, 0), HJB1).theta == math.pi
    assert ng.hamiltonian_minimizer((0.0, 0.0), (0, 0), custom_field(HJB1.func, 0.1, 1)).theta == math.pi


def test_minimizer_hjb1_brute_force():
    th = ng.hamiltonian_minimizer((1.0, 0.0), (0, 0), HJB1).theta
    assert wrap(th - brute_angle((1.0, 0.0), (0, 0), HJB1)) <= 1e-4


@settings(max_examples=100)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 100.0))
def test_minimizer_scale_invariant(g1, g2, c):
    if math.hypot(g1, g2) < 1e-6:
        return
    t1 = ng.hamiltonian_minimizer((g1, g2), (0.1, -0.2), HJB1).theta
    t2 = ng.hamiltonian_minimizer((c * g1, c * g2), (0.1, -0.2), HJB1).theta
    assert wrap(t1 - t2) <= 1e-9


def test_generic_minimizer_matches_closed_form():
    plain = custom_field(HJB1.func, HJB1.f1_bound, HJB1.f2_bound)
    rng = np.random.default_rng(11)
    for gvec in rng.normal(size=(50, 2)):
        t1 = ng.hamiltonian_minimizer(gvec, (0, 0), HJB1).theta
        t2 = ng.hamiltonian_minimizer(gvec, (0, 0), plain).theta
        assert wrap(t1 - t2) < 1e-5


# -- ray walk --------------------------------------------------------------

def test_axis_ray_hits_lattice_node():
    g = Grid(11)
    s = planted(g, np.zeros(g.shape), [NodeIndex(6, j) for j in range(11)])
    hit = ng.ray_front_intersection(s, NodeIndex(5, 5), UnitDirection(0.0), ISO)
    assert hit.steps == 1 and hit.lam == 1.0
    assert hit.segment.a == NodeIndex(6, 5)
    assert hit.point.x == pytest.approx(0.1) and hit.point.y == pytest.approx(0.0)


def test_nearer_family_wins():
    g = Grid(11)
    s = planted(g, np.zeros(g.shape), [g.unravel(k) for k in range(g.size) if k != g.linear(NodeIndex(5, 5))])
    # 30 degrees: the vertical line x + dx is crossed before the horizontal line y + dx
    hit = ng.ray_front_intersection(s, NodeIndex(5, 5), UnitDirection(math.pi / 6), HJB1)
    assert hit.segment.a.i == 6 and hit.segment.b.i == 6
    assert hit.distance == pytest.approx(g.dx / math.cos(math.pi / 6))
    assert hit.distance <= g.h * HJB1.anisotropy


def test_ray_into_nothing():
    g = Grid(11)
    s = planted(g, np.zeros(g.shape), [NodeIndex(0, 0)])
    assert ng.ray_front_intersection(s, NodeIndex(5, 5), UnitDirection(0.3), ISO) is None


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.integers(0, 9999))
def test_ray_hit_invariants(theta, seed):
    g = Grid(15)
    rng = np.random.default_rng(seed)
    acc = [g.unravel(int(k)) for k in rng.choice(g.size, 120, replace=False)]
    s = planted(g, rng.uniform(0, 1, g.shape), acc)
    k = g.linear(NodeIndex(7, 7))
    if s.labels[k] == ACC:
        return
    hit = ng.ray_front_intersection(s, k, UnitDirection(theta), HJB1)
    if hit is None:
        return
    pa = engine.position(g, g.linear(hit.segment.a))
    pb = engine.position(g, g.linear(hit.segment.b))
    assert s.label(hit.segment.a) == ACC and s.label(hit.segment.b) == ACC
    assert hit.point.x == pytest.approx(hit.lam * pa[0] + (1 - hit.lam) * pb[0], abs=1e-12)
    assert hit.point.y == pytest.approx(hit.lam * pa[1] + (1 - hit.lam) * pb[1], abs=1e-12)
    assert hit.distance <= g.h * HJB1.anisotropy * (1 + 1e-9)
    assert 0.0 <= hit.lam <= 1.0


# -- update --------------------------------------------------------------------

def test_single_neighbour_direct_term():
    g = Grid(11)
    s = planted(g, np.zeros(g.shape), [NodeIndex(4, 5)])
    s.gx[g.linear(NodeIndex(4, 5))] = -1.0  # points away from x
    assert ng.ngsp_update(s, NodeIndex(5, 5), ISO) == pytest.approx(g.dx)


def test_no_accepted_neighbour():
    s = planted(Grid(11), np.zeros((11, 11)), [NodeIndex(0, 0)])
    assert ng.ngsp_update(s, NodeIndex(5, 5), ISO) == INF


def test_half_plane_matches_segment_update():
    g = Grid(21)
    X, Y = grid_coordinates(g)
    nrm = np.array([0.6, 0.8])
    U = X * nrm[0] + Y * nrm[1] + 1.0
    acc = [g.unravel(k) for k in range(g.size) if U.ravel()[k] <= 1.0 + 1e-12]
    s = planted(g, U, acc)
    for k in s.order:
        ng.refresh_gradient(s, k)
    checked = 0
    for k in range(g.size):
        if s.labels[k] == ACC or not any(s.labels[n] == ACC for n in s.nd[k]):
            continue
        if any(s.labels[n] != ACC for n in s.nd[k] if U.ravel()[n] <= U.ravel()[k]):
            continue
        v_ngsp = ng.ngsp_update(s, k, ISO)
        v_oum = oum.oum_update(s, k, ISO)
        assert v_ngsp == pytest.approx(v_oum, abs=1e-9)
        checked += 1
    assert checked > 5


def test_relax_counts_updates():
    g = Grid(11)
    acc = [NodeIndex(i, j) for i in range(11) for j in range(6) if (i, j) != (5, 5)]
    s = planted(g, np.zeros(g.shape), acc)
    k = g.linear(NodeIndex(5, 5))
    engine.push(s, k, 0.1)  # its only non-accepted neighbours are the three above it
    before = s.stats["ngsp_updates"]
    ng.accept_and_relax(s, k, ISO)
    assert s.stats["ngsp_updates"] - before == 3
    # last Cons node in a tiny grid: the loop has nothing left to pop
    g = Grid(3)
    s = planted(g, np.zeros(g.shape), [g.unravel(k) for k in range(8)])
    engine.push(s, 8, 1.0)
    ng.accept_and_relax(s, 8, ISO)
    assert engine.pop_min_considered(s) is None and s.accept_count == 9


# -- full solver ---------------------------------------------------------------

def test_isotropic_distance(solved):
    r = solved("isotropic", 101, "ngsp")
    X, Y = grid_coordinates(r.grid)
    assert np.abs(r.values - np.hypot(X, Y)).max() <= 3 * r.grid.h


def test_hjb1_101(solved):
    r = solved("hjb1", 101, "ngsp")
    assert np.abs(r.values - exact_hjb1_grid(r.grid)).max() <= 0.06


def test_bootstrap_clamped_and_close_to_oum(solved):
    g = Grid(51)
    r = solve(g, HJB1, [(0, 0)], "ngsp", bootstrap_fraction=1.0)
    assert r.stats["bootstrap_accepted"] == math.ceil(0.5 * g.size)
    ref = solve(g, HJB1, [(0, 0)], "oum").values
    assert np.abs(r.values - ref).max() <= g.h


def test_zero_fraction_still_bootstraps_first_ring():
    r = solve(Grid(21), ISO, [(0, 0)], "ngsp", bootstrap_fraction=0.0)
    assert r.stats["bootstrap_accepted"] == 9  # target plus its eight neighbours


ONE_RAY_PER_GRADIENT = pytest.mark.xfail(
    strict=True, reason="about nine rays per node are walked; with ceil(Upsilon) = 1 the "
                        "ray-step budget 8 M ceil(Upsilon) has no room for them")


@pytest.mark.parametrize("name", [pytest.param("isotropic", marks=ONE_RAY_PER_GRADIENT),
                                  "hjb1", "hjb2", "hjb3", "hjb4", "hjb5"])
def test_bounded_work(solved, name):
    r = solved(name, 101, "ngsp")
    m = r.grid.size
    ups = make_problem(ProblemSpec(name)).anisotropy
    assert sorted(r.order.tolist()) == list(range(m))
    assert r.stats["ngsp_updates"] <= 8 * m
    assert r.stats["ray_steps"] <= 8 * m * math.ceil(ups)


def test_nondecreasing_up_to_slack(solved):
    r = solved("hjb1", 201, "ngsp")
    d = np.diff(r.acceptance_values())
    assert (d < -10 * r.grid.h ** 2).sum() <= 0.001 * r.grid.size


def _max_neighbour_gradient_jump(n):
    g = Grid(n)
    U = exact_hjb1_grid(g)
    gx = (U[1:-1, 2:] - U[1:-1, :-2]) / (2 * g.dx)
    gy = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2 * g.dx)
    X, Y = grid_coordinates(g)
    keep = np.maximum(np.abs(X), np.abs(Y))[1:-1, 1:-1] >= 0.2  # stay off the target kink
    worst = 0.0
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            if not (di or dj):
                continue
            sx = np.roll(np.roll(gx, dj, 0), di, 1)
            sy = np.roll(np.roll(gy, dj, 0), di, 1)
            both = keep & np.roll(np.roll(keep, dj, 0), di, 1)
            both[[0, -1], :] = False
            both[:, [0, -1]] = False
            worst = max(worst, float(np.hypot(gx - sx, gy - sy)[both].max()))
    return worst, g.h


def test_neighbour_gradient_coherence():
    jump, h = _max_neighbour_gradient_jump(101)
    # 25% headroom: finer lattices sample closer to the worst point; an O(1) jump would need 100%
    c = 1.25 * jump / h
    jump2, h2 = _max_neighbour_gradient_jump(201)
    assert jump2 <= c * h2


def _planted_update_error(n):
    g = Grid(n)
    U = exact_hjb1_grid(g)
    X, Y = grid_coordinates(g)
    ic = int(round((0.1 - g.x_min) / g.dx))
    acc = [NodeIndex(i, j) for j in range(n) for i in range(ic + 1)]
    s = planted(g, U, acc)
    q = np.array([[26.0, -50.0], [-50.0, 101.0]])  # u^2 = p.Q.p
    for idx in acc:
        k = g.linear(idx)
        p = np.array([X.ravel()[k], Y.ravel()[k]])
        grad = q @ p / max(U.ravel()[k], 1e-300)
        s.gx[k], s.gy[k] = grad
    j = int(round((0.25 - g.y_min) / g.dx))
    k = g.linear(NodeIndex(ic + 1, j))
    return abs(ng.ngsp_update(s, k, HJB1) - U.ravel()[k])


def test_planted_front_error_is_second_order():
    e1, e2 = _planted_update_error(101), _planted_update_error(201)
    assert e1 >= 3 * e2
