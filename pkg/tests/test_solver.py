import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xbar_energy.errors import ConvergenceError, DomainError
from xbar_energy.mapping import MappingScheme, map_weights
from xbar_energy.solver import (CrossbarCircuit, build_circuit, dump_voltages_csv,
                                equivalent_conductance, kcl_bound, kcl_imbalance, oracle_kcl_bound,
                                pulse_conductances, solve, solve_dense_oracle, solve_fast)

V_RB = 0.2
PHYSICS = settings(max_examples=1000, deadline=None,
                   suppress_health_check=[HealthCheck.too_slow])


def circuit(g, x, r):
    x = np.asarray(x, dtype=np.uint8)
    return CrossbarCircuit(np.asarray(g, float) * x[:, None], float(r), V_RB, x)


def netlist(c):
    """Resistor list (node_a, node_b, conductance) of the crossbar, nodes by name."""
    n, m = c.g.shape
    gw = 1.0 / c.r_wire
    res = []
    for j in range(n):
        res.append((("drv", j), ("r", j, 0), gw))
        for i in range(m - 1):
            res.append((("r", j, i), ("r", j, i + 1), gw))
    for i in range(m):
        for j in range(n - 1):
            res.append((("c", j, i), ("c", j + 1, i), gw))
        res.append((("c", n - 1, i), "gnd", gw))
    for j in range(n):
        for i in range(m):
            res.append((("r", j, i), ("c", j, i), c.g[j, i]))
    return res


def brute_force(c):
    """Solve the netlist by plain node-by-node KCL."""
    fixed = {"gnd": 0.0}
    for j, x in enumerate(c.active_rows):
        fixed[("drv", j)] = float(x) * c.v_rb
    res = netlist(c)
    free = sorted({a for a, _, _ in res} | {b for _, b, _ in res} - set(fixed), key=str)
    free = [k for k in free if k not in fixed]
    idx = {k: i for i, k in enumerate(free)}
    A = np.zeros((len(free), len(free)))
    b = np.zeros(len(free))
    for p, q, g in res:
        for u, w in ((p, q), (q, p)):
            if u in idx:
                A[idx[u], idx[u]] += g
                if w in idx:
                    A[idx[u], idx[w]] -= g
                else:
                    b[idx[u]] += g * fixed[w]
    v = np.linalg.solve(A, b)
    n, m = c.g.shape
    v_row = np.array([[v[idx[("r", j, i)]] for i in range(m)] for j in range(n)])
    v_col = np.array([[v[idx[("c", j, i)]] for i in range(m)] for j in range(n)])
    return v_row, v_col


def test_single_cell_closed_form():
    # 100 uS in series with two 1 kOhm segments
    G, r = 100e-6, 1e3
    i = V_RB / (1 / G + 2 * r)
    v_c = i / G
    expected = v_c**2 * G / V_RB**2
    assert expected == pytest.approx(69.444444e-6, rel=1e-7)
    c = circuit([[G]], [1], r)
    for res in (solve_dense_oracle(c), solve_fast(c, tol=1e-12)):
        assert res.g_x == pytest.approx(expected, rel=1e-9)
        assert res.v_row[0, 0] - res.v_col[0, 0] == pytest.approx(v_c, rel=1e-9)


def test_single_cell_parasitic_free():
    c = circuit([[100e-6]], [1], 0.0)
    assert c.parasitic_free
    for res in (solve_dense_oracle(c), solve_fast(c)):
        assert res.g_x == 100e-6
        assert res.v_row[0, 0] - res.v_col[0, 0] == V_RB


def test_two_by_two_matches_brute_force(rng):
    for _ in range(20):
        c = circuit(rng.uniform(1e-5, 3e-4, (2, 2)), rng.integers(0, 2, 2), rng.uniform(1, 500))
        v_row, v_col = brute_force(c)
        res = solve_dense_oracle(c)
        np.testing.assert_allclose(res.v_row, v_row, rtol=0, atol=1e-12)
        np.testing.assert_allclose(res.v_col, v_col, rtol=0, atol=1e-12)


def test_brute_force_on_rectangular(rng):
    c = circuit(rng.uniform(1e-5, 3e-4, (3, 5)), [1, 0, 1], 20.0)
    v_row, v_col = brute_force(c)
    res = solve_fast(c, tol=1e-12)
    np.testing.assert_allclose(res.v_row, v_row, atol=1e-12)
    np.testing.assert_allclose(res.v_col, v_col, atol=1e-12)


def test_build_circuit(models):
    m = models["D"]
    g = np.full((64, 64), 1e-4)
    c = build_circuit(g, m, np.zeros(64, dtype=int))
    assert not c.g.any()
    assert c.n_nodes == 2 * 64 * 64
    assert c.r_wire == 2.215
    assert build_circuit(g, models["A"], np.ones(64, dtype=int)).parasitic_free
    tile = map_weights(np.zeros((4, 3), dtype=int), MappingScheme("bias", 8, 8), m)
    assert build_circuit(tile, m, [1, 0, 1, 0]).g.shape == (4, 3)
    with pytest.raises(DomainError):
        build_circuit(g, m, np.ones(63, dtype=int))
    with pytest.raises(DomainError):
        build_circuit(-g, m, np.ones(64, dtype=int))
    with pytest.raises(DomainError):
        build_circuit(g, m, np.full(64, 2))


def test_all_inactive_and_zero_conductance():
    for r in (0.0, 5.0):
        c = circuit(np.full((4, 4), 1e-4), np.zeros(4), r)
        for res in (solve_dense_oracle(c), solve_fast(c)):
            assert res.g_x == 0.0
            assert equivalent_conductance(res, V_RB) == 0.0
        c = circuit(np.zeros((3, 3)), np.ones(3), r)
        assert solve_dense_oracle(c).g_x == 0.0
        assert solve_fast(c).g_x == 0.0


def test_parasitic_free_sums_active_rows(rng):
    g = rng.uniform(1e-5, 3e-4, (16, 8))
    x = rng.integers(0, 2, 16)
    res = solve_fast(circuit(g, x, 0.0))
    assert res.g_x == pytest.approx(g[x == 1].sum(), rel=1e-14)
    assert res.iterations == 0


def test_fast_matches_oracle_on_64x64(models):
    rng = np.random.default_rng(7)
    for _ in range(5):
        m = models["D"]
        g = rng.uniform(m.g_min, m.g_max, (64, 64))
        c = circuit(g, rng.integers(0, 2, 64), m.r_wire)
        f, o = solve_fast(c), solve_dense_oracle(c)
        assert abs(f.g_x - o.g_x) <= 1e-3 * o.g_x
        assert f.kcl_residual <= kcl_bound(c)


def test_parasitics_compress_probe_profile(models):
    m = models["D"]
    bg = np.full((64, 64), m.g_max / 2)
    x = np.ones(64, dtype=np.uint8)
    rel = []
    for r in (0.0, m.r_wire):
        e = []
        for gp in (m.g_min, m.g_max):
            g = bg.copy()
            g[32, 32] = gp
            res = solve_fast(circuit(g, x, r), tol=1e-9)
            e.append(res.p_cell[32, 32])
        rel.append(e[1] / e[0])
    ideal, loaded = rel
    assert ideal == pytest.approx(m.g_max / m.g_min, rel=1e-12)
    assert loaded < ideal


def test_nonconvergence_raises_with_residual(models):
    c = circuit(np.full((32, 32), 2e-4), np.ones(32), 2.215)
    with pytest.raises(ConvergenceError) as info:
        solve_fast(c, tol=1e-12, max_iter=1)
    assert info.value.iterations == 1
    assert info.value.residual > 0


def test_solve_dispatch_and_bad_tol():
    c = circuit(np.full((2, 2), 1e-4), [1, 1], 10.0)
    assert solve(c, "oracle").method == "oracle"
    assert solve(c).method == "fast"
    with pytest.raises(DomainError):
        solve_fast(c, tol=0)


def test_batched_pulses_match_single_solves(rng):
    g = rng.uniform(1e-5, 3e-4, (12, 10))
    planes = rng.integers(0, 2, (9, 12)).astype(np.uint8)
    planes[3] = 0
    batch, cur = pulse_conductances(g, 3.0, V_RB, planes, return_currents=True)
    for p in range(9):
        res = solve_fast(circuit(g, planes[p], 3.0))
        # each pulse converges on its own, so batching is bit-exact
        assert batch[p] == res.g_x
        np.testing.assert_array_equal(cur[p], res.i_col)
    oracle = pulse_conductances(g, 3.0, V_RB, planes, method="oracle")
    np.testing.assert_allclose(batch, oracle, rtol=1e-4)
    ideal, icur = pulse_conductances(g, 0.0, V_RB, planes, return_currents=True)
    np.testing.assert_allclose(ideal, planes @ g.sum(axis=1), rtol=1e-14)
    np.testing.assert_allclose(icur, V_RB * planes @ g, rtol=1e-14)


def test_dump_voltages(tmp_path):
    res = solve_dense_oracle(circuit(np.full((2, 3), 1e-4), [1, 0], 10.0))
    p = tmp_path / "v.csv"
    dump_voltages_csv(res, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "line,row,col,volt"
    assert len(lines) == 1 + 2 * 6


def test_large_circuit_uses_sparse_path():
    rng = np.random.default_rng(3)
    c = circuit(rng.uniform(1e-5, 3e-4, (40, 40)), np.ones(40), 2.0)
    assert c.n_nodes > 2048
    o, f = solve_dense_oracle(c), solve_fast(c, tol=1e-10)
    assert o.g_x == pytest.approx(f.g_x, rel=1e-8)


# -- physics properties, each over >= 1000 random instances -------------------

@st.composite
def circuits(draw, max_dim=8, r_zero=False):
    n = draw(st.integers(1, max_dim))
    m = draw(st.integers(1, max_dim))
    # off cells or physically meaningful conductances (>= 1 nS)
    g = draw(arrays(float, (n, m), elements=st.one_of(st.just(0.0), st.floats(1e-9, 5e-4))))
    x = draw(arrays(np.uint8, n, elements=st.integers(0, 1)))
    r = 0.0 if r_zero else draw(st.floats(0.05, 1e4))
    return circuit(g, x, r)


@PHYSICS
@given(c=circuits())
def test_voltage_bounds(c):
    for res in (solve_dense_oracle(c), solve_fast(c)):
        for v in (res.v_row, res.v_col):
            assert v.min() >= -1e-12 * V_RB and v.max() <= V_RB * (1 + 1e-12)
        assert res.g_x >= 0


@PHYSICS
@given(c=circuits())
def test_kcl_residual_below_tolerance(c):
    o = solve_dense_oracle(c)
    assert o.kcl_residual <= oracle_kcl_bound(c)
    f = solve_fast(c)
    assert f.kcl_residual <= kcl_bound(c)
    if not c.parasitic_free:
        # independent recomputation of the residual from the voltages
        r_res, c_res = kcl_imbalance(c.g, 1 / c.r_wire, c.v_drive, f.v_row, f.v_col)
        assert max(np.abs(r_res).max(), np.abs(c_res).max()) == pytest.approx(
            f.kcl_residual, rel=1e-12, abs=1e-30)


@PHYSICS
@given(c=circuits())
def test_power_accounting(c):
    o = solve_dense_oracle(c)
    total = o.p_cell.sum() + o.p_wire
    assert o.p_drive == pytest.approx(total, rel=1e-9, abs=1e-30)
    assert o.p_drive >= o.p_cell.sum() * (1 - 1e-12)


@PHYSICS
@given(c=circuits())
def test_parasitic_penalty(c):
    ideal = circuit(c.g, c.active_rows, 0.0)
    loaded = solve_dense_oracle(c).g_x
    assert loaded <= solve_fast(ideal).g_x * (1 + 1e-12)
    assert solve_fast(c).g_x <= solve_fast(ideal).g_x * (1 + 1e-12)
    i_ideal = solve_fast(ideal).i_col
    assert np.all(solve_dense_oracle(c).i_col <= i_ideal * (1 + 1e-12) + 1e-18)


@PHYSICS
@given(c=circuits(r_zero=True), data=st.data())
def test_monotonic_without_parasitics(c, data):
    n, m = c.g.shape
    base = solve_fast(c).g_x
    j = data.draw(st.integers(0, n - 1))
    i = data.draw(st.integers(0, m - 1))
    bump = data.draw(st.floats(0, 5e-4))
    g = c.g.copy()
    g[j, i] += bump
    assert solve_fast(circuit(g, c.active_rows, 0.0)).g_x >= base
    x = c.active_rows.copy()
    x[j] = 1
    assert solve_fast(circuit(c.g, x, 0.0)).g_x >= base


@settings(max_examples=100, deadline=None)
@given(c=circuits(max_dim=24))
def test_fast_agrees_with_oracle(c):
    f, o = solve_fast(c), solve_dense_oracle(c)
    assert abs(f.g_x - o.g_x) <= 1e-3 * o.g_x + 1e-18
