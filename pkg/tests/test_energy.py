import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xbar_energy.cellmodel import cell_pulse_energy
from xbar_energy.energy import (FJ, EnergyReport, merge_reports, mvm_energy, per_mac_energy,
                                pulse_records, report_to_dict, write_pulse_csv)
from xbar_energy.errors import DomainError


def cell_sum_energy(g, planes, model):
    """Cell-by-cell accumulation: every cell of every driven row, every pulse."""
    total = []
    n, m = g.shape
    for plane in planes:
        for j in range(n):
            for i in range(m):
                total.append(cell_pulse_energy(model, g[j, i], model.v_rb, int(plane[j])))
    return math.fsum(total)


def gx_energy(g, planes, model):
    pulses = [(float(plane @ g.sum(axis=1)), int(plane.sum())) for plane in planes]
    return mvm_energy(pulses, model, g.shape[1]).e_total


def test_no_active_rows_is_zero(models):
    r = mvm_energy([(0.0, 0)] * 8, models["C"], 64)
    assert r.e_total == 0.0 and r.e_bl == 0.0 and r.e_wl == 0.0
    assert mvm_energy([], models["C"], 64).e_total == 0.0


def test_single_cell_reduces_to_cell_energy(models):
    m = models["A"]
    G = 50e-6
    r = mvm_energy([(G, 1)], m, 1)
    assert r.e_total == pytest.approx(cell_pulse_energy(m, G, m.v_rb, 1), rel=1e-15)
    assert r.e_bl == pytest.approx(m.t_pulse * m.alpha * m.v_rb**2 * G, rel=1e-15)
    assert r.e_wl == pytest.approx(m.t_pulse * m.p_wl, rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10), m_=st.integers(1, 10), p=st.integers(1, 6),
       seed=st.integers(0, 2**32 - 1), cid=st.sampled_from("ABC"))
def test_cell_sum_equals_equivalent_conductance_form(models, n, m_, p, seed, cid):
    model = models[cid]
    rng = np.random.default_rng(seed)
    g = rng.uniform(model.g_min, model.g_max, (n, m_))
    planes = rng.integers(0, 2, (p, n))
    a, b = cell_sum_energy(g, planes, model), gx_energy(g, planes, model)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-30)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 16))
def test_adding_an_active_row_never_decreases_energy(models, seed, n):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0, 3e-4, (n, 5))
    plane = rng.integers(0, 2, n)
    j = rng.integers(n)
    more = plane.copy()
    more[j] = 1
    m = models["C"]
    assert gx_energy(g, [more], m) >= gx_energy(g, [plane], m)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(0, 1e-2), st.integers(0, 64)), max_size=20))
def test_additivity_over_pulses(models, pulses):
    m = models["B"]
    whole = mvm_energy(pulses, m, 64).e_total
    parts = [mvm_energy([p], m, 64).e_total for p in pulses]
    assert whole == pytest.approx(math.fsum(parts), rel=1e-12, abs=1e-30)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(0, 1e-2), st.integers(0, 64)), min_size=1, max_size=30),
       st.randoms())
def test_merge_is_order_independent(models, pulses, rnd):
    m = models["C"]
    reports = [mvm_energy([p], m, 64, tile=k) for k, p in enumerate(pulses)]
    shuffled = list(reports)
    rnd.shuffle(shuffled)
    a, b = merge_reports(reports), merge_reports(shuffled)
    assert a.e_total == b.e_total and a.e_bl == b.e_bl
    c = reports[0]
    for r in reports[1:]:
        c = c + r
    assert c.e_total == a.e_total


def test_report_invariants(models):
    rng = np.random.default_rng(0)
    pulses = [(float(g), int(a)) for g, a in zip(rng.uniform(0, 1e-2, 50), rng.integers(0, 65, 50))]
    r = mvm_energy(pulses, models["C"], 64).with_macs(4096)
    assert r.e_total == r.e_bl + r.e_wl
    assert r.e_total >= 0
    per = r.pulses["e_bl"] + r.pulses["e_wl"]
    assert math.fsum(per) == pytest.approx(r.e_total, rel=1e-15)
    assert r.n_pulses == 50
    assert r.e_per_mac == r.e_total / 4096


def test_per_mac_energy():
    rec = np.zeros(1, dtype=EnergyReport().pulses.dtype)
    rec["e_bl"] = 3e-15
    r = EnergyReport(rec)
    assert per_mac_energy(r, 1, 1) == r.e_total
    assert per_mac_energy(r, 3, 2) == pytest.approx(0.5e-15)
    # doubling the columns with the same per-column energy keeps the ratio
    r2 = EnergyReport(np.concatenate([rec, rec]))
    assert per_mac_energy(r2, 3, 4) == per_mac_energy(r, 3, 2)
    for dims in ((0, 1), (1, 0), (-1, 2)):
        with pytest.raises(DomainError):
            per_mac_energy(r, *dims)
    assert math.isnan(r.e_per_mac)


def test_invalid_pulses(models):
    with pytest.raises(DomainError):
        mvm_energy([(-1e-6, 1)], models["A"], 4)
    with pytest.raises(DomainError):
        mvm_energy([(1e-6, 5)], models["A"], 4, x_n=4)
    with pytest.raises(DomainError):
        mvm_energy([(1e-6, -1)], models["A"], 4)


def test_serialization(tmp_path, models):
    rec = pulse_records(np.array([1e-3, 2e-3]), np.array([3, 4]), models["C"], 64, tile=2)
    r = EnergyReport(rec, 10)
    d = report_to_dict(r, include_pulses=True)
    json.dumps(d)
    assert d["e_total_fj"] == pytest.approx(r.e_total / FJ)
    assert d["pulses"][1]["tile"] == 2 and d["pulses"][1]["pulse"] == 1
    assert report_to_dict(EnergyReport())["e_per_mac_fj"] is None
    p = tmp_path / "p.csv"
    write_pulse_csv(r, p)
    assert len(p.read_text().splitlines()) == 3
