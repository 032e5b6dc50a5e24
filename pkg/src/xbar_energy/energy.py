"""MVM energy accumulation over pulses and tiles.

For one tile with ``X_M`` physical columns the energy of a pulse train is

    E = T * sum_p (alpha * V_RB**2 * G_X[p] + X_M * P_WL * n_active[p])

where ``G_X[p]`` is the equivalent conductance of pulse p and
``n_active[p]`` the number of rows driven in that pulse.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

FJ = 1e-15

PULSE_DTYPE = np.dtype([
    ("tile", np.int32),
    ("pulse", np.int32),
    ("g_x", np.float64),  # S
    ("active", np.int32),
    ("e_bl", np.float64),  # J
    ("e_wl", np.float64),  # J
])


def _empty_pulses():
    return np.zeros(0, dtype=PULSE_DTYPE)


@dataclass(frozen=True, eq=False)
class EnergyReport:
    """Energy of one or more pulses; merge reports with ``+``.

    Totals are exactly rounded sums over the per-pulse records, so merging
    in any order gives bit-identical totals.
    """

    pulses: np.ndarray = field(default_factory=_empty_pulses)
    mac_count: int = 0

    @property
    def e_bl(self) -> float:
        return math.fsum(self.pulses["e_bl"])

    @property
    def e_wl(self) -> float:
        return math.fsum(self.pulses["e_wl"])

    @property
    def e_total(self) -> float:
        return self.e_bl + self.e_wl

    @property
    def e_per_mac(self) -> float:
        return per_mac_energy(self, self.mac_count) if self.mac_count else float("nan")

    @property
    def n_pulses(self) -> int:
        return len(self.pulses)

    def __add__(self, other: "EnergyReport") -> "EnergyReport":
        return EnergyReport(np.concatenate([self.pulses, other.pulses]),
                            self.mac_count + other.mac_count)

    def with_macs(self, mac_count: int) -> "EnergyReport":
        return EnergyReport(self.pulses, mac_count)


def merge_reports(reports) -> EnergyReport:
    reports = list(reports)
    if not reports:
        return EnergyReport()
    return EnergyReport(np.concatenate([r.pulses for r in reports]),
                        sum(r.mac_count for r in reports))


def pulse_records(g_x, active, model, x_m: int, tile: int = 0, first_pulse: int = 0):
    """Per-pulse energy records for one tile, vectorized over pulses."""
    g_x = np.asarray(g_x, dtype=float)
    active = np.asarray(active)
    if np.any(g_x < 0):
        raise DomainError("equivalent conductance must be non-negative")
    rec = np.zeros(g_x.shape[0], dtype=PULSE_DTYPE)
    rec["tile"] = tile
    rec["pulse"] = first_pulse + np.arange(g_x.shape[0])
    rec["g_x"] = g_x
    rec["active"] = active
    t = model.t_pulse
    rec["e_bl"] = t * model.alpha * model.v_rb**2 * g_x
    rec["e_wl"] = t * x_m * model.p_wl * active
    return rec


def mvm_energy(pulses, model, x_m: int, x_n: int | None = None, tile: int = 0) -> EnergyReport:
    """Energy report for a list of ``(g_x, active_count)`` pulses on one tile."""
    pulses = list(pulses)
    if not pulses:
        return EnergyReport()
    g_x, active = (np.asarray(a) for a in zip(*pulses))
    if np.any(active < 0) or (x_n is not None and np.any(active > x_n)):
        raise DomainError("active row count out of range")
    return EnergyReport(pulse_records(g_x, active, model, x_m, tile))


def per_mac_energy(report: EnergyReport, logical_rows: int, logical_cols: int | None = None) -> float:
    """Energy per logical MAC. With one argument it is taken as the MAC count."""
    macs = logical_rows if logical_cols is None else logical_rows * logical_cols
    if logical_rows < 1 or (logical_cols is not None and logical_cols < 1):
        raise DomainError("logical dimensions must be >= 1")
    return report.e_total / macs


def report_to_dict(report: EnergyReport, include_pulses=False) -> dict:
    out = {
        "e_total_fj": report.e_total / FJ,
        "e_bl_fj": report.e_bl / FJ,
        "e_wl_fj": report.e_wl / FJ,
        "mac_count": report.mac_count,
        "e_per_mac_fj": report.e_per_mac / FJ if report.mac_count else None,
        "n_pulses": report.n_pulses,
    }
    if include_pulses:
        out["pulses"] = [
            {"tile": int(r["tile"]), "pulse": int(r["pulse"]), "g_x_us": float(r["g_x"]) * 1e6,
             "active": int(r["active"]), "e_fj": float(r["e_bl"] + r["e_wl"]) / FJ}
            for r in report.pulses
        ]
    return out


def write_pulse_csv(report: EnergyReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tile", "pulse", "g_x_us", "active", "e_bl_fj", "e_wl_fj"])
        for r in report.pulses:
            w.writerow([int(r["tile"]), int(r["pulse"]), repr(float(r["g_x"]) * 1e6),
                        int(r["active"]), repr(float(r["e_bl"]) / FJ), repr(float(r["e_wl"]) / FJ)])
