"""Calibrated 1T1R cell parameters and the single-cell pulse energy model.

A read pulse of length T drives the bit line at V_RB and the word line at
V_RW. The energy a cell draws during one pulse is

    E = T * x * (alpha * V_C**2 * G_C + P_WL)

with x the 1-bit input, V_C the steady-state voltage across the cell and
G_C its apparent conductance. ``alpha`` scales the steady-state BL power to
the measured average (transients, capacitances); ``P_WL`` is the average
gate-drive power, independent of the resistive state.

Fields are stored in the human-scale units used by ``cell-model.json``
(µS, ns, µW, fF). Formulas use the SI properties (``g_min``, ``t_pulse``...).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CalibrationQualityError, DomainError, FitError, SchemaError

US = 1e-6
NS = 1e-9
UW = 1e-6
FJ = 1e-15
FF = 1e-15


@dataclass(frozen=True)
class PulseSpec:
    t_pulse_ns: float = 10.0
    t_active_ns: float = 4.0
    t_rf_ns: float = 1.0
    v_rb: float = 0.2
    v_rw: float = 1.2

    def __post_init__(self):
        if not self.t_active_ns + 2 * self.t_rf_ns > 0:
            raise DomainError("t_active + 2*t_rf must be positive")
        if self.t_pulse_ns < self.t_active_ns + 2 * self.t_rf_ns:
            raise DomainError("t_pulse must cover t_active + 2*t_rf")
        if self.v_rb <= 0 or self.v_rw <= 0:
            raise DomainError("pulse amplitudes must be positive")

    @property
    def t_pulse(self) -> float:
        """Pulse period in seconds."""
        return self.t_pulse_ns * NS


@dataclass(frozen=True)
class CellModel:
    name: str
    pulse: PulseSpec
    g_min_us: float
    g_max_us: float
    alpha: float
    p_wl_uw: float
    r_wire_ohm: float = 0.0
    c_bl_ff: float = 0.0
    c_wl_ff: float = 0.0
    c_sl_ff: float = 0.0

    def __post_init__(self):
        if not 0 < self.g_min_us < self.g_max_us:
            raise DomainError("need 0 < g_min < g_max")
        if self.alpha < 0:
            raise DomainError("alpha must be >= 0")
        if self.p_wl_uw < 0:
            raise DomainError("p_wl must be >= 0")
        if self.r_wire_ohm < 0:
            raise DomainError("r_wire must be >= 0")

    # SI views used by every formula
    @property
    def g_min(self) -> float:
        return self.g_min_us * US

    @property
    def g_max(self) -> float:
        return self.g_max_us * US

    @property
    def p_wl(self) -> float:
        return self.p_wl_uw * UW

    @property
    def r_wire(self) -> float:
        return self.r_wire_ohm

    @property
    def v_rb(self) -> float:
        return self.pulse.v_rb

    @property
    def t_pulse(self) -> float:
        return self.pulse.t_pulse


def cell_pulse_energy(model: CellModel, g_c, v_c, x):
    """Energy in joules drawn by one cell during one pulse.

    ``g_c`` (S), ``v_c`` (V) and ``x`` (0/1) broadcast like numpy arrays.
    """
    g_c = np.asarray(g_c, dtype=float)
    v_c = np.asarray(v_c, dtype=float)
    x = np.asarray(x)
    if np.any(g_c < 0):
        raise DomainError("cell conductance must be non-negative")
    if np.any(v_c < 0) or np.any(v_c > model.v_rb):
        raise DomainError(f"cell voltage must lie in [0, {model.v_rb}] V")
    if np.any((x != 0) & (x != 1)):
        raise DomainError("input bit must be 0 or 1")
    e = model.t_pulse * x * (model.alpha * v_c**2 * g_c + model.p_wl)
    return e if e.ndim else float(e)


@dataclass(frozen=True)
class CalibrationFit:
    """Result of fitting ``alpha`` and ``p_wl`` to a conductance sweep."""

    alpha: float
    p_wl: float  # W
    rms_residual: float  # J
    max_abs_residual: float  # J
    g_min: float  # S, smallest swept conductance
    g_max: float  # S, largest swept conductance
    n_points: int


def fit_cell_params(sweep, pulse: PulseSpec) -> CalibrationFit:
    """Least-squares line through a sweep of (G in S, E in J) pairs.

    The pulse energy is affine in G at V_C = V_RB, so the slope gives
    ``alpha * T * V_RB**2`` and the intercept ``T * P_WL``.
    """
    pts = np.asarray(list(sweep), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError("sweep must be a sequence of (conductance, energy) pairs")
    g = pts[:, 0] / US
    e = pts[:, 1] / FJ
    if np.unique(g).size < 2:
        raise FitError("need at least 2 distinct conductance points")
    if np.any(e < 0) or np.any(g < 0):
        raise FitError("sweep values must be non-negative")

    design = np.column_stack([g, np.ones_like(g)])
    (slope, intercept), *_ = np.linalg.lstsq(design, e, rcond=None)
    resid = (e - (slope * g + intercept)) * FJ

    # a true zero parameter comes back as +-rounding noise; only that much is forgiven
    noise = 64 * np.finfo(float).eps * np.abs(e).max()
    if -noise / np.ptp(g) <= slope < 0:
        slope = 0.0
    if -noise <= intercept < 0:
        intercept = 0.0

    t = pulse.t_pulse
    alpha = slope * (FJ / US) / (t * pulse.v_rb**2)
    p_wl = intercept * FJ / t
    if alpha < 0 or p_wl < 0:
        raise CalibrationQualityError(
            f"fit produced negative parameters (alpha={alpha:.4g}, p_wl={p_wl:.4g} W)",
            alpha, p_wl)
    return CalibrationFit(
        alpha=float(alpha),
        p_wl=float(p_wl),
        rms_residual=float(math.sqrt(np.mean(resid**2))),
        max_abs_residual=float(np.max(np.abs(resid))),
        g_min=float(pts[:, 0].min()),
        g_max=float(pts[:, 0].max()),
        n_points=len(g),
    )


def sweep_from_params(alpha, p_wl, pulse: PulseSpec, g_values):
    """Noiseless (G, E) pairs for given parameters; inverse of the fit."""
    g = np.asarray(g_values, dtype=float)
    e = pulse.t_pulse * (alpha * pulse.v_rb**2 * g + p_wl)
    return list(zip(g.tolist(), e.tolist()))


def model_from_fit(fit: CalibrationFit, pulse: PulseSpec, name: str, *,
                   g_min_us=None, g_max_us=None, r_wire_ohm=0.0,
                   c_bl_ff=0.0, c_wl_ff=0.0, c_sl_ff=0.0) -> CellModel:
    """Build a CellModel; the conductance range defaults to the swept range."""
    return CellModel(
        name=name,
        pulse=pulse,
        g_min_us=fit.g_min / US if g_min_us is None else g_min_us,
        g_max_us=fit.g_max / US if g_max_us is None else g_max_us,
        alpha=fit.alpha,
        p_wl_uw=fit.p_wl / UW,
        r_wire_ohm=r_wire_ohm,
        c_bl_ff=c_bl_ff,
        c_wl_ff=c_wl_ff,
        c_sl_ff=c_sl_ff,
    )


# cell-model.json: key -> (owner, attribute); owner "pulse" or "cell"
_JSON_FIELDS = {
    "name": ("cell", "name"),
    "v_rb_volt": ("pulse", "v_rb"),
    "v_rw_volt": ("pulse", "v_rw"),
    "t_pulse_ns": ("pulse", "t_pulse_ns"),
    "t_active_ns": ("pulse", "t_active_ns"),
    "t_rf_ns": ("pulse", "t_rf_ns"),
    "g_min_us": ("cell", "g_min_us"),
    "g_max_us": ("cell", "g_max_us"),
    "alpha": ("cell", "alpha"),
    "p_wl_uw": ("cell", "p_wl_uw"),
    "r_wire_ohm": ("cell", "r_wire_ohm"),
    "c_bl_ff": ("cell", "c_bl_ff"),
    "c_wl_ff": ("cell", "c_wl_ff"),
    "c_sl_ff": ("cell", "c_sl_ff"),
}


def model_to_dict(model: CellModel) -> dict:
    out = {}
    for key, (owner, attr) in _JSON_FIELDS.items():
        src = model.pulse if owner == "pulse" else model
        out[key] = getattr(src, attr)
    return out


def model_from_dict(data) -> CellModel:
    if not isinstance(data, dict):
        raise SchemaError("<root>", "expected a JSON object")
    values = {"pulse": {}, "cell": {}}
    for key, (owner, attr) in _JSON_FIELDS.items():
        if key not in data:
            raise SchemaError(key, "missing field")
        v = data[key]
        if key == "name":
            if not isinstance(v, str):
                raise SchemaError(key, "expected a string")
        elif isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(key, "expected a number")
        elif not math.isfinite(v):
            raise SchemaError(key, "must be finite")
        values[owner][attr] = v

    p = values["pulse"]
    if p["v_rb"] <= 0:
        raise SchemaError("v_rb_volt", "must be positive")
    if p["v_rw"] <= 0:
        raise SchemaError("v_rw_volt", "must be positive")
    if p["t_active_ns"] + 2 * p["t_rf_ns"] <= 0:
        raise SchemaError("t_active_ns", "t_active + 2*t_rf must be positive")
    if p["t_pulse_ns"] < p["t_active_ns"] + 2 * p["t_rf_ns"]:
        raise SchemaError("t_pulse_ns", "must be >= t_active + 2*t_rf")
    c = values["cell"]
    if c["g_min_us"] <= 0:
        raise SchemaError("g_min_us", "must be positive")
    if c["g_max_us"] <= c["g_min_us"]:
        raise SchemaError("g_max_us", "must exceed g_min_us")
    for key in ("alpha", "p_wl_uw", "r_wire_ohm"):
        if c[key] < 0:
            raise SchemaError(key, "must be >= 0")
    return CellModel(pulse=PulseSpec(**p), **c)


def load_cell_model(path) -> CellModel:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("<root>", f"invalid JSON: {exc}") from exc
    return model_from_dict(data)


def store_cell_model(model: CellModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def read_sweep_csv(path):
    """Read a ``g_us,e_fj`` sweep file as (µS, fJ) pairs, file units kept."""
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["g_us", "e_fj"]:
            raise SchemaError("header", f"{path}: line 1: expected 'g_us,e_fj'")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise SchemaError("row", f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                g, e = float(row[0]), float(row[1])
            except ValueError:
                raise SchemaError("row", f"{path}: line {lineno}: not a number: {row!r}") from None
            if not (math.isfinite(g) and math.isfinite(e)):
                raise SchemaError("row", f"{path}: line {lineno}: non-finite value")
            points.append((g, e))
    return points


def sweep_to_si(points):
    """Convert (µS, fJ) pairs to (S, J)."""
    return [(g * US, e * FJ) for g, e in points]
