"""Integer MVM requests executed on tiled crossbars.

A request ``v @ W`` (``W`` is n_in x n_out, inputs drive the rows) is mapped
to conductances, cut into ``X_N x X_M`` tiles and streamed one input bit per
pulse. Each (tile, pulse) pair is an xbar-op: the functional result is
rebuilt exactly by digital shift-add over pulses and weight slices, and the
energy of every xbar-op comes from the equivalent conductance of the tile
under that pulse's row activations.

Edge tiles are padded with g_min cells. They carry no digital weight but,
like unused programmed cells on silicon, still draw energy when their row
is driven.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import solver as _solver
from .cellmodel import CellModel, model_from_dict, model_to_dict
from .encoding import Signedness, bit_planes
from .energy import EnergyReport, pulse_records, report_to_dict
from .errors import DomainError
from .mapping import (ROLE_PAD, ConductanceTile, MappingKind, MappingScheme,
                      _levels_to_g, map_weights, scale_factor)

DEFAULT_TILE = (64, 64)


@dataclass(frozen=True)
class Placement:
    tile: int
    rows: tuple[int, int]  # logical input rows [start, stop)
    phys_cols: tuple[int, int]  # physical columns of the full mapping [start, stop)
    logical_cols: tuple[int, int]  # logical output columns touched [start, stop)


@dataclass(frozen=True)
class XbarOp:
    tile: int
    plane: np.ndarray
    pulse: int


@dataclass(frozen=True, eq=False)
class MappedMatrix:
    """A weight matrix programmed onto a set of tiles."""

    tiles: list
    placements: list
    scheme: MappingScheme
    model: CellModel
    tile_shape: tuple[int, int]
    n_in: int
    n_out: int

    @property
    def n_phys_cols(self) -> int:
        return self.n_out * self.scheme.columns_per_weight


@dataclass(frozen=True, eq=False)
class MvmRequest:
    weights: np.ndarray
    inputs: np.ndarray
    scheme: MappingScheme
    cell_model: CellModel
    tile_shape: tuple[int, int] = DEFAULT_TILE
    input_bits: int = 8
    input_signedness: Signedness = Signedness.UNSIGNED

    def __post_init__(self):
        W = np.asarray(self.weights)
        v = np.asarray(self.inputs)
        if W.ndim != 2 or v.ndim != 1 or W.shape[0] != v.shape[0]:
            raise DomainError(f"inputs of length {v.shape} do not match weights {W.shape}")
        if not 1 <= self.input_bits <= 16:
            raise DomainError("input_bits must be in [1, 16]")
        if len(self.tile_shape) != 2 or min(self.tile_shape) < 1:
            raise DomainError("tile_shape must be two positive integers")
        object.__setattr__(self, "input_signedness", Signedness(self.input_signedness))


def tile_matrix(W, tile_shape, scheme: MappingScheme, model: CellModel):
    """Map ``W`` and split the physical image into padded tiles.

    Returns ``(tiles, placements)``; tiles are ordered row-block major.
    """
    full = map_weights(W, scheme, model)
    xn, xm = tile_shape
    n_rows, n_phys = full.levels.shape
    tiles, placements = [], []
    for r0 in range(0, n_rows, xn):
        r1 = min(r0 + xn, n_rows)
        for c0 in range(0, n_phys, xm):
            c1 = min(c0 + xm, n_phys)
            levels = np.zeros((xn, xm), dtype=np.int64)
            levels[:r1 - r0, :c1 - c0] = full.levels[r0:r1, c0:c1]
            logical = np.full(xm, -1, dtype=np.int64)
            slices = np.zeros(xm, dtype=np.int64)
            roles = np.full(xm, ROLE_PAD, dtype=np.int64)
            logical[:c1 - c0] = full.col_logical[c0:c1]
            slices[:c1 - c0] = full.col_slice[c0:c1]
            roles[:c1 - c0] = full.col_role[c0:c1]
            tiles.append(ConductanceTile(
                g=_levels_to_g(levels, model, scheme.level_bits),
                levels=levels, scheme=scheme, col_logical=logical,
                col_slice=slices, col_role=roles, offset_code=full.offset_code))
            used = full.col_logical[c0:c1]
            placements.append(Placement(len(tiles) - 1, (r0, r1), (c0, c1),
                                        (int(used.min()), int(used.max()) + 1)))
    return tiles, placements


def prepare(W, scheme: MappingScheme, model: CellModel, tile_shape=DEFAULT_TILE) -> MappedMatrix:
    W = np.asarray(W)
    tiles, placements = tile_matrix(W, tile_shape, scheme, model)
    return MappedMatrix(tiles, placements, scheme, model, tuple(tile_shape), W.shape[0], W.shape[1])


def _decode_matrix(tile: ConductanceTile, placement: Placement) -> np.ndarray:
    """(X_M, n_local) integer matrix folding physical columns into logical ones."""
    first, stop = placement.logical_cols
    dec = np.zeros((tile.g.shape[1], stop - first), dtype=np.int64)
    live = np.flatnonzero(tile.col_role != ROLE_PAD)
    dec[live, tile.col_logical[live] - first] = tile.col_weight[live]
    return dec


def xbar_ops(mapped: MappedMatrix, v, input_bits, signedness=Signedness.UNSIGNED):
    """The single-pulse operations a request expands into (tile-major order)."""
    planes = bit_planes(v, input_bits, signedness)
    xn = mapped.tile_shape[0]
    for pl in mapped.placements:
        r0, r1 = pl.rows
        for p in range(input_bits):
            x = np.zeros(xn, dtype=np.uint8)
            x[:r1 - r0] = planes[p, r0:r1]
            yield XbarOp(pl.tile, x, p)


def run_vectors(mapped: MappedMatrix, V, input_bits: int, signedness=Signedness.UNSIGNED,
                method="fast", tol=_solver.DEFAULT_TOL, max_iter=_solver.DEFAULT_MAX_ITER):
    """Execute ``v @ W`` for every row ``v`` of ``V``.

    Returns ``(outputs, reports)``: an (n_vec, n_out) int64 array and one
    EnergyReport per vector.
    """
    signedness = Signedness(signedness)
    V = np.asarray(V)
    if V.ndim != 2 or V.shape[1] != mapped.n_in:
        raise DomainError(f"input batch of shape {V.shape} does not match {mapped.n_in} rows")
    n_vec = V.shape[0]
    planes = bit_planes(V, input_bits, signedness)  # (n_vec, P, n_in)
    P = input_bits
    pw = np.left_shift(np.int64(1), np.arange(P, dtype=np.int64))
    if signedness is Signedness.SIGNED:
        pw[-1] = -pw[-1]
    model = mapped.model
    xn, xm = mapped.tile_shape

    out = np.zeros((n_vec, mapped.n_out), dtype=np.int64)
    records = []
    for tile, pl in zip(mapped.tiles, mapped.placements):
        r0, r1 = pl.rows
        x = np.zeros((n_vec, P, xn), dtype=np.uint8)
        x[..., :r1 - r0] = planes[..., r0:r1]
        flat = x.reshape(n_vec * P, xn)

        # per-pulse column sums, folded over slices, then shift-added over pulses
        partial = flat.astype(np.int64) @ tile.levels
        logical = (partial @ _decode_matrix(tile, pl)).reshape(n_vec, P, -1)
        c0, c1 = pl.logical_cols
        out[:, c0:c1] += np.einsum("vpl,p->vl", logical, pw)

        g_x = _solver.pulse_conductances(tile.g, model.r_wire, model.v_rb, flat,
                                         method=method, tol=tol, max_iter=max_iter)
        rec = pulse_records(g_x, flat.sum(axis=1), model, xm, tile=pl.tile)
        records.append(rec.reshape(n_vec, P))

    if mapped.tiles[0].offset_code:
        out -= mapped.tiles[0].offset_code * V.astype(np.int64).sum(axis=1, keepdims=True)

    macs = mapped.n_in * mapped.n_out
    stacked = np.concatenate(records, axis=1)  # (n_vec, n_tiles * P)
    reports = [EnergyReport(stacked[k].copy(), macs) for k in range(n_vec)]
    return out, reports


def execute_mvm(req: MvmRequest, method="fast", tol=_solver.DEFAULT_TOL,
                max_iter=_solver.DEFAULT_MAX_ITER):
    """Run one request; returns ``(output, report)``."""
    mapped = prepare(req.weights, req.scheme, req.cell_model, req.tile_shape)
    out, reports = run_vectors(mapped, np.asarray(req.inputs)[None, :], req.input_bits,
                               req.input_signedness, method=method, tol=tol, max_iter=max_iter)
    return out[0], reports[0]


def analog_readout(tile: ConductanceTile, plane, res: _solver.SolveResult) -> np.ndarray:
    """Column sense currents (A) of a solved xbar-op."""
    plane = np.asarray(plane)
    if plane.shape != (tile.g.shape[0],) or res.i_col.shape != (tile.g.shape[1],):
        raise DomainError("plane / solve result do not match the tile")
    return res.i_col


def decode_currents(tile: ConductanceTile, plane, currents, model: CellModel) -> np.ndarray:
    """Ideal (infinite precision) conversion of column currents to digit sums.

    Removes the g_min floor of the active rows and divides by one level step.
    """
    n_active = int(np.asarray(plane).sum())
    s = scale_factor(model, tile.scheme.level_bits)
    t = (np.asarray(currents) / model.v_rb - n_active * model.g_min) / s
    return np.rint(t).astype(np.int64)


# -- JSON surface for batch mode ---------------------------------------------

def scheme_to_dict(scheme: MappingScheme) -> dict:
    return {"kind": scheme.kind.value, "cell_bits": scheme.cell_bits,
            "weight_bits": scheme.weight_bits, "signed": scheme.signed}


def scheme_from_dict(d) -> MappingScheme:
    return MappingScheme(MappingKind(d["kind"]), int(d["cell_bits"]), int(d["weight_bits"]),
                         bool(d.get("signed", True)))


def request_to_dict(req: MvmRequest) -> dict:
    return {
        "weights": np.asarray(req.weights).tolist(),
        "inputs": np.asarray(req.inputs).tolist(),
        "scheme": scheme_to_dict(req.scheme),
        "cell_model": model_to_dict(req.cell_model),
        "tile_shape": list(req.tile_shape),
        "input_bits": req.input_bits,
        "input_signedness": req.input_signedness.value,
    }


def request_from_dict(d, cell_model: CellModel | None = None) -> MvmRequest:
    """Inverse of :func:`request_to_dict`; ``cell_model`` fills a missing model."""
    model = model_from_dict(d["cell_model"]) if "cell_model" in d else cell_model
    if model is None:
        raise DomainError("request has no cell_model and none was supplied")
    return MvmRequest(
        weights=np.asarray(d["weights"], dtype=np.int64),
        inputs=np.asarray(d["inputs"], dtype=np.int64),
        scheme=scheme_from_dict(d["scheme"]),
        cell_model=model,
        tile_shape=tuple(d.get("tile_shape", DEFAULT_TILE)),
        input_bits=int(d.get("input_bits", 8)),
        input_signedness=Signedness(d.get("input_signedness", "unsigned")),
    )


def response_to_dict(output, report: EnergyReport, include_pulses=False) -> dict:
    return {"output": np.asarray(output).tolist(),
            "energy": report_to_dict(report, include_pulses=include_pulses)}


def n_tiles(n_in: int, n_out: int, scheme: MappingScheme, tile_shape=DEFAULT_TILE) -> int:
    xn, xm = tile_shape
    return math.ceil(n_in / xn) * math.ceil(n_out * scheme.columns_per_weight / xm)
