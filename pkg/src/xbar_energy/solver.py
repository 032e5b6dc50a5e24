"""Steady-state solve of a 1T1R crossbar with wire parasitics.

Topology (rows j = 0..N-1 carry inputs, columns i = 0..M-1 are sensed):

* row line j is driven at its left end with ``x_j * V_RB`` through one wire
  segment, then one segment between each pair of adjacent cells;
* column line i runs top to bottom, one segment between adjacent cells, and
  one segment from the last cell into a virtual ground at 0 V;
* the cell (j, i) joins row node (j, i) to column node (j, i). Cells on
  inactive rows are off (conductance 0).

Every wire segment has resistance ``r_wire``. With ``r_wire == 0`` all row
nodes sit at the driver voltage and all column nodes at ground, which gives
the analytic fast path.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DomainError

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000
# unknown count up to which the oracle factors a dense matrix
DENSE_LIMIT = 2048
# cells per relaxation batch; bounds memory, does not affect results
CHUNK_CELLS = 1 << 20


@dataclass(frozen=True, eq=False)
class CrossbarCircuit:
    g: np.ndarray  # (N, M) cell conductances in S, zero on inactive rows
    r_wire: float
    v_rb: float
    active_rows: np.ndarray  # (N,) 0/1

    @property
    def shape(self):
        return self.g.shape

    @property
    def parasitic_free(self) -> bool:
        return self.r_wire == 0

    @property
    def n_nodes(self) -> int:
        n, m = self.g.shape
        return 2 * n * m

    @property
    def v_drive(self) -> np.ndarray:
        return self.active_rows * self.v_rb


@dataclass(frozen=True, eq=False)
class SolveResult:
    v_row: np.ndarray  # (N, M) row-line node voltages
    v_col: np.ndarray  # (N, M) column-line node voltages
    p_cell: np.ndarray  # (N, M) per-cell dissipation, W
    g_x: float  # equivalent conductance, S
    kcl_residual: float  # max node current imbalance, A
    iterations: int
    i_col: np.ndarray  # (M,) current delivered into each column's sense node
    p_drive: float  # power delivered by the row drivers, W
    p_wire: float  # power dissipated in the wire segments, W
    method: str


def build_circuit(tile, model, active_rows) -> CrossbarCircuit:
    """Crossbar circuit for one pulse. ``tile`` is a ConductanceTile or an array."""
    g = np.asarray(getattr(tile, "g", tile), dtype=float)
    x = np.asarray(active_rows)
    if g.ndim != 2:
        raise DomainError("conductance matrix must be 2-D")
    if x.shape != (g.shape[0],):
        raise DomainError(f"activation length {x.shape} does not match {g.shape[0]} rows")
    if np.any((x != 0) & (x != 1)):
        raise DomainError("activations must be 0/1")
    if np.any(g < 0):
        raise DomainError("conductances must be non-negative")
    x = x.astype(np.uint8)
    return CrossbarCircuit(g=g * x[:, None], r_wire=float(model.r_wire),
                           v_rb=float(model.v_rb), active_rows=x)


def equivalent_conductance(res: SolveResult, v_rb: float) -> float:
    """Conductance that dissipates the summed cell power when driven at V_RB."""
    return float(res.p_cell.sum() / v_rb**2)


# -- node bookkeeping shared by both solvers ---------------------------------

def kcl_imbalance(g, gw, v_drive, v_row, v_col):
    """Net current into every row and column node, arrays of shape (..., N, M)."""
    i_cell = g * (v_row - v_col)
    left = np.concatenate([v_drive[..., :, None], v_row[..., :, :-1]], axis=-1)
    r_in = gw * (left - v_row)
    r_in[..., :, :-1] += gw * (v_row[..., :, 1:] - v_row[..., :, :-1])
    r_res = r_in - i_cell

    below = np.concatenate([v_col[..., 1:, :], np.zeros_like(v_col[..., :1, :])], axis=-2)
    c_in = gw * (below - v_col)
    c_in[..., 1:, :] += gw * (v_col[..., :-1, :] - v_col[..., 1:, :])
    c_res = c_in + i_cell
    return r_res, c_res


def kcl_bound(c: CrossbarCircuit, tol=DEFAULT_TOL) -> float:
    """Current imbalance (A) allowed at a node for a relative voltage tolerance.

    A voltage error of ``tol * V_RB`` at one node moves its current balance
    by at most that error times the node's largest self-conductance.
    """
    if c.parasitic_free:
        return 0.0
    g_line = max(c.g.sum(axis=1).max(initial=0.0), c.g.sum(axis=0).max(initial=0.0))
    return tol * c.v_rb * (2.0 / c.r_wire + g_line)


def oracle_kcl_bound(c: CrossbarCircuit) -> float:
    """Residual allowed for a direct solve: 1e-10 of the total cell current,
    floored at what double precision can resolve at the stiffest node."""
    if c.parasitic_free:
        return 0.0
    g_line = max(c.g.sum(axis=1).max(initial=0.0), c.g.sum(axis=0).max(initial=0.0))
    floor = 64 * np.finfo(float).eps * c.v_rb * (2.0 / c.r_wire + g_line)
    return max(1e-10 * c.v_rb * float(c.g.sum()), floor)


def _wire_power(gw, v_drive, v_row, v_col):
    p = gw * (v_drive - v_row[:, 0]) ** 2
    p = p.sum() + gw * (np.diff(v_row, axis=1) ** 2).sum()
    p += gw * (np.diff(v_col, axis=0) ** 2).sum()
    p += gw * (v_col[-1, :] ** 2).sum()
    return float(p)


def _finish(c: CrossbarCircuit, v_row, v_col, iterations, method) -> SolveResult:
    g = c.g
    p_cell = g * (v_row - v_col) ** 2
    if c.parasitic_free:
        i_col = (g * c.v_rb).sum(axis=0)
        p_drive = float(p_cell.sum())
        p_wire = 0.0
        resid = 0.0
    else:
        gw = 1.0 / c.r_wire
        vd = c.v_drive
        i_col = gw * v_col[-1, :]
        # inactive row lines are isolated, so all driver current reaches ground;
        # this avoids the cancellation in (V_drive - v_row) for tiny currents
        p_drive = float(c.v_rb * i_col.sum())
        p_wire = _wire_power(gw, vd, v_row, v_col)
        r_res, c_res = kcl_imbalance(g, gw, vd, v_row, v_col)
        resid = float(max(np.abs(r_res).max(), np.abs(c_res).max()))
    return SolveResult(
        v_row=v_row, v_col=v_col, p_cell=p_cell,
        g_x=float(g.sum()) if c.parasitic_free else float(p_cell.sum() / c.v_rb**2),
        kcl_residual=resid, iterations=iterations,
        i_col=i_col, p_drive=p_drive, p_wire=p_wire, method=method,
    )


def _analytic(c: CrossbarCircuit, method: str) -> SolveResult:
    n, m = c.shape
    v_row = np.repeat(c.v_drive[:, None].astype(float), m, axis=1)
    v_col = np.zeros((n, m))
    return _finish(c, v_row, v_col, 0, method)


# -- direct nodal analysis ---------------------------------------------------

def nodal_system(c: CrossbarCircuit):
    """Reduced nodal matrix (drivers and ground eliminated) and right-hand side.

    Unknowns are ordered row nodes first (j*M + i), then column nodes.
    """
    n, m = c.shape
    gw = 1.0 / c.r_wire
    nm = n * m
    idx = np.arange(nm).reshape(n, m)
    a_list, b_list, w_list = [], [], []

    def edge(a, b, w):
        a_list.append(a.ravel())
        b_list.append(b.ravel())
        w_list.append(np.broadcast_to(w, a.shape).ravel())

    edge(idx[:, :-1], idx[:, 1:], gw)  # row wires
    edge(nm + idx[:-1, :], nm + idx[1:, :], gw)  # column wires
    edge(idx, nm + idx, c.g)  # cells

    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    w = np.concatenate(w_list).astype(float)
    diag = np.zeros(2 * nm)
    np.add.at(diag, a, w)
    np.add.at(diag, b, w)
    diag[idx[:, 0]] += gw  # driver segment
    diag[nm + idx[-1, :]] += gw  # ground segment

    rows = np.concatenate([a, b, np.arange(2 * nm)])
    cols = np.concatenate([b, a, np.arange(2 * nm)])
    vals = np.concatenate([-w, -w, diag])
    A = sp.csc_matrix((vals, (rows, cols)), shape=(2 * nm, 2 * nm))
    rhs = np.zeros(2 * nm)
    rhs[idx[:, 0]] = gw * c.v_drive
    return A, rhs


def solve_dense_oracle(c: CrossbarCircuit) -> SolveResult:
    """Reference solve by direct LU factorization of the full nodal system."""
    if not np.all(np.isfinite(c.g)):
        raise DomainError("circuit has non-finite conductances")
    if c.parasitic_free:
        return _analytic(c, "oracle")
    n, m = c.shape
    A, rhs = nodal_system(c)
    nm = n * m
    v = np.zeros(A.shape[0])
    # lines without a single conducting cell carry no current: a row sits at
    # its driver voltage and a column at ground, exactly
    dead_row = c.g.sum(axis=1) == 0
    dead_col = c.g.sum(axis=0) == 0
    v[:nm].reshape(n, m)[dead_row] = c.v_drive[dead_row, None]
    live = A.diagonal() > 0
    live[:nm].reshape(n, m)[dead_row] = False
    live[nm:].reshape(n, m)[:, dead_col] = False
    if not live.any():
        return _finish(c, v[:nm].reshape(n, m), v[nm:].reshape(n, m), 1, "oracle")
    if live.all():
        A_live, rhs_live = A, rhs
    else:
        A_live = A[live][:, live]
        rhs_live = rhs[live]
    if A_live.shape[0] <= DENSE_LIMIT:
        v[live] = np.linalg.solve(A_live.toarray(), rhs_live)
    else:
        v[live] = spla.splu(A_live).solve(rhs_live)
    return _finish(c, v[:nm].reshape(n, m), v[nm:].reshape(n, m), 1, "oracle")


# -- line relaxation ---------------------------------------------------------

def _thomas_factor(diag, off):
    """Factor tridiagonal systems with constant off-diagonal ``off`` (last axis)."""
    n = diag.shape[-1]
    cp = np.empty_like(diag)
    inv = np.empty_like(diag)
    inv[..., 0] = 1.0 / diag[..., 0]
    cp[..., 0] = off * inv[..., 0]
    for i in range(1, n):
        inv[..., i] = 1.0 / (diag[..., i] - off * cp[..., i - 1])
        cp[..., i] = off * inv[..., i]
    return cp, inv


def _thomas_solve(cp, inv, off, rhs):
    n = rhs.shape[-1]
    x = np.empty_like(rhs)
    x[..., 0] = rhs[..., 0] * inv[..., 0]
    for i in range(1, n):
        x[..., i] = (rhs[..., i] - off * x[..., i - 1]) * inv[..., i]
    for i in range(n - 2, -1, -1):
        x[..., i] -= cp[..., i] * x[..., i + 1]
    return x


def relax(g, gw, v_drive, v_rb, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Alternate row-line and column-line tridiagonal solves until converged.

    ``g`` has shape (B, N, M) (cell conductances, already masked), ``v_drive``
    shape (B, N). Each batch element stops on its own once its largest node
    update falls below ``tol * V_RB``, so results do not depend on what else
    shares the batch. Returns ``(v_row, v_col, iterations)`` with per-element
    sweep counts.
    """
    B, n, m = g.shape
    off = -gw

    # row lines: driver at i = 0, open far end
    d_row = g + 2 * gw
    d_row[..., -1] -= gw
    # column lines (stored transposed, (B, M, N)): open top, ground at bottom
    gt = np.ascontiguousarray(g.transpose(0, 2, 1))
    d_col = gt + 2 * gw
    d_col[..., 0] -= gw
    row_cp, row_inv = _thomas_factor(d_row, off)
    col_cp, col_inv = _thomas_factor(d_col, off)

    out_row = np.empty((B, n, m))
    out_colT = np.empty((B, m, n))
    iters = np.zeros(B, dtype=np.int64)
    todo = np.arange(B)
    v_row = np.repeat(v_drive[..., None], m, axis=-1).astype(float)
    v_colT = np.zeros((B, m, n))
    drive_term = gw * v_drive
    g_w = g
    limit = tol * v_rb
    delta = np.full(B, np.inf)
    for it in range(1, max_iter + 1):
        rhs = g_w * v_colT.transpose(0, 2, 1)
        rhs[..., 0] += drive_term
        new_row = _thomas_solve(row_cp, row_inv, off, rhs)
        new_colT = _thomas_solve(col_cp, col_inv, off, gt * new_row.transpose(0, 2, 1))
        delta = np.maximum(np.abs(new_row - v_row).max(axis=(1, 2)),
                           np.abs(new_colT - v_colT).max(axis=(1, 2)))
        v_row, v_colT = new_row, new_colT
        done = delta < limit
        if done.any():
            ids = todo[done]
            out_row[ids] = v_row[done]
            out_colT[ids] = v_colT[done]
            iters[ids] = it
            if done.all():
                return out_row, np.ascontiguousarray(out_colT.transpose(0, 2, 1)), iters
            keep = ~done
            todo = todo[keep]
            v_row, v_colT = v_row[keep], v_colT[keep]
            g_w, gt = g_w[keep], gt[keep]
            row_cp, row_inv = row_cp[keep], row_inv[keep]
            col_cp, col_inv = col_cp[keep], col_inv[keep]
            drive_term = drive_term[keep]
            delta = delta[keep]
    worst = float(delta.max())
    raise ConvergenceError(
        f"line relaxation did not converge in {max_iter} sweeps "
        f"(last update {worst:.3g} V)", residual=worst, iterations=max_iter)


def solve_fast(c: CrossbarCircuit, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> SolveResult:
    if not tol > 0:
        raise DomainError("tol must be positive")
    if c.parasitic_free:
        return _analytic(c, "fast")
    v_row, v_col, it = relax(c.g[None], 1.0 / c.r_wire, c.v_drive[None].astype(float),
                             c.v_rb, tol, max_iter)
    return _finish(c, v_row[0], v_col[0], int(it[0]), "fast")


def solve(c: CrossbarCircuit, method="fast", tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    if method == "oracle":
        return solve_dense_oracle(c)
    return solve_fast(c, tol, max_iter)


def pulse_conductances(g, r_wire, v_rb, planes, method="fast", tol=DEFAULT_TOL,
                       max_iter=DEFAULT_MAX_ITER, return_currents=False):
    """Equivalent conductance of one tile for a batch of activation planes.

    ``g`` is the (N, M) tile, ``planes`` has shape (P, N). Returns ``g_x`` of
    shape (P,), and the (P, M) column currents if asked.
    """
    g = np.asarray(g, dtype=float)
    planes = np.asarray(planes)
    P = planes.shape[0]
    x = planes.astype(float)
    if r_wire == 0:
        g_x = x @ g.sum(axis=1)
        if return_currents:
            return g_x, v_rb * (x @ g)
        return g_x

    g_x = np.zeros(P)
    i_col = np.zeros((P, g.shape[1]))
    busy = np.flatnonzero(planes.any(axis=1))
    if busy.size:
        if method == "oracle":
            for p in busy:
                c = CrossbarCircuit(g * x[p][:, None], float(r_wire), float(v_rb),
                                    planes[p].astype(np.uint8))
                res = solve_dense_oracle(c)
                g_x[p] = res.g_x
                i_col[p] = res.i_col
        else:
            gw = 1.0 / r_wire
            step = max(1, CHUNK_CELLS // g.size)
            for k in range(0, busy.size, step):
                sel = busy[k:k + step]
                gb = g[None] * x[sel][:, :, None]
                v_row, v_col, _ = relax(gb, gw, x[sel] * v_rb, v_rb, tol, max_iter)
                p_cell = gb * (v_row - v_col) ** 2
                g_x[sel] = p_cell.sum(axis=(1, 2)) / v_rb**2
                i_col[sel] = gw * v_col[:, -1, :]
    if return_currents:
        return g_x, i_col
    return g_x


def dump_voltages_csv(res: SolveResult, path) -> None:
    """Write node voltages as ``line,row,col,volt`` rows for external inspection."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line", "row", "col", "volt"])
        for name, v in (("row", res.v_row), ("col", res.v_col)):
            for (j, i), val in np.ndenumerate(v):
                w.writerow([name, j, i, repr(float(val))])
