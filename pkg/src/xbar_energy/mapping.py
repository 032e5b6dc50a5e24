"""Integer weight matrices to crossbar conductances.

Two schemes are supported:

* bias: the weight is shifted into offset binary, ``U = W + 2**(B-1)``, and
  the code is stored directly. The offset is removed digitally after
  accumulation, so a zero weight sits at the middle of the range.
* differential: the magnitude goes to a plus or a minus column depending on
  the sign; the other column of the pair stays at ``g_min``.

Codes wider than one cell are split into ``c``-bit digits, least
significant slice in the lowest physical column. A digit ``d`` is stored as
``g_min + d * s`` with ``s = (g_max - g_min) / (2**c - 1)``.

Physical column layout for logical column ``l`` with ``S`` slices:
bias uses columns ``l*S + k``; differential uses ``l*2S + k`` (plus) and
``l*2S + S + k`` (minus).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .cellmodel import CellModel
from .errors import DecodeError, DomainError

ROLE_SINGLE = 0
ROLE_PLUS = 1
ROLE_MINUS = 2
ROLE_PAD = 3
ROLE_SIGN = np.array([1, 1, -1, 0], dtype=np.int64)

# tolerance on the normalized level index before a cell counts as off-grid
GRID_TOL = 1e-6


class MappingKind(enum.Enum):
    BIAS = "bias"
    DIFFERENTIAL = "diff"


@dataclass(frozen=True)
class MappingScheme:
    kind: MappingKind
    cell_bits: int
    weight_bits: int
    signed: bool = True

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", MappingKind(self.kind))
        if self.cell_bits < 1:
            raise DomainError("cell_bits must be >= 1")
        if self.weight_bits < self.cell_bits:
            raise DomainError("weight_bits must be >= cell_bits")
        if self.weight_bits > 16:
            raise DomainError("weight_bits must be <= 16")

    @property
    def n_slices(self) -> int:
        b, c = self.weight_bits, self.cell_bits
        if self.kind is MappingKind.DIFFERENTIAL and self.signed:
            return max(1, math.ceil((b - 1) / c))
        return math.ceil(b / c)

    @property
    def level_bits(self) -> int:
        """Bits programmed per cell; a lone differential slice holds only B-1 bits."""
        if self.kind is MappingKind.DIFFERENTIAL and self.signed:
            return max(1, min(self.cell_bits, self.weight_bits - 1))
        return self.cell_bits

    @property
    def columns_per_weight(self) -> int:
        if self.kind is MappingKind.DIFFERENTIAL:
            return 2 * self.n_slices
        return self.n_slices

    @property
    def offset_code(self) -> int:
        if self.kind is MappingKind.BIAS and self.signed:
            return 1 << (self.weight_bits - 1)
        return 0

    @property
    def weight_range(self) -> tuple[int, int]:
        """Inclusive (lo, hi) range of representable weights."""
        b = self.weight_bits
        if not self.signed:
            return 0, (1 << b) - 1
        if self.kind is MappingKind.BIAS:
            return -(1 << (b - 1)), (1 << (b - 1)) - 1
        # sign-magnitude: |W| must fit in B-bit two's complement
        return -((1 << (b - 1)) - 1), (1 << (b - 1)) - 1


@dataclass(frozen=True, eq=False)
class ConductanceTile:
    """Physical crossbar image plus the metadata to decode it digitally.

    ``g`` is in siemens, shape (rows, physical columns). ``levels`` holds the
    programmed digit of every cell (0 for g_min).
    """

    g: np.ndarray
    levels: np.ndarray
    scheme: MappingScheme
    col_logical: np.ndarray
    col_slice: np.ndarray
    col_role: np.ndarray
    offset_code: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape

    @property
    def col_weight(self) -> np.ndarray:
        """Signed digital weight of every physical column (0 for padding)."""
        return ROLE_SIGN[self.col_role] << (self.scheme.level_bits * self.col_slice)


def scale_factor(model: CellModel, cell_bits: int) -> float:
    """Conductance step between adjacent cell levels, in siemens."""
    if cell_bits < 1:
        raise DomainError("cell_bits must be >= 1")
    return (model.g_max - model.g_min) / ((1 << cell_bits) - 1)


def _as_weights(W, scheme: MappingScheme) -> np.ndarray:
    W = np.asarray(W)
    if W.ndim != 2 or W.size == 0:
        raise DomainError("weights must be a non-empty 2-D matrix")
    if not np.issubdtype(W.dtype, np.integer):
        if not np.all(np.isfinite(W)) or np.any(W != np.round(W)):
            raise DomainError("weights must be integers")
    W = W.astype(np.int64)
    lo, hi = scheme.weight_range
    if W.min() < lo or W.max() > hi:
        raise DomainError(
            f"weights outside [{lo}, {hi}] for {scheme.weight_bits}-bit "
            f"{'signed' if scheme.signed else 'unsigned'} {scheme.kind.value} mapping")
    return W


def _digits(code: np.ndarray, cell_bits: int, n_slices: int) -> np.ndarray:
    """Split non-negative codes into base-2**c digits, LSB first (last axis)."""
    shifts = cell_bits * np.arange(n_slices)
    return (code[..., None] >> shifts) & ((1 << cell_bits) - 1)


def _levels_to_g(levels: np.ndarray, model: CellModel, cell_bits: int) -> np.ndarray:
    s = scale_factor(model, cell_bits)
    g = model.g_min + levels * s
    # no epsilon excursions past the device range
    return np.clip(g, model.g_min, model.g_max)


def _make_tile(levels, scheme, model, logical, slices, roles, offset):
    return ConductanceTile(
        g=_levels_to_g(levels, model, scheme.level_bits),
        levels=levels,
        scheme=scheme,
        col_logical=logical,
        col_slice=slices,
        col_role=roles,
        offset_code=offset,
    )


def map_bias(W, scheme: MappingScheme, model: CellModel) -> ConductanceTile:
    if scheme.kind is not MappingKind.BIAS:
        raise DomainError("map_bias needs a bias scheme")
    W = _as_weights(W, scheme)
    n_rows, n_cols = W.shape
    S = scheme.n_slices
    code = W + scheme.offset_code
    levels = _digits(code, scheme.level_bits, S).reshape(n_rows, n_cols * S)
    logical = np.repeat(np.arange(n_cols), S)
    slices = np.tile(np.arange(S), n_cols)
    roles = np.full(n_cols * S, ROLE_SINGLE, dtype=np.int64)
    return _make_tile(levels, scheme, model, logical, slices, roles, scheme.offset_code)


def map_differential(W, scheme: MappingScheme, model: CellModel) -> ConductanceTile:
    if scheme.kind is not MappingKind.DIFFERENTIAL:
        raise DomainError("map_differential needs a differential scheme")
    W = _as_weights(W, scheme)
    n_rows, n_cols = W.shape
    S = scheme.n_slices
    mag = np.abs(W)
    d = _digits(mag, scheme.level_bits, S)
    pos = (W > 0)[..., None]
    neg = (W < 0)[..., None]
    # (rows, cols, 2, S): plus side then minus side
    levels = np.stack([np.where(pos, d, 0), np.where(neg, d, 0)], axis=2)
    levels = levels.reshape(n_rows, n_cols * 2 * S)
    logical = np.repeat(np.arange(n_cols), 2 * S)
    slices = np.tile(np.arange(S), 2 * n_cols)
    roles = np.tile(np.repeat([ROLE_PLUS, ROLE_MINUS], S), n_cols)
    return _make_tile(levels, scheme, model, logical, slices, roles, 0)


def map_weights(W, scheme: MappingScheme, model: CellModel) -> ConductanceTile:
    if scheme.kind is MappingKind.BIAS:
        return map_bias(W, scheme, model)
    return map_differential(W, scheme, model)


def conductance_levels(g, model: CellModel, cell_bits: int) -> np.ndarray:
    """Recover integer levels from conductances; raises on off-grid cells."""
    g = np.asarray(g, dtype=float)
    span = model.g_max - model.g_min
    slack = 1e-9 * model.g_max
    if np.any(g < model.g_min - slack) or np.any(g > model.g_max + slack):
        raise DecodeError("conductance outside [g_min, g_max]")
    t = (g - model.g_min) / span * ((1 << cell_bits) - 1)
    levels = np.rint(t)
    off = np.abs(t - levels)
    if np.any(off > GRID_TOL):
        r, c = np.unravel_index(np.argmax(off), off.shape)
        raise DecodeError(f"cell ({r}, {c}) is off the level grid by {off[r, c]:.3g} steps")
    return levels.astype(np.int64)


def decode_weights(tile: ConductanceTile, model: CellModel) -> np.ndarray:
    """Inverse of the mappers: read the conductances back into integers."""
    levels = conductance_levels(tile.g, model, tile.scheme.level_bits)
    keep = tile.col_role != ROLE_PAD
    weights = tile.col_weight[keep]
    logical = tile.col_logical[keep]
    n_logical = int(logical.max()) + 1
    out = np.zeros((tile.g.shape[0], n_logical), dtype=np.int64)
    np.add.at(out.T, logical, (levels[:, keep] * weights).T)
    return out - tile.offset_code
