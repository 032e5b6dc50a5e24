"""Input temporal bit-slicing.

An integer input vector is streamed one bit per pulse, least significant
bit first. Signed inputs use two's complement; the top plane then carries
weight ``-2**(B_in - 1)`` when partial results are shifted and added back.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

MAX_INPUT_BITS = 16


class Signedness(enum.Enum):
    UNSIGNED = "unsigned"
    SIGNED = "signed"


@dataclass(frozen=True, eq=False)
class PulseTrain:
    planes: np.ndarray  # (P, n) uint8, plane p holds bit p
    input_bits: int
    signedness: Signedness

    @property
    def sign_plane(self):
        """Index of the negatively weighted plane, or None for unsigned."""
        if self.signedness is Signedness.SIGNED:
            return self.input_bits - 1
        return None

    @property
    def plane_weights(self) -> np.ndarray:
        w = np.left_shift(np.int64(1), np.arange(self.input_bits, dtype=np.int64))
        if self.signedness is Signedness.SIGNED:
            w[-1] = -w[-1]
        return w


def input_range(input_bits: int, signedness: Signedness) -> tuple[int, int]:
    if signedness is Signedness.SIGNED:
        return -(1 << (input_bits - 1)), (1 << (input_bits - 1)) - 1
    return 0, (1 << input_bits) - 1


def bit_planes(v, input_bits: int, signedness=Signedness.UNSIGNED) -> np.ndarray:
    """Bit planes of ``v`` along a new axis -2: shape (..., P, n), uint8.

    Works on a single vector or a batch of vectors (last axis).
    """
    signedness = Signedness(signedness)
    if not 1 <= input_bits <= MAX_INPUT_BITS:
        raise DomainError(f"input_bits must be in [1, {MAX_INPUT_BITS}]")
    v = np.asarray(v)
    if v.size and not np.issubdtype(v.dtype, np.integer):
        if not np.all(np.isfinite(v)) or np.any(v != np.round(v)):
            raise DomainError("inputs must be integers")
    v = v.astype(np.int64)
    lo, hi = input_range(input_bits, signedness)
    if v.size and (v.min() < lo or v.max() > hi):
        raise DomainError(f"inputs outside [{lo}, {hi}] for {input_bits}-bit {signedness.value}")
    code = v & ((1 << input_bits) - 1)  # two's complement for negatives
    shifts = np.arange(input_bits, dtype=np.int64)
    planes = (code[..., None, :] >> shifts[:, None]) & 1
    return planes.astype(np.uint8)


def encode_inputs(v, input_bits: int, signedness=Signedness.UNSIGNED) -> PulseTrain:
    v = np.asarray(v)
    if v.ndim != 1:
        raise DomainError("input must be a vector")
    signedness = Signedness(signedness)
    return PulseTrain(bit_planes(v, input_bits, signedness), input_bits, signedness)


def decode_accumulate(per_plane_results, train: PulseTrain) -> np.ndarray:
    """Shift-add per-plane integer results into the full-precision result."""
    r = np.asarray(per_plane_results, dtype=np.int64)
    if r.ndim == 0 or r.shape[0] != train.input_bits:
        raise DomainError(
            f"expected {train.input_bits} plane results, got {r.shape[0] if r.ndim else 0}")
    w = train.plane_weights.reshape((-1,) + (1,) * (r.ndim - 1))
    return (w * r).sum(axis=0)
