"""Workloads: im2col lowering, synthetic generators and tensor fixtures.

Fixture files (``.xbwl``) hold one integer tensor::

    magic   4 bytes  b"XBWL"
    version u16      1
    dtype   u16      see DTYPE_CODES
    ndim    u16
    dims    u32 * ndim
    payload little-endian, row-major

A layer manifest (JSON) lists convolution layers as pairs of fixtures::

    {"layers": [{"name": "conv1", "weights": "conv1.w.xbwl",
                 "input": "conv1.x.xbwl", "stride": 1, "padding": 1,
                 "weight_bits": 8, "activation_bits": 8}]}

Weights are (K_h, K_w, C_in, C_out), inputs (H, W, C_in); paths are
relative to the manifest.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import Signedness
from .errors import DomainError, SchemaError
from .mapping import MappingScheme
from .mvmunit import MvmRequest

MAGIC = b"XBWL"
VERSION = 1
DTYPE_CODES = {
    1: np.dtype("<i1"),
    2: np.dtype("<u1"),
    3: np.dtype("<i2"),
    4: np.dtype("<u2"),
    5: np.dtype("<i4"),
    6: np.dtype("<u4"),
    7: np.dtype("<i8"),
}
_CODE_OF = {dt: code for code, dt in DTYPE_CODES.items()}

# rectified-normal spread of the validation weights, in 8-bit code units
VALIDATION_SIGMA = 64.0


@dataclass(frozen=True)
class ConvSpec:
    in_h: int
    in_w: int
    c_in: int
    k_h: int
    k_w: int
    c_out: int
    stride: int = 1
    padding: int = 0
    weight_bits: int = 8
    activation_bits: int = 8

    def __post_init__(self):
        dims = (self.in_h, self.in_w, self.c_in, self.k_h, self.k_w, self.c_out, self.stride)
        if min(dims) < 1 or self.padding < 0:
            raise DomainError("convolution dimensions must be positive")
        if self.out_h < 1 or self.out_w < 1:
            raise DomainError("kernel larger than padded input")

    @property
    def out_h(self) -> int:
        return (self.in_h + 2 * self.padding - self.k_h) // self.stride + 1

    @property
    def out_w(self) -> int:
        return (self.in_w + 2 * self.padding - self.k_w) // self.stride + 1

    @property
    def patch_len(self) -> int:
        return self.k_h * self.k_w * self.c_in

    @property
    def mac_count(self) -> int:
        return self.patch_len * self.c_out * self.out_h * self.out_w


def im2col(spec: ConvSpec, x, w):
    """Lower a convolution to one weight matrix and a batch of input vectors.

    Returns ``(W, V)`` with ``W`` of shape (K_h*K_w*C_in, C_out) and ``V`` of
    shape (out_h*out_w, K_h*K_w*C_in), so that ``V @ W`` is the convolution
    output in row-major spatial order. Patches are flattened kh-major, then
    kw, then c_in, matching a C-order reshape of the kernel.
    """
    x = np.asarray(x)
    w = np.asarray(w)
    if x.shape != (spec.in_h, spec.in_w, spec.c_in):
        raise DomainError(f"input shape {x.shape} does not match spec")
    if w.shape != (spec.k_h, spec.k_w, spec.c_in, spec.c_out):
        raise DomainError(f"kernel shape {w.shape} does not match spec")
    p = spec.padding
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (spec.k_h, spec.k_w), axis=(0, 1))
    win = win[::spec.stride, ::spec.stride][:spec.out_h, :spec.out_w]
    # (oh, ow, C_in, K_h, K_w) -> (oh, ow, K_h, K_w, C_in)
    V = win.transpose(0, 1, 3, 4, 2).reshape(spec.out_h * spec.out_w, spec.patch_len)
    W = w.reshape(spec.patch_len, spec.c_out)
    return W, np.ascontiguousarray(V)


def gen_synthetic_weights(rows, cols, sigma, bits=8, seed=0):
    """Zero-centred normal weights with std ``sigma * max_int``, clamped.

    Draws are shared across ``sigma`` for a fixed seed, so sweeps over
    ``sigma`` scale one underlying sample.
    """
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    max_int = (1 << (bits - 1)) - 1
    z = np.random.default_rng(seed).standard_normal((rows, cols))
    return np.clip(np.rint(z * sigma * max_int), -max_int, max_int).astype(np.int64)


def gen_uniform_inputs(n, length, bits=8, seed=0):
    return np.random.default_rng(seed).integers(0, 1 << bits, size=(n, length), dtype=np.int64)


def gen_sparse_inputs(n, length, sparsity, bits=1, rng=None):
    """Unsigned inputs whose bits are each set with probability ``1 - sparsity``."""
    if not 0 <= sparsity <= 1:
        raise DomainError("sparsity must be in [0, 1]")
    rng = np.random.default_rng() if rng is None else rng
    on = rng.random((n, length, bits)) >= sparsity
    return (on.astype(np.int64) << np.arange(bits)).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class ValidationSet:
    weights: np.ndarray  # (rows, cols) unsigned
    inputs: np.ndarray  # (n, rows)
    sparsity: np.ndarray  # (n,)
    weight_bits: int
    input_bits: int

    def scheme(self, cell_bits=None, kind="bias") -> MappingScheme:
        return MappingScheme(kind, cell_bits or self.weight_bits, self.weight_bits, signed=False)

    def requests(self, model, scheme=None, tile_shape=None):
        scheme = scheme or self.scheme()
        tile_shape = tile_shape or self.weights.shape
        return [MvmRequest(self.weights, v, scheme, model, tuple(tile_shape),
                           self.input_bits, Signedness.UNSIGNED) for v in self.inputs]


def gen_validation_set(rows=64, cols=64, n_mvms=1000, sparsities=(0.0, 0.25, 0.5, 0.75, 1.0),
                       seed=0, sigma=VALIDATION_SIGMA, weight_bits=8, input_bits=1) -> ValidationSet:
    """Rectified-normal unsigned weights and sparsity-controlled inputs.

    MVM ``k`` uses ``sparsities[k % len(sparsities)]``.
    """
    sparsities = [float(s) for s in sparsities]
    if not sparsities or any(not 0 <= s <= 1 for s in sparsities):
        raise DomainError("sparsities must be a non-empty list in [0, 1]")
    rng = np.random.default_rng(seed)
    hi = (1 << weight_bits) - 1
    w = np.clip(np.rint(np.maximum(0.0, rng.normal(0.0, sigma, (rows, cols)))), 0, hi)
    sp = np.array([sparsities[k % len(sparsities)] for k in range(n_mvms)])
    on = rng.random((n_mvms, rows, input_bits)) >= sp[:, None, None]
    inputs = (on.astype(np.int64) << np.arange(input_bits)).sum(axis=-1)
    return ValidationSet(w.astype(np.int64), inputs, sp, weight_bits, input_bits)


# -- fixtures ----------------------------------------------------------------

def write_fixture(path, array) -> None:
    a = np.asarray(array)
    dt = a.dtype.newbyteorder("<")
    if dt not in _CODE_OF:
        raise SchemaError("dtype", f"unsupported fixture dtype {a.dtype}")
    header = MAGIC + struct.pack("<HHH", VERSION, _CODE_OF[dt], a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(a, dtype=dt).tobytes())


def read_fixture(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SchemaError("magic", f"{path}: not an XBWL fixture")
    if len(data) < 10:
        raise SchemaError("header", f"{path}: truncated header")
    version, code, ndim = struct.unpack_from("<HHH", data, 4)
    if version != VERSION:
        raise SchemaError("version", f"{path}: unsupported version {version}")
    if code not in DTYPE_CODES:
        raise SchemaError("dtype", f"{path}: unknown dtype code {code}")
    off = 10 + 4 * ndim
    if len(data) < off:
        raise SchemaError("dims", f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{ndim}I", data, 10)
    dt = DTYPE_CODES[code]
    n = int(np.prod(dims, dtype=np.int64))
    if len(data) - off != n * dt.itemsize:
        raise SchemaError("payload", f"{path}: payload size does not match dims {dims}")
    return np.frombuffer(data, dtype=dt, count=n, offset=off).reshape(dims).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ConvLayer:
    name: str
    spec: ConvSpec
    x: np.ndarray
    w: np.ndarray


def load_layer_manifest(path) -> list:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("layers"), list):
        raise SchemaError("layers", f"{path}: expected an object with a 'layers' list")
    layers = []
    for entry in doc["layers"]:
        for key in ("name", "weights", "input"):
            if key not in entry:
                raise SchemaError(key, f"{path}: layer entry missing '{key}'")
        w = read_fixture(path.parent / entry["weights"])
        x = read_fixture(path.parent / entry["input"])
        if w.ndim != 4 or x.ndim != 3 or w.shape[2] != x.shape[2]:
            raise SchemaError("weights", f"{path}: layer {entry['name']}: inconsistent shapes "
                                         f"{w.shape} / {x.shape}")
        spec = ConvSpec(x.shape[0], x.shape[1], x.shape[2], w.shape[0], w.shape[1], w.shape[3],
                        stride=int(entry.get("stride", 1)), padding=int(entry.get("padding", 0)),
                        weight_bits=int(entry.get("weight_bits", 8)),
                        activation_bits=int(entry.get("activation_bits", 8)))
        layers.append(ConvLayer(entry["name"], spec, x, w))
    return layers


def read_matrix_csv(path) -> np.ndarray:
    """Row-major signed-integer matrix from a headerless CSV."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([int(c) for c in row])
            except ValueError:
                raise SchemaError("row", f"{path}: line {lineno}: not an integer row") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise SchemaError("row", f"{path}: rows must be non-empty and equally long")
    return np.array(rows, dtype=np.int64)


def gen_conv_layer(spec: ConvSpec, seed=0, sigma=0.25, act_sparsity=0.5):
    """Random quantized layer: normal weights, rectified activations.

    ``act_sparsity`` is the fraction of activations forced to zero.
    """
    rng = np.random.default_rng(seed)
    w = gen_synthetic_weights(spec.patch_len, spec.c_out, sigma, spec.weight_bits, seed=rng)
    amax = (1 << spec.activation_bits) - 1
    a = np.rint(np.abs(rng.normal(0.0, amax / 4, (spec.in_h, spec.in_w, spec.c_in))))
    a[rng.random(a.shape) < act_sparsity] = 0
    x = np.clip(a, 0, amax).astype(np.int64)
    return x, w.reshape(spec.k_h, spec.k_w, spec.c_in, spec.c_out)
