"""Dense tensors, matricization and Kruskal (CP-form) tensors.

Public indices and modes are 1-based. Flat storage is first-index-fastest,
so for a 3x4x2 tensor the element (i, j, k) lives at offset
``(i-1) + 3*(j-1) + 12*(k-1)``.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DataError, DimensionError

__all__ = [
    "DenseTensor",
    "KruskalTensor",
    "as_array",
    "element",
    "fiber",
    "slice_tensor",
    "vectorize",
    "unfold",
    "fold",
    "outer",
    "inner",
    "kruskal_to_dense",
    "frobenius_norm",
    "unfold_column_index",
]


def _frozen(array):
    out = np.array(array, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def as_array(t):
    """Return the ndarray behind ``t`` (a DenseTensor or anything array-like)."""
    if isinstance(t, DenseTensor):
        return t.data
    return np.asarray(t, dtype=np.float64)


class DenseTensor:
    """Order-N real tensor with an explicit shape.

    The wrapped array is copied and made read-only, so instances can be
    shared freely. ``data`` indexes logically (0-based numpy indexing);
    ``flat`` gives the first-index-fastest linearization.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim < 1:
            raise DimensionError("a DenseTensor needs order >= 1; scalars are not tensors")
        if any(s < 1 for s in arr.shape):
            raise DimensionError(f"every extent must be >= 1, got {arr.shape}")
        self.data = _frozen(arr)

    @classmethod
    def from_flat(cls, shape: Sequence[int], values) -> "DenseTensor":
        shape = tuple(int(s) for s in shape)
        values = np.asarray(values, dtype=np.float64).ravel()
        expected = math.prod(shape)
        if values.size != expected:
            raise DimensionError(f"shape {shape} needs {expected} values, got {values.size}")
        return cls(values.reshape(shape, order="F"))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(tuple(shape)))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def flat(self) -> np.ndarray:
        return self.data.ravel(order="F")

    def element(self, idx):
        return element(self, idx)

    def fiber(self, mode, fixed):
        return fiber(self, mode, fixed)

    def slice(self, mode, index):
        return slice_tensor(self, mode, index)

    def unfold(self, mode):
        return unfold(self, mode)

    def norm(self):
        return frobenius_norm(self)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None

    def __add__(self, other):
        return DenseTensor(self.data + as_array(other))

    def __sub__(self, other):
        return DenseTensor(self.data - as_array(other))

    def __mul__(self, scalar):
        return DenseTensor(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return DenseTensor(-self.data)

    def __repr__(self):
        dims = " x ".join(str(s) for s in self.shape)
        return f"DenseTensor({dims})"


def _check_mode(mode, order):
    if not isinstance(mode, (int, np.integer)) or not 1 <= mode <= order:
        raise DimensionError(f"mode must be in 1..{order}, got {mode!r}")
    return int(mode)


def _check_index(idx, shape):
    idx = tuple(int(i) for i in idx)
    if len(idx) != len(shape):
        raise DimensionError(f"index {idx} has {len(idx)} entries, tensor has order {len(shape)}")
    for i, extent in zip(idx, shape):
        if not 1 <= i <= extent:
            raise DimensionError(f"index {idx} out of bounds for shape {shape}")
    return idx


def element(t: DenseTensor, idx: Sequence[int]) -> float:
    """Scalar at the 1-based multi-index ``idx``."""
    idx = _check_index(idx, t.shape)
    return float(t.data[tuple(i - 1 for i in idx)])


def fiber(t: DenseTensor, mode: int, fixed: Sequence[int]) -> np.ndarray:
    """Mode-``mode`` fiber obtained by fixing every other index.

    ``fixed`` lists the 1-based indices of the remaining modes in increasing
    mode order, e.g. for a 3-way tensor and ``mode=3`` it is ``(i, j)``.
    """
    mode = _check_mode(mode, t.order)
    rest = [s for m, s in enumerate(t.shape, start=1) if m != mode]
    fixed = _check_index(fixed, rest)
    key = list(i - 1 for i in fixed)
    key.insert(mode - 1, slice(None))
    return t.data[tuple(key)].copy()


def slice_tensor(t: DenseTensor, mode: int, index: int) -> DenseTensor:
    """Sub-tensor of order N-1 with index ``index`` fixed in ``mode``.

    For 3-way tensors mode 1, 2 and 3 give horizontal, lateral and frontal
    slices. Order-1 inputs are rejected since the result would be a scalar.
    """
    if t.order < 2:
        raise DimensionError("cannot slice an order-1 tensor")
    mode = _check_mode(mode, t.order)
    if not 1 <= int(index) <= t.shape[mode - 1]:
        raise DimensionError(f"slice index {index} out of range 1..{t.shape[mode - 1]}")
    return DenseTensor(np.take(t.data, int(index) - 1, axis=mode - 1))


def vectorize(m) -> np.ndarray:
    """Stack the columns of a matrix top to bottom."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        return m.copy()
    return m.ravel(order="F")


def unfold_column_index(idx: Sequence[int], shape: Sequence[int], mode: int) -> int:
    """1-based column of element ``idx`` in the mode-``mode`` unfolding."""
    j = 1
    stride = 1
    for k, (i, extent) in enumerate(zip(idx, shape), start=1):
        if k == mode:
            continue
        j += (i - 1) * stride
        stride *= extent
    return j


def unfold(t, mode: int) -> np.ndarray:
    """Mode-n matricization, an ``I_n x prod(I_m, m != n)`` matrix.

    Columns are the mode-n fibers, ordered with the lowest remaining mode
    varying fastest.
    """
    arr = as_array(t)
    mode = _check_mode(mode, arr.ndim)
    moved = np.moveaxis(arr, mode - 1, 0)
    return moved.reshape(arr.shape[mode - 1], -1, order="F")


def fold(m, mode: int, shape: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`unfold`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    mode = _check_mode(mode, len(shape))
    rest = math.prod(shape) // shape[mode - 1] if shape[mode - 1] else 0
    if m.ndim != 2 or m.shape != (shape[mode - 1], rest):
        raise DimensionError(
            f"matrix of shape {m.shape} cannot fold into {shape} along mode {mode}"
        )
    moved_shape = (shape[mode - 1],) + shape[: mode - 1] + shape[mode:]
    moved = m.reshape(moved_shape, order="F")
    return DenseTensor(np.moveaxis(moved, 0, mode - 1))


def outer(*vectors) -> DenseTensor:
    """Rank-1 tensor ``v1 o v2 o ... o vN``."""
    if len(vectors) < 2:
        raise DimensionError("outer product needs at least two vectors")
    vecs = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    if any(v.size == 0 for v in vecs):
        raise DimensionError("outer product of an empty vector")
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return DenseTensor(out)


def inner(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"inner product length mismatch: {a.size} vs {b.size}")
    return float(a @ b)


def frobenius_norm(t) -> float:
    return float(np.linalg.norm(as_array(t).ravel()))


def _sign_gauge(factor):
    """Column signs making the largest-magnitude entry of each column positive."""
    if factor.size == 0:
        return np.ones(factor.shape[1])
    rows = np.argmax(np.abs(factor), axis=0)
    signs = np.sign(factor[rows, np.arange(factor.shape[1])])
    signs[signs == 0] = 1.0
    return signs


class KruskalTensor:
    """Weights plus factor matrices, ``[[lambda; A1, ..., AN]]``.

    Parameters
    ----------
    weights : array_like, shape (R,)
    factors : sequence of array_like, each of shape (I_n, R)
    """

    __slots__ = ("weights", "factors")

    def __init__(self, weights, factors):
        factors = [_frozen(np.atleast_2d(f)) for f in factors]
        if not factors:
            raise DimensionError("a Kruskal tensor needs at least one factor")
        rank = factors[0].shape[1]
        if rank < 1:
            raise DimensionError("rank must be >= 1")
        if any(f.ndim != 2 or f.shape[1] != rank for f in factors):
            raise DimensionError(
                f"factor column counts differ: {[f.shape for f in factors]}"
            )
        if weights is None:
            weights = np.ones(rank)
        weights = _frozen(np.ravel(weights))
        if weights.shape != (rank,):
            raise DimensionError(f"expected {rank} weights, got {weights.size}")
        self.weights = weights
        self.factors = tuple(factors)

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def is_normalized(self, tol=1e-10) -> bool:
        return all(np.allclose(np.linalg.norm(f, axis=0), 1.0, atol=tol) for f in self.factors)

    def normalize(self) -> "KruskalTensor":
        """Unit-norm columns with the scale absorbed into the weights.

        Columns are also sign-gauged (largest-magnitude entry positive), the
        sign being pushed into the weight. Zero columns are left as is.
        """
        weights = self.weights.copy()
        factors = []
        for f in self.factors:
            norms = np.linalg.norm(f, axis=0)
            safe = np.where(norms > 0, norms, 1.0)
            g = f / safe
            signs = _sign_gauge(g)
            factors.append(g * signs)
            weights = weights * norms * signs
        return KruskalTensor(weights, factors)

    def full(self) -> DenseTensor:
        return kruskal_to_dense(self)

    def __repr__(self):
        dims = " x ".join(str(s) for s in self.shape)
        return f"KruskalTensor({dims}, rank={self.rank})"


def kruskal_to_dense(k: KruskalTensor) -> DenseTensor:
    """Sum of weighted rank-1 terms ``sum_r lambda_r a_r^(1) o ... o a_r^(N)``."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    if k.order > len(letters) - 1:
        raise DimensionError("order too large for dense reconstruction")
    subs = ",".join(f"{letters[n]}z" for n in range(k.order))
    out = letters[: k.order]
    data = np.einsum(f"z,{subs}->{out}", k.weights, *k.factors)
    return DenseTensor(data)


def check_finite(t, what="tensor"):
    if not np.all(np.isfinite(as_array(t))):
        raise DataError(f"{what} contains non-finite values")
