"""Kronecker, Khatri-Rao and Hadamard products, n-mode products and
multilinear transformations."""
from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from .core import DenseTensor, KruskalTensor, as_array, fold, unfold, _check_mode
from .errors import DimensionError

__all__ = [
    "IDENTITY",
    "kronecker",
    "khatri_rao",
    "khatri_rao_chain",
    "hadamard",
    "mode_n_matrix_product",
    "mode_n_vector_product",
    "multilinear_transform",
    "multilinear_transform_kruskal",
]


class _Identity:
    """Placeholder for an identity map in :func:`multilinear_transform`."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "IDENTITY"


IDENTITY = _Identity()


def _matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got ndim={a.ndim}")
    return a


def kronecker(a, b) -> np.ndarray:
    """Block matrix ``[a_ij * B]`` of shape ``(I*K, J*L)``."""
    return np.kron(_matrix(a, "A"), _matrix(b, "B"))


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; column k is ``a_k kron b_k``."""
    a = _matrix(a, "A")
    b = _matrix(b, "B")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"Khatri-Rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}"
        )
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def khatri_rao_chain(factors: Sequence, skip: int | None = None) -> np.ndarray:
    """``A(N) kr ... kr A(n+1) kr A(n-1) kr ... kr A(1)`` with mode ``skip`` left out.

    The reversed ordering matches :func:`tensordecomp.core.unfold`, so that
    ``unfold(X, n) == A(n) @ diag(lambda) @ khatri_rao_chain(factors, n).T``.
    """
    mats = [f for m, f in enumerate(factors, start=1) if m != skip]
    if not mats:
        raise DimensionError("empty Khatri-Rao chain")
    return reduce(khatri_rao, reversed(mats))


def hadamard(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"Hadamard product shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def mode_n_matrix_product(t, m, mode: int) -> DenseTensor:
    """``t x_n M``: every mode-n fiber multiplied by ``M`` (shape J x I_n)."""
    arr = as_array(t)
    mode = _check_mode(mode, arr.ndim)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != arr.shape[mode - 1]:
        raise DimensionError(
            f"matrix of shape {m.shape} does not conform with extent "
            f"{arr.shape[mode - 1]} of mode {mode}"
        )
    out = np.tensordot(m, arr, axes=([1], [mode - 1]))
    return DenseTensor(np.moveaxis(out, 0, mode - 1))


def mode_n_vector_product(t, v, mode: int) -> DenseTensor:
    """``t x_n v``: contracts mode n away, returning an order N-1 tensor."""
    arr = as_array(t)
    if arr.ndim < 2:
        raise DimensionError("vector product needs an order >= 2 tensor")
    mode = _check_mode(mode, arr.ndim)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != arr.shape[mode - 1]:
        raise DimensionError(
            f"vector of length {v.size} does not conform with extent "
            f"{arr.shape[mode - 1]} of mode {mode}"
        )
    return DenseTensor(np.tensordot(arr, v, axes=([mode - 1], [0])))


def multilinear_transform(t, maps: Sequence):
    """Hit each mode of ``t`` with a map: ``X(M1, ..., MN)``.

    A matrix ``M`` (shape I_n x J) transforms mode n as ``M^T a``, i.e. a
    mode-n product with ``M.T``. A vector contracts the mode away, and
    :data:`IDENTITY` leaves it untouched. If every map is a vector the
    scalar result is returned as a float.

    Parameters
    ----------
    t : DenseTensor or KruskalTensor
    maps : sequence
        One entry per mode.
    """
    if isinstance(t, KruskalTensor):
        return multilinear_transform_kruskal(t, maps)
    arr = as_array(t)
    if len(maps) != arr.ndim:
        raise DimensionError(f"expected {arr.ndim} maps, got {len(maps)}")
    out = arr
    # Vectors shrink the order, so walk modes from last to first to keep
    # the axis numbers of pending modes valid.
    for axis in reversed(range(arr.ndim)):
        m = maps[axis]
        if m is IDENTITY:
            continue
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != arr.shape[axis]:
            raise DimensionError(
                f"map for mode {axis + 1} has {m.shape[0]} rows, extent is {arr.shape[axis]}"
            )
        if m.ndim == 1:
            out = np.tensordot(out, m, axes=([axis], [0]))
        elif m.ndim == 2:
            out = np.moveaxis(np.tensordot(m.T, out, axes=([1], [axis])), 0, axis)
        else:
            raise DimensionError(f"map for mode {axis + 1} must be a vector or matrix")
    if np.ndim(out) == 0:
        return float(out)
    return DenseTensor(out)


def multilinear_transform_kruskal(k: KruskalTensor, maps: Sequence):
    """Kruskal-form evaluation of ``X(M1, ..., MN) = sum_r lambda_r (M1^T a_r) o ...``."""
    if len(maps) != k.order:
        raise DimensionError(f"expected {k.order} maps, got {len(maps)}")
    weights = k.weights.copy()
    kept = []
    for n, (m, f) in enumerate(zip(maps, k.factors), start=1):
        if m is IDENTITY:
            kept.append(f)
            continue
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != f.shape[0]:
            raise DimensionError(
                f"map for mode {n} has {m.shape[0]} rows, extent is {f.shape[0]}"
            )
        if m.ndim == 1:
            weights = weights * (m @ f)
        else:
            kept.append(m.T @ f)
    if not kept:
        return float(weights.sum())
    if len(kept) == 1:
        return DenseTensor(kept[0] @ weights)
    return KruskalTensor(weights, kept).full()


def mode_products(t, matrices: Sequence, skip: int | None = None, transpose=False) -> DenseTensor:
    """Successive n-mode products ``t x_1 M1 x_2 M2 ...`` skipping mode ``skip``.

    With ``transpose=True`` each matrix is applied as ``M.T``.
    """
    out = as_array(t)
    for n, m in enumerate(matrices, start=1):
        if n == skip or m is None:
            continue
        m = np.asarray(m, dtype=np.float64)
        out = mode_n_matrix_product(out, m.T if transpose else m, n).data
    return DenseTensor(out)


def matricized_product(t, m, mode: int) -> DenseTensor:
    """Reference path for :func:`mode_n_matrix_product`: ``fold(M @ unfold(t, n))``."""
    arr = as_array(t)
    m = np.asarray(m, dtype=np.float64)
    shape = list(arr.shape)
    shape[mode - 1] = m.shape[0]
    return fold(m @ unfold(arr, mode), mode, shape)
