"""Tucker decomposition: n-ranks, HOSVD and HOOI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DenseTensor, as_array, check_finite, unfold, _sign_gauge
from .errors import ConfigurationError, DimensionError
from .products import mode_products

__all__ = ["TuckerTensor", "HooiResult", "n_rank", "hosvd", "hooi", "tucker_to_dense", "relative_error"]


class TuckerTensor:
    """Core tensor plus one factor matrix per mode, ``[[G; A1, ..., AN]]``."""

    __slots__ = ("core", "factors")

    def __init__(self, core, factors):
        core = core if isinstance(core, DenseTensor) else DenseTensor(core)
        factors = tuple(np.array(f, dtype=np.float64) for f in factors)
        if len(factors) != core.order:
            raise DimensionError(f"core has order {core.order} but {len(factors)} factors given")
        for n, (f, r) in enumerate(zip(factors, core.shape), start=1):
            if f.ndim != 2 or f.shape[1] != r:
                raise DimensionError(f"factor {n} has shape {f.shape}, core extent is {r}")
            f.flags.writeable = False
        self.core = core
        self.factors = factors

    @property
    def ranks(self):
        return self.core.shape

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    def full(self) -> DenseTensor:
        return tucker_to_dense(self)

    def __repr__(self):
        return f"TuckerTensor(shape={self.shape}, ranks={self.ranks})"


@dataclass
class HooiResult:
    model: TuckerTensor
    history: list[float]
    iterations: int
    converged: bool


def tucker_to_dense(m: TuckerTensor) -> DenseTensor:
    """``G x_1 A1 x_2 A2 ... x_N AN``."""
    return mode_products(m.core, m.factors)


def _default_tol(mat):
    s = np.linalg.svd(mat, compute_uv=False)
    return s, max(mat.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)


def n_rank(t, mode: int, tol: float | None = None) -> int:
    """Numerical column rank of the mode-n unfolding.

    ``tol`` is an absolute singular-value threshold; by default
    ``max(dims) * eps * sigma_max``.
    """
    s, default = _default_tol(unfold(t, mode))
    threshold = default if tol is None else tol
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > threshold))


def _leading_vectors(mat, count):
    u, _, _ = np.linalg.svd(mat, full_matrices=False)
    u = u[:, :count]
    return u * _sign_gauge(u)


def _check_ranks(arr, ranks):
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != arr.ndim:
        raise ConfigurationError(f"need {arr.ndim} ranks, got {len(ranks)}")
    for n, (r, extent) in enumerate(zip(ranks, arr.shape), start=1):
        if not 1 <= r <= extent:
            raise ConfigurationError(f"rank {r} for mode {n} must be in 1..{extent}")
    return ranks


def hosvd(t, ranks) -> TuckerTensor:
    """Truncated higher-order SVD.

    Each factor holds the leading left singular vectors of the matching
    unfolding; the core is the tensor projected onto them.
    """
    arr = as_array(t)
    check_finite(arr)
    ranks = _check_ranks(arr, ranks)
    factors = [_leading_vectors(unfold(arr, n), r) for n, r in enumerate(ranks, start=1)]
    core = mode_products(arr, factors, transpose=True)
    return TuckerTensor(core, factors)


def relative_error(t, model: TuckerTensor) -> float:
    arr = as_array(t)
    norm = np.linalg.norm(arr.ravel())
    diff = np.linalg.norm((arr - tucker_to_dense(model).data).ravel())
    if norm == 0:
        return 0.0 if diff == 0 else float("inf")
    return float(diff / norm)


def hooi(t, ranks, max_iters: int = 100, tol: float = 1e-8, seed: int | None = None) -> HooiResult:
    """Higher-order orthogonal iteration started from the truncated HOSVD.

    ``history[0]`` is the HOSVD error; each later entry is the error after
    one full sweep. Stops when the error changes by less than ``tol``.
    ``seed`` is accepted for interface symmetry; the HOSVD start makes the
    run deterministic.
    """
    arr = as_array(t)
    if max_iters < 1:
        raise ConfigurationError("max_iters must be >= 1")
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    start = hosvd(arr, ranks)
    ranks = start.ranks
    factors = list(start.factors)
    history = [relative_error(arr, start)]
    best = start
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        for n in range(1, arr.ndim + 1):
            y = mode_products(arr, factors, skip=n, transpose=True)
            factors[n - 1] = _leading_vectors(unfold(y, n), ranks[n - 1])
        core = mode_products(arr, factors, transpose=True)
        model = TuckerTensor(core, factors)
        err = relative_error(arr, model)
        # Keep the best model seen so round-off can never make HOOI worse
        # than its HOSVD start.
        if err <= relative_error(arr, best):
            best = model
        history.append(err)
        if abs(history[-2] - history[-1]) < tol:
            converged = True
            break
    return HooiResult(best, history, iterations, converged)
