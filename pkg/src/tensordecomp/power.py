"""Matrix and symmetric tensor power iteration with deflation."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DenseTensor, as_array, outer
from .errors import ConfigurationError, ConvergenceError, DataError, DimensionError
from .products import IDENTITY, multilinear_transform

__all__ = [
    "EigenPair",
    "PowerConfig",
    "matrix_power_method",
    "tensor_power_step",
    "extract_eigenpairs",
    "power_deflate",
    "check_symmetric",
    "symmetric_contraction",
    "ZERO_CONTRACTION",
]

ZERO_CONTRACTION = 1e-14


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray
    iterations: int = 0
    converged: bool = True
    restarts_converged: int = 0
    # ||X_r(I, v, v) - value * v|| against the deflated tensor it came from.
    residual: float = 0.0

    def residual_of(self, contract: Callable[[np.ndarray], np.ndarray]) -> float:
        """``||X(I, v, v) - value * v||`` for the given contraction."""
        return float(np.linalg.norm(contract(self.vector) - self.value * self.vector))


@dataclass(frozen=True)
class PowerConfig:
    n_pairs: int
    max_iters: int = 100
    tol: float = 1e-10
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("n_pairs", "max_iters", "restarts"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")


class _RestartSignal(Exception):
    pass


def _random_unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _moved(a, b):
    """Distance between unit vectors, blind to a global sign flip."""
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b))


def matrix_power_method(m, max_iters: int = 1000, tol: float = 1e-12, seed: int = 0,
                        restarts: int = 1) -> EigenPair:
    """Dominant eigenpair of a symmetric matrix by repeated ``v <- Mv / ||Mv||``.

    The reported value is the Rayleigh quotient ``v^T M v`` at the final
    iterate, which carries the eigenvalue's sign.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise DataError("matrix power method needs a symmetric matrix")
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        v = _random_unit(rng, m.shape[0])
        for it in range(1, max_iters + 1):
            w = m @ v
            norm = np.linalg.norm(w)
            if norm < ZERO_CONTRACTION:
                break
            w = w / norm
            if _moved(w, v) < tol:
                value = float(w @ m @ w)
                return EigenPair(value, w, it)
            v = w
    raise ConvergenceError(f"matrix power method did not converge in {max_iters} iterations x {restarts} restarts")


def symmetric_contraction(t) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``v -> X(I, v, v)`` for a dense order-3 tensor."""
    arr = as_array(t)

    def contract(v):
        return multilinear_transform(arr, [IDENTITY, v, v]).data

    return contract


def tensor_power_step(t, v) -> tuple[np.ndarray, float]:
    """One tensor power step ``X(I, v, v) / ||X(I, v, v)||``.

    Returns the new unit vector and the norm before normalization. Raises
    :class:`ConvergenceError` when the contraction vanishes, meaning the
    start vector has to be redrawn.
    """
    arr = as_array(t)
    v = np.asarray(v, dtype=np.float64)
    if arr.ndim != 3 or len(set(arr.shape)) != 1:
        raise DimensionError(f"expected a d x d x d tensor, got shape {arr.shape}")
    if v.shape != (arr.shape[0],):
        raise DimensionError(f"vector of length {v.size} does not match dimension {arr.shape[0]}")
    return _step(symmetric_contraction(arr), v)


def _step(contract, v):
    w = contract(v)
    norm = float(np.linalg.norm(w))
    if norm < ZERO_CONTRACTION:
        raise _RestartSignal()
    return w / norm, norm


def check_symmetric(t, rtol: float = 1e-10) -> None:
    arr = as_array(t)
    if arr.ndim != 3 or len(set(arr.shape)) != 1:
        raise DimensionError(f"expected a d x d x d tensor, got shape {arr.shape}")
    scale = rtol * max(np.linalg.norm(arr.ravel()), np.finfo(float).tiny)
    for perm in itertools.permutations(range(3)):
        if np.linalg.norm((arr - arr.transpose(perm)).ravel()) > scale:
            raise DataError("tensor is not symmetric under index permutation")


def _iterate(contract, v, cfg):
    """Power-iterate from ``v``; returns (vector, value, iterations) or None."""
    for it in range(1, cfg.max_iters + 1):
        w, _ = _step(contract, v)
        if _moved(w, v) < cfg.tol:
            # Orient so the contraction points along the vector; the value
            # is then positive.
            w_final, value = _step(contract, w)
            return w_final, value, it
        v = w
    return None


def power_deflate(contract, dim: int, cfg: PowerConfig) -> list[EigenPair]:
    """Extract ``cfg.n_pairs`` eigenpairs of a symmetric order-3 map.

    ``contract(v)`` must return ``X(I, v, v)`` for the undeflated tensor.
    Deflation is applied to each contraction result by subtracting
    ``lambda_l <v_l, v>^2 v_l`` for every pair found so far, which equals
    contracting the deflated tensor. For each pair ``cfg.restarts`` random
    starts are run and the converged one with the largest value is kept.
    """
    rng = np.random.default_rng(cfg.seed)
    pairs: list[EigenPair] = []

    def deflated(v):
        w = contract(v)
        for p in pairs:
            w = w - p.value * (p.vector @ v) ** 2 * p.vector
        return w

    for r in range(cfg.n_pairs):
        best = None
        hits = 0
        for _ in range(cfg.restarts):
            start = _random_unit(rng, dim)
            try:
                out = _iterate(deflated, start, cfg)
            except _RestartSignal:
                continue
            if out is None:
                continue
            hits += 1
            if best is None or out[1] > best[1]:
                best = out
        if best is None:
            raise ConvergenceError(
                f"eigenpair {r + 1} of {cfg.n_pairs}: no restart converged "
                f"({cfg.restarts} starts, {cfg.max_iters} iterations each)",
                partial=pairs,
            )
        vec, value, its = best
        pair = EigenPair(value, vec, its, True, hits)
        pair.residual = pair.residual_of(deflated)
        pairs.append(pair)
    return pairs


def extract_eigenpairs(t, cfg: PowerConfig, return_residual: bool = False):
    """Eigenpairs of a symmetric order-3 tensor by power iteration and deflation.

    Each pair found is removed as ``X <- X - lambda v o v o v`` before the
    next search. With ``return_residual=True`` the fully deflated tensor is
    returned as a second value.
    """
    arr = as_array(t)
    check_symmetric(arr)
    dim = arr.shape[0]
    if cfg.n_pairs > dim:
        raise ConfigurationError(f"cannot extract {cfg.n_pairs} pairs from dimension {dim}")
    pairs = power_deflate(symmetric_contraction(arr), dim, cfg)
    if not return_residual:
        return pairs
    residual = arr.copy()
    for p in pairs:
        residual -= p.value * outer(p.vector, p.vector, p.vector).data
    return pairs, DenseTensor(residual)
