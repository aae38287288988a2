"""CP decomposition: alternating least squares, Jennrich's algorithm and
uniqueness diagnostics."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import KruskalTensor, as_array, check_finite, kruskal_to_dense, unfold
from .errors import ConfigurationError, DimensionError, IllConditionedError, RankDeficiencyError
from .products import khatri_rao, khatri_rao_chain, multilinear_transform, IDENTITY

__all__ = [
    "CpConfig",
    "CpResult",
    "UniquenessReport",
    "cp_als",
    "als_update",
    "jennrich",
    "fit",
    "k_rank",
    "check_sufficient_uniqueness",
    "uniqueness_report",
    "svd_pinv",
]

INIT_METHODS = ("random", "hosvd-leading-vectors")


@dataclass(frozen=True)
class CpConfig:
    rank: int
    max_iters: int = 500
    tol: float = 1e-8
    init: str = "random"
    seed: int = 0
    normalize: bool = True
    n_starts: int = 1

    def __post_init__(self):
        if not isinstance(self.rank, (int, np.integer)) or self.rank < 1:
            raise ConfigurationError(f"rank must be a positive integer, got {self.rank!r}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if self.n_starts < 1:
            raise ConfigurationError(f"n_starts must be >= 1, got {self.n_starts}")
        if self.init not in INIT_METHODS:
            raise ConfigurationError(f"init must be one of {INIT_METHODS}, got {self.init!r}")


@dataclass
class CpResult:
    model: KruskalTensor
    fit_history: list[float]
    iterations: int
    converged: bool

    @property
    def final_error(self) -> float:
        return self.fit_history[-1]


def svd_pinv(m) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with cutoff ``max(dim) * eps * sigma_max``."""
    m = np.asarray(m, dtype=np.float64)
    return np.linalg.pinv(m, rcond=max(m.shape) * np.finfo(float).eps)


def fit(t, model: KruskalTensor) -> float:
    """Relative reconstruction error ``||X - X_hat|| / ||X||``.

    A zero tensor gives 0 against a zero model and ``inf`` otherwise.
    """
    arr = as_array(t)
    if tuple(arr.shape) != model.shape:
        raise DimensionError(f"model shape {model.shape} does not match tensor {arr.shape}")
    diff = np.linalg.norm((arr - kruskal_to_dense(model).data).ravel())
    norm = np.linalg.norm(arr.ravel())
    if norm == 0:
        return 0.0 if diff == 0 else math.inf
    return float(diff / norm)


def als_update(t, factors, mode: int) -> np.ndarray:
    """Least-squares update of factor ``mode`` with all others held fixed.

    Computes ``X_(n) (A(N) kr ... kr A(1), skipping n) V^+`` where ``V`` is
    the Hadamard product of the Gram matrices ``A(m)^T A(m)``, m != n.
    """
    arr = as_array(t)
    if len(factors) != arr.ndim:
        raise DimensionError(f"need {arr.ndim} factors, got {len(factors)}")
    if not 1 <= mode <= arr.ndim:
        raise DimensionError(f"mode must be in 1..{arr.ndim}, got {mode}")
    rank = factors[0].shape[1]
    gram = np.ones((rank, rank))
    for m, f in enumerate(factors, start=1):
        if f.shape != (arr.shape[m - 1], rank):
            raise DimensionError(f"factor {m} has shape {f.shape}, expected {(arr.shape[m - 1], rank)}")
        if m != mode:
            gram *= f.T @ f
    kr = khatri_rao_chain(factors, skip=mode)
    return unfold(arr, mode) @ kr @ svd_pinv(gram)


def _leading_left_vectors(mat, count, rng):
    u, _, _ = np.linalg.svd(mat, full_matrices=False)
    u = u[:, :count]
    if u.shape[1] < count:
        # Fewer singular vectors than the rank: fill with random columns.
        extra = rng.standard_normal((mat.shape[0], count - u.shape[1]))
        u = np.hstack([u, extra])
    return u


def _initial_factors(arr, cfg, rng):
    if cfg.init == "random":
        return [rng.standard_normal((s, cfg.rank)) for s in arr.shape]
    return [_leading_left_vectors(unfold(arr, n), cfg.rank, rng) for n in range(1, arr.ndim + 1)]


def cp_als(t, cfg: CpConfig) -> CpResult:
    """CP decomposition by alternating least squares.

    Sweeps update every factor once in mode order. The run stops when the
    relative error changes by less than ``cfg.tol`` between sweeps or after
    ``cfg.max_iters`` sweeps. With ``cfg.n_starts > 1`` independent starts
    are drawn from the same RNG stream and the lowest final error wins.
    """
    arr = as_array(t)
    check_finite(arr)
    if arr.ndim < 3:
        raise ConfigurationError("CP-ALS needs an order >= 3 tensor; use a matrix SVD for order 2")
    for n in range(arr.ndim):
        others = math.prod(arr.shape) // arr.shape[n]
        if cfg.rank > others:
            raise ConfigurationError(
                f"rank {cfg.rank} exceeds the {others} columns of the mode-{n + 1} unfolding"
            )

    norm_x = np.linalg.norm(arr.ravel())
    if norm_x == 0:
        factors = [np.zeros((s, cfg.rank)) for s in arr.shape]
        return CpResult(KruskalTensor(np.zeros(cfg.rank), factors), [0.0], 1, True)

    rng = np.random.default_rng(cfg.seed)
    best = None
    for _ in range(cfg.n_starts):
        result = _als_run(arr, cfg, _initial_factors(arr, cfg, rng), norm_x)
        if best is None or result.final_error < best.final_error:
            best = result
    return best


def _als_run(arr, cfg, factors, norm_x):
    weights = np.ones(cfg.rank)
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        for n in range(1, arr.ndim + 1):
            factors[n - 1] = als_update(arr, factors, n)
        model = KruskalTensor(weights, factors)
        if cfg.normalize:
            model = model.normalize()
            # Fold the weights back into the last factor so the next sweep
            # works on the same model with unit-norm columns elsewhere.
            factors = [np.array(f) for f in model.factors]
            factors[-1] = factors[-1] * model.weights
        err = np.linalg.norm((arr - kruskal_to_dense(model).data).ravel()) / norm_x
        history.append(float(err))
        if len(history) > 1 and abs(history[-2] - history[-1]) < cfg.tol:
            converged = True
            break
    final = KruskalTensor(weights, factors)
    if cfg.normalize:
        final = final.normalize()
    return CpResult(final, history, iterations, converged)


def _compressed_basis(arr, mode, rank):
    u, s, _ = np.linalg.svd(unfold(arr, mode), full_matrices=False)
    cutoff = max(arr.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if np.count_nonzero(s > cutoff) < rank:
        raise RankDeficiencyError(
            f"mode-{mode} unfolding has numerical rank {np.count_nonzero(s > cutoff)} < {rank}; "
            "tensor slices are rank deficient"
        )
    return u[:, :rank]


def _real_eig(m, what):
    vals, vecs = np.linalg.eig(m)
    scale = np.max(np.abs(vals))
    if scale == 0:
        raise IllConditionedError(f"{what}: all eigenvalues vanish")
    if np.max(np.abs(vals.imag)) > 1e-8 * scale:
        raise IllConditionedError(f"{what}: eigenvalues are complex")
    vals = vals.real
    vecs = vecs.real
    for i, j in itertools.combinations(range(vals.size), 2):
        if abs(vals[i] - vals[j]) < 1e-8 * scale:
            raise IllConditionedError(
                f"{what}: eigenvalues {vals[i]:.3g} and {vals[j]:.3g} are not separated"
            )
    return vals, vecs


def jennrich(t, rank: int, seed: int = 0) -> KruskalTensor:
    """Exact CP decomposition of an order-3 tensor by simultaneous diagonalization.

    Two random contractions of the third mode give slices
    ``A Diag(<c_r, x>) B^T`` and ``A Diag(<c_r, y>) B^T``. Eigenvectors of
    ``Tx Ty^+`` are the columns of A, those of ``(Tx^+ Ty)^T`` the columns
    of B with reciprocal eigenvalues, which is how the two are paired. C
    then follows from a least-squares solve on the mode-3 unfolding.

    The slice pair is compressed onto the leading ``rank`` left singular
    vectors of the mode-1 and mode-2 unfoldings first, so the
    pseudo-inverses act on invertible ``rank x rank`` matrices.
    """
    arr = as_array(t)
    check_finite(arr)
    if arr.ndim != 3:
        raise DimensionError(f"Jennrich's algorithm needs an order-3 tensor, got order {arr.ndim}")
    if rank < 1 or rank > min(arr.shape[0], arr.shape[1]):
        raise ConfigurationError(f"rank {rank} must be in 1..{min(arr.shape[:2])}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(arr.shape[2])
    y = rng.standard_normal(arr.shape[2])
    x /= np.linalg.norm(x)
    y /= np.linalg.norm(y)

    tx = multilinear_transform(arr, [IDENTITY, IDENTITY, x]).data
    ty = multilinear_transform(arr, [IDENTITY, IDENTITY, y]).data
    u = _compressed_basis(arr, 1, rank)
    v = _compressed_basis(arr, 2, rank)
    tx_c = u.T @ tx @ v
    ty_c = u.T @ ty @ v
    if min(np.linalg.svd(ty_c, compute_uv=False)[-1], np.linalg.svd(tx_c, compute_uv=False)[-1]) <= (
        rank * np.finfo(float).eps * np.linalg.norm(tx_c, 2)
    ):
        raise RankDeficiencyError("random slices are rank deficient")

    vals_a, vecs_a = _real_eig(tx_c @ np.linalg.pinv(ty_c), "A eigenproblem")
    vals_b, vecs_b = _real_eig((np.linalg.pinv(tx_c) @ ty_c).T, "B eigenproblem")

    order_b = []
    free = list(range(rank))
    for r in range(rank):
        products = [abs(vals_a[r] * vals_b[s] - 1.0) for s in free]
        best = int(np.argmin(products))
        if products[best] > 1e-6:
            raise IllConditionedError(
                f"no reciprocal eigenvalue for {vals_a[r]:.6g} (closest product off by {products[best]:.3g})"
            )
        order_b.append(free.pop(best))

    a = u @ vecs_a
    b = v @ vecs_b[:, order_b]
    a /= np.linalg.norm(a, axis=0)
    b /= np.linalg.norm(b, axis=0)
    c = np.linalg.lstsq(khatri_rao(b, a), unfold(arr, 3).T, rcond=None)[0].T
    return KruskalTensor(np.ones(rank), [a, b, c]).normalize()


def _numerical_rank(m, tol):
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.count_nonzero(s > tol))


def k_rank(m, tol: float | None = None) -> int:
    """Kruskal rank: the largest k such that every k columns are independent.

    Singular values count as nonzero above ``tol * sigma_max(m)``; the
    default ``tol`` is ``max(m.shape) * eps``. All column subsets are
    checked, so the cost grows combinatorially with the column count.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError("k_rank needs a matrix")
    if tol is None:
        tol = max(m.shape) * np.finfo(float).eps
    smax = np.linalg.norm(m, 2) if m.size else 0.0
    if smax == 0:
        return 0
    threshold = tol * smax
    best = 0
    for k in range(1, min(m.shape) + 1):
        if all(_numerical_rank(m[:, cols], threshold) == k
               for cols in itertools.combinations(range(m.shape[1]), k)):
            best = k
        else:
            break
    return best


@dataclass
class UniquenessReport:
    k_ranks: list[int]
    rank: int
    order: int
    sufficient: bool
    khatri_rao_ranks: list[int] = field(default_factory=list)
    necessary_khatri_rao: bool = False
    necessary_rank_product: bool = False

    @property
    def bound(self) -> int:
        return 2 * self.rank + self.order - 1


def uniqueness_report(model: KruskalTensor, tol: float | None = None) -> UniquenessReport:
    """Evaluate the k-rank sufficient condition plus two necessary conditions.

    Sufficient: ``sum_n k_rank(A(n)) >= 2R + N - 1``. Necessary: each
    Khatri-Rao product leaving one factor out has rank R, and for every n the
    product of the other factors' ranks is at least R.
    """
    factors = [np.asarray(f) for f in model.factors]
    ranks_k = [k_rank(f, tol) for f in factors]
    n_modes, r = len(factors), model.rank
    sufficient = sum(ranks_k) >= 2 * r + n_modes - 1

    def mat_rank(m):
        s = np.linalg.svd(m, compute_uv=False)
        thr = (tol if tol is not None else max(m.shape) * np.finfo(float).eps) * (s[0] if s.size else 0)
        return int(np.count_nonzero(s > thr)) if s.size and s[0] > 0 else 0

    kr_ranks = []
    if n_modes >= 2:
        kr_ranks = [mat_rank(khatri_rao_chain(factors, skip=n)) for n in range(1, n_modes + 1)]
    plain = [mat_rank(f) for f in factors]
    products = [math.prod(p for m, p in enumerate(plain) if m != n) for n in range(n_modes)]
    return UniquenessReport(
        k_ranks=ranks_k,
        rank=r,
        order=n_modes,
        sufficient=sufficient,
        khatri_rao_ranks=kr_ranks,
        necessary_khatri_rao=bool(kr_ranks) and min(kr_ranks) == r,
        necessary_rank_product=min(products) >= r,
    )


def check_sufficient_uniqueness(model: KruskalTensor, tol: float | None = None) -> bool:
    """True iff the k-rank sum reaches ``2R + N - 1``.

    The formula is reported as is, including for R = 1 where it fails even
    though rank-1 decompositions are trivially unique.
    """
    return uniqueness_report(model, tol).sufficient
