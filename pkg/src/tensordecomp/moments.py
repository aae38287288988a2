"""Method-of-moments estimation for spherical Gaussian mixtures and
single-topic models.

Both models reduce to the moment form

    M2 = sum_i w_i a_i o a_i,        M3 = sum_i w_i a_i o a_i o a_i.

A whitening matrix ``W`` (``W^T M2 W = I``) turns ``M3(W, W, W)`` into an
orthogonally decomposable tensor with eigenvalues ``1 / sqrt(w_i)``, whose
eigenvectors are found by power iteration and mapped back with
``(W^T)^+``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DenseTensor
from .errors import (
    ConfigurationError,
    DataError,
    DimensionError,
    RankDeficiencyError,
    StageError,
    TensorDecompError,
)
from .power import PowerConfig, extract_eigenpairs, power_deflate
from .products import multilinear_transform

__all__ = [
    "GmmSpec",
    "TopicSpec",
    "MomentSet",
    "MixtureEstimate",
    "gmm_generate",
    "topic_generate",
    "word_counts",
    "gmm_moments",
    "gmm_moments_from_raw",
    "gmm_population_raw_moments",
    "topic_moments",
    "population_moments",
    "whitening_matrix",
    "whitened_power_estimate",
    "unwhiten",
    "estimate_mixture",
    "match_columns",
    "total_variation",
    "default_gmm_spec",
    "default_topic_spec",
]

MODEL_KINDS = ("gmm", "topic")
_CHUNK = 20000


def _check_simplex(w, name, tol=1e-9):
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > tol:
        raise ConfigurationError(f"{name} must be a probability vector (nonnegative, sum 1)")
    return w


@dataclass
class GmmSpec:
    """Spherical Gaussian mixture: ``x = A h + z`` with ``z ~ N(0, sigma^2 I)``."""

    means: np.ndarray
    weights: np.ndarray
    sigma: float

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.weights = _check_simplex(self.weights, "weights")
        if self.means.shape[1] != self.weights.size:
            raise ConfigurationError(
                f"means have {self.means.shape[1]} columns but {self.weights.size} weights given"
            )
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")

    @property
    def k(self):
        return self.weights.size

    @property
    def d(self):
        return self.means.shape[0]


@dataclass
class TopicSpec:
    """Single-topic bag-of-words model; column i of ``topics`` is P(word | topic i)."""

    topics: np.ndarray
    weights: np.ndarray
    words_per_doc: int = 3

    def __post_init__(self):
        self.topics = np.atleast_2d(np.asarray(self.topics, dtype=np.float64))
        self.weights = _check_simplex(self.weights, "weights")
        if self.topics.shape[1] != self.weights.size:
            raise ConfigurationError(
                f"topic matrix has {self.topics.shape[1]} columns but {self.weights.size} weights given"
            )
        for i in range(self.topics.shape[1]):
            _check_simplex(self.topics[:, i], f"topic column {i + 1}")
        if self.words_per_doc < 3:
            raise ConfigurationError("documents need at least 3 words")

    @property
    def k(self):
        return self.weights.size

    @property
    def d(self):
        return self.topics.shape[0]


def default_gmm_spec(k: int, d: int, sigma: float = 0.1, seed: int = 0, weights=None,
                     mean_norm: float = 1.0) -> GmmSpec:
    """Means are ``k`` orthonormal directions (QR of a Gaussian matrix) scaled to ``mean_norm``."""
    if not 1 <= k <= d:
        raise ConfigurationError(f"need 1 <= k <= d, got k={k}, d={d}")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    weights = np.full(k, 1.0 / k) if weights is None else weights
    return GmmSpec(q[:, :k] * mean_norm, weights, sigma)


def default_topic_spec(k: int, d: int, words_per_doc: int = 3, seed: int = 0, weights=None,
                       boost: float = 10.0) -> TopicSpec:
    """Topics concentrate on disjoint vocabulary blocks.

    Every word gets a uniform(0.5, 1.5) base mass; words in topic i's block
    are multiplied by ``boost`` before the column is normalized.
    """
    if not 1 <= k <= d:
        raise ConfigurationError(f"need 1 <= k <= d, got k={k}, d={d}")
    rng = np.random.default_rng(seed)
    topics = rng.uniform(0.5, 1.5, size=(d, k))
    for i, block in enumerate(np.array_split(np.arange(d), k)):
        topics[block, i] *= boost
    topics /= topics.sum(axis=0)
    weights = np.full(k, 1.0 / k) if weights is None else weights
    return TopicSpec(topics, weights, words_per_doc)


def gmm_generate(spec: GmmSpec, n: int, seed: int = 0):
    """Draw ``n`` samples; returns ``(X, labels)`` with 0-based labels."""
    if n < 1:
        raise ConfigurationError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    labels = rng.choice(spec.k, size=n, p=spec.weights)
    noise = rng.standard_normal((n, spec.d)) * spec.sigma
    return spec.means.T[labels] + noise, labels


def topic_generate(spec: TopicSpec, n_docs: int, seed: int = 0):
    """Draw ``n_docs`` documents; returns ``(words, labels)``.

    ``words`` is an ``n_docs x l`` array of 0-based word indices.
    """
    if n_docs < 1:
        raise ConfigurationError(f"document count must be >= 1, got {n_docs}")
    rng = np.random.default_rng(seed)
    labels = rng.choice(spec.k, size=n_docs, p=spec.weights)
    words = np.empty((n_docs, spec.words_per_doc), dtype=np.int64)
    cdf = np.cumsum(spec.topics, axis=0)
    cdf[-1, :] = 1.0
    u = rng.random((n_docs, spec.words_per_doc))
    for i in range(spec.k):
        rows = labels == i
        words[rows] = np.searchsorted(cdf[:, i], u[rows], side="right")
    return words, labels


def word_counts(docs, d: int) -> np.ndarray:
    """Per-document word count vectors from 0-based word index lists."""
    counts = np.zeros((len(docs), d))
    for row, doc in enumerate(docs):
        doc = np.asarray(doc, dtype=np.int64)
        if doc.size and (doc.min() < 0 or doc.max() >= d):
            raise DataError(f"document {row + 1}: word index outside vocabulary of size {d}")
        np.add.at(counts[row], doc, 1.0)
    return counts


@dataclass
class MomentSet:
    """First three moments in the reduced form ``M2 = sum w a a^T``, ``M3 = sum w a^3``.

    ``third`` may be ``None`` when it was not materialized; the samples kept
    in ``samples`` then serve the whitened contractions directly.
    """

    mean: np.ndarray
    second: np.ndarray
    third: np.ndarray | None
    sigma2: float | None = None
    kind: str = "gmm"
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self):
        return self.mean.size

    def whitened_third(self, w) -> DenseTensor:
        """Materialize ``M3(W, W, W)``."""
        if self.third is not None:
            return multilinear_transform(self.third, [w, w, w])
        if self.samples is None:
            raise DataError("third moment neither materialized nor backed by samples")
        if self.kind == "gmm":
            return DenseTensor(_gmm_whitened_third(self.samples, w, self.mean, self.sigma2))
        return DenseTensor(_topic_whitened_third(self.samples, w))

    def whitened_contraction(self, w) -> Callable[[np.ndarray], np.ndarray]:
        """``v -> M3(W, W, W)(I, v, v)`` computed from the samples without forming any tensor."""
        if self.samples is None:
            v3 = self.whitened_third(w).data
            return lambda v: np.einsum("abc,b,c->a", v3, v, v)
        if self.kind == "gmm":
            return _gmm_contraction(self.samples, w, self.mean, self.sigma2)
        return _topic_contraction(self.samples, w)


def _raw_third(x):
    n, d = x.shape
    out = np.zeros((d * d, d))
    for lo in range(0, n, _CHUNK):
        xc = x[lo:lo + _CHUNK]
        pairs = (xc[:, :, None] * xc[:, None, :]).reshape(xc.shape[0], d * d)
        out += pairs.T @ xc
    # Index order (i, j, k) with the pair flattened C-style.
    return out.reshape(d, d, d)


def _gmm_correction(mean, d):
    eye = np.eye(d)
    return (np.einsum("a,bc->abc", mean, eye)
            + np.einsum("b,ac->abc", mean, eye)
            + np.einsum("c,ab->abc", mean, eye))


def _check_finite_samples(x):
    if not np.all(np.isfinite(x)):
        raise DataError("samples contain non-finite values")


def gmm_population_raw_moments(spec: GmmSpec):
    """Exact ``E[x]``, ``E[x x^T]`` and ``E[x o x o x]`` for a spherical GMM."""
    a, w, s2 = spec.means, spec.weights, spec.sigma ** 2
    mean = a @ w
    raw2 = (a * w) @ a.T + s2 * np.eye(spec.d)
    raw3 = np.einsum("i,ai,bi,ci->abc", w, a, a, a) + s2 * _gmm_correction(mean, spec.d)
    return mean, raw2, raw3


def gmm_moments_from_raw(mean, raw2, raw3, k: int, samples=None) -> MomentSet:
    """Reduce raw GMM moments to the ``sum w a^n`` form.

    The shared variance is the smallest eigenvalue of the covariance
    ``E[x x^T] - mu mu^T``. It is subtracted from the raw second moment,
    and ``sigma^2 sum_i (mu o e_i o e_i + e_i o mu o e_i + e_i o e_i o mu)``
    from the raw third moment. ``raw3`` may be ``None``; the correction is
    then applied inside the whitened contractions.
    """
    mean = np.asarray(mean, dtype=np.float64)
    d = mean.size
    if k < 1 or k > d:
        raise ConfigurationError(
            f"k={k} components exceed dimension d={d}; whitening needs k <= d"
        )
    raw2 = np.asarray(raw2, dtype=np.float64)
    cov = raw2 - np.outer(mean, mean)
    sigma2 = float(np.linalg.eigvalsh((cov + cov.T) / 2)[0])
    second = raw2 - sigma2 * np.eye(d)
    second = (second + second.T) / 2
    third = None
    if raw3 is not None:
        third = np.asarray(raw3, dtype=np.float64) - sigma2 * _gmm_correction(mean, d)
    return MomentSet(mean, second, third, sigma2, "gmm", samples)


def gmm_moments(x, k: int, materialize: bool = True) -> MomentSet:
    """Empirical GMM moments (plain ``1/n`` averages, uncentered)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("samples must be an n x d matrix")
    _check_finite_samples(x)
    n, d = x.shape
    if k < 1 or k > d:
        raise ConfigurationError(
            f"k={k} components exceed dimension d={d}; whitening needs k <= d"
        )
    if n <= d:
        raise DataError(f"need more samples than dimensions, got n={n}, d={d}")
    mean = x.mean(axis=0)
    raw2 = x.T @ x / n
    raw3 = _raw_third(x) / n if materialize else None
    return gmm_moments_from_raw(mean, raw2, raw3, k, samples=x)


def _doc_lengths(counts):
    lengths = counts.sum(axis=1)
    short = np.flatnonzero(lengths < 3)
    if short.size:
        raise DataError(
            f"document {short[0] + 1} has {int(lengths[short[0]])} words; at least 3 are needed"
        )
    return lengths


def topic_moments(counts, k: int, materialize: bool = True) -> MomentSet:
    """Empirical single-topic moments from per-document word counts.

    Pairs and triples run over distinct word positions within a document
    and are averaged per document, then across documents.
    """
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 2:
        raise DimensionError("counts must be an n_docs x d matrix")
    _check_finite_samples(c)
    if np.any(c < 0):
        raise DataError("word counts must be nonnegative")
    n, d = c.shape
    if k < 1 or k > d:
        raise ConfigurationError(f"k={k} topics exceed vocabulary size d={d}")
    lengths = _doc_lengths(c)
    mean = (c / lengths[:, None]).mean(axis=0)
    pair_scale = 1.0 / (lengths * (lengths - 1))
    second = (c * pair_scale[:, None]).T @ c - np.diag(pair_scale @ c)
    second /= n
    third = None
    if materialize:
        triple_scale = 1.0 / (lengths * (lengths - 1) * (lengths - 2))
        third = np.zeros((d * d, d))
        for lo in range(0, n, _CHUNK):
            cc = c[lo:lo + _CHUNK]
            pairs = (cc[:, :, None] * cc[:, None, :]).reshape(cc.shape[0], d * d)
            third += pairs.T @ (cc * triple_scale[lo:lo + _CHUNK, None])
        third = third.reshape(d, d, d)
        # Remove repeated positions: sum_i c_i (e_i e_i c + e_i c e_i + c e_i e_i)
        # then add back 2 sum_i c_i e_i e_i e_i.
        weighted = c * triple_scale[:, None]
        diag_c = weighted.T @ c  # [i, j] = sum_n s_n c_ni c_nj
        idx = np.arange(d)
        repeated = np.zeros((d, d, d))
        repeated[idx, idx, :] += diag_c
        repeated[idx, :, idx] += diag_c
        repeated[:, idx, idx] += diag_c.T
        third -= repeated
        third[idx, idx, idx] += 2 * weighted.sum(axis=0)
        third /= n
    return MomentSet(mean, second, third, None, "topic", c)


def population_moments(a, w) -> MomentSet:
    """Exact ``M2 = sum w a a^T`` and ``M3 = sum w a^3`` from model parameters."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    w = np.asarray(w, dtype=np.float64)
    return MomentSet(
        mean=a @ w,
        second=(a * w) @ a.T,
        third=np.einsum("i,ai,bi,ci->abc", w, a, a, a),
    )


def _gmm_contraction(x, w, mean, sigma2):
    n = x.shape[0]
    y = x @ w
    m = w.T @ mean
    gram = w.T @ w

    def contract(v):
        out = y.T @ (y @ v) ** 2 / n
        if sigma2:
            gv = gram @ v
            out = out - sigma2 * (m * (v @ gv) + 2.0 * gv * (m @ v))
        return out

    return contract


def _gmm_whitened_third(x, w, mean, sigma2):
    y = x @ w
    v3 = np.einsum("na,nb,nc->abc", y, y, y) / x.shape[0]
    if sigma2:
        v3 = v3 - sigma2 * multilinear_transform(_gmm_correction(mean, mean.size), [w, w, w]).data
    return v3


def _topic_contraction(c, w):
    n = c.shape[0]
    lengths = c.sum(axis=1)
    scale = 1.0 / (lengths * (lengths - 1) * (lengths - 2))
    s = c @ w
    totals = c.T @ scale

    def contract(v):
        wv = w @ v
        sv = s @ v
        out = s.T @ (scale * sv ** 2)
        out -= 2.0 * w.T @ (wv * (c.T @ (scale * sv)))
        out -= s.T @ (scale * (c @ wv ** 2))
        out += 2.0 * w.T @ (totals * wv ** 2)
        return out / n

    return contract


def _topic_whitened_third(c, w):
    k = w.shape[1]
    contract = _topic_contraction(c, w)
    # The contraction is quadratic in v; polarization recovers every slice.
    eye = np.eye(k)
    out = np.zeros((k, k, k))
    for b in range(k):
        out[:, b, b] = contract(eye[b])
        for cc in range(b + 1, k):
            mixed = (contract(eye[b] + eye[cc]) - contract(eye[b]) - contract(eye[cc])) / 2
            out[:, b, cc] = mixed
            out[:, cc, b] = mixed
    return out


def whitening_matrix(m2, k: int, tol: float | None = None) -> np.ndarray:
    """``W = U_k Diag(lambda_k^{-1/2})`` from the top-k eigenpairs of ``M2``.

    Raises :class:`RankDeficiencyError` when fewer than ``k`` eigenvalues
    exceed ``tol`` (default ``d * eps * lambda_max``).
    """
    m2 = np.asarray(m2, dtype=np.float64)
    if m2.ndim != 2 or m2.shape[0] != m2.shape[1]:
        raise DimensionError(f"second moment must be square, got {m2.shape}")
    d = m2.shape[0]
    if k < 1 or k > d:
        raise ConfigurationError(f"k={k} must be in 1..{d}")
    vals, vecs = np.linalg.eigh((m2 + m2.T) / 2)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if tol is None:
        tol = d * np.finfo(float).eps * max(vals[0], 0.0)
    good = int(np.count_nonzero(vals > tol))
    if good < k or vals[k - 1] <= 0:
        raise RankDeficiencyError(
            f"second moment has only {good} eigenvalues above {tol:.3g}; cannot whiten to k={k}"
        )
    return vecs[:, :k] / np.sqrt(vals[:k])


def whitened_power_estimate(moments: MomentSet, w, cfg: PowerConfig, path: str = "implicit"):
    """Eigenpairs of the whitened third moment ``V = M3(W, W, W)``.

    ``path="materialized"`` builds ``V`` and runs the dense power method;
    ``path="implicit"`` contracts directly against the whitened samples
    (falling back to ``V`` when no samples are attached). Returns
    ``(V, lambdas, pairs)`` with eigenvectors as the columns of ``V``.
    """
    w = np.asarray(w, dtype=np.float64)
    k = w.shape[1]
    if cfg.n_pairs != k:
        cfg = PowerConfig(k, cfg.max_iters, cfg.tol, cfg.restarts, cfg.seed)
    if path == "materialized":
        pairs = extract_eigenpairs(moments.whitened_third(w), cfg)
    elif path == "implicit":
        pairs = power_deflate(moments.whitened_contraction(w), k, cfg)
    else:
        raise ConfigurationError(f"unknown path {path!r}")
    vecs = np.column_stack([p.vector for p in pairs])
    lams = np.array([p.value for p in pairs])
    return vecs, lams, pairs


@dataclass
class MixtureEstimate:
    components: np.ndarray
    weights: np.ndarray
    sigma2: float | None = None
    eigenvalues: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def unwhiten(v, lams, w, renormalize: bool = False) -> MixtureEstimate:
    """``A = (W^T)^+ V Diag(lambda)`` with weights ``1 / lambda^2``."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    lams = np.asarray(lams, dtype=np.float64).ravel()
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    if v.shape != (w.shape[1], lams.size):
        raise DimensionError(
            f"V has shape {v.shape}; expected {(w.shape[1], lams.size)} from W and lambda"
        )
    a = np.linalg.pinv(w.T) @ v * lams
    weights = 1.0 / lams ** 2
    if renormalize:
        weights = weights / weights.sum()
    return MixtureEstimate(a, weights, eigenvalues=lams)


def _project_columns_to_simplex(a):
    a = np.clip(a, 0.0, None)
    sums = a.sum(axis=0)
    sums[sums == 0] = 1.0
    return a / sums


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except TensorDecompError as exc:
        raise StageError(name, exc) from exc


def estimate_mixture(samples, model_kind: str, k: int, cfg: PowerConfig | None = None,
                     path: str = "implicit", renormalize_weights: bool = False,
                     moments: MomentSet | None = None) -> MixtureEstimate:
    """Full pipeline: moments, whitening, power iteration, un-whitening.

    ``samples`` is an ``n x d`` data matrix for ``"gmm"`` and an
    ``n_docs x d`` word-count matrix for ``"topic"``. Precomputed
    ``moments`` skip the first stage (``samples`` may then be ``None``).
    Errors are re-raised as :class:`StageError` naming the failing stage.
    """
    if model_kind not in MODEL_KINDS:
        raise ConfigurationError(f"model kind must be one of {MODEL_KINDS}, got {model_kind!r}")
    cfg = cfg or PowerConfig(k)
    materialize = path == "materialized"
    if moments is None:
        if model_kind == "gmm":
            moments = _stage("moments", gmm_moments, samples, k, materialize)
        else:
            moments = _stage("moments", topic_moments, samples, k, materialize)
    elif moments.d < k:
        raise StageError("moments", ConfigurationError(f"k={k} exceeds dimension {moments.d}"))
    w = _stage("whitening", whitening_matrix, moments.second, k)
    vecs, lams, pairs = _stage("power", whitened_power_estimate, moments, w, cfg, path)
    est = _stage("unwhiten", unwhiten, vecs, lams, w, renormalize_weights)
    if model_kind == "topic":
        est.components = _project_columns_to_simplex(est.components)
    est.sigma2 = moments.sigma2 if model_kind == "gmm" else None
    est.diagnostics = {
        "whitening_error": float(np.abs(w.T @ moments.second @ w - np.eye(k)).max()),
        "pairs": [
            {
                "eigenvalue": p.value,
                "iterations": p.iterations,
                "restarts_converged": p.restarts_converged,
                "residual": p.residual,
            }
            for p in pairs
        ],
    }
    return est


def match_columns(estimated, truth) -> np.ndarray:
    """Greedy matching by largest absolute cosine.

    Returns ``perm`` such that ``estimated[:, perm[i]]`` is paired with
    ``truth[:, i]``.
    """
    est = np.asarray(estimated, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape[1] < tru.shape[1]:
        raise DimensionError("fewer estimated columns than true columns")
    en = est / np.maximum(np.linalg.norm(est, axis=0), np.finfo(float).tiny)
    tn = tru / np.maximum(np.linalg.norm(tru, axis=0), np.finfo(float).tiny)
    cos = np.abs(tn.T @ en)
    perm = np.full(tru.shape[1], -1)
    for _ in range(tru.shape[1]):
        i, j = np.unravel_index(np.argmax(cos), cos.shape)
        perm[i] = j
        cos[i, :] = -1.0
        cos[:, j] = -1.0
    return perm


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
