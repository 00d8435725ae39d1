"""Gaussian-process regression with exact posteriors and consistent sample paths.

Each scalar function (objective or constraint) gets its own GP with an
anisotropic Matern-5/2 or squared-exponential kernel over inputs in the
normalized unit box.  Hyperparameters are chosen by multi-start quasi-Newton
ascent of the Gaussian log marginal likelihood; the observation noise
variance is held fixed at its configured value.  Outputs are standardized to
zero mean / unit variance internally and de-standardized on the way out.

Posterior sample paths are realized lazily: every queried block is drawn
jointly from the Gaussian conditional given the training data and all points
realized earlier on the same path, so re-querying a realized point returns
the identical value.  A landmark low-rank square root of the posterior
covariance is available for large evaluation blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize as _lbfgs
from scipy.spatial.distance import cdist

from .errors import InvalidArgumentError, NumericalFailureError
from .pareto import nondominated_filter

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)

# Hyperparameter search box for `fit`, in natural log.  Inputs live in the
# unit box and outputs are standardized; the wide tops let the likelihood
# reach near-linear trend fits (long lengthscale with large signal variance).
LOG_LENGTHSCALE_BOUNDS = (math.log(5e-3), math.log(1e2))
LOG_SIGNAL_VARIANCE_BOUNDS = (math.log(1e-3), math.log(1e4))

_SQRT5 = math.sqrt(5.0)
_LOG2PI = math.log(2.0 * math.pi)


class KernelFamily(Enum):
    MATERN52 = "matern52"
    SQUARED_EXPONENTIAL = "squared_exponential"


@dataclass(frozen=True)
class KernelSpec:
    """Anisotropic stationary kernel: family, per-dimension lengthscales, signal variance."""

    family: KernelFamily
    lengthscales: np.ndarray
    signal_variance: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if ls.ndim != 1 or ls.size == 0:
            raise InvalidArgumentError("lengthscales must be a 1-D vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise InvalidArgumentError("lengthscales must be strictly positive and finite")
        sv = float(self.signal_variance)
        object.__setattr__(self, "signal_variance", sv)
        if not math.isfinite(sv) or sv <= 0:
            raise InvalidArgumentError("signal_variance must be strictly positive and finite")

    @property
    def dim(self) -> int:
        return self.lengthscales.size


def _scaled_sqdist(spec: KernelSpec, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    return cdist(x / spec.lengthscales, z / spec.lengthscales, metric="sqeuclidean")


def kernel_matrix(spec: KernelSpec, x, z=None) -> np.ndarray:
    """Cross-covariance matrix k(x, z) for row-stacked inputs."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = x if z is None else np.atleast_2d(np.asarray(z, dtype=float))
    if x.shape[1] != spec.dim or z.shape[1] != spec.dim:
        raise InvalidArgumentError(
            f"input dimension {x.shape[1]}/{z.shape[1]} does not match kernel dimension {spec.dim}"
        )
    r2 = _scaled_sqdist(spec, x, z)
    if spec.family is KernelFamily.SQUARED_EXPONENTIAL:
        return spec.signal_variance * np.exp(-0.5 * r2)
    r = np.sqrt(np.maximum(r2, 0.0))
    return spec.signal_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    """Kernel value between two points."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    xp = np.asarray(xp, dtype=float).reshape(1, -1)
    return float(kernel_matrix(spec, x, xp)[0, 0])


@dataclass(frozen=True)
class Dataset:
    """Observed design sites in the unit box with scalar observations."""

    sites: np.ndarray
    values: np.ndarray
    noise_variance: float
    duplicate_tolerance: float = 1e-9

    def __post_init__(self):
        sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", values)
        if sites.shape[0] != values.size:
            raise InvalidArgumentError("sites and values must have matching length")
        if not np.all(np.isfinite(sites)) or not np.all(np.isfinite(values)):
            raise InvalidArgumentError("sites and values must be finite")
        if np.any(sites < -1e-12) or np.any(sites > 1.0 + 1e-12):
            raise InvalidArgumentError("sites must lie in the normalized unit box")
        if float(self.noise_variance) < 0:
            raise InvalidArgumentError("noise_variance must be nonnegative")
        if sites.shape[0] > 1:
            d = cdist(sites, sites)
            np.fill_diagonal(d, np.inf)
            if d.min() <= self.duplicate_tolerance:
                raise InvalidArgumentError("dataset contains duplicate sites within tolerance")

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    @property
    def dim(self) -> int:
        return self.sites.shape[1]


def chol_psd(a: np.ndarray, ladder: Sequence[float] = JITTER_LADDER):
    """Lower Cholesky factor of ``a`` with diagonal jitter escalation.

    Returns ``(L, jitter)``; raises :class:`NumericalFailureError` carrying the
    attempted ladder when every level fails.
    """
    n = a.shape[0]
    eye = np.eye(n)
    for jitter in ladder:
        try:
            return np.linalg.cholesky(a + jitter * eye), float(jitter)
        except np.linalg.LinAlgError:
            continue
    raise NumericalFailureError(
        f"Cholesky failed for a {n}x{n} matrix after jitter escalation", jitter_ladder=ladder
    )


@dataclass(frozen=True)
class GpModel:
    """Fitted posterior for one scalar function.

    The kernel, Cholesky factor, and ``alpha`` live in standardized output
    space (``y_std = (y - y_shift) / y_scale``); posterior queries are
    de-standardized before being returned.
    """

    kernel: KernelSpec
    data: Dataset
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    y_shift: float
    y_scale: float
    log_marginal_likelihood: float

    @property
    def noise_variance_std(self) -> float:
        return float(self.data.noise_variance) / (self.y_scale**2)

    @property
    def values_std(self) -> np.ndarray:
        return (self.data.values - self.y_shift) / self.y_scale


def _standardization(values: np.ndarray, standardize: bool) -> tuple[float, float]:
    if not standardize:
        return 0.0, 1.0
    shift = float(values.mean())
    scale = float(values.std())
    if not math.isfinite(scale) or scale < 1e-12:
        scale = 1.0
    return shift, scale


def build_model(data: Dataset, spec: KernelSpec, standardize: bool = True) -> GpModel:
    """Assemble a model with fixed hyperparameters (no fitting)."""
    if spec.dim != data.dim:
        raise InvalidArgumentError("kernel dimension does not match data dimension")
    shift, scale = _standardization(data.values, standardize)
    y = (data.values - shift) / scale
    noise = data.noise_variance / scale**2
    k = kernel_matrix(spec, data.sites)
    chol, jitter = chol_psd(k + noise * np.eye(data.n))
    alpha = solve_triangular(chol.T, solve_triangular(chol, y, lower=True), lower=False)
    lml = -0.5 * float(y @ alpha) - float(np.log(np.diag(chol)).sum()) - 0.5 * data.n * _LOG2PI
    return GpModel(
        kernel=spec,
        data=data,
        chol=chol,
        alpha=alpha,
        jitter=jitter,
        y_shift=shift,
        y_scale=scale,
        log_marginal_likelihood=lml,
    )


def _nll_and_grad(z, d2_stack, y, noise, family, n):
    d = d2_stack.shape[0]
    ell2 = np.exp(2.0 * z[:d])
    sig2 = math.exp(z[d])
    r2 = np.tensordot(1.0 / ell2, d2_stack, axes=(0, 0))
    if family is KernelFamily.SQUARED_EXPONENTIAL:
        kf = sig2 * np.exp(-0.5 * r2)
        w = kf
    else:
        r = np.sqrt(np.maximum(r2, 0.0))
        base = np.exp(-_SQRT5 * r)
        kf = sig2 * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * base
        w = sig2 * (5.0 / 3.0) * (1.0 + _SQRT5 * r) * base
    a = kf + (noise + 1e-12) * np.eye(n)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return np.inf, np.zeros(d + 1)
    alpha = solve_triangular(chol.T, solve_triangular(chol, y, lower=True), lower=False)
    nll = 0.5 * float(y @ alpha) + float(np.log(np.diag(chol)).sum()) + 0.5 * n * _LOG2PI
    kinv = solve_triangular(chol.T, solve_triangular(chol, np.eye(n), lower=True), lower=False)
    m = np.outer(alpha, alpha) - kinv
    grad = np.empty(d + 1)
    mw = m * w
    for j in range(d):
        grad[j] = -0.5 * float((mw * d2_stack[j]).sum()) / ell2[j]
    grad[d] = -0.5 * float((m * kf).sum())
    return nll, grad


def fit(
    data: Dataset,
    spec0: KernelSpec | None = None,
    restarts: int = 4,
    rng=None,
    standardize: bool = True,
    family: KernelFamily = KernelFamily.MATERN52,
    maxiter: int = 60,
) -> GpModel:
    """Fit kernel hyperparameters by maximizing the log marginal likelihood.

    The first start is ``spec0`` (or a default); the remaining
    ``restarts - 1`` starts are drawn from ``rng``.  The best final value
    wins, so results are deterministic given the RNG stream.
    """
    if data.n < 2:
        raise InvalidArgumentError("fitting requires at least 2 observations")
    if restarts < 1:
        raise InvalidArgumentError("restarts must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    d = data.dim
    if spec0 is None:
        spec0 = KernelSpec(family, np.full(d, 0.5), 1.0)
    elif spec0.dim != d:
        raise InvalidArgumentError("spec0 dimension does not match data")
    family = spec0.family

    shift, scale = _standardization(data.values, standardize)
    y = (data.values - shift) / scale
    noise = data.noise_variance / scale**2

    diffs = data.sites[:, None, :] - data.sites[None, :, :]
    d2_stack = np.ascontiguousarray(np.transpose(diffs**2, (2, 0, 1)))

    bounds = [LOG_LENGTHSCALE_BOUNDS] * d + [LOG_SIGNAL_VARIANCE_BOUNDS]

    z0 = np.concatenate([np.log(spec0.lengthscales), [math.log(spec0.signal_variance)]])
    starts = [np.clip(z0, [b[0] for b in bounds], [b[1] for b in bounds])]
    for _ in range(restarts - 1):
        ls = rng.uniform(math.log(0.05), math.log(2.0), size=d)
        sv = rng.uniform(math.log(0.25), math.log(4.0))
        starts.append(np.concatenate([ls, [sv]]))

    best_z, best_val = None, np.inf
    for z_start in starts:
        res = _lbfgs(
            _nll_and_grad,
            z_start,
            args=(d2_stack, y, noise, family, data.n),
            method="L-BFGS-B",
            jac=True,
            bounds=bounds,
            options={"maxiter": maxiter},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_z = float(res.fun), res.x.copy()
    if best_z is None:
        raise NumericalFailureError("marginal likelihood was non-finite at every start", JITTER_LADDER)

    spec = KernelSpec(family, np.exp(best_z[:d]), math.exp(best_z[d]))
    return build_model(data, spec, standardize=standardize)


def posterior(model: GpModel, x):
    """Posterior mean and variance at one point or a batch of points.

    The variance is the latent-function variance, clamped to
    ``[0, signal_variance + noise_variance]`` (in standardized space) before
    de-standardization.
    """
    xs = np.asarray(x, dtype=float)
    single = xs.ndim == 1
    xs = np.atleast_2d(xs)
    kx = kernel_matrix(model.kernel, model.data.sites, xs)
    mean = kx.T @ model.alpha
    v = solve_triangular(model.chol, kx, lower=True)
    var = model.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
    var = np.clip(var, 0.0, model.kernel.signal_variance + model.noise_variance_std)
    mean = model.y_shift + model.y_scale * mean
    var = model.y_scale**2 * var
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def posterior_block(model: GpModel, x):
    """Posterior mean vector and full covariance matrix over a block (raw units)."""
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    kx = kernel_matrix(model.kernel, model.data.sites, xs)
    mean = model.y_shift + model.y_scale * (kx.T @ model.alpha)
    v = solve_triangular(model.chol, kx, lower=True)
    cov = kernel_matrix(model.kernel, xs) - v.T @ v
    cov = 0.5 * (cov + cov.T)
    return mean, model.y_scale**2 * cov


class LandmarkRule(Enum):
    NONDOMINATED_TRAINING_POINTS = "pareto"
    FIRST_M = "first"


@dataclass(frozen=True)
class NystromConfig:
    """Low-rank path sampling switch: landmark rule and budget."""

    enabled: bool = False
    landmark_rule: LandmarkRule = LandmarkRule.NONDOMINATED_TRAINING_POINTS
    max_landmarks: int = 64

    def __post_init__(self):
        if int(self.max_landmarks) < 1:
            raise InvalidArgumentError("max_landmarks must be >= 1")


def nystrom_sqrt(cov_full_rows: np.ndarray, cov_landmarks: np.ndarray, rel_cutoff: float = 1e-12) -> np.ndarray:
    """Low-rank square root ``R`` with ``R @ R.T`` the landmark approximation.

    ``cov_full_rows`` holds the m landmark rows of the full N x N covariance
    (shape m x N) and ``cov_landmarks`` its m x m landmark block; the result
    is ``cov_full_rows.T @ cov_landmarks^{-1/2}`` with a spectral
    pseudo-inverse, costing O(m^3 + N m^2).
    """
    smn = np.atleast_2d(np.asarray(cov_full_rows, dtype=float))
    smm = np.atleast_2d(np.asarray(cov_landmarks, dtype=float))
    if smm.shape[0] != smm.shape[1] or smm.shape[0] != smn.shape[0]:
        raise InvalidArgumentError("landmark block and rows have inconsistent shapes")
    if not np.all(np.isfinite(smn)) or not np.all(np.isfinite(smm)):
        raise NumericalFailureError("non-finite covariance entries", ())
    smm = 0.5 * (smm + smm.T)
    try:
        eigvals, eigvecs = np.linalg.eigh(smm)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"landmark eigendecomposition failed: {exc}", ()) from exc
    cutoff = max(eigvals.max(), 0.0) * rel_cutoff
    inv_sqrt = np.where(eigvals > cutoff, 1.0 / np.sqrt(np.maximum(eigvals, cutoff)), 0.0)
    root = (eigvecs * inv_sqrt[None, :]) @ eigvecs.T
    return smn.T @ root


def nondominated_landmarks(sites: np.ndarray, objective_values: np.ndarray, max_landmarks: int) -> np.ndarray:
    """Training sites whose observed objective vectors are nondominated (capped)."""
    idx = nondominated_filter(objective_values)
    return np.atleast_2d(sites[idx[: int(max_landmarks)]])


class _ExactPathState:
    """Incremental conditioning state for one function's exact sample path."""

    def __init__(self, model: GpModel):
        self.model = model
        self.sites = model.data.sites.copy()
        self.chol = model.chol.copy()
        self.white = solve_triangular(model.chol, model.values_std, lower=True)
        self.path_sites: list[np.ndarray] = []
        self.path_values: list[float] = []

    def extend(self, new_sites: np.ndarray, rng, path_jitter: float) -> np.ndarray:
        spec = self.model.kernel
        c = kernel_matrix(spec, self.sites, new_sites)
        b = solve_triangular(self.chol, c, lower=True)
        mean = b.T @ self.white
        cov = kernel_matrix(spec, new_sites) - b.T @ b
        cov = 0.5 * (cov + cov.T)
        ladder = tuple(j for j in JITTER_LADDER if j >= path_jitter) or (path_jitter,)
        l_new, _ = chol_psd(cov, ladder=ladder)
        vals = mean + l_new @ rng.standard_normal(new_sites.shape[0])

        m_old = self.chol.shape[0]
        p = new_sites.shape[0]
        grown = np.zeros((m_old + p, m_old + p))
        grown[:m_old, :m_old] = self.chol
        grown[m_old:, :m_old] = b.T
        grown[m_old:, m_old:] = l_new
        self.chol = grown
        self.white = np.concatenate([self.white, solve_triangular(l_new, vals - mean, lower=True)])
        self.sites = np.vstack([self.sites, new_sites])
        raw = self.model.y_shift + self.model.y_scale * vals
        for row, val in zip(new_sites, raw):
            self.path_sites.append(row.copy())
            self.path_values.append(float(val))
        return raw


class _LandmarkPathState:
    """Fixed-draw low-rank sample path: mean plus landmark cross-covariance times a frozen normal."""

    def __init__(self, model: GpModel, landmarks: np.ndarray, rng):
        self.model = model
        self.landmarks = np.atleast_2d(landmarks)
        spec = model.kernel
        self.b_land = solve_triangular(model.chol, kernel_matrix(spec, model.data.sites, self.landmarks), lower=True)
        smm = kernel_matrix(spec, self.landmarks) - self.b_land.T @ self.b_land
        z = rng.standard_normal(self.landmarks.shape[0])
        # coefficient vector Smm^{-1/2} z, shared by every queried block
        self.coeff = self._inv_sqrt_apply(smm, z)
        self.path_sites: list[np.ndarray] = []
        self.path_values: list[float] = []

    @staticmethod
    def _inv_sqrt_apply(smm: np.ndarray, z: np.ndarray) -> np.ndarray:
        smm = 0.5 * (smm + smm.T)
        eigvals, eigvecs = np.linalg.eigh(smm)
        cutoff = max(eigvals.max(), 0.0) * 1e-12
        inv_sqrt = np.where(eigvals > cutoff, 1.0 / np.sqrt(np.maximum(eigvals, cutoff)), 0.0)
        return (eigvecs * inv_sqrt[None, :]) @ (eigvecs.T @ z)

    def extend(self, new_sites: np.ndarray, rng, path_jitter: float) -> np.ndarray:
        model = self.model
        spec = model.kernel
        kx = kernel_matrix(spec, model.data.sites, new_sites)
        mean = kx.T @ model.alpha
        v = solve_triangular(model.chol, kx, lower=True)
        cross = kernel_matrix(spec, new_sites, self.landmarks) - v.T @ self.b_land
        vals = mean + cross @ self.coeff
        raw = model.y_shift + model.y_scale * vals
        for row, val in zip(new_sites, raw):
            self.path_sites.append(row.copy())
            self.path_values.append(float(val))
        return raw


class PathSampler:
    """One consistent posterior sample path per function.

    Exact mode conditions each queried block jointly on the training data and
    on all previously realized path points.  When ``landmarks`` is given, the
    path is instead the posterior mean plus the landmark cross-covariance
    applied to a normal draw frozen at construction, which reproduces the
    low-rank covariance of :func:`nystrom_sqrt` and is consistent across
    blocks by construction.
    """

    def __init__(
        self,
        models: Sequence[GpModel],
        rng,
        landmarks: np.ndarray | None = None,
        duplicate_tolerance: float = 1e-9,
        path_jitter: float = 1e-10,
    ):
        self.models = list(models)
        if not self.models:
            raise InvalidArgumentError("PathSampler requires at least one model")
        self.rng = rng
        self.duplicate_tolerance = float(duplicate_tolerance)
        self.path_jitter = float(path_jitter)
        if landmarks is None:
            self._states = [_ExactPathState(m) for m in self.models]
        else:
            self._states = [_LandmarkPathState(m, landmarks, rng) for m in self.models]

    def path_sites(self, fn_index: int) -> np.ndarray:
        st = self._states[fn_index]
        return np.array(st.path_sites) if st.path_sites else np.empty((0, self.models[fn_index].data.dim))

    def path_values(self, fn_index: int) -> np.ndarray:
        return np.array(self._states[fn_index].path_values)

    def sample(self, fn_index: int, block) -> np.ndarray:
        block = np.atleast_2d(np.asarray(block, dtype=float))
        state = self._states[fn_index]
        if block.shape[1] != self.models[fn_index].data.dim:
            raise InvalidArgumentError("block dimension does not match model dimension")

        known_sites = np.array(state.path_sites) if state.path_sites else None
        out = np.empty(block.shape[0])
        pending_rows: list[np.ndarray] = []
        pending_pos: list[list[int]] = []
        tol = self.duplicate_tolerance

        known_hits = None
        if known_sites is not None:
            dmat = cdist(block, known_sites)
            known_hits = np.where(dmat.min(axis=1) <= tol, dmat.argmin(axis=1), -1)

        for i, row in enumerate(block):
            hit = None
            if known_hits is not None and known_hits[i] >= 0:
                hit = ("known", int(known_hits[i]))
            if hit is None:
                for k, prow in enumerate(pending_rows):
                    if np.linalg.norm(prow - row) <= tol:
                        hit = ("pending", k)
                        break
            if hit is None:
                pending_rows.append(row)
                pending_pos.append([i])
            elif hit[0] == "known":
                out[i] = state.path_values[hit[1]]
            else:
                pending_pos[hit[1]].append(i)

        if pending_rows:
            new_vals = state.extend(np.array(pending_rows), self.rng, self.path_jitter)
            for val, positions in zip(new_vals, pending_pos):
                for i in positions:
                    out[i] = val
        return out


def joint_sample(sampler: PathSampler, fn_index: int, block) -> np.ndarray:
    """Values of one consistent sample path at a block of points."""
    return sampler.sample(fn_index, block)
