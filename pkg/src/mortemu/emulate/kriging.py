"""Simple, ordinary and universal kriging with power-exponential kernels.

Observation noise is heteroskedastic and known per site (batch variance
of the site mean). Hyperparameters are fitted by maximum likelihood with
the trend coefficients concentrated out by generalized least squares.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ..errors import DegenerateBasisError
from ..numcore import cholesky, log_det_from_factor, solve_spd

NUGGET_FLOOR = 1e-12
LOG_2PI = np.log(2.0 * np.pi)

TrendFn = Callable[[np.ndarray], np.ndarray]


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainingSet:
    """Batched training data: site means ``y`` with noise variances ``noise``.

    ``tau2`` holds the per-site sample variance of the replicates and
    ``n_rep`` the replicate counts, so ``noise = tau2 / n_rep``.
    """

    sites: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    tau2: Optional[np.ndarray] = None
    n_rep: Optional[np.ndarray] = None

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=float)
        if sites.ndim == 1:
            sites = sites[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        noise = np.broadcast_to(np.asarray(self.noise, dtype=float), y.shape).copy()
        if sites.shape[0] != y.shape[0]:
            raise ValueError("sites and responses differ in length")
        if np.any(noise < 0) or not (np.all(np.isfinite(sites)) and np.all(np.isfinite(y))
                                     and np.all(np.isfinite(noise))):
            raise ValueError("training data must be finite with non-negative noise")
        if len(np.unique(sites, axis=0)) != len(sites):
            raise ValueError("duplicate design sites")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise", noise)

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    @property
    def dim(self) -> int:
        return self.sites.shape[1]


@dataclass(frozen=True)
class KernelSpec:
    """Product power-exponential kernel ``var * prod exp(-(|h_j|/theta_j)^power)``.

    ``loglik`` and ``converged`` are filled in by :func:`fit_hyperparams`.
    """

    theta: tuple
    var: float
    power: float = 2.0
    loglik: Optional[float] = field(default=None, compare=False)
    converged: bool = field(default=True, compare=False)

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(self.theta))
        if any(t <= 0 for t in theta):
            raise ValueError("lengthscales must be positive")
        if self.var < 0:
            raise ValueError("process variance must be non-negative")
        if not 1.0 <= self.power <= 2.0:
            raise ValueError("power must lie in [1, 2]")
        object.__setattr__(self, "theta", theta)

    def corr(self, a, b) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        h = np.abs(a[:, None, :] - b[None, :, :]) / np.asarray(self.theta)
        return np.exp(-np.sum(h**self.power, axis=-1))

    def __call__(self, a, b) -> np.ndarray:
        return self.var * self.corr(a, b)


def _basis_matrix(basis, Z) -> Optional[np.ndarray]:
    if basis is None:
        return None
    if basis == "constant":
        return np.ones((Z.shape[0], 1))
    if basis == "linear":
        return np.column_stack([np.ones(Z.shape[0]), Z])
    return np.atleast_2d(np.asarray(basis(Z), dtype=float)).reshape(Z.shape[0], -1)


@dataclass(frozen=True, eq=False)
class KrigingFit:
    """Fitted kriging model; immutable and safe to share across threads."""

    train: TrainingSet
    kernel: KernelSpec
    trend: str  # "known", "constant", "linear" or "custom"
    chol: np.ndarray
    jitter: float
    weights: np.ndarray
    beta: Optional[np.ndarray] = None
    known_trend: Optional[TrendFn] = None
    basis: Union[str, Callable, None] = None
    cinv_h: Optional[np.ndarray] = None
    gls_chol: Optional[np.ndarray] = None
    trend_name: Optional[str] = None

    @property
    def dim(self) -> int:
        return self.train.dim

    def _check(self, Z):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[None, :] if self.dim > 1 or Z.size == 1 else Z[:, None]
        if Z.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim}-d points, got {Z.shape[1]}")
        return Z

    def trend_at(self, Z) -> np.ndarray:
        Z = self._check(Z)
        if self.trend == "known":
            return np.asarray(self.known_trend(Z), dtype=float).reshape(-1)
        return _basis_matrix(self.basis, Z) @ self.beta

    def predict(self, Z, return_var: bool = True):
        """Posterior mean (and variance) of the response surface at rows of ``Z``."""
        Z = self._check(Z)
        c = self.kernel(Z, self.train.sites)
        mean = self.trend_at(Z) + c @ self.weights
        if not return_var:
            return mean
        v = solve_spd(self.chol, c.T)
        var = self.kernel.var - np.sum(c.T * v, axis=0)
        if self.trend != "known":
            u = _basis_matrix(self.basis, Z).T - self.cinv_h.T @ c.T
            w = solve_spd(self.gls_chol, u)
            var = var + np.sum(u * w, axis=0)
        return mean, np.maximum(var, 0.0)


def _cov(train: TrainingSet, kernel: KernelSpec):
    nugget = np.maximum(train.noise, NUGGET_FLOOR * kernel.var)
    return kernel(train.sites, train.sites) + np.diag(nugget)


def fit_sk(train: TrainingSet, kernel: KernelSpec, trend: Optional[TrendFn] = None,
           trend_name: Optional[str] = None) -> KrigingFit:
    """Simple kriging around a known trend (zero if ``trend`` is None)."""
    fn = trend if trend is not None else (lambda Z: np.zeros(len(Z)))
    mu = np.asarray(fn(train.sites), dtype=float).reshape(-1)
    L, delta = cholesky(_cov(train, kernel))
    w = solve_spd(L, train.y - mu)
    return KrigingFit(train, kernel, "known", L, delta, w, known_trend=fn,
                      trend_name=trend_name or ("zero" if trend is None else None))


def fit_uk(train: TrainingSet, kernel: KernelSpec,
           basis: Union[str, Callable] = "linear") -> KrigingFit:
    """Universal kriging with GLS trend coefficients.

    ``basis`` is ``"constant"`` (ordinary kriging), ``"linear"`` or a
    callable mapping an ``(n, d)`` array to the ``(n, p)`` basis matrix
    (which must include the constant column).
    """
    H = _basis_matrix(basis, train.sites)
    if H.shape[0] <= H.shape[1] or np.linalg.matrix_rank(H) < H.shape[1]:
        raise DegenerateBasisError("trend basis matrix is rank deficient")
    L, delta = cholesky(_cov(train, kernel))
    cinv_h = solve_spd(L, H)
    G = H.T @ cinv_h
    try:
        gl, _ = cholesky(0.5 * (G + G.T))
    except Exception as exc:  # noqa: BLE001
        raise DegenerateBasisError("H^T C^-1 H is not invertible") from exc
    beta = solve_spd(gl, cinv_h.T @ train.y)
    w = solve_spd(L, train.y - H @ beta)
    kind = basis if isinstance(basis, str) else "custom"
    return KrigingFit(train, kernel, kind, L, delta, w, beta=beta, basis=basis,
                      cinv_h=cinv_h, gls_chol=gl)


# ---------------------------------------------------------------------------
# maximum likelihood


def log_likelihood(train: TrainingSet, kernel: KernelSpec, trend: str = "linear",
                   known_trend: Optional[TrendFn] = None) -> float:
    """Gaussian log likelihood with GLS-concentrated trend coefficients."""
    y = train.y
    if trend == "known":
        fn = known_trend if known_trend is not None else (lambda Z: np.zeros(len(Z)))
        y = y - np.asarray(fn(train.sites), dtype=float).reshape(-1)
    L, _ = cholesky(_cov(train, kernel))
    if trend != "known":
        H = _basis_matrix(trend, train.sites)
        cinv_h = solve_spd(L, H)
        beta = np.linalg.solve(H.T @ cinv_h, cinv_h.T @ y)
        y = y - H @ beta
    quad = float(y @ solve_spd(L, y))
    return -0.5 * (quad + log_det_from_factor(L) + train.n * LOG_2PI)


def _profiled(train, theta, power, trend, known_trend):
    """Noise-free case: process variance profiled out in closed form."""
    unit = KernelSpec(theta, 1.0, power)
    R = unit(train.sites, train.sites) + NUGGET_FLOOR * np.eye(train.n)
    L, _ = cholesky(R)
    y = train.y
    if trend == "known":
        fn = known_trend if known_trend is not None else (lambda Z: np.zeros(len(Z)))
        y = y - np.asarray(fn(train.sites), dtype=float).reshape(-1)
    else:
        H = _basis_matrix(trend, train.sites)
        cinv_h = solve_spd(L, H)
        beta = np.linalg.solve(H.T @ cinv_h, cinv_h.T @ y)
        y = y - H @ beta
    var = max(float(y @ solve_spd(L, y)) / train.n, 1e-300)
    ll = -0.5 * (train.n * np.log(var) + log_det_from_factor(L) + train.n * (1.0 + LOG_2PI))
    return ll, var


def default_theta_bounds(train: TrainingSet):
    span = np.ptp(train.sites, axis=0)
    span = np.where(span > 0, span, 1.0)
    return 1e-2 * span, 1e2 * span


def compass_search(fn, x0, lo, hi, f0=None, step=0.25, shrink=0.5, tol=1e-4,
                   max_evals=4000):
    """Bounded coordinate-wise local search.

    Each coordinate is probed at +/- its step (a fraction of the box
    width); improving moves are taken immediately and all steps shrink
    once a full sweep fails. Returns ``(x, fn(x))``.
    """
    x = np.array(x0, dtype=float)
    f = fn(x) if f0 is None else f0
    h = step * (np.asarray(hi, float) - np.asarray(lo, float))
    evals = 0
    while np.max(h) > tol and evals < max_evals:
        moved = False
        for j in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[j] = min(max(x[j] + sign * h[j], lo[j]), hi[j])
                if y[j] == x[j]:
                    continue
                fy = fn(y)
                evals += 1
                if fy < f:
                    x, f, moved = y, fy, True
                    break
        if not moved:
            h = h * shrink
    return x, f


_START_FRACTIONS = (0.5, 0.25, 0.75, 0.125, 0.875, 0.375, 0.625)


def fit_hyperparams(train: TrainingSet, trend: str = "linear", power: float = 2.0,
                    bounds=None, restarts: int = 5,
                    known_trend: Optional[TrendFn] = None) -> KernelSpec:
    """Maximum-likelihood lengthscales and process variance.

    Multi-start compass search in log space from deterministic starting
    points.
    When every site is noise free the process variance is profiled out;
    otherwise it is optimized jointly since fixed nuggets break the
    closed-form profile. Ties are broken by the smallest first lengthscale.
    """
    if train.n < 4:
        raise ValueError("need at least 4 training sites")
    if trend not in ("known", "constant", "linear"):
        raise ValueError(f"unknown trend kind {trend!r}")
    d = train.dim
    lo, hi = default_theta_bounds(train) if bounds is None else (
        np.broadcast_to(np.asarray(bounds[0], float), (d,)),
        np.broadcast_to(np.asarray(bounds[1], float), (d,)))
    if np.any(lo <= 0) or np.any(hi <= lo):
        raise ValueError("need 0 < theta_lo < theta_hi")
    llo, lhi = np.log(lo), np.log(hi)
    noise_free = bool(np.all(train.noise == 0.0))

    # start the process variance at the spread left over after the trend
    y0 = train.y
    if trend == "known" and known_trend is not None:
        y0 = y0 - np.asarray(known_trend(train.sites), dtype=float).reshape(-1)
    elif trend in ("constant", "linear"):
        H = _basis_matrix(trend, train.sites)
        y0 = y0 - H @ np.linalg.lstsq(H, y0, rcond=None)[0]
    v0 = max(float(np.mean(y0**2)), float(np.mean(train.noise)), 1e-12)
    lv_lo, lv_hi = np.log(v0) - 14.0, np.log(v0) + 7.0

    def unpack(x):
        theta = np.exp(np.clip(x[:d], llo, lhi))
        var = None if noise_free else float(np.exp(np.clip(x[d], lv_lo, lv_hi)))
        return theta, var

    def negll(x):
        theta, var = unpack(x)
        try:
            if noise_free:
                return -_profiled(train, theta, power, trend, known_trend)[0]
            return -log_likelihood(train, KernelSpec(theta, var, power), trend, known_trend)
        except (ArithmeticError, np.linalg.LinAlgError, ValueError):
            return 1e300

    lo_b, hi_b = llo, lhi
    if not noise_free:
        lo_b, hi_b = np.append(llo, lv_lo), np.append(lhi, lv_hi)
    best = None
    any_improved = False
    for k in range(max(restarts, 1)):
        frac = np.array([_START_FRACTIONS[(k + j) % len(_START_FRACTIONS)] for j in range(d)])
        x0 = llo + frac * (lhi - llo)
        if not noise_free:
            x0 = np.append(x0, np.log(v0))
        f0 = negll(x0)
        x, f = compass_search(negll, x0, lo_b, hi_b, f0=f0)
        any_improved |= f < f0
        key = (f, float(np.exp(x[0])))
        if best is None or key < best[0]:
            best = (key, x)
    theta, var = unpack(best[1])
    if noise_free:
        ll, var = _profiled(train, theta, power, trend, known_trend)
    else:
        ll = -best[0][0]
    if not any_improved:
        warnings.warn("likelihood search made no progress from any start", ConvergenceWarning)
    return KernelSpec(tuple(theta), var, power, loglik=float(ll), converged=bool(any_improved))


def fit_kriging(train: TrainingSet, trend: str = "linear", power: float = 2.0,
                known_trend: Optional[TrendFn] = None, restarts: int = 5,
                kernel: Optional[KernelSpec] = None, trend_name: Optional[str] = None,
                bounds=None) -> KrigingFit:
    """Fit hyperparameters (unless ``kernel`` is given) and the kriging model."""
    if kernel is None:
        kernel = fit_hyperparams(train, trend, power, bounds=bounds, restarts=restarts,
                                 known_trend=known_trend)
    if trend == "known":
        return fit_sk(train, kernel, known_trend, trend_name)
    return fit_uk(train, kernel, trend)


def s_ave(fit: KrigingFit, test_sites) -> float:
    """Root mean posterior variance over test sites."""
    test_sites = np.asarray(test_sites, dtype=float)
    if test_sites.size == 0:
        raise ValueError("empty test set")
    _, var = fit.predict(test_sites)
    return float(np.sqrt(np.mean(var)))


def with_kernel(fit: KrigingFit, kernel: KernelSpec) -> KrigingFit:
    """Refit the same data and trend under another kernel."""
    if fit.trend == "known":
        return fit_sk(fit.train, kernel, fit.known_trend, fit.trend_name)
    return fit_uk(fit.train, kernel, fit.basis)


__all__ = [
    "ConvergenceWarning", "KernelSpec", "KrigingFit", "TrainingSet", "fit_hyperparams",
    "fit_kriging", "fit_sk", "fit_uk", "log_likelihood", "s_ave", "with_kernel",
]
