"""Penalized regression splines: thin-plate splines in d >= 2 and natural
cubic smoothing splines in one dimension.

Both are fitted to batch means without weights. The smoothing parameter
is either given or chosen by generalized cross-validation (GCV).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import qr
from scipy.optimize import brentq

from ..errors import DegenerateDesignError

GCV_POINTS = 31
GCV_DECADES = 12.0
GCV_LOW = -9.0


@dataclass(frozen=True, eq=False)
class SplineFit:
    """Fitted spline surface.

    ``kind`` is ``"tps"`` or ``"cubic1d"``. For TPS, ``alpha`` holds the
    radial weights and ``beta`` the affine coefficients ``(b0, b1..bd)``
    in scaled coordinates. For the 1-d spline, ``knots``, ``values`` and
    ``second`` describe the natural cubic interpolant of the fitted values.
    """

    kind: str
    lam: float
    df: float
    dim: int
    centers: np.ndarray
    alpha: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    second: Optional[np.ndarray] = None
    gcv: Optional[float] = None

    def _check(self, Z):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None] if self.dim == 1 else Z[None, :]
        if Z.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim}-d points, got {Z.shape[1]}")
        return Z

    def predict(self, Z, return_var: bool = False):
        Z = self._check(Z)
        if self.kind == "tps":
            U = (Z - self.shift) / self.scale
            mean = _affine(U) @ self.beta + _tps_kernel(U, self.centers) @ self.alpha
        else:
            mean = _ncs_eval(self.centers, self.values, self.second, Z[:, 0])
        return (mean, None) if return_var else mean


# ---------------------------------------------------------------------------
# thin-plate spline


def _tps_kernel(a, b):
    r2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 0.5 * r2 * np.log(r2)
    return np.where(r2 > 0, k, 0.0)


def _affine(U):
    return np.column_stack([np.ones(U.shape[0]), U])


def gcv_grid(scale: float) -> np.ndarray:
    return scale * np.logspace(GCV_LOW, GCV_LOW + GCV_DECADES, GCV_POINTS)


def fit_tps(train, lam: Union[float, str] = "gcv") -> SplineFit:
    """Thin-plate spline with kernel ``r^2 log r`` and an affine null space.

    Sites are rescaled to the unit box before fitting. The radial weights
    are confined to the orthogonal complement of the affine basis, which
    enforces the side conditions exactly.
    """
    Z = train.sites
    n, d = Z.shape
    if d < 2:
        raise ValueError("thin-plate splines need d >= 2; use fit_smoothing_spline_1d")
    if n < d + 2:
        raise ValueError(f"need at least {d + 2} sites")
    shift = Z.min(axis=0)
    scale = np.ptp(Z, axis=0)
    if np.any(scale == 0):
        raise DegenerateDesignError("sites are constant along some coordinate")
    U = (Z - shift) / scale
    T = _affine(U)
    Q, R = qr(T)
    if abs(R[d, d]) < 1e-10 * abs(R[0, 0]):
        raise DegenerateDesignError("sites are affinely dependent")
    Q1, Q2 = Q[:, : d + 1], Q[:, d + 1:]
    E = _tps_kernel(U, U)
    M = Q2.T @ E @ Q2
    evals, V = np.linalg.eigh(0.5 * (M + M.T))
    evals = np.maximum(evals, 0.0)
    proj = V.T @ (Q2.T @ train.y)

    def at(lmb):
        shrink = lmb / (evals + lmb)
        rss = float(np.sum((shrink * proj) ** 2))
        return rss, float(np.sum(shrink))

    noisy = bool(np.any(train.noise > 0))
    grid = gcv_grid(max(float(np.mean(evals)), 1e-12))
    score = None
    if lam == "gcv":
        scores = []
        for lmb in grid:
            rss, tr = at(lmb)
            scores.append(n * rss / tr**2 if tr > 0 else np.inf)
        k = int(np.argmin(scores))
        lam, score = float(grid[k]), float(scores[k])
    else:
        lam = float(lam)
        if lam < 0:
            raise ValueError("smoothing parameter must be non-negative")
        if lam == 0 and noisy:
            lam = float(grid[0])
    if lam > 0:
        gamma = V @ (proj / (evals + lam))
    else:
        gamma = V @ np.divide(proj, evals, out=np.zeros_like(proj), where=evals > 0)
    alpha = Q2 @ gamma
    fitted_resid = train.y - E @ alpha - lam * alpha
    beta = np.linalg.solve(R[: d + 1, : d + 1], Q1.T @ fitted_resid)
    df = n - at(lam)[1] if lam > 0 else float(n)
    return SplineFit("tps", lam, df, d, U, alpha=alpha, beta=beta, shift=shift,
                     scale=scale, gcv=score)


# ---------------------------------------------------------------------------
# one-dimensional natural cubic smoothing spline


def _reinsch(x):
    h = np.diff(x)
    n = x.size
    Q = np.zeros((n, n - 2))
    R = np.zeros((n - 2, n - 2))
    for j in range(1, n - 1):
        c = j - 1
        Q[j - 1, c] = 1.0 / h[j - 1]
        Q[j, c] = -1.0 / h[j - 1] - 1.0 / h[j]
        Q[j + 1, c] = 1.0 / h[j]
        R[c, c] = (h[j - 1] + h[j]) / 3.0
        if c + 1 < n - 2:
            R[c, c + 1] = R[c + 1, c] = h[j] / 6.0
    return Q, R


def _ncs_eval(x, g, gam, t):
    """Natural cubic spline through ``(x, g)`` with second derivatives ``gam``."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    h = np.diff(x)
    left, right = t < x[0], t > x[-1]
    slope0 = (g[1] - g[0]) / h[0] - h[0] * gam[1] / 6.0
    slope1 = (g[-1] - g[-2]) / h[-1] + h[-1] * gam[-2] / 6.0
    out[left] = g[0] + slope0 * (t[left] - x[0])
    out[right] = g[-1] + slope1 * (t[right] - x[-1])
    mid = ~(left | right)
    tm = t[mid]
    i = np.clip(np.searchsorted(x, tm, side="right") - 1, 0, x.size - 2)
    a, b, hi = tm - x[i], x[i + 1] - tm, h[i]
    out[mid] = ((a * g[i + 1] + b * g[i]) / hi
                - a * b / 6.0 * ((1.0 + a / hi) * gam[i + 1] + (1.0 + b / hi) * gam[i]))
    return out


def fit_smoothing_spline_1d(train, df: Optional[float] = None,
                            lam: Optional[float] = None) -> SplineFit:
    """Natural cubic smoothing spline on 1-d sites.

    Give either a target effective degrees of freedom ``df`` in (2, n],
    a penalty weight ``lam``, or neither for GCV selection.
    """
    if train.dim != 1:
        raise ValueError("one-dimensional sites required")
    order = np.argsort(train.sites[:, 0])
    x = train.sites[order, 0]
    y = train.y[order]
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 distinct sites")
    Q, R = _reinsch(x)
    K = Q @ np.linalg.solve(R, Q.T)
    evals, V = np.linalg.eigh(0.5 * (K + K.T))
    evals = np.maximum(evals, 0.0)
    evals[:2] = 0.0
    proj = V.T @ y

    def dof(lmb):
        return float(np.sum(1.0 / (1.0 + lmb * evals)))

    def gcv(lmb):
        shrink = lmb * evals / (1.0 + lmb * evals)
        rss = float(np.sum((shrink * proj) ** 2))
        return n * rss / (n - dof(lmb)) ** 2

    noisy = bool(np.any(train.noise > 0))
    grid = gcv_grid(1.0 / max(float(np.mean(evals[2:])), 1e-300))
    score = None
    if df is not None:
        if not 2.0 < df <= n:
            raise ValueError(f"df must lie in (2, {n}]")
        if df >= n - 1e-9:
            lam = 0.0
        else:
            lo, hi = -40.0, 40.0
            lam = float(np.exp(brentq(lambda u: dof(np.exp(u)) - df, lo, hi, xtol=1e-12)))
    elif lam is None:
        scores = [gcv(l) if dof(l) < n - 1e-9 else np.inf for l in grid]
        k = int(np.argmin(scores))
        lam, score = float(grid[k]), float(scores[k])
    if lam < 0:
        raise ValueError("smoothing parameter must be non-negative")
    if lam == 0 and noisy:
        lam = float(grid[0])
    fitted = V @ (proj / (1.0 + lam * evals))
    gam = np.zeros(n)
    gam[1:-1] = np.linalg.solve(R, Q.T @ fitted)
    return SplineFit("cubic1d", float(lam), dof(lam), 1, x, values=fitted, second=gam,
                     gcv=score)


def predict(fit, Z, return_var: bool = True):
    """Posterior mean and variance for kriging; mean and ``None`` for splines."""
    return fit.predict(Z, return_var=return_var)
