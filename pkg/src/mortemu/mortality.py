"""Stochastic mortality models: Lee-Carter with shocks, two-population
cointegrated Lee-Carter, and an ARIMA-driven CBD model.

Every simulator is conditional on a time-T state and returns the period
effects for years T+1..T+horizon. Passing ``n_paths`` vectorizes over
paths (leading axis); otherwise a single path is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateFitError
from .numcore import RngStream, sample_normal, sample_zero_modified_normal

# ---------------------------------------------------------------------------
# age structure and cohorts


@dataclass(frozen=True, eq=False)
class AgeStructure:
    """Fitted age effects on an integer age grid.

    Ages outside the grid reuse the nearest boundary age's effects.
    """

    ages: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    cutoff: int

    def __post_init__(self):
        ages = np.asarray(self.ages, dtype=int)
        b1 = np.asarray(self.beta1, dtype=float)
        b2 = np.asarray(self.beta2, dtype=float)
        if ages.ndim != 1 or len(ages) < 1 or np.any(np.diff(ages) != 1):
            raise ValueError("age grid must be consecutive integers")
        if b1.shape != ages.shape or b2.shape != ages.shape:
            raise ValueError("beta vectors must match the age grid")
        if self.cutoff < ages[0]:
            raise ValueError("cutoff age lies below the age grid")
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)

    @property
    def n_a(self) -> int:
        return len(self.ages)

    @property
    def x_ave(self) -> float:
        return float(np.mean(self.ages))

    def index(self, age) -> np.ndarray:
        return np.clip(np.asarray(age) - self.ages[0], 0, self.n_a - 1)

    def betas(self, age):
        i = self.index(age)
        return self.beta1[i], self.beta2[i]

    @classmethod
    def default(cls, x_min: int = 50, x_max: int = 89, cutoff: int = 94,
                level_shift: float = 0.0) -> "AgeStructure":
        """Synthetic structure: beta1 linear from -5.5 at 50 to -2.0 at 89
        (rescaled to the grid), beta2 constant 1/n_a."""
        ages = np.arange(x_min, x_max + 1)
        frac = (ages - x_min) / max(x_max - x_min, 1)
        beta1 = -5.5 + 3.5 * frac + level_shift
        beta2 = np.full(len(ages), 1.0 / len(ages))
        return cls(ages, beta1, beta2, cutoff)


@dataclass(frozen=True, eq=False)
class CohortProcess:
    """Historical cohort effects with an AR(2) projection beyond history.

    ``history[i]`` is the effect of cohort ``first_cohort + i`` where the
    cohort index is the birth year relative to time 0.
    """

    history: np.ndarray
    first_cohort: int
    a1: float = 0.0
    a2: float = 0.0
    intercept: float = 0.0
    sd: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.history, dtype=float)
        if h.ndim != 1 or len(h) == 0:
            raise ValueError("cohort history must be non-empty")
        object.__setattr__(self, "history", h)

    @property
    def last_cohort(self) -> int:
        return self.first_cohort + len(self.history) - 1

    def _project(self, steps: int, eps) -> np.ndarray:
        prev2 = self.history[-2] if len(self.history) > 1 else self.history[-1]
        prev1 = self.history[-1]
        prev2 = np.zeros_like(eps[..., 0]) + prev2
        prev1 = np.zeros_like(eps[..., 0]) + prev1
        for k in range(steps):
            cur = self.intercept + self.a1 * prev1 + self.a2 * prev2 + self.sd * eps[..., k]
            prev2, prev1 = prev1, cur
        return prev1

    def mean_value(self, cohort: int) -> float:
        """Cohort effect, or its zero-innovation AR(2) projection."""
        if cohort <= self.last_cohort:
            return float(self.history[max(cohort - self.first_cohort, 0)])
        steps = cohort - self.last_cohort
        return float(self._project(steps, np.zeros((1, steps)))[0])

    def sample(self, cohort: int, stream: RngStream, n_paths: Optional[int] = None):
        """Cohort effect per path; random only for cohorts beyond history."""
        shape = () if n_paths is None else (n_paths,)
        if cohort <= self.last_cohort:
            return np.full(shape, self.mean_value(cohort))
        steps = cohort - self.last_cohort
        eps = stream.normal(shape + (steps,))
        out = self._project(steps, eps)
        return out if n_paths is not None else float(out)

    @classmethod
    def constant(cls, value: float = 0.0, first_cohort: int = -140,
                 last_cohort: int = -40) -> "CohortProcess":
        return cls(np.full(last_cohort - first_cohort + 1, value), first_cohort)


@dataclass(frozen=True, eq=False)
class MortalityPath:
    """Central mortality rates ``m(T+s, age)`` for s = 1..horizon.

    ``rates`` has shape ``(..., horizon, len(ages))``; leading axes index
    paths.
    """

    ages: np.ndarray
    rates: np.ndarray

    @property
    def horizon(self) -> int:
        return self.rates.shape[-2]

    def rate(self, s, age):
        j = np.asarray(age) - self.ages[0]
        return self.rates[..., s - 1, j]

    def diagonal(self, x: int, horizon: Optional[int] = None) -> np.ndarray:
        """Rates ``m(T+s, x+s)`` for s = 1..horizon along the cohort diagonal."""
        h = self.horizon if horizon is None else horizon
        if h > self.horizon:
            raise ValueError(f"path horizon {self.horizon} shorter than {h}")
        cols = x + np.arange(1, h + 1) - self.ages[0]
        if h and (cols[0] < 0 or cols[-1] >= len(self.ages)):
            raise ValueError(f"path ages do not cover {x + 1}..{x + h}")
        return self.rates[..., np.arange(h), cols]


def _path_shape(horizon: int, n_paths: Optional[int]) -> tuple:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    return (horizon,) if n_paths is None else (int(n_paths), horizon)


# ---------------------------------------------------------------------------
# Chen-Cox (Lee-Carter with transient shocks)


@dataclass(frozen=True)
class ChenCoxModel:
    mu1: float
    sigma1: float
    p: float
    mu2: float
    sigma2: float
    ages: AgeStructure = field(default_factory=AgeStructure.default)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("shock probability must lie in [0, 1]")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("volatilities must be non-negative")


@dataclass(frozen=True)
class ChenCoxState:
    kappa: float
    shock: float = 0.0


def chencox_paths(model: ChenCoxModel, state: ChenCoxState, stream: RngStream,
                  horizon: int, n_paths: Optional[int] = None):
    """Period effect and shock paths ``(kappa, shocks)`` for T+1..T+horizon."""
    shape = _path_shape(horizon, n_paths)
    xi1 = sample_normal(stream, 0.0, model.sigma1, shape)
    xi2 = sample_zero_modified_normal(stream, model.p, model.mu2, model.sigma2, shape)
    # telescoped shocks: kappa(T+s) = kappa(T) - shock(T) + sum(mu1 + xi1) + shock(T+s)
    base = state.kappa - state.shock
    trend = np.cumsum(model.mu1 + xi1, axis=-1)
    return base + trend + xi2, xi2


def simulate_chencox(model: ChenCoxModel, state: ChenCoxState, stream: RngStream,
                     horizon: int, n_paths: Optional[int] = None) -> np.ndarray:
    """Simulate kappa(T+1..T+horizon) from a (kappa, shock) state."""
    return chencox_paths(model, state, stream, horizon, n_paths)[0]


def chencox_rates(model: ChenCoxModel, kappa, ages=None) -> MortalityPath:
    """``m(t, x) = exp(beta1(x) + beta2(x) kappa(t))`` on an age grid."""
    ages = model.ages.ages if ages is None else np.asarray(ages, dtype=int)
    b1, b2 = model.ages.betas(ages)
    kappa = np.asarray(kappa, dtype=float)
    return MortalityPath(ages, np.exp(b1 + b2 * kappa[..., None]))


def chencox_diagonal(model: ChenCoxModel, kappa, x: int) -> np.ndarray:
    kappa = np.asarray(kappa, dtype=float)
    b1, b2 = model.ages.betas(x + np.arange(1, kappa.shape[-1] + 1))
    return np.exp(b1 + b2 * kappa)


# ---------------------------------------------------------------------------
# two-population cointegrated model


@dataclass(frozen=True, eq=False)
class TwoPopHistory:
    """Historical pool-1 period effects and spreads ending at time 0."""

    kappa1: np.ndarray
    spread: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kappa1, dtype=float)
        s = np.asarray(self.spread, dtype=float)
        if k.shape != s.shape or k.ndim != 1:
            raise ValueError("histories must be 1-d and of equal length")
        object.__setattr__(self, "kappa1", k)
        object.__setattr__(self, "spread", s)


@dataclass(frozen=True)
class TwoPopModel:
    mu1: float
    sigma1: float
    mu2: float
    phi: float
    sigma2: float
    c: float
    ages1: AgeStructure = field(default_factory=AgeStructure.default)
    ages2: AgeStructure = field(default_factory=AgeStructure.default)
    cohort1: CohortProcess = field(default_factory=CohortProcess.constant)
    cohort2: CohortProcess = field(default_factory=CohortProcess.constant)
    rho: Optional[float] = None
    history: Optional[TwoPopHistory] = None

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("volatilities must be non-negative")
        if self.rho is not None:
            implied = self.sigma1 - self.rho * self.sigma2
            if not np.isclose(implied, self.c, rtol=1e-6, atol=1e-9):
                raise ValueError(f"c={self.c} inconsistent with rho (implies {implied})")


@dataclass(frozen=True)
class TwoPopState:
    kappa1: float
    kappa2: float
    mu2_refit: Optional[float] = None
    phi_refit: Optional[float] = None
    mu1_refit: Optional[float] = None

    @property
    def spread(self) -> float:
        return self.kappa1 - self.kappa2


@dataclass(frozen=True, eq=False)
class TwoPopPaths:
    kappa1: np.ndarray
    kappa2: np.ndarray
    gamma1: Optional[np.ndarray] = None
    gamma2: Optional[np.ndarray] = None

    @property
    def spread(self) -> np.ndarray:
        return self.kappa1 - self.kappa2


def _twopop_core(model: TwoPopModel, kappa1, spread, mu1, mu2, phi, stream, shape):
    # e1[..., k] and e2[..., k] are the innovations of year T+k
    inner = shape[:-1] + (shape[-1] + 1,)
    e1 = stream.normal(inner)
    e2 = stream.normal(inner)
    mu1 = np.asarray(mu1, dtype=float)[..., None] if np.ndim(mu1) else mu1
    k1 = np.asarray(kappa1, dtype=float)[..., None] if np.ndim(kappa1) else kappa1
    k1 = k1 + np.cumsum(mu1 + model.sigma1 * e1[..., 1:], axis=-1)
    s = np.empty(shape)
    prev = np.zeros(shape[:-1]) + spread
    for k in range(shape[-1]):
        prev = mu2 + phi * (prev - mu2) + model.sigma2 * e2[..., k] + model.c * e1[..., k]
        s[..., k] = prev
    return k1, s


def twopop_params(model: TwoPopModel, state: TwoPopState):
    """``(mu1, mu2, phi)`` in force after T: refitted values where present."""
    pick = lambda refit, base: base if refit is None else refit  # noqa: E731
    return (pick(state.mu1_refit, model.mu1), pick(state.mu2_refit, model.mu2),
            pick(state.phi_refit, model.phi))


def refit_drift(model: TwoPopModel, kappa1, horizon: int):
    """Pool-1 drift refitted on history plus a path ending at ``kappa1``.

    The mean of first differences telescopes, so it depends on the path
    only through its end point.
    """
    h = model.history.kappa1
    return (np.asarray(kappa1, dtype=float) - h[0]) / (len(h) - 1 + horizon)


def simulate_twopop(model: TwoPopModel, state: TwoPopState, stream: RngStream,
                    horizon: int, n_paths: Optional[int] = None,
                    cohort: Optional[int] = None) -> TwoPopPaths:
    """Simulate both pools' period effects (and optionally cohort effects).

    Pool 1 is a random walk with drift; the spread is AR(1) around the
    long-run level with shared pool-1 noise. Refitted drift, level and
    persistence are used where the state carries them. The lagged year-T
    innovations are not part of the state and are drawn fresh.
    """
    shape = _path_shape(horizon, n_paths)
    mu1, mu2, phi = twopop_params(model, state)
    k1, s = _twopop_core(model, state.kappa1, state.spread, mu1, mu2, phi, stream, shape)
    g1 = g2 = None
    if cohort is not None:
        g1 = model.cohort1.sample(cohort, stream, n_paths)
        g2 = model.cohort2.sample(cohort, stream, n_paths)
    return TwoPopPaths(k1, k1 - s, g1, g2)


def twopop_rates(model: TwoPopModel, kappa, pool: int, gamma=0.0, ages=None) -> MortalityPath:
    """``log m_k = beta1_k(x) + beta2_k(x) (kappa_k(t) + gamma_k)`` on an age grid."""
    struct = model.ages1 if pool == 1 else model.ages2
    ages = struct.ages if ages is None else np.asarray(ages, dtype=int)
    b1, b2 = struct.betas(ages)
    kappa = np.asarray(kappa, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eff = kappa + gamma[..., None] if gamma.ndim else kappa + gamma
    return MortalityPath(ages, np.exp(b1 + b2 * eff[..., None]))


def twopop_diagonal(model: TwoPopModel, kappa, x: int, pool: int, gamma=0.0) -> np.ndarray:
    struct = model.ages1 if pool == 1 else model.ages2
    kappa = np.asarray(kappa, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    b1, b2 = struct.betas(x + np.arange(1, kappa.shape[-1] + 1))
    eff = kappa + (gamma[..., None] if gamma.ndim else gamma)
    return np.exp(b1 + b2 * eff)


@dataclass(frozen=True)
class RefitResult:
    mu1: float
    sigma1: float
    mu2: float
    phi: float
    sigma2: float


def _refit_arrays(k1, s):
    """Vectorized refit over the leading axes of ``(..., length)`` histories."""
    d = np.diff(k1, axis=-1)
    mu1 = d.mean(axis=-1)
    sigma1 = d.std(axis=-1, ddof=1)
    xs, ys = s[..., :-1], s[..., 1:]
    xbar, ybar = xs.mean(axis=-1), ys.mean(axis=-1)
    sxx = np.sum((xs - xbar[..., None]) ** 2, axis=-1)
    sxy = np.sum((xs - xbar[..., None]) * (ys - ybar[..., None]), axis=-1)
    scale = np.maximum(np.max(np.abs(xs), axis=-1), 1.0)
    if np.any(sxx <= 1e-24 * scale**2 * xs.shape[-1]):
        raise DegenerateFitError("spread history has zero variance")
    phi = sxy / sxx
    if np.any(phi == 1.0):
        raise DegenerateFitError("unit-root spread refit; long-run level undefined")
    icpt = ybar - phi * xbar
    resid = ys - icpt[..., None] - phi[..., None] * xs
    dof = max(xs.shape[-1] - 2, 1)
    sigma2 = np.sqrt(np.sum(resid**2, axis=-1) / dof)
    return mu1, sigma1, icpt / (1.0 - phi), phi, sigma2


def ppc_refit(kappa1_history, spread_history) -> RefitResult:
    """Refit the random walk (pool 1) and AR(1) spread on a history.

    The spread is fitted by conditional least squares of S(t) on S(t-1);
    the long-run level is intercept / (1 - phi).
    """
    k1 = np.asarray(kappa1_history, dtype=float)
    s = np.asarray(spread_history, dtype=float)
    if k1.ndim != 1 or s.ndim != 1 or len(k1) < 3 or len(s) < 3:
        raise ValueError("histories must be 1-d with at least 3 points")
    return RefitResult(*(float(v) for v in _refit_arrays(k1, s)))


# ---------------------------------------------------------------------------
# CBD with ARIMA(0,1,3)+drift and ARIMA(1,1,2) period effects


@dataclass(frozen=True)
class CBDModel:
    mu: float
    theta11: float
    theta21: float
    theta31: float
    phi: float
    theta12: float
    theta22: float
    sd1: float
    sd2: float
    ages: AgeStructure = field(default_factory=lambda: AgeStructure.default(cutoff=89))

    def __post_init__(self):
        if self.sd1 < 0 or self.sd2 < 0:
            raise ValueError("innovation sds must be non-negative")


@dataclass(frozen=True)
class CBDState:
    kappa1: float
    kappa2_now: float
    kappa2_prev: float


def simulate_cbd(model: CBDModel, state: CBDState, stream: RngStream, horizon: int,
                 n_paths: Optional[int] = None):
    """Simulate ``(kappa1, kappa2)`` for T+1..T+horizon.

    Innovations dated T and earlier are unobserved and set to zero.
    """
    shape = _path_shape(horizon, n_paths)
    e1 = sample_normal(stream, 0.0, model.sd1, shape)
    e2 = sample_normal(stream, 0.0, model.sd2, shape)
    lead = shape[:-1]
    p1 = np.concatenate([np.zeros(lead + (3,)), e1], axis=-1)
    d1 = (model.mu + p1[..., 3:] + model.theta11 * p1[..., 2:-1]
          + model.theta21 * p1[..., 1:-2] + model.theta31 * p1[..., :-3])
    k1 = state.kappa1 + np.cumsum(d1, axis=-1)
    p2 = np.concatenate([np.zeros(lead + (2,)), e2], axis=-1)
    ma2 = p2[..., 2:] + model.theta12 * p2[..., 1:-1] + model.theta22 * p2[..., :-2]
    k2 = np.empty(shape)
    prev2 = np.zeros(lead) + state.kappa2_prev
    prev1 = np.zeros(lead) + state.kappa2_now
    for t in range(horizon):
        cur = (1.0 + model.phi) * prev1 - model.phi * prev2 + ma2[..., t]
        k2[..., t] = cur
        prev2, prev1 = prev1, cur
    return k1, k2


def _with_state(state: CBDState, k1, k2):
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    lead = k1.shape[:-1]
    k1_full = np.concatenate([np.full(lead + (1,), state.kappa1), k1], axis=-1)
    k2_full = np.concatenate([np.full(lead + (1,), state.kappa2_now), k2], axis=-1)
    return k1_full, k2_full


def cbd_rates(model: CBDModel, state: CBDState, k1, k2, ages=None) -> MortalityPath:
    """Death intensities implied by the logistic one-year survival.

    The year ending at T+s uses the period effects dated T+s-1 and the age
    at the start of that year, stored on the end-of-year age: row s, age a
    holds ``log(1 + exp(k1(T+s-1) + (a - 1 - x_ave) k2(T+s-1)))`` so that
    ``exp(-m)`` is the logistic survival.
    """
    ages = model.ages.ages if ages is None else np.asarray(ages, dtype=int)
    k1_full, k2_full = _with_state(state, k1, k2)
    eta = (k1_full[..., :-1, None]
           + (ages - 1 - model.ages.x_ave) * k2_full[..., :-1, None])
    return MortalityPath(ages, np.logaddexp(0.0, eta))


def cbd_diagonal(model: CBDModel, state: CBDState, k1, k2, x: int) -> np.ndarray:
    k1_full, k2_full = _with_state(state, k1, k2)
    h = k1_full.shape[-1] - 1
    age = x + np.arange(h)
    eta = k1_full[..., :-1] + (age - model.ages.x_ave) * k2_full[..., :-1]
    return np.logaddexp(0.0, eta)


# ---------------------------------------------------------------------------
# forward simulation of the time-T state from time 0


def simulate_states(model, state0, horizon: int, stream: RngStream, n: int) -> np.ndarray:
    """Draw ``n`` time-T states given the time-0 state, as an ``(n, d)`` array.

    Chen-Cox states are reported as the unshocked level kappa - shock.
    Two-population states include the PPC refit of the spread dynamics.
    """
    if isinstance(model, ChenCoxModel):
        kappa, shocks = chencox_paths(model, state0, stream, horizon, n)
        return (kappa[:, -1] - shocks[:, -1])[:, None]
    if isinstance(model, TwoPopModel):
        if model.history is None:
            raise ValueError("two-population PPC refit requires a history")
        shape = (n, horizon)
        k1, s = _twopop_core(model, state0.kappa1, state0.spread, model.mu1, model.mu2,
                             model.phi, stream, shape)
        hk = np.broadcast_to(model.history.kappa1, (n, len(model.history.kappa1)))
        hs = np.broadcast_to(model.history.spread, (n, len(model.history.spread)))
        _, _, mu2, phi, _ = _refit_arrays(np.concatenate([hk, k1], axis=1),
                                          np.concatenate([hs, s], axis=1))
        return np.column_stack([k1[:, -1], k1[:, -1] - s[:, -1], mu2, phi])
    if isinstance(model, CBDModel):
        k1, k2 = simulate_cbd(model, state0, stream, horizon, n)
        prev = k2[:, -2] if horizon > 1 else np.full(n, state0.kappa2_now)
        return np.column_stack([k1[:, -1], k2[:, -1], prev])
    raise TypeError(f"unsupported model {type(model).__name__}")


def state_from_site(model, z, horizon: Optional[int] = None):
    """Map a design site (1-d array) to the model's state type.

    For the two-population model with a history, ``horizon`` (years from
    time 0 to the site's date) enables the pool-1 drift refit.
    """
    z = np.asarray(z, dtype=float).ravel()
    if isinstance(model, ChenCoxModel):
        return ChenCoxState(float(z[0]), 0.0)
    if isinstance(model, TwoPopModel):
        mu1 = None
        if horizon is not None and model.history is not None:
            mu1 = float(refit_drift(model, z[0], horizon))
        return TwoPopState(float(z[0]), float(z[1]), float(z[2]), float(z[3]), mu1)
    if isinstance(model, CBDModel):
        return CBDState(float(z[0]), float(z[1]), float(z[2]))
    raise TypeError(f"unsupported model {type(model).__name__}")


def state_dim(model) -> int:
    if isinstance(model, ChenCoxModel):
        return 1
    if isinstance(model, TwoPopModel):
        return 4
    if isinstance(model, CBDModel):
        return 3
    raise TypeError(f"unsupported model {type(model).__name__}")
