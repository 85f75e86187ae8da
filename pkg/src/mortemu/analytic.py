"""Closed-form conditional means of the period effects and the
deterministic (plug-in mean) survival and annuity estimators built on them.

State fields may be numpy arrays; results then broadcast with a trailing
horizon axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annuity import AnnuitySpec
from .errors import SingularFormulaError
from .mortality import (
    CBDModel,
    CBDState,
    ChenCoxModel,
    ChenCoxState,
    TwoPopModel,
    TwoPopState,
    refit_drift,
    twopop_params,
)


def _col(v):
    v = np.asarray(v, dtype=float)
    return v[..., None] if v.ndim else v


def _annuity(surv, r):
    s = np.arange(1, surv.shape[-1] + 1)
    return np.sum(np.exp(-r * s) * surv, axis=-1)


@dataclass(frozen=True, eq=False)
class DeterministicProjection:
    """Projected period-effect means and the implied rate surface."""

    family: str
    kappa: np.ndarray
    rates: np.ndarray


# ---------------------------------------------------------------------------
# Chen-Cox


def chencox_mean_kappa(state: ChenCoxState, model: ChenCoxModel, lag):
    """E[kappa(T+lag) | kappa(T), shock(T)] for lag >= 1."""
    lag = np.asarray(lag)
    if np.any(lag < 1):
        raise ValueError("horizon must be at least one year")
    return (np.asarray(state.kappa) - state.shock) + lag * model.mu1 + model.mu2 * model.p


def chencox_projection(state: ChenCoxState, model: ChenCoxModel,
                       spec: AnnuitySpec) -> DeterministicProjection:
    s = np.arange(1, spec.n_payments + 1)
    kappa = (_col(state.kappa) - _col(state.shock)) + s * model.mu1 + model.mu2 * model.p
    b1, b2 = model.ages.betas(spec.x + s)
    return DeterministicProjection("chencox", kappa, np.exp(b1 + b2 * kappa))


def chencox_analytic_survival(state, model, spec):
    proj = chencox_projection(state, model, spec)
    return np.exp(-np.cumsum(proj.rates, axis=-1))


def chencox_analytic_annuity(state: ChenCoxState, model: ChenCoxModel, spec: AnnuitySpec):
    """Plug-in annuity with rates evaluated at the projected mean kappa."""
    return _annuity(chencox_analytic_survival(state, model, spec), spec.r)


# ---------------------------------------------------------------------------
# two populations


def twopop_mean_kappa2(state: TwoPopState, model: TwoPopModel, t):
    """E[kappa2(T+t) | Z(T)] under the cointegrated spread."""
    t = np.asarray(t)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    mu1, mu2, phi = twopop_params(model, state)
    if t.ndim:
        k1, k2, mu1, mu2, phi = (_col(v) for v in (state.kappa1, state.kappa2, mu1, mu2, phi))
    else:
        if t == 0:
            return state.kappa2
        k1, k2 = state.kappa1, state.kappa2
    pt = phi**t
    out = k1 + mu1 * t - mu2 * (1.0 - pt) - pt * (k1 - k2)
    return np.where(t == 0, k2, out) if t.ndim else out


def twopop_estimators(state: TwoPopState, model: TwoPopModel, spec: AnnuitySpec,
                      variant: str = "reverting", pi: float = 1.0):
    """Deterministic ``(a1_hat, a2_hat, delta_hat)``.

    Pool 1 uses its random-walk mean in both variants. For pool 2, ``parallel``
    shifts kappa2(T) by the pool-1 drift; ``reverting`` uses the mean-reverting
    conditional mean of kappa2.
    """
    surv1 = twopop_analytic_survival(state, model, spec, pool=1, variant=variant)
    surv2 = twopop_analytic_survival(state, model, spec, pool=2, variant=variant)
    a1 = _annuity(surv1, spec.r)
    a2 = _annuity(surv2, spec.r)
    return a1, a2, pi * a1 - a2


def twopop_analytic_survival(state: TwoPopState, model: TwoPopModel, spec: AnnuitySpec,
                             pool: int = 2, variant: str = "reverting"):
    if variant not in ("parallel", "reverting"):
        raise ValueError(f"unknown variant {variant!r}")
    t = np.arange(1, spec.n_payments + 1)
    mu1 = _col(twopop_params(model, state)[0])
    if pool == 1:
        kappa = _col(state.kappa1) + mu1 * t
        struct, gamma = model.ages1, model.cohort1.mean_value(spec.cohort)
    else:
        if variant == "parallel":
            kappa = _col(state.kappa2) + mu1 * t
        else:
            kappa = twopop_mean_kappa2(state, model, t)
        struct, gamma = model.ages2, model.cohort2.mean_value(spec.cohort)
    b1, b2 = struct.betas(spec.x + t)
    rates = np.exp(b1 + b2 * (kappa + gamma))
    return np.exp(-np.cumsum(rates, axis=-1))


# ---------------------------------------------------------------------------
# CBD


def _cbd_means(state: CBDState, model: CBDModel, lag):
    if model.phi == 1.0:
        raise SingularFormulaError("closed form is singular at phi = 1")
    phi = model.phi
    k1 = _col(state.kappa1)
    now, prev = _col(state.kappa2_now), _col(state.kappa2_prev)
    m1 = k1 + model.mu * lag
    m2 = phi ** (lag + 1) * ((now - prev) / (phi - 1.0)) + (phi * prev - now) / (phi - 1.0)
    return m1, np.where(lag == 0, now, m2)


def cbd_mean_kappas(state: CBDState, model: CBDModel, lag):
    """``(E[kappa1(T+lag)], E[kappa2(T+lag)])`` given the three-component state."""
    lag = np.asarray(lag)
    if np.any(lag < 1):
        raise ValueError("lag must be at least one year")
    m1, m2 = _cbd_means(state, model, lag)
    if lag.ndim == 0 and np.ndim(state.kappa1) == 0:
        return float(np.squeeze(m1)), float(np.squeeze(m2))
    return m1, m2


def cbd_analytic_survival(state: CBDState, model: CBDModel, spec: AnnuitySpec):
    """Products of logistic one-year survivals at the projected means."""
    j = np.arange(spec.n_payments)
    m1, m2 = _cbd_means(state, model, j)
    eta = m1 + (spec.x + j - model.ages.x_ave) * m2
    return np.exp(-np.cumsum(np.logaddexp(0.0, eta), axis=-1))


def cbd_analytic_annuity(state: CBDState, model: CBDModel, spec: AnnuitySpec):
    return _annuity(cbd_analytic_survival(state, model, spec), spec.r)


# ---------------------------------------------------------------------------
# dispatch over site arrays


def states_from_sites(model, Z, horizon=None):
    """Vectorized state over site rows; see ``mortality.state_from_site``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if isinstance(model, ChenCoxModel):
        return ChenCoxState(Z[:, 0], 0.0)
    if isinstance(model, TwoPopModel):
        mu1 = None
        if horizon is not None and model.history is not None:
            mu1 = refit_drift(model, Z[:, 0], horizon)
        return TwoPopState(Z[:, 0], Z[:, 1], Z[:, 2], Z[:, 3], mu1)
    if isinstance(model, CBDModel):
        return CBDState(Z[:, 0], Z[:, 1], Z[:, 2])
    raise TypeError(f"unsupported model {type(model).__name__}")


def analytic_values(model, spec: AnnuitySpec, Z, variant: str = "reverting", pi: float = 1.0):
    """Deterministic estimator of the case-study target at each site row."""
    state = states_from_sites(model, Z, spec.T)
    if isinstance(model, ChenCoxModel):
        return chencox_analytic_annuity(state, model, spec)
    if isinstance(model, TwoPopModel):
        return twopop_estimators(state, model, spec, variant, pi)[2]
    return cbd_analytic_annuity(state, model, spec)


def analytic_survival(model, state, spec: AnnuitySpec, pool: int = 2, variant: str = "reverting"):
    """Deterministic survival curve s = 1..n_payments for one state."""
    if isinstance(model, ChenCoxModel):
        return chencox_analytic_survival(state, model, spec)
    if isinstance(model, TwoPopModel):
        return twopop_analytic_survival(state, model, spec, pool, variant)
    if isinstance(model, CBDModel):
        return cbd_analytic_survival(state, model, spec)
    raise TypeError(f"unsupported model {type(model).__name__}")
