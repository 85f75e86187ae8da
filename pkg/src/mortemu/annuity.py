"""Pathwise survival, deferred-annuity values and nested Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mortality import (
    CBDModel,
    ChenCoxModel,
    MortalityPath,
    TwoPopModel,
    TwoPopPaths,
    cbd_diagonal,
    chencox_diagonal,
    simulate_cbd,
    simulate_chencox,
    simulate_twopop,
    twopop_diagonal,
)
from .numcore import RngStream


@dataclass(frozen=True)
class DiscountSpec:
    """Constant force of interest."""

    r: float

    def bond(self, s):
        return np.exp(-self.r * np.asarray(s, dtype=float))


@dataclass(frozen=True)
class AnnuitySpec:
    """Annuity paying 1 at T+s, s = 1..cutoff-x, while alive.

    ``x`` is the annuitant's age at the valuation date T, so the rate for
    payment year s is ``m(T+s, x+s)`` and the cohort index is ``T - x``.
    """

    x: int
    T: int
    cutoff: int
    r: float

    def __post_init__(self):
        if self.cutoff <= self.x:
            raise ValueError("cutoff age must exceed the entry age")
        if self.T < 0:
            raise ValueError("deferral must be non-negative")

    @property
    def n_payments(self) -> int:
        return self.cutoff - self.x

    @property
    def discount(self) -> DiscountSpec:
        return DiscountSpec(self.r)

    @property
    def cohort(self) -> int:
        return self.T - self.x


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int


def survival_prob_path(path: MortalityPath, t: int, T: int, x: int):
    """``exp(-sum_{s=t+1..T} m(s, x+s))`` along one (or many) paths."""
    if not 0 <= t < T:
        raise ValueError("need 0 <= t < T")
    if T > path.horizon:
        raise ValueError(f"path horizon {path.horizon} does not reach year {T}")
    diag = path.diagonal(x, T)
    return np.exp(-np.sum(diag[..., t:T], axis=-1))


def annuity_from_diagonal(diag, r: float):
    """Annuity value from diagonal rates ``m(T+s, x+s)``, s = 1..n."""
    diag = np.asarray(diag, dtype=float)
    s = np.arange(1, diag.shape[-1] + 1)
    surv = np.exp(-np.cumsum(diag, axis=-1))
    return np.sum(np.exp(-r * s) * surv, axis=-1)


def annuity_path_value(path: MortalityPath, spec: AnnuitySpec):
    """One pathwise sample of the deferred annuity value at T."""
    if path.horizon < spec.n_payments:
        raise ValueError(f"path horizon {path.horizon} < {spec.n_payments} payments")
    return annuity_from_diagonal(path.diagonal(spec.x, spec.n_payments), spec.r)


def hedge_portfolio_path(paths: TwoPopPaths, model: TwoPopModel, spec: AnnuitySpec,
                         pi: float = 1.0):
    """``pi * a1 - a2`` along simulated paths sharing pool-1 noise."""
    h = spec.n_payments
    g1 = 0.0 if paths.gamma1 is None else paths.gamma1
    g2 = 0.0 if paths.gamma2 is None else paths.gamma2
    a1 = annuity_from_diagonal(twopop_diagonal(model, paths.kappa1[..., :h], spec.x, 1, g1), spec.r)
    a2 = annuity_from_diagonal(twopop_diagonal(model, paths.kappa2[..., :h], spec.x, 2, g2), spec.r)
    return pi * a1 - a2


def path_values(model, state, spec: AnnuitySpec, stream: RngStream, n: int,
                target: str = "hedge", pi: float = 1.0) -> np.ndarray:
    """``n`` pathwise samples of the case-study functional from ``state``.

    Chen-Cox and CBD give annuity values. The two-population model gives
    the hedge portfolio by default; ``target`` may also be ``"pool1"`` or
    ``"pool2"``.
    """
    h = spec.n_payments
    if isinstance(model, ChenCoxModel):
        kappa = simulate_chencox(model, state, stream, h, n)
        return annuity_from_diagonal(chencox_diagonal(model, kappa, spec.x), spec.r)
    if isinstance(model, CBDModel):
        k1, k2 = simulate_cbd(model, state, stream, h, n)
        return annuity_from_diagonal(cbd_diagonal(model, state, k1, k2, spec.x), spec.r)
    if isinstance(model, TwoPopModel):
        paths = simulate_twopop(model, state, stream, h, n, cohort=spec.cohort)
        if target == "hedge":
            return hedge_portfolio_path(paths, model, spec, pi)
        if target in ("pool1", "pool2"):
            pool = 1 if target == "pool1" else 2
            kappa = paths.kappa1 if pool == 1 else paths.kappa2
            gamma = paths.gamma1 if pool == 1 else paths.gamma2
            return annuity_from_diagonal(twopop_diagonal(model, kappa, spec.x, pool, gamma), spec.r)
        raise ValueError(f"unknown target {target!r}")
    raise TypeError(f"unsupported model {type(model).__name__}")


def nested_mc_value(model, state, spec: AnnuitySpec, stream: RngStream, n_in: int,
                    target: str = "hedge", pi: float = 1.0) -> McEstimate:
    """Inner Monte Carlo estimate of the conditional value at ``state``."""
    if n_in < 2:
        raise ValueError("n_in must be at least 2")
    v = path_values(model, state, spec, stream, n_in, target, pi)
    return McEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(n_in)), n_in)


def outer_expectation(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one value")
    return float(values.mean())


def survival_curve(model, state, spec: AnnuitySpec, stream: RngStream, n: int,
                   pool: Optional[int] = None) -> np.ndarray:
    """Pathwise survival ``S(T+s)/S(T)`` for s = 1..n_payments, shape (n, h)."""
    h = spec.n_payments
    if isinstance(model, ChenCoxModel):
        diag = chencox_diagonal(model, simulate_chencox(model, state, stream, h, n), spec.x)
    elif isinstance(model, CBDModel):
        k1, k2 = simulate_cbd(model, state, stream, h, n)
        diag = cbd_diagonal(model, state, k1, k2, spec.x)
    elif isinstance(model, TwoPopModel):
        paths = simulate_twopop(model, state, stream, h, n, cohort=spec.cohort)
        pool = pool or 2
        kappa = paths.kappa1 if pool == 1 else paths.kappa2
        gamma = paths.gamma1 if pool == 1 else paths.gamma2
        diag = twopop_diagonal(model, kappa, spec.x, pool, gamma)
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")
    return np.exp(-np.cumsum(diag, axis=-1))
