"""YAML case-study configuration.

Top-level keys
--------------
family : ``chen-cox`` | ``two-pop`` | ``cbd``
model : model parameters (``mu1``, ``sigma1``, ... for the family)
ages, ages1, ages2 : age structure; either ``{x_min, x_max, cutoff, level_shift}``
    for the synthetic default or explicit ``{ages, beta1, beta2, cutoff}``
cohort1, cohort2 : ``{value}`` for a constant history or
    ``{history, first_cohort, a1, a2, intercept, sd}`` (two-pop only)
history : ``{kappa1: [...], spread: [...]}`` pre-time-0 history (two-pop only)
state : time-0 state (``kappa``/``shock``, ``kappa1``/``kappa2`` or
    ``kappa1``/``kappa2_now``/``kappa2_prev``)
annuity : ``{x, T, cutoff, r}``; ``x`` is the age at the valuation date T
design : ``{kind: grid|lhs|sobol|empirical, n_tr, box: [[lo...], [hi...]]}``
emulators : list drawn from ``analytic, sk, ok, uk, tps, spline1d``
kriging : ``{power, restarts}``
test : ``{kind: empirical|percentile, n_out, oversample}``
benchmark : ``{n_in}``
target : ``hedge`` | ``pool1`` | ``pool2`` (two-pop only); ``pi`` hedge ratio
seed : master seed
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .annuity import AnnuitySpec
from .errors import ConfigError
from .mortality import (
    AgeStructure,
    CBDModel,
    CBDState,
    ChenCoxModel,
    ChenCoxState,
    CohortProcess,
    TwoPopHistory,
    TwoPopModel,
    TwoPopState,
)

FAMILIES = ("chen-cox", "two-pop", "cbd")
EMULATORS = ("analytic", "sk", "ok", "uk", "tps", "spline1d")
DESIGN_KINDS = ("grid", "lhs", "sobol", "empirical")
TEST_KINDS = ("empirical", "percentile")


@dataclass(frozen=True, eq=False)
class CaseStudyConfig:
    family: str
    model: Any
    state0: Any
    spec: AnnuitySpec
    design_kind: str = "empirical"
    n_tr: int = 1000
    box: Optional[tuple] = None
    emulators: tuple = ("analytic", "ok", "uk")
    power: float = 2.0
    restarts: int = 5
    test_kind: str = "empirical"
    n_out: int = 1000
    oversample: int = 100_000
    n_in: int = 1000
    target: str = "hedge"
    pi: float = 1.0
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.design_kind not in DESIGN_KINDS:
            raise ConfigError(f"unknown design kind {self.design_kind!r}")
        if self.test_kind not in TEST_KINDS:
            raise ConfigError(f"unknown test kind {self.test_kind!r}")
        bad = [e for e in self.emulators if e not in EMULATORS]
        if bad:
            raise ConfigError(f"unknown emulators {bad}")
        if self.n_out < 2 or self.n_in < 2:
            raise ConfigError("n_out and n_in must be at least 2")
        if self.n_tr < 8:
            raise ConfigError("n_tr must be at least 8")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def with_overrides(self, **kw) -> "CaseStudyConfig":
        """Copy with command-line style overrides (``None`` values ignored)."""
        raw = copy.deepcopy(self.raw)
        keys = {"n_tr": ("design", "n_tr"), "n_out": ("test", "n_out"),
                "n_in": ("benchmark", "n_in"), "design_kind": ("design", "kind"),
                "test_kind": ("test", "kind"), "box": ("design", "box")}
        for k, v in kw.items():
            if v is None:
                continue
            if k == "seed":
                raw["seed"] = int(v)
            elif k == "emulators":
                raw["emulators"] = list(v)
            elif k in keys:
                sect, name = keys[k]
                raw.setdefault(sect, {})[name] = v
            else:
                raw[k] = v
        return from_dict(raw)


def _get(d: dict, key: str, where: str):
    try:
        return d[key]
    except (KeyError, TypeError):
        raise ConfigError(f"missing key {where}.{key}") from None


def _num(d, key, where, default=None):
    if key not in (d or {}):
        if default is None:
            raise ConfigError(f"missing key {where}.{key}")
        return default
    try:
        return float(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key} must be a number") from None


def _ages(d: Optional[dict], default_cutoff: int, where: str) -> AgeStructure:
    d = d or {}
    try:
        if "beta1" in d:
            return AgeStructure(np.asarray(_get(d, "ages", where)), np.asarray(d["beta1"]),
                                np.asarray(_get(d, "beta2", where)),
                                int(d.get("cutoff", default_cutoff)))
        return AgeStructure.default(int(d.get("x_min", 50)), int(d.get("x_max", 89)),
                                    int(d.get("cutoff", default_cutoff)),
                                    float(d.get("level_shift", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _cohort(d: Optional[dict]) -> CohortProcess:
    d = d or {}
    if "history" not in d:
        return CohortProcess.constant(float(d.get("value", 0.0)))
    return CohortProcess(np.asarray(d["history"], dtype=float), int(d["first_cohort"]),
                         float(d.get("a1", 0.0)), float(d.get("a2", 0.0)),
                         float(d.get("intercept", 0.0)), float(d.get("sd", 0.0)))


def build_model(raw: dict):
    """Construct ``(model, state0, spec)`` from a parsed config mapping."""
    family = _get(raw, "family", "")
    m = _get(raw, "model", "")
    s = _get(raw, "state", "")
    a = _get(raw, "annuity", "")
    cutoff = int(_num(a, "cutoff", "annuity"))
    try:
        spec = AnnuitySpec(int(_num(a, "x", "annuity")), int(_num(a, "T", "annuity")), cutoff,
                           _num(a, "r", "annuity"))
        if family == "chen-cox":
            model = ChenCoxModel(_num(m, "mu1", "model"), _num(m, "sigma1", "model"),
                                 _num(m, "p", "model"), _num(m, "mu2", "model"),
                                 _num(m, "sigma2", "model"), _ages(raw.get("ages"), cutoff, "ages"))
            state = ChenCoxState(_num(s, "kappa", "state"), _num(s, "shock", "state", 0.0))
        elif family == "two-pop":
            h = raw.get("history")
            history = None if h is None else TwoPopHistory(np.asarray(h["kappa1"], dtype=float),
                                                           np.asarray(h["spread"], dtype=float))
            rho = m.get("rho")
            model = TwoPopModel(_num(m, "mu1", "model"), _num(m, "sigma1", "model"),
                                _num(m, "mu2", "model"), _num(m, "phi", "model"),
                                _num(m, "sigma2", "model"), _num(m, "c", "model"),
                                _ages(raw.get("ages1"), cutoff, "ages1"),
                                _ages(raw.get("ages2"), cutoff, "ages2"),
                                _cohort(raw.get("cohort1")), _cohort(raw.get("cohort2")),
                                None if rho is None else float(rho), history)
            state = TwoPopState(_num(s, "kappa1", "state"), _num(s, "kappa2", "state"))
        elif family == "cbd":
            keys = ("mu", "theta11", "theta21", "theta31", "phi", "theta12", "theta22",
                    "sd1", "sd2")
            model = CBDModel(*(_num(m, k, "model") for k in keys),
                             ages=_ages(raw.get("ages"), cutoff, "ages"))
            state = CBDState(_num(s, "kappa1", "state"), _num(s, "kappa2_now", "state"),
                             _num(s, "kappa2_prev", "state"))
        else:
            raise ConfigError(f"unknown family {family!r}")
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return model, state, spec


def from_dict(raw: dict) -> CaseStudyConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    model, state, spec = build_model(raw)
    design = raw.get("design") or {}
    test = raw.get("test") or {}
    kr = raw.get("kriging") or {}
    box = design.get("box")
    if box is not None:
        try:
            box = tuple(np.asarray(b, dtype=float).ravel() for b in box)
        except (TypeError, ValueError):
            raise ConfigError("design.box must be [[lower...], [upper...]]") from None
        if len(box) != 2:
            raise ConfigError("design.box must be [[lower...], [upper...]]")
    try:
        return CaseStudyConfig(
            family=raw["family"], model=model, state0=state, spec=spec,
            design_kind=str(design.get("kind", "empirical")),
            n_tr=int(design.get("n_tr", 1000)), box=box,
            emulators=tuple(raw.get("emulators", ("analytic", "ok", "uk"))),
            power=float(kr.get("power", 2.0)), restarts=int(kr.get("restarts", 5)),
            test_kind=str(test.get("kind", "empirical")), n_out=int(test.get("n_out", 1000)),
            oversample=int(test.get("oversample", 100_000)),
            n_in=int((raw.get("benchmark") or {}).get("n_in", 1000)),
            target=str(raw.get("target", "hedge")), pi=float(raw.get("pi", 1.0)),
            seed=int(raw.get("seed", 0)), raw=copy.deepcopy(raw))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path) -> CaseStudyConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return from_dict(raw)


def bundled_config(name: str) -> CaseStudyConfig:
    """Shipped config by case-study name (``chen-cox``, ``two-pop``, ``cbd``)."""
    fname = name.replace("-", "_") + ".yaml"
    ref = resources.files("mortemu").joinpath("configs", fname)
    if not ref.is_file():
        raise ConfigError(f"no bundled config {name!r}")
    return from_dict(yaml.safe_load(ref.read_text()))
