"""End-to-end case studies: designs, emulator fits, nested Monte Carlo
benchmark and IMSE/Bias reports.

All randomness derives from the master seed through fixed stream keys,
so every estimator is scored on the same test sites and benchmark values.
"""

from __future__ import annotations

import csv
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analytic import analytic_values, states_from_sites, twopop_analytic_survival
from .annuity import nested_mc_value
from .config import CaseStudyConfig
from .design import (
    BudgetAllocation,
    Design,
    allocate_budget,
    batch,
    empirical_design,
    lhs,
    percentile_test_set,
    quantile_box,
    sobol,
    uniform_grid,
)
from .emulate import KrigingFit, TrainingSet, fit_kriging, fit_smoothing_spline_1d, fit_tps, s_ave
from .emulate.kriging import ConvergenceWarning
from .errors import MortemuError
from .mortality import TwoPopModel, simulate_states, state_dim, state_from_site
from .numcore import RngStream

log = logging.getLogger(__name__)

DESIGN_STREAM, TRAIN_STREAM, TEST_STREAM, BENCH_STREAM, PILOT_STREAM = 1, 2, 3, 4, 5
ALPHA = 0.05
QUANTILE_NOTE = ("quantile: linear interpolation of order statistics "
                 "(numpy 'linear', Hyndman-Fan type 7)")


# ---------------------------------------------------------------------------
# metrics


def imse_bias(predictions, benchmarks):
    """Empirical ``(bias, sqrt(IMSE))`` of predictions against benchmarks."""
    p = np.asarray(predictions, dtype=float).ravel()
    b = np.asarray(benchmarks, dtype=float).ravel()
    if p.size != b.size or p.size == 0:
        raise ValueError("predictions and benchmarks must be non-empty and equal length")
    err = p - b
    return float(err.mean()), float(np.sqrt(np.mean(err**2)))


def summary_stats(values, alpha: float = ALPHA):
    """``(mean, sd, q(alpha), ES(alpha))``; ES averages the values <= q."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise ValueError("need at least 2 values")
    q = float(np.quantile(v, alpha))
    return float(v.mean()), float(v.std(ddof=1)), q, float(v[v <= q].mean())


# ---------------------------------------------------------------------------
# estimators


class AnalyticEstimator:
    """Deterministic plug-in estimator exposed with the emulator interface."""

    def __init__(self, config: CaseStudyConfig, variant: str = "reverting"):
        self.model = config.model
        self.spec = config.spec
        self.variant = variant
        self.target = config.target
        self.pi = config.pi

    def __call__(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if isinstance(self.model, TwoPopModel) and self.target != "hedge":
            pool = 1 if self.target == "pool1" else 2
            state = states_from_sites(self.model, Z, self.spec.T)
            surv = twopop_analytic_survival(state, self.model, self.spec, pool, self.variant)
            s = np.arange(1, surv.shape[-1] + 1)
            return np.sum(np.exp(-self.spec.r * s) * surv, axis=-1)
        return analytic_values(self.model, self.spec, Z, self.variant, self.pi)

    def predict(self, Z, return_var: bool = True):
        mean = self(Z)
        return (mean, None) if return_var else mean


@dataclass
class EstimatorResult:
    name: str
    status: str = "ok"
    predictions: Optional[np.ndarray] = None
    sd: Optional[np.ndarray] = None
    bias: float = float("nan")
    rmse: float = float("nan")
    s_ave: float = float("nan")
    summary: tuple = (float("nan"),) * 4
    fit_seconds: float = 0.0
    predict_seconds: float = 0.0


@dataclass
class EvalReport:
    config: CaseStudyConfig
    test_sites: np.ndarray
    benchmark: np.ndarray
    benchmark_se: np.ndarray
    results: dict
    budget: Optional[BudgetAllocation] = None
    training: Optional[TrainingSet] = None
    fits: dict = field(default_factory=dict)

    def __getitem__(self, name) -> EstimatorResult:
        return self.results[name]

    @property
    def benchmark_summary(self):
        return summary_stats(self.benchmark)

    def budget_ratio(self) -> float:
        """Benchmark inner paths per emulator training path."""
        if self.training is None or self.training.n_rep is None:
            return float("nan")
        return self.config.n_out * self.config.n_in / float(np.sum(self.training.n_rep))

    def write(self, out_dir) -> list:
        """Write report, prediction, plot-data, budget and timing CSVs."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.csv", out / "predictions.csv", out / "budget.csv",
                   out / "timings.csv"]
        with open(written[0], "w", newline="") as fh:
            fh.write(f"# {QUANTILE_NOTE}; alpha={ALPHA}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["estimator", "status", "bias", "rmse", "s_ave", "mean", "sd",
                        "q_alpha", "es_alpha"])
            w.writerow(["mc_benchmark", "ok", _f(0.0), _f(0.0), _f(float("nan"))]
                       + [_f(v) for v in self.benchmark_summary])
            for r in self.results.values():
                w.writerow([r.name, r.status, _f(r.bias), _f(r.rmse), _f(r.s_ave)]
                           + [_f(v) for v in r.summary])
        d = self.test_sites.shape[1]
        zcols = [f"z{j + 1}" for j in range(d)]
        with open(written[1], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = zcols + ["mc", "mc_se"]
            for r in self.results.values():
                header += [f"{r.name}_mean"] + ([f"{r.name}_sd"] if r.sd is not None else [])
            w.writerow(header)
            for i, z in enumerate(self.test_sites):
                row = [_f(v) for v in z] + [_f(self.benchmark[i]), _f(self.benchmark_se[i])]
                for r in self.results.values():
                    row.append(_f(r.predictions[i]) if r.predictions is not None else "nan")
                    if r.sd is not None:
                        row.append(_f(r.sd[i]))
                w.writerow(row)
        order = np.lexsort(self.test_sites.T[::-1])
        for r in self.results.values():
            if r.predictions is None:
                continue
            path = out / f"plotdata_{r.name}.csv"
            written.append(path)
            sd = r.sd if r.sd is not None else np.zeros_like(r.predictions)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(zcols + ["mc", "mean", "lower", "upper"])
                for i in order:
                    m = r.predictions[i]
                    w.writerow([_f(v) for v in self.test_sites[i]]
                               + [_f(self.benchmark[i]), _f(m), _f(m - 2 * sd[i]),
                                  _f(m + 2 * sd[i])])
        with open(written[2], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n_tr", "n_sites", "n_rep", "training_paths", "benchmark_paths",
                        "ratio"])
            b = self.budget
            paths = int(np.sum(self.training.n_rep)) if self.training is not None else 0
            w.writerow([b.n_tr if b else 0, b.n_sites if b else 0, b.n_rep if b else 0, paths,
                        self.config.n_out * self.config.n_in, _f(self.budget_ratio())])
        with open(written[3], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["estimator", "fit_seconds", "predict_seconds"])
            for r in self.results.values():
                w.writerow([r.name, f"{r.fit_seconds:.6f}", f"{r.predict_seconds:.6f}"])
        return written


def _f(v) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# pipeline stages


def _stream(config: CaseStudyConfig, key: int) -> RngStream:
    return RngStream(config.seed, key)


def build_test_set(config: CaseStudyConfig) -> np.ndarray:
    stream = _stream(config, TEST_STREAM)
    if config.test_kind == "percentile":
        levels = (np.arange(config.n_out) + 0.5) / config.n_out
        return percentile_test_set(config.model, config.state0, config.spec.T, stream, levels,
                                   config.oversample).sites
    return simulate_states(config.model, config.state0, config.spec.T, stream, config.n_out)


def run_benchmark(config: CaseStudyConfig, sites):
    """Nested Monte Carlo value and standard error at each site."""
    stream = _stream(config, BENCH_STREAM)
    mean = np.empty(len(sites))
    se = np.empty(len(sites))
    for i, z in enumerate(sites):
        state = state_from_site(config.model, z, config.spec.T)
        est = nested_mc_value(config.model, state, config.spec, stream.spawn(i), config.n_in,
                              config.target, config.pi)
        mean[i], se[i] = est.mean, est.std_error
    return mean, se


def design_box(config: CaseStudyConfig):
    if config.box is not None:
        return config.box
    return quantile_box(config.model, config.state0, config.spec.T,
                        _stream(config, PILOT_STREAM))


def build_design(config: CaseStudyConfig, n_sites: int) -> Design:
    d = state_dim(config.model)
    stream = _stream(config, DESIGN_STREAM)
    kind = config.design_kind
    if kind == "empirical":
        return empirical_design(config.model, config.state0, config.spec.T, n_sites, stream)
    box = design_box(config)
    if kind == "grid":
        per_axis = max(int(round(n_sites ** (1.0 / d))), 2)
        return uniform_grid(box, per_axis)
    if kind == "lhs":
        return lhs(box, n_sites, stream)
    return sobol(box, n_sites, skip=1)


def build_training(config: CaseStudyConfig):
    budget = allocate_budget(config.n_tr)
    design = build_design(config, budget.n_sites)
    train = batch(design, config.model, config.spec, _stream(config, TRAIN_STREAM),
                  budget.n_rep, config.target, config.pi)
    return design, train, budget


def fit_emulator(name: str, config: CaseStudyConfig, train: TrainingSet):
    """Fit one named emulator on ``train``."""
    if name == "sk":
        return fit_kriging(train, "known", config.power, known_trend=AnalyticEstimator(config),
                           restarts=config.restarts, trend_name="analytic")
    if name == "ok":
        return fit_kriging(train, "constant", config.power, restarts=config.restarts)
    if name == "uk":
        return fit_kriging(train, "linear", config.power, restarts=config.restarts)
    if name == "tps":
        return fit_tps(train)
    if name == "spline1d":
        return fit_smoothing_spline_1d(train)
    raise ValueError(f"unknown emulator {name!r}")


def _score(result: EstimatorResult, est, sites, bench):
    t0 = time.perf_counter()
    mean, var = est.predict(sites, return_var=True)
    result.predict_seconds = time.perf_counter() - t0
    result.predictions = np.asarray(mean, dtype=float)
    if var is not None:
        result.sd = np.sqrt(var)
        result.s_ave = float(np.sqrt(np.mean(var)))
    result.bias, result.rmse = imse_bias(result.predictions, bench)
    result.summary = summary_stats(result.predictions)


def evaluate(config: CaseStudyConfig, sites, bench, bench_se, fits: dict,
             budget=None, train=None) -> EvalReport:
    """Score pre-fitted estimators (name -> fit) against a benchmark."""
    results = {}
    for name, fit in fits.items():
        res = EstimatorResult(name)
        try:
            _score(res, fit, sites, bench)
        except (MortemuError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            res.status = f"failed: {exc}"
            log.warning("scoring %s failed: %s", name, exc)
        results[name] = res
    return EvalReport(config, np.asarray(sites), bench, bench_se, results, budget, train, fits)


def _analytic_names(config):
    if isinstance(config.model, TwoPopModel):
        return {"analytic_parallel": AnalyticEstimator(config, "parallel"),
                "analytic_reverting": AnalyticEstimator(config, "reverting")}
    return {"analytic": AnalyticEstimator(config)}


def run_case_study(config: CaseStudyConfig) -> EvalReport:
    """Full pipeline: design and batching, fits, test set, benchmark, metrics."""
    sites = build_test_set(config)
    bench, bench_se = run_benchmark(config, sites)
    fits, statuses, fit_times = {}, {}, {}
    budget = train = None
    emulators = [e for e in config.emulators if e != "analytic"]
    if "analytic" in config.emulators:
        fits.update(_analytic_names(config))
    if emulators:
        _, train, budget = build_training(config)
    for name in emulators:
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ConvergenceWarning)
                fits[name] = fit_emulator(name, config, train)
            if any(issubclass(w.category, ConvergenceWarning) for w in caught):
                statuses[name] = "ok (likelihood search did not move)"
        except (MortemuError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            statuses[name] = f"failed: {exc}"
            log.warning("fitting %s failed: %s", name, exc)
        fit_times[name] = time.perf_counter() - t0
    report = evaluate(config, sites, bench, bench_se, fits, budget, train)
    for name, status in statuses.items():
        res = report.results.setdefault(name, EstimatorResult(name))
        if res.status == "ok" or name not in fits:
            res.status = status
    for name, secs in fit_times.items():
        report.results[name].fit_seconds = secs
    return report


def kriging_sd_at(fit: KrigingFit, z) -> float:
    """Posterior standard deviation at one site."""
    _, var = fit.predict(np.atleast_2d(z))
    return float(np.sqrt(var[0]))


__all__ = [
    "AnalyticEstimator", "EstimatorResult", "EvalReport", "build_design", "build_test_set",
    "build_training", "evaluate", "fit_emulator", "imse_bias", "kriging_sd_at",
    "run_benchmark", "run_case_study", "s_ave", "summary_stats",
]
