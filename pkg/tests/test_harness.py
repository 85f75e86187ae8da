from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mortemu.harness import (
    AnalyticEstimator,
    build_training,
    imse_bias,
    run_case_study,
    summary_stats,
)


def test_imse_bias_examples():
    b = np.linspace(0, 1, 10)
    assert imse_bias(b, b) == (0.0, 0.0)
    bias, rmse = imse_bias(b + 0.5, b)
    assert bias == pytest.approx(0.5) and rmse == pytest.approx(0.5)
    bias, rmse = imse_bias(b + np.where(np.arange(10) % 2, 1.0, -1.0), b)
    assert bias == pytest.approx(0.0, abs=1e-15) and rmse == pytest.approx(1.0)
    with pytest.raises(ValueError):
        imse_bias(b, b[:-1])


@settings(max_examples=100)
@given(arrays(float, 20, elements=st.floats(-1e3, 1e3)),
       arrays(float, 20, elements=st.floats(-1e3, 1e3)))
def test_bias_squared_below_imse(p, b):
    bias, rmse = imse_bias(p, b)
    assert bias**2 <= rmse**2 * (1 + 1e-12) + 1e-12


def test_summary_stats_examples():
    mean, sd, q, es = summary_stats(np.arange(1, 101), 0.05)
    assert q == pytest.approx(5.95)
    assert es == pytest.approx(3.0)
    assert mean == 50.5
    assert summary_stats(np.full(5, 2.5))[2:] == (2.5, 2.5)
    with pytest.raises(ValueError):
        summary_stats(np.arange(5), 1.0)


@settings(max_examples=100)
@given(arrays(float, st.integers(2, 50), elements=st.floats(-1e6, 1e6)),
       st.floats(0.01, 0.99))
def test_shortfall_below_quantile(v, alpha):
    _, _, q, es = summary_stats(v, alpha)
    assert es <= q + 1e-9 * (1 + abs(q))


def test_zero_volatility_study(chencox_config, tmp_path):
    cfg = chencox_config.with_overrides(n_tr=125, n_out=10, n_in=4,
                                        emulators=["analytic", "sk"])
    cfg = replace(cfg, model=replace(cfg.model, sigma1=0.0, p=0.0))
    report = run_case_study(cfg)
    for r in report.results.values():
        assert r.status == "ok"
        assert abs(r.bias) < 1e-8 and r.rmse < 1e-8
    files = report.write(tmp_path)
    assert (tmp_path / "report.csv").read_text().startswith("# quantile")
    assert any(p.name == "plotdata_sk.csv" for p in files)


def test_budget_ratio_exceeds_one(chencox_config, twopop_config, cbd_config):
    for cfg in (chencox_config, twopop_config, cbd_config):
        _, train, budget = build_training(cfg.with_overrides(n_tr=125))
        assert int(np.sum(train.n_rep)) == budget.used
        assert cfg.n_out * cfg.n_in / budget.used > 1


def test_analytic_estimator_targets(twopop_config):
    Z = np.array([[-20.0, -20.1, 0.6, 0.94]])
    hedge = AnalyticEstimator(twopop_config)(Z)
    a1 = AnalyticEstimator(replace(twopop_config, target="pool1"))(Z)
    a2 = AnalyticEstimator(replace(twopop_config, target="pool2"))(Z)
    assert hedge[0] == pytest.approx(twopop_config.pi * a1[0] - a2[0])


def test_failed_estimator_is_annotated(chencox_config, monkeypatch, tmp_path):
    from mortemu import harness
    from mortemu.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("forced")

    monkeypatch.setattr(harness, "fit_smoothing_spline_1d", boom)
    cfg = chencox_config.with_overrides(n_tr=125, n_out=5, n_in=10,
                                        emulators=["analytic", "spline1d"])
    report = run_case_study(cfg)
    assert report["spline1d"].status.startswith("failed")
    assert report["analytic"].status == "ok"
    report.write(tmp_path)
    assert "failed" in (tmp_path / "report.csv").read_text()
