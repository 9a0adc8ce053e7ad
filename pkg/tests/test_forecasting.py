import csv
import io
import json

import numpy as np
import pytest

import factorscope.forecasting as fc
from factorscope.errors import ConfigError, DimensionError, NumericError
from factorscope.forecasting import (
    BENCHMARK_METHOD,
    FACTOR_METHOD,
    RollingConfig,
    ar_fit_forecast,
    levinson_durbin,
    rmse,
    rolling_forecast,
)
from factorscope.panel import TimeSeriesPanel


def one_factor_panel(seed, n, p, phi=0.9, scale=2.0, noise=1.0):
    rng = np.random.default_rng(seed)
    a = scale * rng.standard_normal(p)
    x = np.zeros(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + rng.standard_normal()
    return TimeSeriesPanel(np.outer(x, a) + noise * rng.standard_normal((n, p)))


def test_constant_series_is_degenerate():
    f = ar_fit_forecast(np.full(30, 4.25))
    assert f.degenerate
    assert f.value == 4.25


def test_noise_free_ar1_coefficient():
    x = 0.5 ** np.arange(50)
    f = ar_fit_forecast(x, max_order=1)
    assert f.coefficients[0] == pytest.approx(0.5, abs=0.05)


def test_noise_free_ar1_forecast_without_intercept():
    x = 0.5 ** np.arange(50)
    f = ar_fit_forecast(x, max_order=5, demean=False)
    assert f.order == 1
    assert f.coefficients[0] == pytest.approx(0.5, abs=0.05)
    assert f.value == pytest.approx(0.5 * x[-1], rel=0.05)


def test_white_noise_forecast_near_mean():
    x = np.random.default_rng(0).standard_normal(500)
    assert abs(ar_fit_forecast(x).value - x.mean()) <= 0.2


def test_recovers_ar2_coefficients():
    rng = np.random.default_rng(1)
    x = np.zeros(20_000)
    for t in range(2, x.size):
        x[t] = 0.5 * x[t - 1] - 0.3 * x[t - 2] + rng.standard_normal()
    f = ar_fit_forecast(x, max_order=5)
    assert f.coefficients[:2] == pytest.approx([0.5, -0.3], abs=0.03)


def test_levinson_matches_direct_yule_walker(rng):
    x = rng.standard_normal(300).cumsum()
    xc = x - x.mean()
    gamma = np.array([xc[k:] @ xc[: x.size - k] / x.size for k in range(4)])
    coefs, _ = levinson_durbin(gamma, 3)
    toeplitz = np.array([[gamma[abs(i - j)] for j in range(3)] for i in range(3)])
    np.testing.assert_allclose(coefs[2], np.linalg.solve(toeplitz, gamma[1:4]), rtol=1e-10)


def test_short_series_rejected():
    with pytest.raises(DimensionError):
        ar_fit_forecast(np.arange(10.0), max_order=5)


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse(np.ones(4), np.zeros(4)) == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        RollingConfig(window_length=12, k0=5)
    with pytest.raises(ConfigError):
        RollingConfig(r=0)
    with pytest.raises(ConfigError):
        rolling_forecast(one_factor_panel(0, 50, 4), RollingConfig(window_length=50))


def test_window_count_and_csv():
    panel = one_factor_panel(0, 130, 6)
    report = rolling_forecast(panel, RollingConfig(window_length=100, r=1, k0=5))
    assert report.n_windows == 30
    np.testing.assert_array_equal(report.target, np.arange(100, 130))
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    assert list(rows[0]) == ["window_index", "method", "rmse", "cumulative_rmse"]
    assert len(rows) == 60
    summary = json.loads(report.to_json())
    assert set(summary["cumulative_rmse"]) == {FACTOR_METHOD, BENCHMARK_METHOD}


def test_cumulative_is_running_sum_and_nondecreasing():
    report = rolling_forecast(one_factor_panel(1, 160, 8), RollingConfig(window_length=100))
    for m in (FACTOR_METHOD, BENCHMARK_METHOD):
        cum = report.cumulative(m)
        assert np.all(np.diff(cum) >= 0)
    np.testing.assert_allclose(report.cumulative(FACTOR_METHOD), np.cumsum(report.factor_rmse))


def test_strong_factor_beats_random_walk():
    report = rolling_forecast(one_factor_panel(2, 250, 20), RollingConfig(window_length=100))
    assert report.n_windows == 150
    assert np.mean(report.factor_rmse) < np.mean(report.benchmark_rmse)


def test_no_lookahead():
    panel = one_factor_panel(3, 150, 6)
    cut = 125
    corrupted = panel.data.copy()
    corrupted[cut:] = 1e6
    cfg = RollingConfig(window_length=100)
    a = rolling_forecast(panel, cfg)
    b = rolling_forecast(TimeSeriesPanel(corrupted), cfg)
    # window i reads rows i .. i+w and nothing later
    keep = a.target < cut
    np.testing.assert_array_equal(a.factor_rmse[keep], b.factor_rmse[keep])
    np.testing.assert_array_equal(a.benchmark_rmse[keep], b.benchmark_rmse[keep])
    assert not np.array_equal(a.factor_rmse[~keep], b.factor_rmse[~keep])


def test_random_walk_benchmark_tracks_increment_sd():
    sigma = 1.5
    rng = np.random.default_rng(4)
    y = np.cumsum(sigma * rng.standard_normal((600, 40)), axis=0)
    report = rolling_forecast(TimeSeriesPanel(y), RollingConfig(window_length=100))
    assert report.n_windows == 500
    assert np.mean(report.benchmark_rmse) == pytest.approx(sigma, rel=0.1)


def test_failed_windows_are_recorded(monkeypatch):
    panel = one_factor_panel(5, 120, 5)
    real_fit = fc.fit
    bad_first_rows = {panel.data[3].tobytes(), panel.data[7].tobytes()}

    def flaky(window, r, k0):
        if np.asarray(window)[0].tobytes() in bad_first_rows:
            raise NumericError("injected failure")
        return real_fit(window, r, k0)

    monkeypatch.setattr(fc, "fit", flaky)
    report = rolling_forecast(panel, RollingConfig(window_length=100))
    assert sorted(report.failures) == [3, 7]
    assert np.isnan(report.factor_rmse[[3, 7]]).all()
    assert np.isfinite(report.benchmark_rmse).all()
    assert report.r_used[3] == 0
    cum = report.cumulative(FACTOR_METHOD)
    assert cum[3] == cum[2]
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    bench = [r for r in rows if r["method"] == BENCHMARK_METHOD]
    assert len(bench) == 20 and all(r["rmse"] != "undefined" for r in bench)
    assert sum(r["rmse"] == "undefined" for r in rows) == 2


def test_auto_r_selects_one_factor():
    report = rolling_forecast(one_factor_panel(6, 130, 12, scale=3.0, noise=0.5),
                              RollingConfig(window_length=100, r=None))
    assert np.all(report.r_used == 1)


def test_threads_do_not_change_output():
    panel = one_factor_panel(7, 140, 6)
    cfg = RollingConfig(window_length=100)
    assert rolling_forecast(panel, cfg).to_csv() == rolling_forecast(panel, cfg, threads=4).to_csv()
