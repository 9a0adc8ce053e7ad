"""Rolling-window one-step forecasts from AR models fitted to estimated factors."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .eigen import fit, select_num_factors
from .errors import ConfigError, DimensionError, FactorscopeError
from .panel import FLOAT_FORMAT, TimeSeriesPanel

FACTOR_METHOD = "factor_ar"
BENCHMARK_METHOD = "random_walk"


@dataclass(frozen=True)
class ARForecast:
    value: float
    order: int
    coefficients: np.ndarray
    mean: float
    aic: float
    degenerate: bool = False


def levinson_durbin(gamma: np.ndarray, order: int):
    """Yule-Walker AR coefficients and innovation variances for orders 1..``order``.

    ``gamma`` holds autocovariances at lags 0..order. Returns a list of
    coefficient vectors and a matching array of innovation variances.
    """
    phi = np.zeros(0)
    sig = float(gamma[0])
    coefs, sigmas = [], []
    for m in range(1, order + 1):
        k = (gamma[m] - phi @ gamma[m - 1 : 0 : -1]) / sig if sig > 0 else 0.0
        phi = np.append(phi - k * phi[::-1], k)
        sig *= 1.0 - k * k
        coefs.append(phi.copy())
        sigmas.append(sig)
    return coefs, np.array(sigmas)


def ar_fit_forecast(series, max_order: int = 5, demean: bool = True) -> ARForecast:
    """One-step forecast from the AIC-best Yule-Walker AR(q), ``1 <= q <= max_order``.

    The forecast is ``mu + sum_j phi_j (x[n-j] - mu)``. With ``demean=False`` the
    model has no intercept and ``mu`` is taken as zero.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    n = x.size
    if max_order < 1:
        raise ConfigError(f"max_order must be >= 1, got {max_order}")
    if n < max_order + 10:
        raise DimensionError(f"series of length {n} too short for max_order={max_order}")
    mu = float(np.mean(x)) if demean else 0.0
    xc = x - mu
    gamma0 = float(xc @ xc) / n
    if gamma0 <= 1e-14 * max(1.0, mu * mu):
        return ARForecast(float(np.mean(x)), 0, np.zeros(0), float(np.mean(x)), math.nan, True)

    gamma = np.array([xc[k:] @ xc[: n - k] / n for k in range(max_order + 1)])
    coefs, sigmas = levinson_durbin(gamma, max_order)
    tiny = np.finfo(float).tiny
    aic = n * np.log(np.maximum(sigmas, tiny)) + 2 * np.arange(1, max_order + 1)
    q = int(np.argmin(aic)) + 1
    phi = coefs[q - 1]
    recent = xc[::-1][:q]
    return ARForecast(mu + float(phi @ recent), q, phi, mu, float(aic[q - 1]))


def rmse(forecast, actual) -> float:
    """``p^-1/2 * ||forecast - actual||``."""
    d = np.asarray(forecast, dtype=np.float64) - np.asarray(actual, dtype=np.float64)
    return float(np.linalg.norm(d) / math.sqrt(d.size))


@dataclass(frozen=True)
class RollingConfig:
    window_length: int = 100
    r: Optional[int] = 1  # None selects r in every window
    k0: int = 5
    ar_max_order: int = 5
    r_max: int = 10

    def __post_init__(self):
        if self.window_length < self.k0 + 10:
            raise ConfigError(
                f"window_length={self.window_length} must be >= k0 + 10 = {self.k0 + 10}"
            )
        if self.r is not None and self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if self.k0 < 1 or self.ar_max_order < 1:
            raise ConfigError("k0 and ar_max_order must be >= 1")
        if self.ar_max_order + 10 > self.window_length:
            raise ConfigError(
                f"ar_max_order={self.ar_max_order} too large for window {self.window_length}"
            )


@dataclass
class ForecastReport:
    window_length: int
    start: np.ndarray  # first row of each window
    factor_rmse: np.ndarray  # NaN where the window failed
    benchmark_rmse: np.ndarray
    r_used: np.ndarray  # 0 where the window failed
    failures: dict = field(default_factory=dict)  # window index -> message

    @property
    def target(self) -> np.ndarray:
        return self.start + self.window_length

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.factor_rmse)

    @property
    def n_windows(self) -> int:
        return self.start.size

    def cumulative(self, method: str) -> np.ndarray:
        # failed windows contribute nothing; see `failures`
        v = self.factor_rmse if method == FACTOR_METHOD else self.benchmark_rmse
        return np.cumsum(np.where(np.isfinite(v), v, 0.0))

    def totals(self) -> dict:
        return {
            FACTOR_METHOD: float(self.cumulative(FACTOR_METHOD)[-1]),
            BENCHMARK_METHOD: float(self.cumulative(BENCHMARK_METHOD)[-1]),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window_index", "method", "rmse", "cumulative_rmse"])
        cum = {m: self.cumulative(m) for m in (FACTOR_METHOD, BENCHMARK_METHOD)}
        values = {FACTOR_METHOD: self.factor_rmse, BENCHMARK_METHOD: self.benchmark_rmse}
        for i in range(self.n_windows):
            for m in (FACTOR_METHOD, BENCHMARK_METHOD):
                v = values[m][i]
                cell = FLOAT_FORMAT % v if math.isfinite(v) else "undefined"
                writer.writerow([int(self.start[i]), m, cell, FLOAT_FORMAT % cum[m][i]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "n_windows": self.n_windows,
            "n_failed": len(self.failures),
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
            "cumulative_rmse": self.totals(),
            "mean_rmse": {
                FACTOR_METHOD: float(np.nanmean(self.factor_rmse))
                if self.valid.any()
                else None,
                BENCHMARK_METHOD: float(np.mean(self.benchmark_rmse)),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def forecast_window(window: np.ndarray, cfg: RollingConfig):
    """Fit the factor model on one window and forecast the next observation.

    Returns ``(y_hat, r)``.
    """
    p = window.shape[1]
    r = cfg.r
    if r is None:
        probe = fit(window, 1, cfg.k0)
        r = select_num_factors(probe.eigenvalues, min(cfg.r_max, p - 1))
    fitted = fit(window, min(r, p), cfg.k0)
    x_next = np.array(
        [ar_fit_forecast(col, cfg.ar_max_order).value for col in fitted.factors.T]
    )
    return fitted.a_hat @ x_next, fitted.r


def rolling_forecast(panel: TimeSeriesPanel, cfg: RollingConfig, threads: int = 1) -> ForecastReport:
    """Window ``i`` covers rows ``i .. i+w-1`` and forecasts row ``i+w``.

    The benchmark forecast is the last row of the window. A window whose fit
    fails is recorded in ``failures`` and scored as NaN for the factor method.
    """
    y = panel.data
    n, w = y.shape[0], cfg.window_length
    if w >= n:
        raise ConfigError(f"window_length={w} must be < n={n}")
    starts = np.arange(n - w)

    def one(i):
        actual = y[i + w]
        bench = rmse(y[i + w - 1], actual)
        try:
            y_hat, r = forecast_window(y[i : i + w], cfg)
        except (FactorscopeError, np.linalg.LinAlgError) as exc:
            return math.nan, bench, 0, f"{type(exc).__name__}: {exc}"
        return rmse(y_hat, actual), bench, r, None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, starts))
    else:
        results = [one(i) for i in starts]

    return ForecastReport(
        window_length=w,
        start=starts,
        factor_rmse=np.array([r[0] for r in results]),
        benchmark_rmse=np.array([r[1] for r in results]),
        r_used=np.array([r[2] for r in results]),
        failures={int(i): r[3] for i, r in zip(starts, results) if r[3] is not None},
    )
