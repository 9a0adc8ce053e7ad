"""Simulation designs, spectral-norm error metrics and a seeded replication harness.

Two designs are provided. ``Example1Config`` is a single strong AR(1) factor with
cosine loadings and i.i.d. Gaussian noise. ``Example2Config`` has three ARMA
factors whose loading strength is tuned through ``p ** (-delta / 2)`` column
scaling, with alternating noise variances 0.5/0.8.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import linalg, signal
from scipy.optimize import linear_sum_assignment

from .covariance import estimate_covariance, infer_grouping
from .eigen import fit
from .errors import ConfigError, NumericError
from .moments import sample_autocov
from .panel import FLOAT_FORMAT, TimeSeriesPanel
from .twostep import factor_strength_ratio, two_step_fit

METHODS = ("one_step", "two_step")
UNDEFINED = "undefined"


@dataclass(frozen=True)
class Example1Config:
    n: int
    p: int
    k0: int = 1
    ar_coef: float = 0.9
    innovation_sd: float = 2.0
    noise_sd: float = 2.0

    name = "example1"
    r = 1

    def __post_init__(self):
        if self.n < 10 or self.p < 2:
            raise ConfigError(f"example1 needs n >= 10 and p >= 2, got n={self.n}, p={self.p}")
        if not abs(self.ar_coef) < 1:
            raise ConfigError(f"AR coefficient {self.ar_coef} is not stationary")
        if not 1 <= self.k0 <= self.n - 2:
            raise ConfigError(f"k0={self.k0} outside [1, n-2]")

    @property
    def factor_variance(self) -> float:
        return self.innovation_sd**2 / (1 - self.ar_coef**2)

    def loadings(self) -> np.ndarray:
        i = np.arange(1, self.p + 1)
        return (2 * np.cos(2 * np.pi * i / self.p))[:, None]


@dataclass(frozen=True)
class Example2Config:
    n: int
    p: int
    delta1: float = 0.0
    delta2: float = 0.0
    noise: str = "normal"
    k0: int = 3
    burn_in: int = 500
    groups: str = "design"

    name = "example2"
    r = 3
    r1 = 1

    def __post_init__(self):
        if self.n < 10 or self.p < 4:
            raise ConfigError(f"example2 needs n >= 10 and p >= 4, got n={self.n}, p={self.p}")
        if self.p % 2:
            raise ConfigError(f"example2 needs an even p, got p={self.p}")
        for name in ("delta1", "delta2"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.noise not in ("normal", "t5"):
            raise ConfigError(f"noise must be 'normal' or 't5', got {self.noise!r}")
        if self.groups not in ("design", "single", "infer"):
            raise ConfigError(f"groups must be design, single or infer, got {self.groups!r}")
        if not 1 <= self.k0 <= self.n - 2:
            raise ConfigError(f"k0={self.k0} outside [1, n-2]")

    def noise_variances(self) -> np.ndarray:
        return np.where(np.arange(self.p) % 2 == 0, 0.5, 0.8)

    def design_groups(self) -> tuple:
        return (np.arange(0, self.p, 2), np.arange(1, self.p, 2))


Design = Union[Example1Config, Example2Config]


class Sample(NamedTuple):
    panel: TimeSeriesPanel
    loadings: np.ndarray
    sigma_y: np.ndarray
    precision: np.ndarray


def _readonly(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


@functools.lru_cache(maxsize=16)
def _example1_truth(cfg: Example1Config):
    a = cfg.loadings()
    sigma_y = cfg.factor_variance * (a @ a.T)
    sigma_y[np.diag_indices(cfg.p)] += cfg.noise_sd**2
    return _readonly(a, sigma_y, np.linalg.inv(sigma_y))


def gen_example1(cfg: Example1Config, seed: int) -> Sample:
    a, sigma_y, precision = _example1_truth(cfg)
    rng = np.random.default_rng(seed)
    x_prev = rng.normal(0.0, math.sqrt(cfg.factor_variance))
    eta = rng.normal(0.0, cfg.innovation_sd, cfg.n)
    x, _ = signal.lfilter([1.0], [1.0, -cfg.ar_coef], eta, zi=[cfg.ar_coef * x_prev])
    eps = rng.normal(0.0, cfg.noise_sd, (cfg.n, cfg.p))
    y = x[:, None] * a.T + eps
    return Sample(TimeSeriesPanel(y), a, sigma_y, precision)


def example2_state_space():
    """Transition and input matrices for the state ``(x1, x2, x3, e1, e2)``.

    Innovations ``(e1, e2, e3)`` are i.i.d. N(0, 1).
    """
    F = np.zeros((5, 5))
    G = np.zeros((5, 3))
    F[0, 0], F[0, 3], G[0, 0] = -0.8, 0.9, 1.0
    F[1, 1], F[1, 4], G[1, 1] = -0.7, 0.85, 1.0
    # x3_t = 0.8 x2_t - 0.5 x3_{t-1} + e3_t with x2_t substituted
    F[2, 1], F[2, 4], F[2, 2] = 0.8 * -0.7, 0.8 * 0.85, -0.5
    G[2, 1], G[2, 2] = 0.8, 1.0
    G[3, 0] = 1.0
    G[4, 1] = 1.0
    return F, G


@functools.lru_cache(maxsize=1)
def _example2_state_cov():
    F, G = example2_state_space()
    return F, linalg.solve_discrete_lyapunov(F, G @ G.T)


def example2_factor_autocov(k: int) -> np.ndarray:
    """Stationary ``Cov(x_{t+k}, x_t)`` of the three Example-2 factors."""
    F, S = _example2_state_cov()
    return (np.linalg.matrix_power(F, k) @ S)[:3, :3]


def example2_factors(e: np.ndarray) -> np.ndarray:
    """Run the three ARMA recursions from a zero state over innovations ``e`` (T x 3)."""
    x1 = signal.lfilter([1.0, 0.9], [1.0, 0.8], e[:, 0])
    x2 = signal.lfilter([1.0, 0.85], [1.0, 0.7], e[:, 1])
    x3 = signal.lfilter([1.0], [1.0, 0.5], 0.8 * x2 + e[:, 2])
    return np.column_stack([x1, x2, x3])


def gen_example2(cfg: Example2Config, seed: int) -> Sample:
    rng = np.random.default_rng(seed)
    p, half = cfg.p, cfg.p // 2
    a = np.zeros((p, 3))
    a[:half] = rng.uniform(-2.0, 2.0, (half, 3))
    a *= p ** (-np.array([cfg.delta1, cfg.delta2, cfg.delta2]) / 2)

    e = rng.standard_normal((cfg.burn_in + cfg.n, 3))
    x = example2_factors(e)[cfg.burn_in :]

    var = cfg.noise_variances()
    if cfg.noise == "normal":
        eps = rng.standard_normal((cfg.n, p)) * np.sqrt(var)
    else:
        # Var(t_5) = 5/3
        eps = rng.standard_t(5, (cfg.n, p)) * np.sqrt(var * 3 / 5)
    y = x @ a.T + eps

    sigma_y = a @ example2_factor_autocov(0) @ a.T
    sigma_y = (sigma_y + sigma_y.T) / 2
    sigma_y[np.diag_indices(p)] += var
    return Sample(TimeSeriesPanel(y), a, sigma_y, np.linalg.inv(sigma_y))


def spectral_norm(m) -> float:
    """Largest singular value."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return 0.0
    if m.ndim == 2 and m.shape[0] == m.shape[1] and np.array_equal(m, m.T):
        return float(np.max(np.abs(np.linalg.eigvalsh(m))))
    return float(np.linalg.norm(np.atleast_2d(m), 2))


def align_columns(estimate: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Permute and sign-flip ``estimate``'s columns to best match ``target``.

    Columns are paired by maximal total ``|estimate^T target|`` and each matched
    column takes the sign that makes its inner product with the target positive.
    """
    est = np.asarray(estimate, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    cross = est.T @ tgt
    rows, cols = linear_sum_assignment(-np.abs(cross))
    out = np.empty((est.shape[0], tgt.shape[1]))
    for i, j in zip(rows, cols):
        s = -1.0 if cross[i, j] < 0 else 1.0
        out[:, j] = s * est[:, i]
    return out


def leading_subspace(basis: np.ndarray, lag_cores: Sequence[np.ndarray], r: int) -> np.ndarray:
    """Top ``r`` eigenvectors of ``sum_k (B M_k B^T)(B M_k B^T)^T``.

    This is the population counterpart of the pooled matrix when the lag-``k``
    autocovariance of the data is ``B M_k B^T``.
    """
    u, s, vt = np.linalg.svd(basis, full_matrices=False)
    keep = s > 1e-10 * s[0]
    u, c = u[:, keep], s[keep, None] * vt[keep]
    inner = np.zeros((u.shape[1], u.shape[1]))
    for m in lag_cores:
        nk = c @ m @ c.T
        inner += nk @ nk.T
    w, v = np.linalg.eigh((inner + inner.T) / 2)
    return u @ v[:, ::-1][:, :r]


def true_loadings(cfg: Design, sample: Sample, two_step: bool = False) -> np.ndarray:
    """Orthonormal loading matrix the estimators are compared against."""
    a = sample.loadings
    if isinstance(cfg, Example1Config):
        return a / np.linalg.norm(a)
    cores = [example2_factor_autocov(k) for k in range(1, cfg.k0 + 1)]
    full = leading_subspace(a, cores, cfg.r)
    if not two_step:
        return full
    a1 = full[:, : cfg.r1]
    a2 = leading_subspace(a - a1 @ (a1.T @ a), cores, cfg.r - cfg.r1)
    return np.hstack([a1, a2])


def _grouping(cfg: Design, fitted, p: int):
    if isinstance(cfg, Example1Config) or cfg.groups == "single":
        return None
    if cfg.groups == "design":
        return cfg.design_groups()
    return infer_grouping(fitted, 2)


def _covariance_errors(cfg, fitted, sample, suffix, out):
    groups = _grouping(cfg, fitted, sample.panel.p)
    try:
        est = estimate_covariance(fitted, sample.panel, groups)
    except NumericError:
        out["factor_cov_error" + suffix] = math.nan
        out["factor_precision_error" + suffix] = math.nan
        return
    out["factor_cov_error" + suffix] = spectral_norm(est.sigma_y_hat - sample.sigma_y)
    out["factor_precision_error" + suffix] = spectral_norm(est.precision_hat - sample.precision)


def metric_names(cfg: Design, methods: Sequence[str]) -> list:
    names = [
        "loading_error",
        "sample_precision_error",
        "factor_precision_error",
        "sample_cov_error",
        "factor_cov_error",
    ]
    if isinstance(cfg, Example2Config):
        names.append("strength_ratio")
    if "two_step" in methods:
        names += ["loading_error_two_step", "factor_precision_error_two_step",
                  "factor_cov_error_two_step"]
    return names


def replicate(cfg: Design, seed: int, methods: Sequence[str] = ("one_step",)) -> dict:
    """All metrics for one seeded draw of the design."""
    gen = gen_example1 if isinstance(cfg, Example1Config) else gen_example2
    sample = gen(cfg, seed)
    panel = sample.panel
    out = {}

    s = sample_autocov(panel, 0)
    out["sample_cov_error"] = spectral_norm(s - sample.sigma_y)
    if panel.p < panel.n:
        out["sample_precision_error"] = spectral_norm(np.linalg.inv(s) - sample.precision)
    else:
        out["sample_precision_error"] = math.nan

    one = fit(panel, cfg.r, cfg.k0)
    target = true_loadings(cfg, sample)
    out["loading_error"] = spectral_norm(align_columns(one.a_hat, target) - target)
    _covariance_errors(cfg, one, sample, "", out)
    if isinstance(cfg, Example2Config):
        out["strength_ratio"] = factor_strength_ratio(one, cfg.r1)

    if "two_step" in methods:
        two = two_step_fit(panel, cfg.r1, cfg.r - cfg.r1, cfg.k0)
        target2 = true_loadings(cfg, sample, two_step=True)
        out["loading_error_two_step"] = spectral_norm(
            align_columns(two.a_hat, target2) - target2
        )
        _covariance_errors(cfg, two, sample, "_two_step", out)
    return out


def _fmt(v) -> str:
    return UNDEFINED if v is None or not math.isfinite(v) else FLOAT_FORMAT % v


def _json_float(v):
    return None if v is None or not math.isfinite(v) else float(v)


@dataclass
class SimulationReport:
    design: str
    config: dict
    methods: tuple
    reps: int
    base_seed: int
    metrics: list
    rows: list = field(default_factory=list)  # (replication, seed, {metric: value})

    def values(self, metric: str) -> np.ndarray:
        return np.array([r[2].get(metric, math.nan) for r in self.rows], dtype=float)

    def summary(self) -> dict:
        out = {}
        for m in self.metrics:
            v = self.values(m)
            v = v[np.isfinite(v)]
            mean = float(np.mean(v)) if v.size else None
            sd = float(np.std(v, ddof=1)) if v.size > 1 else None
            out[m] = {"mean": mean, "sd": sd, "count": int(v.size)}
        return out

    def mean(self, metric: str) -> float:
        m = self.summary()[metric]["mean"]
        return math.nan if m is None else m

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replication", "seed", "metric", "value"])
        for rep, seed, vals in self.rows:
            for m in self.metrics:
                writer.writerow([rep, seed, m, _fmt(vals.get(m))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        summ = {
            m: {k: (_json_float(v) if k != "count" else v) for k, v in s.items()}
            for m, s in self.summary().items()
        }
        return {
            "design": self.design,
            "config": self.config,
            "methods": list(self.methods),
            "reps": self.reps,
            "base_seed": self.base_seed,
            "summary": summ,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_table(self) -> str:
        summ = self.summary()
        cfg = self.config
        head = f"{self.design}: n={cfg['n']} p={cfg['p']}"
        if self.design == "example2":
            head += f" delta1={cfg['delta1']} delta2={cfg['delta2']} noise={cfg['noise']}"
        head += f" reps={self.reps}"
        lines = [head, f"{'metric':<34}{'mean':>14}{'sd':>14}"]
        for m in self.metrics:
            s = summ[m]
            mean = "-" if s["mean"] is None else f"{s['mean']:.4g}"
            sd = "-" if s["sd"] is None else f"{s['sd']:.4g}"
            lines.append(f"{m:<34}{mean:>14}{sd:>14}")
        return "\n".join(lines) + "\n"


def run_replications(
    design: Design,
    reps: int,
    methods: Sequence[str] = ("one_step",),
    base_seed: int = 0,
    threads: int = 1,
) -> SimulationReport:
    """Replication ``i`` draws from ``seed = base_seed + i``; output order is fixed."""
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    if "two_step" in methods and design.r < 2:
        raise ConfigError(f"two_step needs at least two factors; {design.name} has r={design.r}")

    seeds = [base_seed + i for i in range(reps)]
    work = functools.partial(replicate, design, methods=methods)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, seeds))
    else:
        results = [work(s) for s in seeds]

    report = SimulationReport(
        design=design.name,
        config=asdict(design),
        methods=methods,
        reps=reps,
        base_seed=base_seed,
        metrics=metric_names(design, methods),
    )
    report.rows = [(i, s, r) for i, (s, r) in enumerate(zip(seeds, results))]
    return report
