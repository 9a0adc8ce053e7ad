"""Two-step estimation for factors of unequal strength."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import FactorModelFit, fit, project
from .errors import DegenerateFactorError, DimensionError
from .moments import DEFAULT_K0
from .panel import PanelLike, as_array


@dataclass(frozen=True)
class TwoStepFit:
    stage1: FactorModelFit
    stage2: FactorModelFit  # fitted on the panel with stage-1 factors projected out
    combined: np.ndarray  # p x (r1 + r2)
    factors: np.ndarray
    residuals: np.ndarray

    @property
    def a1_hat(self) -> np.ndarray:
        return self.stage1.a_hat

    @property
    def a2_check(self) -> np.ndarray:
        return self.stage2.a_hat

    @property
    def a_hat(self) -> np.ndarray:
        return self.combined

    @property
    def r1(self) -> int:
        return self.stage1.r

    @property
    def r2(self) -> int:
        return self.stage2.r

    @property
    def r(self) -> int:
        return self.r1 + self.r2

    @property
    def k0(self) -> int:
        return self.stage1.k0

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.stage1.eigenvalues

    @property
    def stage2_eigenvalues(self) -> np.ndarray:
        return self.stage2.eigenvalues

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "r1": self.r1,
            "r2": self.r2,
            "k0": self.k0,
            "eigenvalues": self.eigenvalues.tolist(),
            "stage2_eigenvalues": self.stage2_eigenvalues.tolist(),
            "a_hat": self.combined.tolist(),
            "factors": self.factors.tolist(),
        }


def two_step_fit(panel: PanelLike, r1: int, r2: int, k0: int = DEFAULT_K0) -> TwoStepFit:
    """Fit ``r1`` strong factors, project them out, then fit ``r2`` more on what is left."""
    y = as_array(panel)
    p = y.shape[1]
    if r1 < 1 or r2 < 1 or r1 + r2 > p:
        raise DimensionError(f"need r1 >= 1, r2 >= 1 and r1 + r2 <= p={p}; got {r1}, {r2}")
    stage1 = fit(y, r1, k0)
    # stage-1 residuals are exactly y_t - A1 A1^T y_t
    stage2 = fit(stage1.residuals, r2, k0)
    combined = np.hstack([stage1.a_hat, stage2.a_hat])
    factors, residuals = project(y, combined)
    return TwoStepFit(
        stage1=stage1, stage2=stage2, combined=combined, factors=factors, residuals=residuals
    )


def factor_strength_ratio(fit_result, split: int) -> float:
    """Mean norm of the trailing factors over the mean norm of the leading ones.

    Factors ``split..r-1`` against ``0..split-1``. Values far below one mean the
    trailing factors are much weaker and a two-step fit is worth trying.
    """
    x = np.asarray(fit_result.factors)
    r = x.shape[1]
    if not 1 <= split < r:
        raise DimensionError(f"split={split} outside [1, {r - 1}]")
    lead = np.mean(np.linalg.norm(x[:, :split], axis=1))
    trail = np.mean(np.linalg.norm(x[:, split:], axis=1))
    if lead == 0:
        raise DegenerateFactorError("leading factors are identically zero")
    return float(trail / lead)


def suggest_split(eigenvalues, r: int) -> int:
    """Heuristic ``r1``: position of the largest log-gap among the first ``r`` eigenvalues.

    A convenience for choosing the strong/weak split; the estimator itself
    assumes ``r1`` and ``r2`` are given.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)[:r]
    if r < 2 or lam.size < r:
        raise DimensionError(f"need at least two eigenvalues, r={r}")
    floor = 1e-12 * max(lam[0], np.finfo(float).tiny)
    logs = np.log(np.maximum(lam, floor))
    return int(np.argmax(logs[:-1] - logs[1:])) + 1
