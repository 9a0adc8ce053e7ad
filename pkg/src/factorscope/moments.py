"""Sample autocovariances and the lag-pooled matrix whose eigenvectors give the loadings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LagError
from .panel import PanelLike, as_array

DEFAULT_K0 = 1


@dataclass(frozen=True)
class AutocovarianceSet:
    k0: int
    sigma_tilde: tuple  # (k0 + 1) p x p matrices, lag 0 first
    y_bar: np.ndarray

    def __getitem__(self, k: int) -> np.ndarray:
        return self.sigma_tilde[k]


@dataclass(frozen=True)
class LMatrix:
    l: np.ndarray
    k0: int

    @property
    def p(self) -> int:
        return self.l.shape[0]


def _centered(y: np.ndarray, y_bar=None):
    if y_bar is None:
        y_bar = y.mean(axis=0)
    return y - y_bar, y_bar


def _lag_product(yc: np.ndarray, k: int) -> np.ndarray:
    n = yc.shape[0]
    return yc[k:].T @ yc[: n - k] / (n - k)


def sample_autocov(panel: PanelLike, k: int) -> np.ndarray:
    """Lag-``k`` sample autocovariance with divisor ``n - k``.

    Centering uses the full-sample mean for every lag, so row ``i``, column ``j``
    is ``(n-k)^-1 sum_t (y[t+k, i] - ybar_i)(y[t, j] - ybar_j)``.
    """
    y = as_array(panel)
    n = y.shape[0]
    if not 0 <= k <= n - 2:
        raise LagError(f"lag {k} outside [0, {n - 2}] for n={n}")
    yc, _ = _centered(y)
    return _lag_product(yc, k)


def autocovariances(panel: PanelLike, k0: int) -> AutocovarianceSet:
    y = as_array(panel)
    n = y.shape[0]
    if not 0 <= k0 <= n - 2:
        raise LagError(f"k0={k0} outside [0, {n - 2}] for n={n}")
    yc, y_bar = _centered(y)
    mats = tuple(_lag_product(yc, k) for k in range(k0 + 1))
    return AutocovarianceSet(k0=k0, sigma_tilde=mats, y_bar=y_bar)


def l_from_autocovariances(lagged: Sequence[np.ndarray]) -> np.ndarray:
    """``sum_k S_k S_k^T`` over the supplied lag matrices (lag 1 upward)."""
    mats = [np.asarray(m, dtype=np.float64) for m in lagged]
    if not mats:
        raise LagError("need at least one lagged autocovariance")
    out = np.zeros((mats[0].shape[0], mats[0].shape[0]))
    for s in mats:
        out += s @ s.T
    # S S^T is symmetric in exact arithmetic; drop the roundoff skew
    return (out + out.T) / 2


def build_L(panel: PanelLike, k0: int = DEFAULT_K0) -> LMatrix:
    y = as_array(panel)
    n = y.shape[0]
    if not 1 <= k0 <= n - 2:
        raise LagError(f"k0={k0} outside [1, {n - 2}] for n={n}")
    yc, _ = _centered(y)
    lagged = [_lag_product(yc, k) for k in range(1, k0 + 1)]
    return LMatrix(l=l_from_autocovariances(lagged), k0=k0)
