"""Grouped noise variances, the factor-model covariance and its Woodbury inverse."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import ConditioningError, DimensionError, NoiseModelError, PartitionError
from .moments import sample_autocov
from .panel import PanelLike, as_array

MAX_CONDITION = 1e12


class GroupingWarning(UserWarning):
    pass


class IndefiniteFactorCovarianceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class NoiseModel:
    groups: tuple  # tuple of sorted int arrays partitioning range(p)
    variances: np.ndarray

    @property
    def p(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.variances <= 0))

    def diagonal(self) -> np.ndarray:
        d = np.empty(self.p)
        for g, v in zip(self.groups, self.variances):
            d[g] = v
        return d

    def to_dict(self) -> dict:
        return {
            "groups": [g.tolist() for g in self.groups],
            "variances": self.variances.tolist(),
        }


@dataclass(frozen=True)
class CovarianceEstimates:
    a_hat: np.ndarray
    sigma_x_hat: np.ndarray
    sigma_eps_hat: NoiseModel
    sigma_y_hat: np.ndarray
    precision_hat: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {
            "sigma_x_hat": self.sigma_x_hat.tolist(),
            "noise": self.sigma_eps_hat.to_dict(),
            "sigma_y_hat": self.sigma_y_hat.tolist(),
        }
        if self.precision_hat is not None:
            out["precision_hat"] = self.precision_hat.tolist()
        return out


def check_partition(groups: Sequence, p: int) -> tuple:
    out = []
    seen = np.zeros(p, dtype=int)
    for j, g in enumerate(groups):
        idx = np.sort(np.asarray(g, dtype=int).ravel())
        if idx.size == 0:
            raise PartitionError(f"group {j} is empty")
        if idx[0] < 0 or idx[-1] >= p:
            raise PartitionError(f"group {j} has indices outside [0, {p - 1}]")
        seen[idx] += 1
        out.append(idx)
    if np.any(seen != 1):
        bad = np.flatnonzero(seen != 1)[:5].tolist()
        raise PartitionError(f"groups do not partition 0..{p - 1}; first bad indices {bad}")
    return tuple(out)


def single_group(p: int) -> tuple:
    return (np.arange(p),)


def pooled_variances(residuals: np.ndarray, groups: Sequence, a_hat=None) -> np.ndarray:
    """Per-group mean of squared residual entries.

    Group ``j`` gets ``||E_j||_F^2 / (n * d_j)`` where ``E_j`` is the residual block
    for the group's coordinates. Without ``a_hat``, ``d_j`` is the group size.
    With ``a_hat``, ``d_j = m_j - ||A_j||_F^2``, the trace of the residual projector
    restricted to the group, which removes the downward bias from projecting
    ``r`` noise directions away.
    """
    e = np.asarray(residuals, dtype=np.float64)
    n = e.shape[0]
    out = np.empty(len(groups))
    for j, g in enumerate(groups):
        dof = float(len(g))
        if a_hat is not None:
            dof -= float(np.sum(a_hat[g] ** 2))
        if dof <= 0:
            raise NoiseModelError(f"group {j} has no residual degrees of freedom")
        out[j] = np.sum(e[:, g] ** 2) / (n * dof)
    return out


def estimate_noise_variances(fit, groups=None, dof_correction: bool = True) -> NoiseModel:
    """Pooled noise variances for a partition of the coordinates.

    ``fit`` is anything exposing ``residuals`` (n x p) and ``a_hat`` (p x r).
    ``groups=None`` means a single group.
    """
    p = fit.residuals.shape[1]
    parts = single_group(p) if groups is None else check_partition(groups, p)
    var = pooled_variances(fit.residuals, parts, fit.a_hat if dof_correction else None)
    return NoiseModel(groups=parts, variances=var)


def infer_grouping(fit, k: int) -> tuple:
    """Split coordinates into ``k`` groups of similar residual variance.

    Coordinates are sorted by residual mean square and cut at the ``k - 1``
    largest gaps. If fewer than ``k - 1`` gaps are non-zero, fewer groups are
    returned and a :class:`GroupingWarning` is issued. Groups come out in
    ascending variance order.
    """
    e = np.asarray(fit.residuals)
    p = e.shape[1]
    if not 1 <= k <= p:
        raise PartitionError(f"group count k={k} outside [1, {p}]")
    v = np.mean(e**2, axis=0)
    order = np.argsort(v, kind="stable")
    if k == 1:
        return (np.arange(p),)
    gaps = np.diff(v[order])
    tol = 1e-12 * max(float(np.max(np.abs(v))), np.finfo(float).tiny)
    live = np.flatnonzero(gaps > tol)
    n_cuts = k - 1
    if live.size < n_cuts:
        warnings.warn(
            f"only {live.size + 1} distinct variance levels; returning that many groups "
            f"instead of {k}",
            GroupingWarning,
            stacklevel=2,
        )
        n_cuts = live.size
    # largest gaps first; stable sort keeps the lower cut on ties
    ranked = live[np.argsort(-gaps[live], kind="stable")][:n_cuts]
    cuts = np.sort(ranked) + 1
    return tuple(np.sort(g) for g in np.split(order, cuts))


def assemble_sigma_y(fit, panel: PanelLike, noise: NoiseModel) -> CovarianceEstimates:
    """Factor covariance ``A^T (S - D) A`` and the structured ``A Sx A^T + D``."""
    y = as_array(panel)
    a = np.asarray(fit.a_hat, dtype=np.float64)
    p = y.shape[1]
    if a.shape[0] != p or noise.p != p:
        raise DimensionError(
            f"dimension mismatch: panel p={p}, loadings {a.shape}, noise model p={noise.p}"
        )
    d = noise.diagonal()
    s = sample_autocov(y, 0)
    m = a.T @ s @ a - (a.T * d) @ a
    sigma_x = (m + m.T) / 2
    sigma_y = a @ sigma_x @ a.T
    sigma_y = (sigma_y + sigma_y.T) / 2
    sigma_y[np.diag_indices(p)] += d
    return CovarianceEstimates(
        a_hat=a, sigma_x_hat=sigma_x, sigma_eps_hat=noise, sigma_y_hat=sigma_y
    )


def _spd_solve(mat, rhs):
    try:
        return linalg.cho_solve(linalg.cho_factor(mat), rhs)
    except linalg.LinAlgError:
        return linalg.solve(mat, rhs, assume_a="sym")


def precision_woodbury(est: CovarianceEstimates) -> np.ndarray:
    """Inverse of ``A Sx A^T + D`` through an ``r x r`` inner solve.

    ``D^-1 - D^-1 A (Sx^-1 + A^T D^-1 A)^-1 A^T D^-1``. No ``p x p`` matrix is
    ever factorised.
    """
    d = est.sigma_eps_hat.diagonal()
    if np.any(d <= 0):
        raise NoiseModelError(
            "noise variances must be positive for the precision matrix",
            diagnostics={"variances": est.sigma_eps_hat.variances.tolist()},
        )
    d_inv = 1.0 / d
    a = est.a_hat
    r = a.shape[1]
    if r == 0:
        return np.diag(d_inv)

    sx = est.sigma_x_hat
    eig = np.linalg.eigvalsh(sx)
    cond = np.max(np.abs(eig)) / max(np.min(np.abs(eig)), np.finfo(float).tiny)
    if cond > MAX_CONDITION:
        raise ConditioningError(
            f"factor covariance is numerically singular (condition {cond:.3g}); "
            "reduce the number of factors",
            diagnostics={"eigenvalues": eig.tolist(), "condition": cond},
        )
    if eig[0] <= 0:
        warnings.warn(
            f"estimated factor covariance is indefinite (smallest eigenvalue {eig[0]:.3g})",
            IndefiniteFactorCovarianceWarning,
            stacklevel=2,
        )

    da = a * d_inv[:, None]
    try:
        inner = _spd_solve(sx, np.eye(r)) + a.T @ da
        inner = (inner + inner.T) / 2
        correction = da @ _spd_solve(inner, da.T)
    except linalg.LinAlgError as exc:
        # reachable only when Sx is indefinite and cancels A^T D^-1 A
        raise ConditioningError(
            f"Woodbury inner matrix is singular ({exc}); reduce the number of factors",
            diagnostics={"eigenvalues": eig.tolist()},
        ) from None
    out = -(correction + correction.T) / 2
    out[np.diag_indices_from(out)] += d_inv
    return out


def estimate_covariance(
    fit, panel: PanelLike, groups=None, precision: bool = True, dof_correction: bool = True
) -> CovarianceEstimates:
    noise = estimate_noise_variances(fit, groups, dof_correction=dof_correction)
    est = assemble_sigma_y(fit, panel, noise)
    if precision:
        est = replace(est, precision_hat=precision_woodbury(est))
    return est
