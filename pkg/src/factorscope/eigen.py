"""Loading, factor and residual estimation from the eigenvectors of the lag-pooled matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateSpectrumError, DimensionError, NumericError
from .moments import DEFAULT_K0, LMatrix, build_L
from .panel import PanelLike, as_array


@dataclass(frozen=True)
class FactorModelFit:
    a_hat: np.ndarray  # p x r, orthonormal columns
    eigenvalues: np.ndarray  # all p, descending, clamped at 0
    factors: np.ndarray  # n x r
    residuals: np.ndarray  # n x p
    r: int
    k0: int

    @property
    def p(self) -> int:
        return self.a_hat.shape[0]

    @property
    def n(self) -> int:
        return self.factors.shape[0]

    def projector(self) -> np.ndarray:
        return self.a_hat @ self.a_hat.T

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "k0": self.k0,
            "eigenvalues": self.eigenvalues.tolist(),
            "a_hat": self.a_hat.tolist(),
            "factors": self.factors.tolist(),
        }


def canonicalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (ties: lowest index)."""
    v = np.array(vectors, dtype=np.float64, copy=True)
    if v.size == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def _eigh_descending(m: np.ndarray):
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "symmetric eigensolver did not converge",
            diagnostics={"solver": "LAPACK syevd", "shape": m.shape, "reason": str(exc)},
        ) from exc
    return w[::-1], v[:, ::-1]


def estimate_loadings(l: LMatrix | np.ndarray, r: int):
    """Leading ``r`` orthonormal eigenvectors of the pooled matrix.

    Returns ``(a_hat, eigenvalues)`` where ``eigenvalues`` is the full spectrum in
    descending order with roundoff negatives clamped to zero.
    """
    mat = l.l if isinstance(l, LMatrix) else np.asarray(l, dtype=np.float64)
    p = mat.shape[0]
    if mat.shape != (p, p):
        raise DimensionError(f"pooled matrix must be square, got {mat.shape}")
    if not 1 <= r <= p:
        raise DimensionError(f"factor count r={r} outside [1, {p}]")
    w, v = _eigh_descending(mat)
    return canonicalize_signs(v[:, :r]), np.clip(w, 0.0, None)


def project(y: np.ndarray, a_hat: np.ndarray):
    """Factors ``y A`` and residuals ``y - y A A^T`` for row-major observations."""
    x = y @ a_hat
    return x, y - x @ a_hat.T


def fit(panel: PanelLike, r: int, k0: int = DEFAULT_K0) -> FactorModelFit:
    y = as_array(panel)
    if y.shape[0] < k0 + 2:
        raise DimensionError(f"need n >= k0 + 2 = {k0 + 2}, got n={y.shape[0]}")
    a_hat, eigvals = estimate_loadings(build_L(y, k0), r)
    factors, residuals = project(y, a_hat)
    return FactorModelFit(
        a_hat=a_hat, eigenvalues=eigvals, factors=factors, residuals=residuals, r=r, k0=k0
    )


def _ratio_select(eigenvalues: np.ndarray, r_max: int) -> int:
    floor = 1e-12 * eigenvalues[0]
    lam = np.maximum(eigenvalues[: r_max + 1], floor)
    ratios = lam[:-1] / lam[1:]
    # argmax returns the first maximiser, i.e. ties go to the smaller r
    return int(np.argmax(ratios)) + 1


def ic_p1(panel: PanelLike, r_max: int, k0: int = DEFAULT_K0) -> int:
    """Information-criterion choice of ``r`` using the Bai and Ng (2002) IC_p1 penalty.

    ``V(r)`` is the mean squared residual after projecting out the first ``r``
    eigenvectors of the pooled matrix.
    """
    y = as_array(panel)
    n, p = y.shape
    _, vecs = _eigh_descending(build_L(y, k0).l)
    penalty = (n + p) / (n * p) * np.log(n * p / (n + p))
    best_r, best_ic = 1, np.inf
    for r in range(1, r_max + 1):
        _, resid = project(y, vecs[:, :r])
        v = np.mean(resid**2)
        if v <= 0:
            return r
        ic = np.log(v) + r * penalty
        if ic < best_ic:
            best_r, best_ic = r, ic
    return best_r


def select_num_factors(
    eigenvalues,
    r_max: int,
    strategy: str = "ratio",
    panel: Optional[PanelLike] = None,
    k0: int = DEFAULT_K0,
) -> int:
    """Estimate the number of factors.

    ``"ratio"`` picks the ``i <= r_max`` maximising ``lambda_i / lambda_{i+1}``
    with eigenvalues floored at ``1e-12 * lambda_1``. ``"ic_p1"`` needs the panel
    and delegates to :func:`ic_p1`.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.size == 0 or lam[0] <= 0:
        raise DegenerateSpectrumError("all eigenvalues are non-positive")
    if not 1 <= r_max < lam.size:
        raise DimensionError(f"r_max={r_max} outside [1, {lam.size - 1}]")
    if strategy == "ratio":
        return _ratio_select(lam, r_max)
    if strategy == "ic_p1":
        if panel is None:
            raise DimensionError("ic_p1 strategy needs the panel")
        return ic_p1(panel, r_max, k0)
    raise ValueError(f"unknown strategy {strategy!r}")
