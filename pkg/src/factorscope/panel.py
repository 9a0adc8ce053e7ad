"""Multivariate time-series panels: CSV I/O, differencing, grid vectorization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, ParseError

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class TimeSeriesPanel:
    """An ``n x p`` block of observations, one row per time point.

    The data array is copied on construction and marked read-only.
    """

    data: np.ndarray
    labels: Optional[tuple] = field(default=None)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DimensionError(f"panel data must be 2-dimensional, got shape {arr.shape}")
        n, p = arr.shape
        if n < 2 or p < 1:
            raise DimensionError(f"panel needs n >= 2 and p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise DimensionError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != p:
                raise DimensionError(f"{len(labels)} labels for {p} columns")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def rows(self, start: int, stop: int) -> "TimeSeriesPanel":
        return TimeSeriesPanel(self.data[start:stop], self.labels)


PanelLike = Union[TimeSeriesPanel, np.ndarray]


def as_array(panel: PanelLike) -> np.ndarray:
    if isinstance(panel, TimeSeriesPanel):
        return panel.data
    arr = np.asarray(panel, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected an n x p matrix, got shape {arr.shape}")
    return arr


def _parse_row(cells, lineno):
    out = []
    for j, cell in enumerate(cells):
        text = cell.strip()
        try:
            value = float(text)
        except ValueError:
            raise ParseError(
                f"row {lineno}, column {j + 1}: cannot parse {cell!r} as a number",
                row=lineno,
                col=j + 1,
            ) from None
        if not np.isfinite(value):
            raise ParseError(
                f"row {lineno}, column {j + 1}: non-finite value {cell!r}", row=lineno, col=j + 1
            )
        out.append(value)
    return out


def _looks_numeric(cells):
    try:
        [float(c) for c in cells]
    except ValueError:
        return False
    return True


def load_csv(path, has_header: Optional[bool] = None) -> TimeSeriesPanel:
    """Read a panel from a comma-separated file.

    ``has_header=None`` sniffs the first row: it is a header if any cell fails to
    parse as a number. Row numbers in errors are 1-based file lines.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        lines = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if row]
    if not lines:
        raise DimensionError(f"{path}: no data")

    labels = None
    if has_header is None:
        has_header = not _looks_numeric(lines[0][1])
    if has_header:
        labels = [c.strip() for c in lines[0][1]]
        lines = lines[1:]
    if not lines:
        raise DimensionError(f"{path}: header but no data rows")

    width = len(labels) if labels is not None else len(lines[0][1])
    rows = []
    for lineno, cells in lines:
        if len(cells) != width:
            raise ParseError(
                f"row {lineno}: expected {width} columns, found {len(cells)}", row=lineno
            )
        rows.append(_parse_row(cells, lineno))

    if len(rows) < 2:
        raise DimensionError(f"{path}: need at least 2 observations, found {len(rows)}")
    return TimeSeriesPanel(np.array(rows), labels)


def write_csv(panel: TimeSeriesPanel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if panel.labels is not None:
            writer.writerow(panel.labels)
        for row in panel.data:
            writer.writerow([FLOAT_FORMAT % v for v in row])


def difference(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """First differences, ``out[t] = y[t+1] - y[t]``."""
    if panel.n < 3:
        raise DimensionError(f"differencing needs n >= 3, got n={panel.n}")
    return TimeSeriesPanel(np.diff(panel.data, axis=0), panel.labels)


def vec(matrix) -> np.ndarray:
    """Column-stack a matrix into a vector (first column first)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"vec expects a matrix, got shape {m.shape}")
    return m.ravel(order="F")


def vectorize_grid(grid_series: Sequence) -> TimeSeriesPanel:
    """Stack a sequence of ``p_u x p_v`` surfaces into a panel with ``p = p_u * p_v``.

    Each surface is flattened column by column (Fortran order), so the first grid
    column comes first in the row.
    """
    grids = [np.asarray(g, dtype=np.float64) for g in grid_series]
    if not grids:
        raise DimensionError("empty grid sequence")
    shape = grids[0].shape
    if len(shape) != 2:
        raise DimensionError(f"grid 0 is not a matrix (shape {shape})")
    for i, g in enumerate(grids):
        if g.shape != shape:
            raise DimensionError(f"grid {i} has shape {g.shape}, expected {shape}")
    return TimeSeriesPanel(np.stack([vec(g) for g in grids]))
