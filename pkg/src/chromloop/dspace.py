"""Deterministic design-space classification over fitted models.

A point is inside the design space when every thresholded predicted
response meets its lower bound.  Two-factor grid scans provide the
data for contour-style plots of the acceptable region.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .doe import MaterialAttributes, ProcessParams, format_real
from .rsm import RegressionModel, predict_batch

RESPONSE_NAMES = ("Y1", "Y2", "Y3", "Y4")


@dataclass(frozen=True)
class ThresholdSpec:
    """Lower bounds per response; unset responses are unconstrained."""

    tt_purity_min: float | None = None
    tt_productivity_min: float | None = None
    fg_purity_min: float | None = None
    fg_productivity_min: float | None = None

    def bounds(self) -> tuple[float | None, ...]:
        return (self.tt_purity_min, self.tt_productivity_min,
                self.fg_purity_min, self.fg_productivity_min)

    def __post_init__(self):
        if all(b is None for b in self.bounds()):
            raise ValueError("at least one threshold must be set")


@dataclass(frozen=True)
class GridSpec:
    """Two swept factors over a fixed slice of the remaining ones."""

    swept: tuple[int, int]              # 1-based factor indices
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    resolution: int
    fixed: ProcessParams                # swept entries ignored
    attrs: MaterialAttributes

    def __post_init__(self):
        if self.swept[0] == self.swept[1]:
            raise ValueError("swept factor indices must be distinct")
        if self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")

    def axis_x(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.resolution)

    def axis_y(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.resolution)


@dataclass(frozen=True)
class DesignSpaceGrid:
    """Membership and margins evaluated on a grid slice.

    ``inside`` and ``margins`` are indexed [iy, ix] (row-major with the
    y axis as rows); margins hold one (resolution x resolution) layer
    per response, NaN where no threshold applies.
    """

    spec: GridSpec
    x_values: tuple[float, ...]
    y_values: tuple[float, ...]
    inside: tuple[tuple[bool, ...], ...]
    margins: tuple[tuple[tuple[float, ...], ...], ...]
    worst_margin: tuple[tuple[float, ...], ...]


def _predict_all(models, X: np.ndarray, attrs: MaterialAttributes):
    z = np.array(attrs.values())
    return np.column_stack([predict_batch(m, X, z) for m in models])


def _margins(pred: np.ndarray, thresholds: ThresholdSpec) -> np.ndarray:
    out = np.full_like(pred, np.nan)
    for r, bound in enumerate(thresholds.bounds()):
        if bound is None:
            continue
        scale = abs(bound) if bound != 0 else 1.0
        out[:, r] = (pred[:, r] - bound) / scale
    return out


def membership(models, params: ProcessParams, attrs: MaterialAttributes,
               thresholds: ThresholdSpec) -> tuple[bool, tuple[float, ...]]:
    """Classify one point; margins are (predicted - bound) / |bound|.

    Returns (inside, per-response margins); margins are NaN for
    responses without a threshold.  Inside means every margin >= 0.
    """
    X = np.array([params.values()])
    pred = _predict_all(models, X, attrs)
    marg = _margins(pred, thresholds)[0]
    inside = bool(np.all(np.isnan(marg) | (marg >= 0.0)))
    return inside, tuple(float(m) for m in marg)


def grid_scan(models, grid: GridSpec,
              thresholds: ThresholdSpec) -> DesignSpaceGrid:
    """Evaluate membership at every node of the slice grid."""
    xs = grid.axis_x()
    ys = grid.axis_y()
    base = np.array(grid.fixed.values())
    ix, iy = grid.swept[0] - 1, grid.swept[1] - 1
    XX, YY = np.meshgrid(xs, ys)
    pts = np.tile(base, (XX.size, 1))
    pts[:, ix] = XX.ravel()
    pts[:, iy] = YY.ravel()
    pred = _predict_all(models, pts, grid.attrs)
    marg = _margins(pred, thresholds)
    inside = np.all(np.isnan(marg) | (marg >= 0.0), axis=1)
    worst = np.where(np.all(np.isnan(marg), axis=1), np.nan,
                     np.nanmin(marg, axis=1))
    res = grid.resolution
    shape = (res, res)
    return DesignSpaceGrid(
        spec=grid,
        x_values=tuple(float(v) for v in xs),
        y_values=tuple(float(v) for v in ys),
        inside=tuple(tuple(bool(b) for b in row)
                     for row in inside.reshape(shape)),
        margins=tuple(
            tuple(tuple(float(v) for v in row)
                  for row in marg[:, r].reshape(shape))
            for r in range(marg.shape[1])),
        worst_margin=tuple(tuple(float(v) for v in row)
                           for row in worst.reshape(shape)),
    )


def boundary_cells(grid: DesignSpaceGrid) -> list[tuple[int, int]]:
    """Nodes whose membership differs from a 4-neighbor, as (iy, ix)."""
    inside = np.array(grid.inside, dtype=bool)
    ny, nx = inside.shape
    out = []
    for iy in range(ny):
        for ix in range(nx):
            v = inside[iy, ix]
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                jy, jx = iy + dy, ix + dx
                if 0 <= jy < ny and 0 <= jx < nx and inside[jy, jx] != v:
                    out.append((iy, ix))
                    break
    return out


def export_grid_csv(grid: DesignSpaceGrid) -> str:
    """Grid CSV, row-major: x_axis,y_axis,inside,margin_Y1..margin_Y4."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x_axis", "y_axis", "inside"]
                    + [f"margin_{n}" for n in RESPONSE_NAMES])
    inside = np.array(grid.inside)
    res = grid.spec.resolution
    for iy in range(res):
        for ix in range(res):
            margins = [grid.margins[r][iy][ix] for r in range(4)]
            writer.writerow(
                [format_real(grid.x_values[ix]), format_real(grid.y_values[iy]),
                 int(inside[iy, ix])]
                + ["" if np.isnan(m) else format_real(m) for m in margins])
    return buf.getvalue()
