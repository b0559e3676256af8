"""Connection fields over joint space and their loop integrals.

The net displacement of a closed joint-space trajectory is the line
integral ``-oint A(alpha) dalpha``; by Stokes' theorem the same number
is the (signed) area integral of the connection's exterior derivative,
the planar curl of each row. For the rotation row the correspondence is
exact; for translation it is the usual body-velocity-integral estimate.

This module evaluates those curls on regular grids, computes both sides
of the Stokes identity for arbitrary closed polylines, and exports
fields as CSV plus a self-contained SVG heatmap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ioutil import atomic_write_text
from .svg import render_heatmap

__all__ = [
    "GridSpec",
    "ScalarField",
    "JointLoop",
    "LoopOutsideGrid",
    "SelfIntersectingLoop",
    "ROW_INDEX",
    "exterior_derivative_field",
    "line_integral",
    "surface_integral",
    "zero_contour_segments",
    "export_field",
    "ExportReport",
]

ROW_INDEX = {"x": 0, "y": 1, "theta": 2}

# callable mapping equal-length alpha1/alpha2 arrays to (N, 3, 2)
# connection matrices, NaN rows marking degenerate shapes
ConnectionFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class LoopOutsideGrid(ValueError):
    """Loop vertices leave the sampled grid."""


class SelfIntersectingLoop(ValueError):
    """Area integrals need a simple (non-self-intersecting) loop."""


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid over joint space, shared limits per axis."""

    alpha_min: float = -3.0
    alpha_max: float = 3.0
    resolution: int = 128

    def __post_init__(self):
        if not self.alpha_min < self.alpha_max:
            raise ValueError("alpha_min must be below alpha_max")
        if self.resolution < 8:
            raise ValueError(f"resolution must be at least 8, got {self.resolution}")

    def axis(self) -> np.ndarray:
        return np.linspace(self.alpha_min, self.alpha_max, self.resolution)

    @property
    def step(self) -> float:
        return (self.alpha_max - self.alpha_min) / (self.resolution - 1)


@dataclass
class ScalarField:
    """Scalar samples over a GridSpec; NaN entries mark missing values
    (degenerate model samples), excluded from export and integrals."""

    grid: GridSpec
    values: np.ndarray
    component_label: str = "x"

    def __post_init__(self):
        n = self.grid.resolution
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (n, n):
            raise ValueError(f"values must be {n}x{n}, got {self.values.shape}")

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())


class JointLoop:
    """Closed polyline in joint space, first vertex repeated last."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 4:
            raise ValueError("need an (N, 2) array with at least 3 segments")
        if not np.all(np.abs(v[0] - v[-1]) <= 1e-12):
            raise ValueError("loop is not closed (first and last differ)")
        v = v.copy()
        v[-1] = v[0]
        self.vertices = v

    @classmethod
    def ellipse(cls, center, radius1, radius2, rotation=0.0, segments=256, ccw=True):
        t = np.linspace(0.0, 2.0 * math.pi, segments + 1)
        if not ccw:
            t = -t
        cs, sn = math.cos(rotation), math.sin(rotation)
        ex = radius1 * np.cos(t)
        ey = radius2 * np.sin(t)
        return cls(
            np.stack(
                [center[0] + cs * ex - sn * ey, center[1] + sn * ex + cs * ey], axis=-1
            )
        )

    @property
    def signed_area(self) -> float:
        v = self.vertices
        return 0.5 * float(
            math.fsum(v[:-1, 0] * v[1:, 1] - v[:-1, 1] * v[1:, 0])
        )

    @property
    def ccw(self) -> bool:
        return self.signed_area >= 0.0

    def reversed(self) -> "JointLoop":
        return JointLoop(self.vertices[::-1])

    def rotated_start(self, k: int) -> "JointLoop":
        """Same loop, start point cyclically relabeled by k segments."""
        v = self.vertices[:-1]
        k = k % len(v)
        shifted = np.vstack([v[k:], v[:k], v[k : k + 1]])
        return JointLoop(shifted)

    def is_simple(self) -> bool:
        """True when no two non-adjacent segments properly cross."""
        v = self.vertices
        p, q = v[:-1], v[1:]
        n = len(p)
        i, j = np.triu_indices(n, k=2)
        keep = ~((i == 0) & (j == n - 1))
        i, j = i[keep], j[keep]
        if len(i) == 0:
            return True

        def cross(o, u, w):
            return (u[:, 0] - o[:, 0]) * (w[:, 1] - o[:, 1]) - (
                u[:, 1] - o[:, 1]
            ) * (w[:, 0] - o[:, 0])

        d1 = cross(p[i], q[i], p[j])
        d2 = cross(p[i], q[i], q[j])
        d3 = cross(p[j], q[j], p[i])
        d4 = cross(p[j], q[j], q[i])
        return not bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


def exterior_derivative_field(
    connection: ConnectionFn, grid: GridSpec, row: str = "x"
) -> ScalarField:
    """Planar curl of one connection row over the grid.

    Central differences in the interior, one-sided at the borders (via
    ``np.gradient``); NaN connection samples turn into missing values.
    """
    r = ROW_INDEX[row]
    ax = grid.axis()
    n = grid.resolution
    g1, g2 = np.meshgrid(ax, ax, indexing="ij")
    amat = np.asarray(connection(g1.ravel(), g2.ravel()), dtype=float)
    amat = amat.reshape(n, n, 3, 2)
    vals = np.gradient(amat[:, :, r, 1], grid.step, axis=0) - np.gradient(
        amat[:, :, r, 0], grid.step, axis=1
    )
    return ScalarField(grid=grid, values=vals, component_label=row)


def line_integral(connection: ConnectionFn, loop: JointLoop) -> np.ndarray:
    """Displacement estimate ``-oint A dalpha`` by per-segment midpoint
    quadrature; returns the (x, y, theta) triple.

    Segments with degenerate (NaN) samples are excluded, matching the
    missing-value policy of the grid integrals.
    """
    v = loop.vertices
    mids = 0.5 * (v[:-1] + v[1:])
    dseg = np.diff(v, axis=0)
    amat = np.asarray(connection(mids[:, 0], mids[:, 1]), dtype=float)
    terms = -np.einsum("nij,nj->ni", amat, dseg)
    good = np.isfinite(terms).all(axis=1)
    return np.array([math.fsum(terms[good, i]) for i in range(3)])


def _inside_mask(vertices: np.ndarray, ax_x: np.ndarray, ax_y: np.ndarray) -> np.ndarray:
    """Crossing-number point-in-polygon test on a rectangular point grid."""
    x = ax_x[:, None]
    y = ax_y[None, :]
    inside = np.zeros((len(ax_x), len(ax_y)), dtype=bool)
    x0, y0 = vertices[:-1, 0], vertices[:-1, 1]
    x1, y1 = vertices[1:, 0], vertices[1:, 1]
    for k in range(len(x0)):
        if y0[k] == y1[k]:
            continue
        crosses = (y0[k] > y) != (y1[k] > y)
        xint = x0[k] + (y - y0[k]) * (x1[k] - x0[k]) / (y1[k] - y0[k])
        inside ^= crosses & (x < xint)
    return inside


def surface_integral(field: ScalarField, loop: JointLoop, subsample: int = 4) -> float:
    """Area-integral side of the Stokes identity: ``-(sign) * integral``
    of the field over the region the loop encloses, positive sign for a
    CCW loop.

    Rasterized: each grid node owns a step-sized cell and contributes
    its value weighted by the fraction of ``subsample**2`` in-cell
    probe points falling inside the polygon (``subsample=1`` is plain
    node masking). Missing (NaN) nodes are skipped.
    """
    if subsample < 1:
        raise ValueError("subsample must be at least 1")
    v = loop.vertices
    lo, hi = field.grid.alpha_min, field.grid.alpha_max
    if v.min() < lo or v.max() > hi:
        raise LoopOutsideGrid(
            f"loop spans [{v.min():.3g}, {v.max():.3g}] outside grid [{lo:g}, {hi:g}]"
        )
    if not loop.is_simple():
        raise SelfIntersectingLoop("loop crosses itself; area is ill-defined")

    ax = field.grid.axis()
    h = field.grid.step
    # nodes outside the loop's padded bounding box cannot contribute
    i0 = max(0, int(np.searchsorted(ax, v[:, 0].min() - h)) - 1)
    i1 = min(len(ax), int(np.searchsorted(ax, v[:, 0].max() + h)) + 1)
    j0 = max(0, int(np.searchsorted(ax, v[:, 1].min() - h)) - 1)
    j1 = min(len(ax), int(np.searchsorted(ax, v[:, 1].max() + h)) + 1)
    ax_x, ax_y = ax[i0:i1], ax[j0:j1]

    offsets = ((np.arange(subsample) + 0.5) / subsample - 0.5) * h
    weights = np.zeros((len(ax_x), len(ax_y)))
    for dx in offsets:
        for dy in offsets:
            weights += _inside_mask(v, ax_x + dx, ax_y + dy)
    weights /= subsample**2

    vals = field.values[i0:i1, j0:j1]
    good = np.isfinite(vals) & (weights > 0)
    total = math.fsum((vals[good] * weights[good])) * h * h
    return -total if loop.ccw else total


def zero_contour_segments(field: ScalarField) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Zero level set by marching squares; list of short segments in
    joint-space coordinates. Cells with missing corners are skipped."""
    ax = field.grid.axis()
    vals = field.values
    segs: list[tuple[tuple[float, float], tuple[float, float]]] = []
    n = field.grid.resolution

    def interp(pa, pb, va, vb):
        t = va / (va - vb)
        return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

    for i in range(n - 1):
        for j in range(n - 1):
            corners = (
                ((ax[i], ax[j]), vals[i, j]),
                ((ax[i + 1], ax[j]), vals[i + 1, j]),
                ((ax[i + 1], ax[j + 1]), vals[i + 1, j + 1]),
                ((ax[i], ax[j + 1]), vals[i, j + 1]),
            )
            if any(not math.isfinite(c[1]) for c in corners):
                continue
            crossings = []
            for k in range(4):
                (pa, va), (pb, vb) = corners[k], corners[(k + 1) % 4]
                if (va > 0.0) != (vb > 0.0):
                    crossings.append(interp(pa, pb, va, vb))
            if len(crossings) == 2:
                segs.append((crossings[0], crossings[1]))
            elif len(crossings) == 4:
                # saddle cell: split by the center-value sign
                center = 0.25 * sum(c[1] for c in corners)
                if (center > 0.0) == (corners[0][1] > 0.0):
                    segs.append((crossings[0], crossings[3]))
                    segs.append((crossings[1], crossings[2]))
                else:
                    segs.append((crossings[0], crossings[1]))
                    segs.append((crossings[2], crossings[3]))
    return segs


@dataclass(frozen=True)
class ExportReport:
    csv_path: str
    svg_path: Optional[str]
    rows_written: int
    n_missing: int


def export_field(
    field: ScalarField,
    csv_path,
    svg_path=None,
    *,
    svg_width: int = 720,
    svg_height: int = 560,
    title: Optional[str] = None,
) -> ExportReport:
    """Write the field as CSV (``alpha1,alpha2,value``, full precision)
    and optionally as an SVG heatmap with the zero contour overlaid.

    Missing samples are dropped from the CSV; when any exist, a sidecar
    ``<csv>.missing`` file records how many. Writes are atomic.
    """
    ax = field.grid.axis()
    lines = ["alpha1,alpha2,value"]
    rows = 0
    for i in range(field.grid.resolution):
        for j in range(field.grid.resolution):
            v = field.values[i, j]
            if not math.isfinite(v):
                continue
            lines.append(f"{ax[i]:.17g},{ax[j]:.17g},{v:.17g}")
            rows += 1
    try:
        atomic_write_text(csv_path, "\n".join(lines) + "\n")
        if field.n_missing:
            atomic_write_text(f"{csv_path}.missing", f"{field.n_missing}\n")
        if svg_path is not None:
            svg = render_heatmap(
                field.values,
                (field.grid.alpha_min, field.grid.alpha_max),
                contour_segments=zero_contour_segments(field),
                width=svg_width,
                height=svg_height,
                label_x="alpha1",
                label_y="alpha2",
                title=title
                or f"exterior derivative, body-{field.component_label} row",
            )
            atomic_write_text(svg_path, svg)
    except OSError as exc:
        raise OSError(f"writing field export near {csv_path}: {exc}") from exc
    return ExportReport(
        csv_path=str(csv_path),
        svg_path=None if svg_path is None else str(svg_path),
        rows_written=rows,
        n_missing=field.n_missing,
    )
