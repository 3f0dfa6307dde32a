"""Planar observables of discretized traces.

Side tests use crossing parity of a horizontal ray in the hub half-plane.
Fillings are rasters: the curve is drawn 8-connected, the complement is
flood-filled 4-connected from the target side, and whatever the flood does
not reach is the filling.  Outer boundaries are read off the contour of the
filling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from skimage import measure

from .conformal import (DomainChart, HALF_PLANE, HORIZONTAL_STRIP, VERTICAL_STRIP,
                        Unsupported, swap_endpoints_map, to_hub)
from .loewner import TracePath

DEFAULT_RESOLUTION = 512


class Indeterminate(ValueError):
    pass


class OutOfBounds(ValueError):
    pass


class EmptyHull(ValueError):
    pass


class NoHit(ValueError):
    pass


Bounds = tuple[float, float, float, float]  # xmin, xmax, ymin, ymax


@dataclass
class HullRaster:
    resolution: int
    bounds: Bounds
    filled: np.ndarray          # bool [row, col], row 0 at ymin
    reached: np.ndarray         # complement component connected to the target side
    boundary_cells: list[tuple[int, int]]
    start: complex
    tip: complex
    chart_kind: str = HALF_PLANE

    @property
    def cell_size(self) -> tuple[float, float]:
        xmin, xmax, ymin, ymax = self.bounds
        ny, nx = self.filled.shape
        return (xmax - xmin) / nx, (ymax - ymin) / ny

    @property
    def area(self) -> float:
        dx, dy = self.cell_size
        return float(self.filled.sum()) * dx * dy

    def cell_of(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        xmin, _, ymin, _ = self.bounds
        dx, dy = self.cell_size
        ny, nx = self.filled.shape
        col = np.clip(np.floor((z.real - xmin) / dx).astype(np.int64), 0, nx - 1)
        row = np.clip(np.floor((z.imag - ymin) / dy).astype(np.int64), 0, ny - 1)
        return row, col

    def to_points(self, rc: np.ndarray) -> np.ndarray:
        """Contour coordinates (row, col in cell units) to complex points."""
        xmin, _, ymin, _ = self.bounds
        dx, dy = self.cell_size
        return (xmin + (rc[:, 1] + 0.5) * dx) + 1j * (ymin + (rc[:, 0] + 0.5) * dy)


@dataclass
class PastFutureSplit:
    hit_time: float
    past_boundary: np.ndarray
    future_boundary: np.ndarray
    apex: complex
    hit_index: int = 0
    extras: dict = field(default_factory=dict)


# --- side of a point ------------------------------------------------------

def _segment_distance(pts: np.ndarray, z: complex) -> float:
    if len(pts) == 1:
        return float(abs(pts[0] - z))
    a, b = pts[:-1], pts[1:]
    d = b - a
    L2 = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.clip(((z - a) * np.conj(d)).real / L2, 0.0, 1.0)
    s = np.where(L2 > 0, s, 0.0)
    return float(np.min(np.abs(a + s * d - z)))


def _default_tolerance(pts: np.ndarray, z: complex) -> float:
    allp = np.concatenate((pts, [z]))
    span = max(np.ptp(allp.real), np.ptp(allp.imag), 1e-12)
    return 0.5 * span / DEFAULT_RESOLUTION


def left_passage(trace: TracePath, z: complex, chart: DomainChart | None = None,
                 tol: float | None = None) -> bool:
    """Whether ``z`` lies left of the curve.

    The curve is closed up by the boundary arc from its end back to its start
    through the right-hand side: in the hub half-plane that is the vertical
    ray above the tip, infinity, and the positive real axis.  A horizontal ray
    from ``z`` to ``-inf`` then meets the closed loop an even number of times
    exactly when ``z`` is on the left.  Points closer than ``tol`` to the
    polyline (default half a cell of a 512 grid over the picture) raise
    ``Indeterminate``.
    """
    chart = chart or DomainChart()
    pts = np.asarray(trace.points, dtype=complex)
    z = complex(z)
    if len(pts) == 0:
        raise Indeterminate("empty trace")
    tol = _default_tolerance(pts, z) if tol is None else tol
    if _segment_distance(pts, z) < tol:
        raise Indeterminate("point too close to the trace")
    if chart.kind == HALF_PLANE and chart.seed_point == 0:
        h, hz = pts, z
    else:
        h = np.asarray(to_hub(chart, pts))
        hz = complex(to_hub(chart, z))
    h = h[np.isfinite(h)]
    return _parity_left(h, hz)


def _parity_left(h: np.ndarray, hz: complex) -> bool:
    y0, x0 = hz.imag, hz.real
    a, b = h[:-1], h[1:]
    above_a = a.imag > y0
    above_b = b.imag > y0
    cross = above_a != above_b
    if np.any(cross):
        a, b = a[cross], b[cross]
        s = (y0 - a.imag) / (b.imag - a.imag)
        xs = a.real + s * (b.real - a.real)
        count = int(np.count_nonzero(xs < x0))
    else:
        count = 0
    tip = h[-1]
    if tip.imag <= y0 and tip.real < x0:
        count += 1  # vertical closing ray above the tip
    return count % 2 == 0


# --- fillings -------------------------------------------------------------

def _domain_edges(kind: str, bounds: Bounds) -> tuple[bool, bool, bool, bool]:
    """Which bounding-box edges (bottom, top, left, right) lie on the domain boundary."""
    xmin, xmax, ymin, ymax = bounds
    if kind == HALF_PLANE:
        return abs(ymin) < 1e-12, False, False, False
    if kind == HORIZONTAL_STRIP:
        return abs(ymin) < 1e-12, abs(ymax - 1.0) < 1e-12, False, False
    if kind == VERTICAL_STRIP:
        return False, False, abs(xmin + 1.0) < 1e-12, abs(xmax - 1.0) < 1e-12
    raise Unsupported(f"rasters are not available in the {kind} chart")


def _target_edges(chart: DomainChart, bounds: Bounds) -> tuple[bool, bool, bool, bool]:
    """Edges through which the flood enters from the target side."""
    kind = chart.kind
    bottom, top, left, right = _domain_edges(kind, bounds)
    if kind == HALF_PLANE:
        return False, True, True, True
    if kind == HORIZONTAL_STRIP:
        if chart.target_point.real > 0:
            return False, False, False, True
        return False, False, True, False
    return False, True, False, False


def default_bounds(points: np.ndarray, chart: DomainChart, margin: float = 0.05) -> Bounds:
    pts = points[np.isfinite(points)]
    xmin, xmax = float(pts.real.min()), float(pts.real.max())
    ymin, ymax = float(pts.imag.min()), float(pts.imag.max())
    span = max(xmax - xmin, ymax - ymin, 1e-9)
    m = margin * span
    if chart.kind == HALF_PLANE:
        return xmin - m, xmax + m, 0.0, ymax + m
    if chart.kind == HORIZONTAL_STRIP:
        return xmin - m, xmax + m, 0.0, 1.0
    if chart.kind == VERTICAL_STRIP:
        return -1.0, 1.0, ymin - m, ymax + m
    raise Unsupported(f"rasters are not available in the {chart.kind} chart")


def rasterize(points: np.ndarray, bounds: Bounds, shape: tuple[int, int]) -> np.ndarray:
    """Cells met by the polyline, sampled at under half a cell so runs are 8-connected."""
    xmin, xmax, ymin, ymax = bounds
    ny, nx = shape
    dx, dy = (xmax - xmin) / nx, (ymax - ymin) / ny
    grid = np.zeros(shape, dtype=bool)
    if len(points) == 0:
        return grid
    u = (points.real - xmin) / dx
    v = (points.imag - ymin) / dy
    if len(points) > 1:
        du, dv = np.diff(u), np.diff(v)
        k = np.maximum(np.ceil(2.0 * np.maximum(np.abs(du), np.abs(dv))).astype(np.int64), 1)
        seg = np.repeat(np.arange(len(du)), k)
        offs = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
        s = offs / np.repeat(k, k)
        uu = np.concatenate((u[seg] + s * du[seg], u[-1:]))
        vv = np.concatenate((v[seg] + s * dv[seg], v[-1:]))
    else:
        uu, vv = u, v
    col = np.clip(np.floor(uu).astype(np.int64), 0, nx - 1)
    row = np.clip(np.floor(vv).astype(np.int64), 0, ny - 1)
    grid[row, col] = True
    return grid


def fill_hull(trace: TracePath, chart: DomainChart | None = None, t_end: float | None = None,
              resolution: int = DEFAULT_RESOLUTION, bounds: Bounds | None = None) -> HullRaster:
    """Raster filling of the trace up to ``t_end`` (everything the target cannot see)."""
    chart = chart or DomainChart()
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    tr = trace if t_end is None else trace.truncated(t_end)
    pts = np.asarray(tr.points, dtype=complex)
    pts = pts[np.isfinite(pts)]
    if len(pts) == 0:
        raise EmptyHull("no finite trace points")
    if bounds is None:
        bounds = default_bounds(pts, chart)
    else:
        xmin, xmax, ymin, ymax = bounds
        tol = 1e-12 * max(1.0, xmax - xmin, ymax - ymin)
        if (pts.real.min() < xmin - tol or pts.real.max() > xmax + tol
                or pts.imag.min() < ymin - tol or pts.imag.max() > ymax + tol):
            raise OutOfBounds("trace leaves the raster bounds")
    shape = (resolution, resolution)
    curve = rasterize(pts, bounds, shape)
    labels, _ = ndimage.label(~curve, structure=ndimage.generate_binary_structure(2, 1))
    bottom, top, left, right = _target_edges(chart, bounds)
    seeds = []
    if bottom:
        seeds.append(labels[0, :])
    if top:
        seeds.append(labels[-1, :])
    if left:
        seeds.append(labels[:, 0])
    if right:
        seeds.append(labels[:, -1])
    ids = np.unique(np.concatenate(seeds)) if seeds else np.array([], dtype=int)
    ids = ids[ids > 0]
    reached = np.isin(labels, ids)
    filled = ~reached
    near = ndimage.binary_dilation(reached, structure=ndimage.generate_binary_structure(2, 1))
    bcells = np.argwhere(filled & near)
    return HullRaster(resolution, bounds, filled, reached, [tuple(map(int, c)) for c in bcells],
                      complex(pts[0]), complex(pts[-1]), chart.kind)


def _exposed_run(hull: HullRaster) -> np.ndarray:
    """Ordered contour points of the filling that face the reached region."""
    if not hull.filled.any():
        raise EmptyHull("filling is empty")
    padded = np.pad(hull.filled.astype(float), 1)
    contours = measure.find_contours(padded, 0.5, fully_connected="high")
    if not contours:
        raise EmptyHull("no contour")
    loop = max(contours, key=len) - 1.0  # back to unpadded cell coordinates
    # counterclockwise around the filling in (x, y) = (col, row)
    x, y = loop[:, 1], loop[:, 0]
    if np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]) < 0:
        loop = loop[::-1]
    if np.allclose(loop[0], loop[-1]):
        loop = loop[:-1]
    near = ndimage.binary_dilation(hull.reached, structure=np.ones((3, 3), dtype=bool))
    ny, nx = hull.filled.shape
    r = np.clip(np.round(loop[:, 0]).astype(int), 0, ny - 1)
    c = np.clip(np.round(loop[:, 1]).astype(int), 0, nx - 1)
    inside = (loop[:, 0] >= -0.25) & (loop[:, 0] <= ny - 0.75) & (loop[:, 1] >= -0.25) & (loop[:, 1] <= nx - 0.75)
    exposed = near[r, c] & inside
    if exposed.all():
        return loop
    if not exposed.any():
        raise EmptyHull("filling does not face the target side")
    start = int(np.argmin(exposed))
    ex = np.roll(exposed, -start)
    lp = np.roll(loop, -start, axis=0)
    best, best_len, i = (0, 0), 0, 0
    while i < len(ex):
        if ex[i]:
            j = i
            while j < len(ex) and ex[j]:
                j += 1
            if j - i > best_len:
                best, best_len = (i, j), j - i
            i = j
        else:
            i += 1
    return lp[best[0]:best[1]]


def outer_boundaries(hull: HullRaster, chart: DomainChart | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Left-facing and right-facing arcs of the filling's outer boundary.

    Both polylines run from the domain boundary to the tip of the curve.
    """
    run = _exposed_run(hull)
    pts = hull.to_points(run)
    k = int(np.argmin(np.abs(pts - hull.tip)))
    right = pts[: k + 1]
    left = pts[k:][::-1]
    return left, right


def first_hit_time(trace: TracePath, z: complex, delta: float) -> Optional[float]:
    """First time stamp at which the trace is within ``delta`` of ``z``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    d = np.abs(np.asarray(trace.points) - complex(z))
    idx = np.flatnonzero(d < delta)
    return None if len(idx) == 0 else float(trace.times[idx[0]])


def _first_hit_index(trace: TracePath, z: complex, delta: float) -> Optional[int]:
    d = np.abs(np.asarray(trace.points) - complex(z))
    idx = np.flatnonzero(d < delta)
    return None if len(idx) == 0 else int(idx[0])


def _z_side_arc(hull: HullRaster, chart: DomainChart, z: complex) -> np.ndarray:
    """The outer arc of a filling whose tip sits at the boundary point ``z``,
    running from ``z`` to the far boundary."""
    left, right = outer_boundaries(hull, chart)
    arc = left if _arc_extent(left) >= _arc_extent(right) else right
    return arc[::-1]


def _arc_extent(arc: np.ndarray) -> float:
    return float(np.max(np.abs(arc - arc[-1]))) if len(arc) else 0.0


def past_future_split(trace: TracePath, z: complex, delta: float, chart: DomainChart | None = None,
                      resolution: int = DEFAULT_RESOLUTION) -> PastFutureSplit:
    """Outer boundaries of the curve before and after it first reaches ``z``.

    The past boundary runs from ``z`` along the filling of the curve up to
    the hitting time and ends at the apex on the far side of the domain.  The
    future boundary is the same construction applied to the rest of the curve
    traversed backward and pushed through the endpoint swap fixing ``z``; it is
    mapped back and returned in the original coordinates.
    """
    chart = chart or DomainChart()
    k = _first_hit_index(trace, z, delta)
    if k is None:
        raise NoHit(f"trace never comes within {delta} of {z}")
    foot = _boundary_foot(chart, z)
    # the curve reaches z itself, so both pieces are joined to it; otherwise
    # the flood could slip through the last sub-delta gap
    past = TracePath(np.append(trace.points[: k + 1], foot), np.append(trace.times[: k + 1], trace.times[k]),
                     trace.dt, trace.kappa, trace.weights, trace.seed)
    hull = fill_hull(past, chart, resolution=resolution)
    past_arc = _z_side_arc(hull, chart, z)
    apex = complex(past_arc[-1])
    tail = trace.points[k + 1:]
    if len(tail) == 0 or np.all(np.abs(tail - complex(z)) < delta):
        future_arc = np.empty(0, dtype=complex)
    else:
        swap = swap_endpoints_map(chart.with_third(foot))
        rest = TracePath(np.concatenate(([foot], trace.points[k:])),
                         np.concatenate(([0.0], trace.times[k:] - trace.times[k])),
                         trace.dt, trace.kappa, trace.weights, trace.seed).reversed()
        mirrored = rest.mapped(swap)
        fh = fill_hull(mirrored, chart, resolution=resolution)
        future_arc = swap(_z_side_arc(fh, chart, z))
    return PastFutureSplit(float(trace.times[k]), past_arc, future_arc, apex, k)


def _boundary_foot(chart: DomainChart, z: complex) -> complex:
    z = complex(z)
    if chart.kind == HALF_PLANE:
        return complex(z.real, 0.0)
    if chart.kind == HORIZONTAL_STRIP:
        return complex(z.real, 0.0 if z.imag < 0.5 else 1.0)
    if chart.kind == VERTICAL_STRIP:
        return complex(math.copysign(1.0, z.real), z.imag)
    raise Unsupported(chart.kind)
