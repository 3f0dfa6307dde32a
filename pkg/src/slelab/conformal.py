"""Coordinate changes between the half-plane, the two strips and the disk.

Every chart is connected to a hub half-plane in which the seed sits at 0 and
the target at infinity.  Chart-to-chart maps go through the hub, and the
endpoint-swapping anti-conformal maps are conjugates of the hub inversion
``w -> t**2 / conj(w)``, which swaps 0 and infinity and fixes the boundary
point ``t``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .loewner import TracePath

HALF_PLANE = "half_plane"
HORIZONTAL_STRIP = "horizontal_strip"
VERTICAL_STRIP = "vertical_strip"
DISK = "disk"
KINDS = (HALF_PLANE, HORIZONTAL_STRIP, VERTICAL_STRIP, DISK)

_INF = complex(math.inf, 0.0)
_TOL = 1e-9


class Unsupported(ValueError):
    pass


class InvalidInput(ValueError):
    pass


def _default_marks(kind: str) -> tuple[complex, ...]:
    return {
        HALF_PLANE: (0j, _INF),
        HORIZONTAL_STRIP: (complex(-math.inf, 0.0), complex(math.inf, 0.0)),
        VERTICAL_STRIP: (complex(0.0, -math.inf), complex(0.0, math.inf)),
        DISK: (-1 + 0j, 1 + 0j),
    }[kind]


@dataclass(frozen=True)
class DomainChart:
    """A model domain with marked boundary points (seed, target, optional third).

    Canonical layouts: the half-plane runs from 0 to infinity; the horizontal
    strip ``R x (0, 1)`` from ``-inf`` to ``+inf`` (or reversed); the vertical
    strip ``[-1, 1] x R`` from bottom to top; the disk between two points of
    the unit circle.
    """

    kind: str = HALF_PLANE
    marked_points: tuple[complex, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise Unsupported(f"unknown chart kind {self.kind!r}")
        marks = tuple(complex(p) for p in self.marked_points) or _default_marks(self.kind)
        if len(marks) < 2 or len(marks) > 3:
            raise InvalidInput("a chart needs a seed, a target and at most one extra point")
        object.__setattr__(self, "marked_points", marks)
        for p in marks:
            if not on_boundary(self.kind, p):
                raise InvalidInput(f"marked point {p} is not on the boundary of the {self.kind}")
        if _same(marks[0], marks[1]):
            raise InvalidInput("seed and target coincide")

    @property
    def seed_point(self) -> complex:
        return self.marked_points[0]

    @property
    def target_point(self) -> complex:
        return self.marked_points[1]

    @property
    def third_point(self) -> complex | None:
        return self.marked_points[2] if len(self.marked_points) == 3 else None

    def with_third(self, z: complex) -> "DomainChart":
        return DomainChart(self.kind, self.marked_points[:2] + (complex(z),))


def _same(a: complex, b: complex) -> bool:
    if cmath.isinf(a) or cmath.isinf(b):
        return (cmath.isinf(a) and cmath.isinf(b)
                and np.sign(a.real) == np.sign(b.real) and np.sign(a.imag) == np.sign(b.imag))
    return abs(a - b) < _TOL


def on_boundary(kind: str, p: complex) -> bool:
    if kind == HALF_PLANE:
        return cmath.isinf(p) or abs(p.imag) < _TOL
    if kind == HORIZONTAL_STRIP:
        if math.isinf(p.real):
            return not math.isnan(p.imag) and not math.isinf(p.imag)
        return abs(p.imag) < _TOL or abs(p.imag - 1.0) < _TOL
    if kind == VERTICAL_STRIP:
        if math.isinf(p.imag):
            return not math.isinf(p.real)
        return abs(abs(p.real) - 1.0) < _TOL
    return abs(abs(p) - 1.0) < _TOL


def in_closure(kind: str, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if kind == HALF_PLANE:
        return z.imag >= -_TOL
    if kind == HORIZONTAL_STRIP:
        return (z.imag >= -_TOL) & (z.imag <= 1.0 + _TOL)
    if kind == VERTICAL_STRIP:
        return np.abs(z.real) <= 1.0 + _TOL
    return np.abs(z) <= 1.0 + _TOL


# --- hub maps -------------------------------------------------------------

def _mobius_from(points_from, points_to) -> np.ndarray:
    """2x2 matrix of the Moebius map sending three points to three points."""
    def to_std(a, b, c):
        # sends a -> 0, b -> inf, c -> 1
        if cmath.isinf(a):
            return np.array([[0, c - b], [1, -b]], dtype=complex)
        if cmath.isinf(b):
            return np.array([[1, -a], [0, c - a]], dtype=complex)
        if cmath.isinf(c):
            return np.array([[1, -a], [1, -b]], dtype=complex)
        return np.array([[c - b, -a * (c - b)], [c - a, -b * (c - a)]], dtype=complex)

    m1 = to_std(*points_from)
    m2 = to_std(*points_to)
    return np.linalg.inv(m2) @ m1


def _apply(m: np.ndarray, z):
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])


def _disk_matrix(chart: DomainChart) -> np.ndarray:
    x, y = chart.seed_point, chart.target_point
    third = chart.third_point
    if third is None:
        if abs(x + y) > _TOL:
            raise Unsupported("a disk chart with two non-antipodal marked points needs a third point")
        # rotation of the canonical map, which sends 0 -> -1, inf -> 1, i -> 0
        third = -1j * y
    return _mobius_from((0j, _INF, 1 + 0j), (x, y, third))


def to_hub(chart: DomainChart, z):
    """Map chart coordinates to the hub half-plane (seed at 0, target at infinity)."""
    z = np.asarray(z, dtype=complex)
    k = chart.kind
    if k == HALF_PLANE:
        if not cmath.isinf(chart.target_point):
            raise Unsupported("half-plane charts must target infinity")
        return z - chart.seed_point.real
    if k == HORIZONTAL_STRIP:
        if chart.seed_point.real < 0:
            return np.exp(np.pi * z)
        return -np.exp(-np.pi * z)
    if k == VERTICAL_STRIP:
        if chart.seed_point.imag > 0:
            raise Unsupported("vertical strips run from bottom to top")
        return np.exp(-0.5j * np.pi * (z - 1.0))
    return _apply(np.linalg.inv(_disk_matrix(chart)), z)


def _log_upper(h):
    # principal logarithm with the argument of the real axis pinned to 0 or pi
    h = np.asarray(h, dtype=complex)
    arg = np.arctan2(np.maximum(h.imag, 0.0), h.real)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(h)) + 1j * arg


def from_hub(chart: DomainChart, h):
    h = np.asarray(h, dtype=complex)
    k = chart.kind
    if k == HALF_PLANE:
        if not cmath.isinf(chart.target_point):
            raise Unsupported("half-plane charts must target infinity")
        return h + chart.seed_point.real
    if k == HORIZONTAL_STRIP:
        if chart.seed_point.real < 0:
            return _log_upper(h) / np.pi
        return (1j * np.pi - _log_upper(h)) / np.pi
    if k == VERTICAL_STRIP:
        if chart.seed_point.imag > 0:
            raise Unsupported("vertical strips run from bottom to top")
        # the seed h = 0 has no finite image; it comes out as nan
        with np.errstate(invalid="ignore"):
            return 2j * _log_upper(h) / np.pi + 1.0
    return _apply(_disk_matrix(chart), h)


def map_point(source: DomainChart, target: DomainChart, z):
    """Conformal map between charts matching seed to seed and target to target.

    Scalars in, scalar out; arrays are mapped elementwise.
    """
    scalar = np.ndim(z) == 0
    arr = np.asarray(z, dtype=complex)
    if not np.all(in_closure(source.kind, arr)):
        raise InvalidInput(f"point outside the closed {source.kind}")
    if source == target:
        out = arr.copy()
    else:
        out = from_hub(target, to_hub(source, arr))
    return complex(out) if scalar else out


def reflect_vertical(a: float, z):
    """Reflection ``2a - conj(z)`` about the vertical line through ``a``."""
    return 2.0 * a - np.conj(z)


@dataclass(frozen=True)
class ChartMap:
    """A (possibly orientation-reversing) self-map of a chart."""

    func: Callable
    anti_conformal: bool
    chart: DomainChart
    label: str = ""

    def __call__(self, z):
        scalar = np.ndim(z) == 0
        out = self.func(np.asarray(z, dtype=complex))
        return complex(out) if scalar else out


def identity_map(chart: DomainChart) -> ChartMap:
    return ChartMap(lambda z: np.array(z, dtype=complex), False, chart, "identity")


def swap_endpoints_map(chart: DomainChart) -> ChartMap:
    """Anti-conformal self-map of the chart that swaps seed and target.

    With a third marked boundary point the map is the unique one fixing it;
    otherwise a canonical symmetric choice is made (reflection across the
    midline of a strip, across the bisector of seed and target in the disk,
    inversion in the unit circle for the half-plane).
    """
    third = chart.third_point
    if third is None:
        t = 1.0
    else:
        th = complex(to_hub(chart, third))
        if abs(th.imag) > 1e-7 or abs(th) < _TOL or not math.isfinite(abs(th)):
            raise InvalidInput("third marked point must be a boundary point distinct from the ends")
        t = th.real
    t2 = t * t

    if chart.kind == HORIZONTAL_STRIP and chart.seed_point.real < 0 and third is not None:
        a = third.real

        def func(z):
            return reflect_vertical(a, z)
    elif chart.kind == HORIZONTAL_STRIP and third is None:
        def func(z):
            return reflect_vertical(0.0, z)
    elif chart.kind == VERTICAL_STRIP and third is None:
        def func(z):
            return np.conj(z)
    elif chart.kind == DISK and third is None:
        xy = chart.seed_point * chart.target_point

        def func(z):
            return xy * np.conj(z)
    else:
        def func(z):
            h = to_hub(chart, z)
            with np.errstate(divide="ignore", invalid="ignore"):
                return from_hub(chart, t2 / np.conj(h))
    return ChartMap(func, True, chart, "swap")


def push_trace(handle: ChartMap | Callable, trace: TracePath) -> TracePath:
    """Pointwise image of a trace; time stamps are kept as they are."""
    return trace.mapped(handle)


def chart_trace(trace: TracePath, chart: DomainChart) -> TracePath:
    """Push a hub (half-plane) trace into ``chart``."""
    return trace.mapped(lambda p: from_hub(chart, p))
