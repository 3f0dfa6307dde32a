import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slelab.conformal import DomainChart
from slelab.constants import WeightVector
from slelab.geometry import (EmptyHull, Indeterminate, NoHit, OutOfBounds, fill_hull, first_hit_time,
                             left_passage, outer_boundaries, past_future_split)
from slelab.loewner import TracePath

STRIP = DomainChart("horizontal_strip")


def path(points, times=None):
    p = np.asarray(points, dtype=complex)
    t = np.linspace(0.0, 1.0, len(p)) if times is None else np.asarray(times, dtype=float)
    return TracePath(p, t, float(t[1] - t[0]) if len(t) > 1 else 1.0, 6.0, WeightVector(), 0)


def polyline(vertices, per_edge=200):
    pieces = [np.linspace(a, b, per_edge, endpoint=False) for a, b in zip(vertices[:-1], vertices[1:])]
    return np.concatenate(pieces + [[vertices[-1]]])


def seg_distance(p, a, b):
    d = b - a
    s = np.clip(((p - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return np.abs(a + s * d - p)


@pytest.fixture(scope="module")
def slit():
    t = np.linspace(0.0, 1.0, 10001)
    return path(2j * np.sqrt(t), t)


@pytest.fixture(scope="module")
def semicircle():
    return path(np.exp(1j * np.linspace(math.pi, 0.0, 2001)))


# zigzag: up to the top boundary, down to z = 0, up again and on to the right
ZIGZAG = polyline([-2 + 0.5j, -1 + 1j, 0j, 1 + 1j, 2 + 0.5j])


# --- left passage ------------------------------------------------------------

def test_left_of_slit(slit):
    assert left_passage(slit, -1 + 0.5j) is True
    assert left_passage(slit, 1 + 0.5j) is False


def test_on_slit_is_indeterminate(slit):
    with pytest.raises(Indeterminate):
        left_passage(slit, 0.5j)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.booleans())
def test_slit_side_matches_sign(x, y, neg):
    t = np.linspace(0.0, 1.0, 401)
    tr = path(2j * np.sqrt(t), t)
    z = complex(-x if neg else x, y)
    assert left_passage(tr, z) is neg


def test_left_passage_in_strip_chart():
    # a curve from -inf to +inf along the middle of the strip: the upper half is left
    tr = path(np.linspace(-3, 3, 601) + 0.5j)
    assert left_passage(tr, 0.1 + 0.8j, STRIP) is True
    assert left_passage(tr, 0.1 + 0.2j, STRIP) is False


def test_left_passage_resolution_free(semicircle):
    # the answer does not depend on the raster tolerance for points well away
    for z in (0.3j, 2 + 0.5j, -0.2 + 0.1j, 1.5j):
        assert left_passage(semicircle, z, tol=1e-3) == left_passage(semicircle, z, tol=1e-2)


# --- fillings ----------------------------------------------------------------

def test_slit_hull_is_thin(slit):
    h = fill_hull(slit, resolution=512)
    assert int(h.filled.sum()) <= 4 * 512


def test_trace_cells_filled(semicircle, slit):
    for tr in (semicircle, slit):
        h = fill_hull(tr, resolution=256)
        r, c = h.cell_of(tr.points)
        assert h.filled[r, c].all()


def test_half_disk_area(semicircle):
    h = fill_hull(semicircle, resolution=512)
    assert h.area == pytest.approx(math.pi / 2, rel=0.02)


def test_fill_monotone_in_time(semicircle):
    bounds = (-1.2, 1.2, 0.0, 1.2)
    prev = None
    for t_end in (0.25, 0.5, 0.75, 1.0):
        h = fill_hull(semicircle, t_end=t_end, resolution=128, bounds=bounds)
        if prev is not None:
            assert not np.any(prev & ~h.filled)
        prev = h.filled


def test_fill_rejects_small_resolution(slit):
    with pytest.raises(ValueError):
        fill_hull(slit, resolution=32)


def test_fill_out_of_bounds(slit):
    with pytest.raises(OutOfBounds):
        fill_hull(slit, bounds=(-1.0, 1.0, 0.0, 1.0))


# --- outer boundaries --------------------------------------------------------

def test_semicircle_outer_arc(semicircle):
    h = fill_hull(semicircle, resolution=512)
    left, right = outer_boundaries(h)
    cell = max(h.cell_size)
    on_arc = np.abs(np.abs(left) - 1.0)
    on_diameter = np.abs(left.imag)
    assert np.minimum(on_arc, on_diameter).max() < 3 * cell
    # and every point of the true arc is near the extracted one
    truth = np.exp(1j * np.linspace(0.0, math.pi, 400))
    assert np.min(np.abs(truth[:, None] - left[None, :]), axis=1).max() < 3 * cell
    assert np.minimum(np.abs(np.abs(right) - 1.0), np.abs(right.imag)).max() < 3 * cell


def test_slit_outer_boundaries(slit):
    h = fill_hull(slit, resolution=512)
    left, right = outer_boundaries(h)
    cell = max(h.cell_size)
    for arc in (left, right):
        assert np.abs(arc.real).max() < 2 * cell
        assert arc.imag.max() > 2.0 - 2 * cell


def test_boundary_cells_on_hull(semicircle):
    h = fill_hull(semicircle, resolution=128)
    rc = np.array(h.boundary_cells)
    assert h.filled[rc[:, 0], rc[:, 1]].all()


def test_empty_hull():
    h = fill_hull(path([0.5 + 0.5j, 0.5 + 0.5j]), resolution=64, bounds=(0.0, 1.0, 0.0, 1.0))
    h.filled[:] = False
    with pytest.raises(EmptyHull):
        outer_boundaries(h)


# --- first hit -----------------------------------------------------------------

def test_first_hit_on_slit(slit):
    t = first_hit_time(slit, 1j, 0.01)
    assert abs(t - 0.25) <= 0.01 + slit.dt


def test_first_hit_uses_delta(slit):
    # |2 sqrt(t) - 1| < delta first happens at t = ((1 - delta) / 2)^2
    t = first_hit_time(slit, 1j, 0.2)
    assert t == pytest.approx(0.16, abs=slit.dt)
    assert first_hit_time(slit, 5 + 1j, 0.01) is None


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_first_hit_monotone_in_delta(d1, d2):
    t = np.linspace(0.0, 1.0, 2001)
    tr = path(2j * np.sqrt(t), t)
    lo, hi = sorted((d1, d2))
    a, b = first_hit_time(tr, 0.3 + 1j, lo), first_hit_time(tr, 0.3 + 1j, hi)
    if a is not None:
        assert b is not None and b <= a


def test_first_hit_rejects_bad_delta(slit):
    with pytest.raises(ValueError):
        first_hit_time(slit, 1j, 0.0)


# --- past / future split -------------------------------------------------------

def test_zigzag_split():
    s = past_future_split(path(ZIGZAG), 0j, 0.01, STRIP, 256)
    cell = math.hypot(4.4 / 256, 1.0 / 256)
    assert seg_distance(s.past_boundary, 0j, -1 + 1j).max() < 2 * cell
    assert seg_distance(s.future_boundary, 0j, 1 + 1j).max() < 2 * cell
    assert abs(s.apex - (-1 + 1j)) < 2 * cell
    assert s.hit_time == pytest.approx(0.5, abs=0.01)


def test_split_polylines_start_near_z():
    delta = 0.01
    s = past_future_split(path(ZIGZAG), 0j, delta, STRIP, 256)
    cell = math.hypot(4.4 / 256, 1.0 / 256)
    assert abs(s.past_boundary[0]) < delta + cell
    assert abs(s.future_boundary[0]) < delta + cell


def test_split_apex_on_far_boundary():
    s = past_future_split(path(ZIGZAG), 0j, 0.01, STRIP, 256)
    assert abs(s.apex.imag - 1.0) < 2.0 / 256


def test_split_ending_at_z():
    half = ZIGZAG[: 2 * 200 + 1]
    s = past_future_split(path(half), 0j, 0.01, STRIP, 256)
    assert len(s.future_boundary) == 0
    full = fill_hull(path(np.append(half, 0j)), STRIP, resolution=256)
    left, right = outer_boundaries(full, STRIP)
    arc = left if len(left) >= len(right) else right
    assert len(s.past_boundary) == len(arc)


def test_split_reversal_swaps_roles():
    # reversing the zigzag and reflecting about Re = 0 gives back the zigzag
    # itself, with past and future exchanged
    mirrored = -np.conj(ZIGZAG[::-1])
    a = past_future_split(path(ZIGZAG), 0j, 0.01, STRIP, 256)
    b = past_future_split(path(mirrored), 0j, 0.01, STRIP, 256)
    cell = math.hypot(4.4 / 256, 1.0 / 256)
    fb = -np.conj(b.future_boundary)
    assert np.min(np.abs(a.past_boundary[:, None] - fb[None, :]), axis=1).max() < 2 * cell


def test_split_no_hit():
    with pytest.raises(NoHit):
        past_future_split(path(ZIGZAG), 3.0 + 0j, 0.01, STRIP, 128)
