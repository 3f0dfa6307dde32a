import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slelab.constants import WeightVector
from slelab.driving import constant_driving, driving_from_values, sample_driving
from slelab.loewner import OutOfRange, compute_trace, flow_sides, forward_map, inverse_map


@pytest.fixture(scope="module")
def slit():
    return constant_driving(0.0, 1.0, 1e-4)


def test_vertical_slit_forward(slit):
    assert abs(forward_map(slit, 1j, 1.0) - math.sqrt(3.0)) < 1e-6
    assert forward_map(slit, 2j, 1.0) is None
    # hit at t = 1/16, then carried along the real line by the closed form
    assert abs(forward_map(slit, 0.5j, 0.5) - math.sqrt(1.75)) < 1e-6
    z = 1.0 + 2.0j
    assert abs(forward_map(slit, z, 0.3) - np.sqrt(z * z + 1.2)) < 1e-9


def test_translated_slit():
    d = constant_driving(1.0, 1.0, 1e-4)
    assert abs(forward_map(d, 1 + 1j, 1.0) - (1 + math.sqrt(3.0))) < 1e-6


def test_slit_trace(slit):
    tr = compute_trace(slit)
    assert abs(tr.points[-1] - 2j) < 1e-3
    assert np.allclose(tr.points[1:], 2j * np.sqrt(tr.times[1:]), atol=1e-3)
    assert tr.times[-1] == pytest.approx(1.0)


def test_trace_translation():
    a = compute_trace(constant_driving(0.0, 0.5, 1e-3))
    b = compute_trace(constant_driving(2.5, 0.5, 1e-3))
    assert np.allclose(b.points, a.points + 2.5, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 7.9), st.floats(-1.5, 2.0), st.integers(0, 2**32))
def test_trace_invariants(kappa, rho, seed):
    d = sample_driving(kappa, WeightVector.two_sided(rho, rho), 0.2, 1e-3, seed)
    tr = compute_trace(d)
    assert tr.points[0] == d.w[0]
    assert np.all(tr.points.imag >= 0)
    assert np.all(np.diff(tr.times) > 0)
    assert np.allclose(np.diff(tr.times), 1e-3)


def test_out_of_range(slit):
    with pytest.raises(OutOfRange):
        forward_map(slit, 1j, 1.5)
    with pytest.raises(OutOfRange):
        forward_map(slit, 1j, -0.1)


def test_hydrodynamic_normalization():
    d = sample_driving(6.0, WeightVector(), 1.0, 1e-3, seed=1)
    for theta in np.linspace(0.1, math.pi - 0.1, 9):
        z = 100.0 * complex(math.cos(theta), math.sin(theta))
        g = forward_map(d, z, 1.0)
        assert abs(g - z - 2.0 / z) * abs(z) ** 2 < 1e-2 * abs(z) ** 2
        # the remainder is O(1/|z|^2) with a modest constant
        assert abs(g - z - 2.0 / z) < 50.0 / abs(z) ** 2


def test_scale_equivariance():
    dt, r = 1e-3, 1.7
    w = np.sin(np.linspace(0, 3, 1001))
    a = compute_trace(driving_from_values(w, dt))
    b = compute_trace(driving_from_values(r * w, r * r * dt))
    assert np.allclose(b.points, r * a.points, atol=1e-9)


def test_dt_refinement():
    def driver(dt):
        t = np.arange(int(round(1.0 / dt)) + 1) * dt
        return driving_from_values(np.sin(3 * t) + t, dt)

    dt = 2e-3
    coarse = compute_trace(driver(dt))
    fine = compute_trace(driver(dt / 2))
    assert np.max(np.abs(fine.points[::2] - coarse.points)) < 5 * math.sqrt(dt)


def test_inverse_undoes_forward():
    d = sample_driving(3.0, WeightVector(), 0.5, 1e-3, seed=4)
    zs = np.array([0.3 + 2j, -1 + 1j, 2 + 0.5j])
    g = np.array([forward_map(d, z, 0.5) for z in zs])
    assert np.allclose(inverse_map(d, g, 0.5), zs, atol=1e-9)


def test_flow_sides_for_slit():
    d = constant_driving(0.0, 1.0, 1e-3)
    assert list(flow_sides(d, [-0.5 + 1j, 0.5 + 1j, -3 + 0.1j])) == [-1, 1, -1]


def test_trace_with_growing_grid_has_capacity_times():
    d = sample_driving(4.0, WeightVector(), 10.0, 1e-3, seed=0, t_ref=1.0)
    tr = compute_trace(d, stride=10)
    assert tr.times[-1] <= 10.0 + 1e-9
    assert np.all(np.diff(tr.times) > 0)
