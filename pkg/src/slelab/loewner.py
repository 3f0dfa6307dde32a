"""Chordal Loewner chains driven by a piecewise-constant driving function.

Each step of length ``dt`` is the exact vertical-slit map
``h_k(z) = W_k + sqrt((z - W_k)**2 + 4 dt)``, so half-plane capacity grows by
exactly ``2 dt`` per step.  Traces are recovered by composing the inverse slit
maps backward, which costs O(n^2) in the number of steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .constants import WeightVector
from .driving import DrivingPath

LIFT = 1e-6
# swallowing: squared post-step gap below SWALLOW_EPS * 4 dt
SWALLOW_EPS = 1e-6


class OutOfRange(ValueError):
    pass


@dataclass
class TracePath:
    points: np.ndarray  # complex128
    times: np.ndarray
    dt: float
    kappa: float
    weights: WeightVector
    seed: int = 0

    def __len__(self) -> int:
        return len(self.points)

    def truncated(self, t_end: float) -> "TracePath":
        k = int(np.searchsorted(self.times, t_end + 1e-12 * max(1.0, t_end), side="right"))
        return TracePath(self.points[:k], self.times[:k], self.dt, self.kappa, self.weights, self.seed)

    def reversed(self) -> "TracePath":
        """Same curve traversed backward; time runs from 0 again."""
        end = self.times[-1] if len(self.times) else 0.0
        return TracePath(self.points[::-1].copy(), end - self.times[::-1], self.dt, self.kappa,
                         self.weights, self.seed)

    def mapped(self, f) -> "TracePath":
        return TracePath(np.asarray(f(self.points), dtype=complex), self.times.copy(), self.dt,
                         self.kappa, self.weights, self.seed)


@njit(cache=True, inline="always")
def _upper_sqrt(x, y, dre):
    # Square root of x + iy on the branch with Im >= 0; ties on the real
    # axis take the sign of ``dre``.
    m = math.sqrt(x * x + y * y)
    if x >= 0.0:
        p = math.sqrt(0.5 * (m + x))
        q = y / (2.0 * p) if p > 0.0 else 0.0
    else:
        q = math.sqrt(0.5 * (m - x))
        if y < 0.0:
            q = -q
        p = y / (2.0 * q)
    if q < 0.0 or (q == 0.0 and p * dre < 0.0):
        p = -p
        q = -q
    return p, q


@njit(cache=True, inline="always")
def _slit_inverse(z, w, c):
    dr = z.real - w
    di = z.imag
    p, q = _upper_sqrt(dr * dr - di * di - c, 2.0 * dr * di, dr)
    return complex(w + p, q)


@njit(cache=True, inline="always")
def _slit_forward(z, w, c):
    dr = z.real - w
    di = z.imag
    p, q = _upper_sqrt(dr * dr - di * di + c, 2.0 * dr * di, dr)
    return complex(w + p, q)


_BLOCK = 16


@njit(cache=True, fastmath=True)
def _trace_kernel(w, cs, stride, lift):
    # Trace points are independent chains of inverse slit maps; advancing a
    # block of them together through the shared maps keeps the FPU busy.
    n = w.shape[0] - 1
    m = n // stride
    out = np.empty(m + 1, dtype=np.complex128)
    out[0] = w[0] + 0j
    zs = np.empty(_BLOCK, dtype=np.complex128)
    j0 = 1
    while j0 <= m:
        nb = min(_BLOCK, m - j0 + 1)
        low = j0 * stride - 1
        for b in range(nb):
            k = (j0 + b) * stride
            z = w[k - 1] + 1j * lift
            for i in range(k - 1, low, -1):
                z = _slit_inverse(z, w[i], cs[i])
            zs[b] = z
        for i in range(low, -1, -1):
            wi = w[i]
            ci = cs[i]
            for b in range(nb):
                zs[b] = _slit_inverse(zs[b], wi, ci)
        for b in range(nb):
            z = zs[b]
            out[j0 + b] = z if z.imag >= 0.0 else z.real + 0j
        j0 += nb
    return out


@njit(cache=True)
def _forward_kernel(w, cs, steps, z, eps):
    for k in range(steps):
        z = _slit_forward(z, w[k], cs[k])
    if steps > 0 and abs(z - w[steps - 1]) ** 2 < eps * cs[steps - 1]:
        return z, steps
    return z, -1


@njit(cache=True)
def _inverse_kernel(w, cs, steps, zs):
    out = np.empty_like(zs)
    for j in range(zs.shape[0]):
        z = zs[j]
        for i in range(steps - 1, -1, -1):
            z = _slit_inverse(z, w[i], cs[i])
        out[j] = z
    return out


@njit(cache=True)
def _flow_kernel(w, cs, zs):
    n = w.shape[0] - 1
    out = np.empty_like(zs)
    for j in range(zs.shape[0]):
        z = zs[j]
        for k in range(n):
            z = _slit_forward(z, w[k], cs[k])
        out[j] = z - w[n]
    return out


def _coeffs(driving: DrivingPath) -> np.ndarray:
    return 4.0 * driving.step_sizes()


def _steps_for(driving: DrivingPath, t: float) -> int:
    times = driving.times
    end = times[-1]
    if t < 0 or t > end * (1 + 1e-12) + 1e-15:
        raise OutOfRange(f"time {t} outside [0, {end}]")
    if driving.uniform:
        return min(int(round(t / driving.dt)), driving.n_steps)
    k = int(np.searchsorted(times, t))
    if k > 0 and (k > driving.n_steps or t - times[k - 1] < times[k] - t):
        k -= 1
    return k


def forward_map(driving: DrivingPath, z: complex, t: float) -> Optional[complex]:
    """``g_t(z)``, or ``None`` when ``z`` is swallowed at time ``t``.

    Points that met the trace earlier are carried along by the boundary
    extension of the slit maps (they land on the real line), matching the
    closed form ``sqrt(z**2 + 4t)`` for the vertical slit.
    """
    if z.imag < 0:
        raise ValueError("z must lie in the closed upper half-plane")
    steps = _steps_for(driving, t)
    val, k = _forward_kernel(driving.w, _coeffs(driving), steps, complex(z), SWALLOW_EPS)
    return None if k >= 0 else complex(val)


def inverse_map(driving: DrivingPath, zs, t: float) -> np.ndarray:
    """``g_t^{-1}`` applied to points of the closed half-plane."""
    steps = _steps_for(driving, t)
    zs = np.atleast_1d(np.asarray(zs, dtype=np.complex128))
    return _inverse_kernel(driving.w, _coeffs(driving), steps, zs)


def compute_trace(driving: DrivingPath, stride: int = 1) -> TracePath:
    """Trace points at every ``stride``-th step of the driving path."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    pts = _trace_kernel(driving.w, _coeffs(driving), stride, LIFT)
    times = driving.times[::stride][: len(pts)]
    return TracePath(pts, times, driving.dt * stride, driving.kappa, driving.weights, driving.seed)


def flow_sides(driving: DrivingPath, zs) -> np.ndarray:
    """Side of each point relative to the curve, from the Loewner flow alone.

    Returns -1 (left) or +1 (right) from the sign of ``Re(g_T(z) - W_T)``.
    Points cut off by the curve are squeezed onto the real line on the side
    they were cut off from and stay there, so the rule covers them as well.
    This O(n)-per-point route is independent of trace geometry.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=np.complex128))
    d = _flow_kernel(driving.w, _coeffs(driving), zs)
    return np.where(d.real < 0.0, -1, 1)
