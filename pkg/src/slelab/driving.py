"""Driving process W and force points V for SLE_kappa(rho^L; rho^R).

W is advanced by Euler-Maruyama.  Force points move by the exact image of
the step's vertical-slit map, so V is literally the image of its marked
boundary point under the discrete Loewner chain.  Gaps between W and a force point
that overshoot through zero are reflected and floored at
``GAP_FLOOR_FACTOR * sqrt(kappa * dt)``; a collision with a force point whose
cumulative side weight is <= -2 stops the path (continuation threshold).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .constants import WeightVector

DEFAULT_DT = 1e-4
GAP_FLOOR_FACTOR = 0.1
SEED_MASK = (1 << 64) - 1


class InvalidInput(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))


def derive_seed(seed: int, index: int) -> int:
    """Per-sample seed for ensemble member ``index``: the seed XOR the index
    placed in the high word, so user seeds below 2**32 never share streams."""
    return (int(seed) ^ (int(index) << 32)) & SEED_MASK


def gap_floor(kappa: float, dt: float) -> float:
    return GAP_FLOOR_FACTOR * math.sqrt(kappa * dt)


def bessel_dimension(kappa_process: float, rho: float) -> float:
    """Dimension of the Bessel process ``|W - V| / sqrt(kappa)`` for one force point."""
    if kappa_process <= 0:
        raise ValueError("kappa_process must be positive")
    return 1.0 + 2.0 * (rho + 2.0) / kappa_process


@dataclass
class DrivingPath:
    kappa: float
    weights: WeightVector
    dt: float
    horizon: float
    w: np.ndarray
    v: np.ndarray  # shape (n_force_points, len(w)); left points first
    threshold_time: Optional[float]
    seed: int
    steps: Optional[np.ndarray] = None  # per-step capacity increments; None means uniform dt

    @property
    def n_steps(self) -> int:
        return len(self.w) - 1

    @property
    def uniform(self) -> bool:
        return self.steps is None

    def step_sizes(self) -> np.ndarray:
        if self.steps is None:
            return np.full(self.n_steps, self.dt)
        return self.steps[: self.n_steps]

    @property
    def times(self) -> np.ndarray:
        if self.steps is None:
            return np.arange(len(self.w)) * self.dt
        return np.concatenate(([0.0], np.cumsum(self.step_sizes())))

    @property
    def sides(self) -> np.ndarray:
        """-1 for left force points, +1 for right ones, aligned with ``v``."""
        return np.array([-1] * len(self.weights.rho_left) + [1] * len(self.weights.rho_right),
                        dtype=np.int64)

    def gaps(self) -> np.ndarray:
        """Signed distances ``side * (V - W)``; non-negative by construction."""
        return self.sides[:, None] * (self.v - self.w[None, :])


@njit(cache=True)
def _integrate_one(x0, side, rho, kappa, h, noise, floor, stop_on_hit):
    # Gap form: X = side * (V - W).  V moves by the exact slit image of the
    # step, W by Euler; to first order dX = (2 + rho) / X dt - side * sqrt(kappa) dB.
    n = noise.shape[0]
    w = np.empty(n + 1)
    v = np.empty(n + 1)
    w[0] = 0.0
    v[0] = x0
    x = side * (x0 - 0.0)
    vv = x0
    eps = floor[0]
    if x < eps:
        if stop_on_hit:
            return w[:1], v[:1], 0
        x = eps
        vv = side * eps
        v[0] = vv
    sk = math.sqrt(kappa)
    for k in range(n):
        dt = h[k]
        eps = floor[k]
        grow = math.sqrt(x * x + 4.0 * dt)
        xn = grow + rho / x * dt - side * sk * noise[k]
        vv = vv - side * x + side * grow
        if xn <= 0.0:
            if stop_on_hit:
                w[k + 1] = vv
                v[k + 1] = vv
                return w[: k + 2], v[: k + 2], k + 1
            xn = -xn
        if xn < eps:
            xn = eps
        x = xn
        v[k + 1] = vv
        w[k + 1] = vv - side * x
    return w, v, -1


@njit(cache=True)
def _block_stops(v, sides, cum, i, k, eps):
    # W reaches every point of the block merged with the innermost one
    j = i
    while j < v.shape[0] and sides[j] == sides[i] and abs(v[j, k] - v[i, k]) <= eps:
        if cum[j] <= -2.0:
            return True
        j += 1
    return False


@njit(cache=True)
def _integrate_many(x0, sides, rhos, cum, kappa, h, noise, floor):
    # Force points are stored left block first (ordered outward), then right block.
    n = noise.shape[0]
    m = x0.shape[0]
    w = np.empty(n + 1)
    v = np.empty((m, n + 1))
    w[0] = 0.0
    for i in range(m):
        v[i, 0] = x0[i]
    eps = floor[0]
    for i in range(m):
        g = sides[i] * (x0[i] - 0.0)
        if g < eps:
            if cum[i] <= -2.0:
                return w[:1], v[:, :1], 0
            v[i, 0] = sides[i] * eps
    sk = math.sqrt(kappa)
    for k in range(n):
        dt = h[k]
        eps = floor[k]
        wk = w[k]
        drift = 0.0
        for i in range(m):
            drift += rhos[i] / (wk - v[i, k])
        wn = wk + drift * dt + sk * noise[k]
        for i in range(m):
            d = v[i, k] - wk
            v[i, k + 1] = wk + sides[i] * math.sqrt(d * d + 4.0 * dt)
        # W is reflected into the interval between the innermost force points
        # and floored away from them; the force points stay exact images.
        lo = -math.inf
        hi = math.inf
        il = -1
        ir = -1
        for i in range(m):
            if sides[i] < 0 and il < 0:
                il = i
                lo = v[i, k + 1]
            if sides[i] > 0 and ir < 0:
                ir = i
                hi = v[i, k + 1]
        hit = False
        for _ in range(64):
            if wn <= lo:
                hit = hit or _block_stops(v, sides, cum, il, k + 1, eps)
                wn = 2.0 * lo - wn
            elif wn >= hi:
                hit = hit or _block_stops(v, sides, cum, ir, k + 1, eps)
                wn = 2.0 * hi - wn
            else:
                break
        if hi - lo <= 2.0 * eps:
            wn = 0.5 * (lo + hi)
        elif wn - lo < eps:
            wn = lo + eps
        elif hi - wn < eps:
            wn = hi - eps
        w[k + 1] = wn
        if hit:
            return w[: k + 2], v[:, : k + 2], k + 1
    return w, v, -1


def capacity_grid(horizon: float, dt: float, t_ref: Optional[float] = None) -> np.ndarray:
    """Step sizes covering ``[0, horizon]``.

    Without ``t_ref`` every step is ``dt``.  With it, steps stay at ``dt`` up
    to capacity ``t_ref`` and then grow in proportion to the elapsed capacity
    (``h = dt * t / t_ref``), so the step stays a fixed fraction of the
    squared hull diameter.  Brownian scaling makes this the natural grid for
    observables that need the curve far beyond the scale they are measured at.
    """
    n0 = int(round(min(horizon, t_ref if t_ref else horizon) / dt))
    h = np.full(max(n0, 1), dt)
    if t_ref is None or horizon <= t_ref * (1 + 1e-12):
        return h if n0 > 0 else np.array([horizon])
    t0 = n0 * dt
    q = 1.0 + dt / t_ref
    m = int(math.ceil(math.log(horizon / t0) / math.log(q)))
    t = t0 * q ** np.arange(m + 1)
    t[-1] = horizon
    g = np.diff(t)
    g = g[g > 0]
    return np.concatenate((h, g))


def _check_finite(*values: float) -> None:
    if not all(math.isfinite(float(x)) for x in values):
        raise InvalidInput("non-finite input")


def sample_driving(kappa_process: float, weights: WeightVector, horizon: float,
                   dt: float = DEFAULT_DT, seed: int = 0, t_ref: Optional[float] = None) -> DrivingPath:
    """Euler-Maruyama sample of the driving process up to ``horizon``.

    Deterministic in all arguments.  Stops early at the continuation
    threshold.  ``t_ref`` switches to the growing grid of ``capacity_grid``.
    """
    _check_finite(kappa_process, horizon, dt)
    if t_ref is not None:
        _check_finite(t_ref)
        if t_ref <= 0:
            raise InvalidInput("t_ref must be positive")
    if kappa_process <= 0 or dt <= 0 or dt > horizon:
        raise InvalidInput("need kappa > 0 and 0 < dt <= horizon")
    h = capacity_grid(horizon, dt, t_ref)
    n = len(h)
    noise = make_rng(seed).standard_normal(n) * np.sqrt(h)
    floor = GAP_FLOOR_FACTOR * np.sqrt(kappa_process * h)
    steps = None if t_ref is None else h
    rl, rr = weights.rho_left, weights.rho_right
    m = len(rl) + len(rr)
    if m == 0:
        w = np.concatenate(([0.0], np.cumsum(noise) * math.sqrt(kappa_process)))
        return DrivingPath(kappa_process, weights, dt, horizon, w, np.empty((0, n + 1)), None,
                           seed, steps)
    if m == 1:
        side = -1 if rl else 1
        rho = (rl or rr)[0]
        x0 = (weights.x_left or weights.x_right)[0]
        w, v, hit = _integrate_one(float(x0), side, float(rho), float(kappa_process), h, noise,
                                   floor, rho <= -2.0)
        v = v[None, :]
    else:
        sides = np.array([-1.0] * len(rl) + [1.0] * len(rr))
        rhos = np.array(rl + rr, dtype=float)
        cum = np.array(weights.partial_sums("left") + weights.partial_sums("right"))
        x0 = np.array(weights.x_left + weights.x_right, dtype=float)
        w, v, hit = _integrate_many(x0, sides, rhos, cum, float(kappa_process), h, noise, floor)
    threshold = None if hit < 0 else float(np.sum(h[:hit]))
    return DrivingPath(kappa_process, weights, dt, horizon, np.ascontiguousarray(w),
                       np.ascontiguousarray(v), threshold, seed, steps)


def continuation_threshold(weights: WeightVector, gaps: np.ndarray) -> Optional[int]:
    """Index of the first force point (left block first) that sits on W while
    its cumulative side weight is <= -2, or ``None``.

    ``gaps`` holds the current distances ``|W - V|`` in the same order as the
    force points of ``weights``.
    """
    cum = weights.partial_sums("left") + weights.partial_sums("right")
    for i, (c, g) in enumerate(zip(cum, gaps)):
        if c <= -2.0 and g <= 0.0:
            return i
    return None


def constant_driving(value: float, horizon: float, dt: float = DEFAULT_DT, kappa: float = 0.0) -> DrivingPath:
    """Deterministic driving ``W = value`` (no force points)."""
    n = int(round(horizon / dt))
    return DrivingPath(kappa, WeightVector(), dt, horizon, np.full(n + 1, float(value)),
                       np.empty((0, n + 1)), None, 0)


def driving_from_values(w: np.ndarray, dt: float, kappa: float = 0.0) -> DrivingPath:
    w = np.ascontiguousarray(w, dtype=float)
    return DrivingPath(kappa, WeightVector(), dt, (len(w) - 1) * dt, w,
                       np.empty((0, len(w))), None, 0)
