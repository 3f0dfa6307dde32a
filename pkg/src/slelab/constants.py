"""Imaginary-geometry bookkeeping: coupling constants, boundary data and weights.

All functions here are pure and operate on plain floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence


class InvalidKappa(ValueError):
    pass


@dataclass(frozen=True)
class SleConstants:
    kappa: float
    kappa_prime: float
    lam: float
    lam_prime: float
    chi: float
    theta_left: float = math.pi / 2
    theta_right: float = -math.pi / 2


def derive_constants(kappa: float) -> SleConstants:
    """Coupling constants for a flow-line parameter ``kappa`` in (0, 4).

    >>> round(derive_constants(3.0).lam, 7)
    1.8137994
    """
    if not (math.isfinite(kappa) and 0.0 < kappa < 4.0):
        raise InvalidKappa(f"kappa must lie in (0, 4), got {kappa!r}")
    root = math.sqrt(kappa)
    return SleConstants(
        kappa=kappa,
        kappa_prime=16.0 / kappa,
        lam=math.pi / root,
        lam_prime=math.pi * root / 4.0,
        # same as 2/sqrt(kappa) - sqrt(kappa)/2 without the cancellation near 4
        chi=(4.0 - kappa) / (2.0 * root),
    )


def dual_kappa(kappa: float) -> float:
    return 16.0 / kappa


@dataclass(frozen=True)
class WeightVector:
    """Force-point weights and initial positions on each side of the seed.

    Positions default to the seed itself (``0-`` / ``0+``); left positions are
    non-increasing and right positions non-decreasing.
    """

    rho_left: tuple[float, ...] = ()
    rho_right: tuple[float, ...] = ()
    x_left: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    x_right: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        rl = tuple(float(r) for r in self.rho_left)
        rr = tuple(float(r) for r in self.rho_right)
        xl = tuple(0.0 for _ in rl) if self.x_left is None else tuple(float(x) for x in self.x_left)
        xr = tuple(0.0 for _ in rr) if self.x_right is None else tuple(float(x) for x in self.x_right)
        if len(xl) != len(rl) or len(xr) != len(rr):
            raise ValueError("each weight needs exactly one force-point position")
        if any(x > 0 for x in xl) or any(x < 0 for x in xr):
            raise ValueError("left force points must be <= 0 and right ones >= 0")
        if any(b > a for a, b in zip(xl, xl[1:])) or any(b < a for a, b in zip(xr, xr[1:])):
            raise ValueError("force-point positions must be ordered away from the seed")
        if not all(math.isfinite(v) for v in rl + rr + xl + xr):
            raise ValueError("weights and positions must be finite")
        object.__setattr__(self, "rho_left", rl)
        object.__setattr__(self, "rho_right", rr)
        object.__setattr__(self, "x_left", xl)
        object.__setattr__(self, "x_right", xr)

    @classmethod
    def two_sided(cls, rho_left: float, rho_right: float) -> "WeightVector":
        """One force point at ``0-`` and one at ``0+``."""
        return cls((rho_left,), (rho_right,))

    def partial_sums(self, side: str) -> list[float]:
        rhos = self.rho_left if side == "left" else self.rho_right
        out, acc = [], 0.0
        for r in rhos:
            acc += r
            out.append(acc)
        return out

    def solvable(self) -> bool:
        """True when every partial sum exceeds -2, i.e. the SDE runs forever."""
        return all(s > -2.0 for side in ("left", "right") for s in self.partial_sums(side))

    def mirrored(self) -> "WeightVector":
        return WeightVector(self.rho_right, self.rho_left,
                            tuple(-x for x in self.x_right), tuple(-x for x in self.x_left))


def boundary_value(constants: SleConstants, weights: WeightVector, side: str, j: int) -> float:
    """Field boundary value on the j-th boundary interval of ``side``.

    ``j = 0`` is the interval adjacent to the seed.
    """
    rhos: Sequence[float]
    if side == "left":
        rhos, sign = weights.rho_left, -1.0
    elif side == "right":
        rhos, sign = weights.rho_right, 1.0
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if not 0 <= j <= len(rhos):
        raise IndexError(f"interval index {j} out of range 0..{len(rhos)}")
    return sign * constants.lam * (1.0 + sum(rhos[:j]))


def flow_line_weights(constants: SleConstants, a: float, b: float, theta: float) -> tuple[float, float]:
    """Weights of the angle-``theta`` flow line started between boundary values ``a`` | ``b``."""
    shift = theta * constants.chi
    return (-(a + shift) / constants.lam - 1.0, (b + shift) / constants.lam - 1.0)


class BoundaryClass(str, Enum):
    AVOIDS = "avoids"
    HITS_NOT_FILLS = "hits_not_fills"
    FILLS = "fills"
    INVALID = "invalid"


_CONTACT_ORDER = {
    BoundaryClass.AVOIDS: 0,
    BoundaryClass.HITS_NOT_FILLS: 1,
    BoundaryClass.FILLS: 2,
    BoundaryClass.INVALID: 3,
}


def contact_rank(cls: BoundaryClass) -> int:
    return _CONTACT_ORDER[cls]


def classify_boundary_interval(kappa_process: float, cumulative_rho: float) -> BoundaryClass:
    """How a curve with parameter ``kappa_process`` interacts with a boundary
    interval whose cumulative weight is ``cumulative_rho``."""
    if kappa_process <= 0:
        raise ValueError("kappa_process must be positive")
    if cumulative_rho <= -2.0:
        return BoundaryClass.INVALID
    if cumulative_rho >= kappa_process / 2.0 - 2.0:
        return BoundaryClass.AVOIDS
    if kappa_process > 4.0 and cumulative_rho <= kappa_process / 2.0 - 4.0:
        return BoundaryClass.FILLS
    return BoundaryClass.HITS_NOT_FILLS
