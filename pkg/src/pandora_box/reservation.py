"""Reservation prices and capped values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import Discrete, Distribution, PiecewiseLinearCdf
from .errors import DimensionMismatch, NegativeCost

@dataclass(frozen=True)
class Box:
    cost: float
    dist: Distribution

    def __post_init__(self):
        cost = float(self.cost)
        if not math.isfinite(cost) or cost < 0.0:
            raise NegativeCost(f"box cost must be a finite number >= 0, got {self.cost!r}")
        object.__setattr__(self, "cost", cost)


@dataclass(frozen=True)
class Instance:
    boxes: tuple[Box, ...]

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise DimensionMismatch("an instance needs at least one box")
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def from_pairs(cls, pairs) -> Instance:
        """Build from ``(cost, dist)`` pairs."""
        return cls(tuple(Box(c, d) for c, d in pairs))

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def n(self) -> int:
        return len(self.boxes)

    @property
    def costs(self) -> tuple[float, ...]:
        return tuple(b.cost for b in self.boxes)

    @property
    def dists(self) -> tuple[Distribution, ...]:
        return tuple(b.dist for b in self.boxes)

    def with_dists(self, dists) -> Instance:
        dists = tuple(dists)
        if len(dists) != self.n:
            raise DimensionMismatch(f"expected {self.n} distributions, got {len(dists)}")
        return Instance(tuple(Box(b.cost, d) for b, d in zip(self.boxes, dists)))


def expected_excess(d: Distribution, sigma: float) -> float:
    """Exact ``E[(X - sigma)+]``."""
    if sigma <= 0.0:
        return d.mean() - sigma
    if sigma >= 1.0:
        return 0.0
    if isinstance(d, Discrete):
        return math.fsum(p * (v - sigma) for v, p in zip(d.values.tolist(), d.probs.tolist()) if v > sigma)
    if isinstance(d, PiecewiseLinearCdf):
        # integral of the survival function over [sigma, 1], one trapezoid per segment
        a, b = d.xs[:-1], d.xs[1:]
        live = b > sigma
        a, b = a[live], b[live]
        fa = np.interp(np.maximum(a, sigma), d.xs, d.fs)
        fb = d.fs[1:][live]
        lo = np.maximum(a, sigma)
        return math.fsum((b - lo) * (1.0 - 0.5 * (fa + fb)))
    raise TypeError(f"not a distribution: {d!r}")


def reservation_price(d: Distribution, cost: float) -> float:
    """Solve ``E[(X - sigma)+] = cost`` for ``sigma``.

    Zero cost gives the essential supremum of the support; a cost at or above
    the mean gives ``mean - cost`` (the linear branch of the excess below 0).
    Otherwise the root is bracketed in ``(0, ess_sup)`` and bisected.
    """
    if cost < 0.0:
        raise NegativeCost(f"cost must be >= 0, got {cost!r}")
    if cost == 0.0:
        return d.ess_sup
    mu = d.mean()
    if cost >= mu:
        return mu - cost
    lo, hi = 0.0, d.ess_sup
    # bisect until the bracket is two adjacent floats
    while hi - lo > 0.0:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if expected_excess(d, mid) > cost:
            lo = mid
        else:
            hi = mid
    return hi if abs(expected_excess(d, hi) - cost) < abs(expected_excess(d, lo) - cost) else lo


def capped_value(sigma, x):
    """``min(sigma, x)``; broadcasts over arrays."""
    out = np.minimum(sigma, x)
    return float(out) if np.ndim(out) == 0 else out


def thresholds(inst: Instance) -> np.ndarray:
    return np.array([reservation_price(b.dist, b.cost) for b in inst.boxes])
