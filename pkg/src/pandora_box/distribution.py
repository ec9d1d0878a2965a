"""Value distributions supported on [0, 1].

Two representations are supported: finitely supported ``Discrete`` laws and
continuous laws given by a piecewise-linear CDF (``PiecewiseLinearCdf``).
Both are immutable; sampling always takes an explicit ``numpy`` generator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidDistribution, InvalidEpsilon

PROB_TOL = 1e-12


def _as_pairs(raw) -> tuple[tuple[float, float], ...]:
    try:
        pairs = tuple((float(a), float(b)) for a, b in raw)
    except (TypeError, ValueError) as exc:
        raise InvalidDistribution(f"expected a list of [value, number] pairs: {exc}") from None
    if not pairs:
        raise InvalidDistribution("distribution needs at least one point")
    if not all(math.isfinite(a) and math.isfinite(b) for a, b in pairs):
        raise InvalidDistribution("non-finite entry")
    return pairs


@dataclass(frozen=True)
class Discrete:
    """Finitely supported law; ``atoms`` holds ``(value, probability)`` pairs."""

    atoms: tuple[tuple[float, float], ...]
    values: np.ndarray = field(init=False, repr=False, compare=False)
    probs: np.ndarray = field(init=False, repr=False, compare=False)
    cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = _as_pairs(self.atoms)
        values = np.array([v for v, _ in pairs])
        probs = np.array([p for _, p in pairs])
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise InvalidDistribution("atom values must lie in [0, 1]")
        if np.any(np.diff(values) <= 0.0):
            raise InvalidDistribution("atom values must be strictly increasing")
        if np.any(probs <= 0.0) or np.any(probs > 1.0):
            raise InvalidDistribution("atom probabilities must lie in (0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidDistribution(f"probabilities sum to {total!r}, not 1")
        if total != 1.0:
            # atoms keep the caller's numbers so serialisation round-trips exactly
            probs = probs / total
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        values.setflags(write=False)
        probs.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "atoms", pairs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "cum", cum)

    @classmethod
    def point_mass(cls, value: float) -> Discrete:
        return cls(((value, 1.0),))

    @classmethod
    def bernoulli(cls, p: float) -> Discrete:
        """Two atoms at 0 and 1 with ``P[X = 1] = p``."""
        if p <= 0.0:
            return cls.point_mass(0.0)
        if p >= 1.0:
            return cls.point_mass(1.0)
        return cls(((0.0, 1.0 - p), (1.0, p)))

    @property
    def support_points(self) -> np.ndarray:
        return self.values

    @property
    def ess_sup(self) -> float:
        return float(self.values[-1])

    def cdf(self, z):
        idx = np.searchsorted(self.values, z, side="right")
        out = np.where(idx > 0, self.cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def cdf_left(self, z):
        """``P[X < z]``."""
        idx = np.searchsorted(self.values, z, side="left")
        out = np.where(idx > 0, self.cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        return math.fsum(self.values * self.probs)

    def quantile(self, u):
        idx = np.searchsorted(self.cum, u, side="right")
        return self.values[np.minimum(idx, len(self.values) - 1)]


@dataclass(frozen=True)
class PiecewiseLinearCdf:
    """Continuous-interior law whose CDF interpolates linearly between knots.

    ``knots`` holds ``(value, cdf)`` pairs. The first knot sits at 0 and the
    last at 1 with CDF exactly 1. A positive CDF at the first knot is an atom
    at 0.
    """

    knots: tuple[tuple[float, float], ...]
    xs: np.ndarray = field(init=False, repr=False, compare=False)
    fs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = _as_pairs(self.knots)
        xs = np.array([x for x, _ in pairs])
        fs = np.array([f for _, f in pairs])
        if len(pairs) < 2:
            raise InvalidDistribution("piecewise-linear CDF needs at least two knots")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise InvalidDistribution("knot values must start at 0 and end at 1")
        if np.any(np.diff(xs) <= 0.0):
            raise InvalidDistribution("knot values must be strictly increasing")
        if fs[0] < 0.0 or fs[-1] != 1.0:
            raise InvalidDistribution("CDF must start at >= 0 and end at exactly 1")
        if np.any(np.diff(fs) < 0.0) or np.any(fs > 1.0):
            raise InvalidDistribution("CDF entries must be nondecreasing and <= 1")
        xs.setflags(write=False)
        fs.setflags(write=False)
        object.__setattr__(self, "knots", pairs)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "fs", fs)

    @classmethod
    def uniform(cls) -> PiecewiseLinearCdf:
        return cls(((0.0, 0.0), (1.0, 1.0)))

    @property
    def support_points(self) -> np.ndarray:
        return self.xs

    @property
    def ess_sup(self) -> float:
        # smallest z with F(z) = 1
        return float(self.xs[int(np.argmax(self.fs >= 1.0))])

    def cdf(self, z):
        zc = np.clip(z, 0.0, 1.0)
        out = np.where(np.asarray(z) < 0.0, 0.0, np.interp(zc, self.xs, self.fs))
        return float(out) if np.ndim(out) == 0 else out

    def cdf_left(self, z):
        # continuous except for a possible atom at 0
        out = np.where(np.asarray(z) <= 0.0, 0.0, self.cdf(z))
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        # E[X] = integral of the survival function over [0, 1]
        widths = np.diff(self.xs)
        avg_f = 0.5 * (self.fs[:-1] + self.fs[1:])
        return math.fsum(widths * (1.0 - avg_f))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.fs, u, side="left")
        k = np.clip(k, 1, len(self.fs) - 1)
        f0, f1 = self.fs[k - 1], self.fs[k]
        x0, x1 = self.xs[k - 1], self.xs[k]
        span = f1 - f0
        t = np.where(span > 0.0, (u - f0) / np.where(span > 0.0, span, 1.0), 0.0)
        out = x0 + np.clip(t, 0.0, 1.0) * (x1 - x0)
        return np.where(u <= self.fs[0], 0.0, out)


Distribution = Union[Discrete, PiecewiseLinearCdf]


def cdf(d: Distribution, z: float) -> float:
    """``P[X <= z]``; total over the reals."""
    return d.cdf(z)


def mean(d: Distribution) -> float:
    return d.mean()


def sample(d: Distribution, rng: np.random.Generator) -> float:
    """One inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    return float(d.quantile(rng.random()))


def sample_many(d: Distribution, rng: np.random.Generator, size: int) -> np.ndarray:
    return np.asarray(d.quantile(rng.random(size)), dtype=float)


def kolmogorov_distance(d1: Distribution, d2: Distribution) -> float:
    """Exact ``sup_z |F1(z) - F2(z)|``.

    Between consecutive support points of either law both CDFs are constant
    or linear, so the supremum is attained at a support point or as a left
    limit at one.
    """
    z = np.union1d(d1.support_points, d2.support_points)
    right = np.abs(d1.cdf(z) - d2.cdf(z))
    left = np.abs(d1.cdf_left(z) - d2.cdf_left(z))
    return float(max(right.max(), left.max()))


class PerturbationMode(str, enum.Enum):
    SHIFT_DOWN = "shift_down"
    SHIFT_UP = "shift_up"
    RANDOM_MIX = "random_mix"


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float
    mode: PerturbationMode = PerturbationMode.SHIFT_DOWN
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0):
            raise InvalidEpsilon(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        object.__setattr__(self, "mode", PerturbationMode(self.mode))


def cdf_at_support(d: Distribution) -> np.ndarray:
    return d.cum.copy() if isinstance(d, Discrete) else d.fs.copy()


def from_cdf_values(d: Distribution, new_cdf: np.ndarray) -> Distribution:
    """Rebuild ``d`` on its own support with CDF values ``new_cdf`` there."""
    new_cdf = np.asarray(new_cdf, dtype=float).copy()
    new_cdf[-1] = 1.0
    if isinstance(d, Discrete):
        probs = np.diff(new_cdf, prepend=0.0)
        keep = probs > 0.0
        return Discrete(tuple(zip(d.values[keep].tolist(), probs[keep].tolist())))
    return PiecewiseLinearCdf(tuple(zip(d.xs.tolist(), new_cdf.tolist())))


def project_cdf(d: Distribution, delta: np.ndarray, epsilon: float) -> Distribution:
    base = cdf_at_support(d)
    lower = np.maximum(base - epsilon, 0.0)
    upper = np.minimum(base + epsilon, 1.0)
    y = np.maximum.accumulate(np.clip(base + np.asarray(delta, dtype=float), lower, upper))
    y[-1] = 1.0
    return from_cdf_values(d, y)


def shift_cdf(d: Distribution, delta: np.ndarray, epsilon: float) -> Distribution:
    """Add ``delta`` to the CDF at the support points and project back.

    The projection clips into the band ``[F - eps, F + eps]`` intersected with
    ``[0, 1]`` and restores monotonicity with a running maximum; both bounds
    are nondecreasing, so the result stays inside the band. The result is
    checked with ``kolmogorov_distance``.
    """
    delta = np.asarray(delta, dtype=float)
    scale = 1.0
    for attempt in range(60):
        out = project_cdf(d, delta * scale, epsilon)
        if kolmogorov_distance(d, out) <= epsilon:
            return out
        # rounding in the rebuilt CDF overshot by a few ulps
        scale *= 1.0 - 2.0 ** (attempt - 50)
    raise AssertionError("perturbation left the epsilon ball")


def _direction(d: Distribution, spec: PerturbationSpec) -> np.ndarray:
    base = cdf_at_support(d)
    eps = spec.epsilon
    if spec.mode is PerturbationMode.SHIFT_DOWN:
        return np.full_like(base, eps)
    if spec.mode is PerturbationMode.SHIFT_UP:
        return np.full_like(base, -eps)
    rng = np.random.default_rng(spec.seed)
    if isinstance(d, Discrete):
        target = np.cumsum(rng.dirichlet(np.ones(len(base))))
    else:
        target = np.sort(rng.random(len(base)))
    target[-1] = 1.0
    disp = target - base
    size = float(np.abs(disp).max())
    if size == 0.0:
        return disp
    return disp * (min(size, eps) / size)


def perturb(d: Distribution, spec: PerturbationSpec) -> Distribution:
    """Return a law within Kolmogorov distance ``spec.epsilon`` of ``d``.

    ``SHIFT_DOWN`` moves up to epsilon of mass from the top of the support to
    its bottom point, ``SHIFT_UP`` the reverse, and ``RANDOM_MIX`` mixes ``d``
    with a seeded random law on the same support, scaled so the CDF
    displacement has sup-norm at most epsilon.
    """
    if spec.epsilon == 0.0:
        return d
    return shift_cdf(d, _direction(d, spec), spec.epsilon)
