"""Threshold-ordered opening policies and their expected utility.

A policy with thresholds ``tau`` inspects boxes in decreasing ``tau`` order.
It starts from the outside option 0, opens the next box only while its
threshold is strictly above the best value seen so far, and keeps the best
opened box. Three independent evaluators are provided: exact enumeration
over the support product, the capped-value benchmark, and Monte Carlo.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .distribution import Discrete, Distribution, sample_many
from .errors import DimensionMismatch, ExplosionCap, UnsupportedContinuous
from .reservation import Instance, capped_value, thresholds

DEFAULT_CAP = 10**6
MC_BLOCK = 1 << 15


def inspection_order(tau) -> tuple[int, ...]:
    """Indices sorted by ``tau`` descending; ties keep the smaller index first."""
    tau = [float(t) for t in tau]
    return tuple(sorted(range(len(tau)), key=lambda i: (-tau[i], i)))


@dataclass(frozen=True)
class ThresholdPolicy:
    tau: tuple[float, ...]
    order: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "order", inspection_order(tau))

    @classmethod
    def optimal(cls, inst: Instance) -> ThresholdPolicy:
        """The reservation-price policy for ``inst``."""
        return cls(tuple(thresholds(inst)))

    def __len__(self) -> int:
        return len(self.tau)


@dataclass(frozen=True)
class Trace:
    opened: tuple[int, ...]
    accepted: int | None
    values_seen: tuple[float, ...]
    utility: float

    def to_record(self, one_based: bool = True) -> str:
        shift = 1 if one_based else 0
        opened = ",".join(str(i + shift) for i in self.opened) or "-"
        accepted = "-" if self.accepted is None else str(self.accepted + shift)
        seen = ",".join(repr(v) for v in self.values_seen) or "-"
        return f"opened={opened} accepted={accepted} values={seen} utility={self.utility!r}"

    @classmethod
    def from_record(cls, line: str, one_based: bool = True) -> Trace:
        shift = 1 if one_based else 0
        fields = dict(part.split("=", 1) for part in line.split())

        def ints(s):
            return () if s == "-" else tuple(int(x) - shift for x in s.split(","))

        seen = () if fields["values"] == "-" else tuple(float(x) for x in fields["values"].split(","))
        accepted = None if fields["accepted"] == "-" else int(fields["accepted"]) - shift
        return cls(ints(fields["opened"]), accepted, seen, float(fields["utility"]))


@dataclass(frozen=True)
class UtilityEstimate:
    mean: float
    stderr: float
    trials: int
    ci95: tuple[float, float]

    @classmethod
    def from_moments(cls, mean: float, m2: float, trials: int) -> UtilityEstimate:
        var = m2 / (trials - 1) if trials > 1 else 0.0
        stderr = math.sqrt(max(var, 0.0) / trials)
        return cls(mean, stderr, trials, (mean - 1.96 * stderr, mean + 1.96 * stderr))


def _prefix_costs(costs, order) -> list[float]:
    # opened boxes always form a prefix of the inspection order
    return [math.fsum(costs[i] for i in order[:k]) for k in range(len(order) + 1)]


def _check_dims(policy: ThresholdPolicy, *vectors) -> None:
    n = len(policy.tau)
    for v in vectors:
        if len(v) != n:
            raise DimensionMismatch(f"expected length {n}, got {len(v)}")


def run_policy(policy: ThresholdPolicy, costs, values) -> Trace:
    """Simulate the policy on realized box values."""
    _check_dims(policy, costs, values)
    best = 0.0
    opened = []
    for i in policy.order:
        if not policy.tau[i] > best:
            break
        opened.append(i)
        best = max(best, float(values[i]))
    if not opened:
        return Trace((), None, (), 0.0)
    seen = tuple(float(values[i]) for i in opened)
    top = max(seen)
    accepted = min(i for i in opened if float(values[i]) == top)
    utility = top - _prefix_costs(costs, policy.order)[len(opened)]
    return Trace(tuple(opened), accepted, seen, utility)


def policy_utilities(policy: ThresholdPolicy, costs, values: np.ndarray) -> np.ndarray:
    """Vectorised ``run_policy(...).utility`` over the rows of ``values``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    _check_dims(policy, costs, values[0])
    rows = values.shape[0]
    best = np.zeros(rows)
    count = np.zeros(rows, dtype=np.intp)
    active = np.ones(rows, dtype=bool)
    for i in policy.order:
        active &= policy.tau[i] > best
        if not active.any():
            break
        count[active] += 1
        best[active] = np.maximum(best[active], values[active, i])
    paid = np.asarray(_prefix_costs(costs, policy.order))
    # best stays 0 when nothing is opened, which is also the outside option
    return best - paid[count]


def support_grid(dists, cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """All joint outcomes of independent discrete laws and their probabilities."""
    for d in dists:
        if not isinstance(d, Discrete):
            raise UnsupportedContinuous("exact enumeration needs discrete distributions")
    size = math.prod(len(d.values) for d in dists)
    if size > cap:
        raise ExplosionCap(f"support product {size} exceeds cap {cap}")
    vals = np.meshgrid(*[d.values for d in dists], indexing="ij")
    probs = np.meshgrid(*[d.probs for d in dists], indexing="ij")
    values = np.stack([v.ravel() for v in vals], axis=1)
    weights = np.prod(np.stack([p.ravel() for p in probs], axis=1), axis=1)
    return values, weights


def expected_utility_exact(policy: ThresholdPolicy, inst: Instance, cap: int = DEFAULT_CAP) -> float:
    values, weights = support_grid(inst.dists, cap)
    return math.fsum(weights * policy_utilities(policy, inst.costs, values))


def capped_benchmark(inst: Instance, cap: int = DEFAULT_CAP) -> float:
    """``E[max(0, max_i min(sigma_i, X_i))]`` by enumeration."""
    values, weights = support_grid(inst.dists, cap)
    kappa = capped_value(thresholds(inst)[None, :], values)
    return math.fsum(weights * np.maximum(kappa.max(axis=1), 0.0))


def _mc_block(policy, costs, dists, rng_seed, size):
    rng = np.random.default_rng(rng_seed)
    values = np.column_stack([sample_many(d, rng, size) for d in dists])
    u = policy_utilities(policy, costs, values)
    # shift by the first draw so a constant sample has zero spread exactly
    d = u - u[0]
    shift = math.fsum(d) / size
    return float(u[0] + shift), float(np.sum((d - shift) ** 2)), size


def expected_utility_mc(
    policy: ThresholdPolicy,
    inst: Instance,
    trials: int,
    seed: int,
    workers: int = 1,
) -> UtilityEstimate:
    """Monte Carlo estimate of the policy's expected utility.

    Trials are cut into fixed-size blocks with seeds spawned from ``seed``, so
    the result does not depend on ``workers``.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    _check_dims(policy, inst.costs)
    sizes = [MC_BLOCK] * (trials // MC_BLOCK)
    if trials % MC_BLOCK:
        sizes.append(trials % MC_BLOCK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(policy, inst.costs, inst.dists, s, k) for s, k in zip(seeds, sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _mc_block(*a), jobs))
    else:
        parts = [_mc_block(*a) for a in jobs]
    mean, m2, count = parts[0]
    for mb, m2b, nb in parts[1:]:
        total = count + nb
        delta = mb - mean
        mean = mean + delta * nb / total
        m2 = m2 + m2b + delta * delta * count * nb / total
        count = total
    return UtilityEstimate.from_moments(mean, m2, count)


def _pinned(inst: Instance, policy: ThresholdPolicy, prefix_values, x) -> Instance:
    i = len(prefix_values)
    if i >= inst.n:
        raise DimensionMismatch(f"prefix of length {i} leaves no box to pin for n={inst.n}")
    dists: list[Distribution] = list(inst.dists)
    for pos, v in enumerate([*prefix_values, x]):
        dists[policy.order[pos]] = Discrete.point_mass(float(v))
    return inst.with_dists(dists)


def conditional_utility(policy: ThresholdPolicy, inst: Instance, prefix_values, x: float, cap: int = DEFAULT_CAP) -> float:
    """Expected utility with the first boxes in inspection order pinned.

    The boxes at positions ``0 .. len(prefix_values) - 1`` of ``policy.order``
    take ``prefix_values``, the next one takes ``x``, and the remaining boxes
    stay random.
    """
    _check_dims(policy, inst.costs)
    return expected_utility_exact(policy, _pinned(inst, policy, prefix_values, x), cap)


def box_reached(policy: ThresholdPolicy, prefix_values) -> bool:
    """Whether the box after the prefix in inspection order gets opened."""
    best = 0.0
    for pos in range(len(prefix_values) + 1):
        if not policy.tau[policy.order[pos]] > best:
            return False
        if pos < len(prefix_values):
            best = max(best, float(prefix_values[pos]))
    return True
