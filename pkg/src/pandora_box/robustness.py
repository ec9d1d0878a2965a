"""Effect of inaccurate priors on the reservation-price policy.

All quantities here use exact enumeration, so instances must be discrete.
``inst`` always carries the true value laws; ``perturbed``/``believed`` is a
second instance with the same costs whose laws are within some Kolmogorov
distance of the true ones.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .distribution import (
    Discrete,
    PiecewiseLinearCdf,
    PerturbationMode,
    PerturbationSpec,
    cdf_at_support,
    kolmogorov_distance,
    perturb,
    project_cdf,
)
from .errors import CostMismatch, InvalidEpsilon
from .policy import ThresholdPolicy, expected_utility_exact
from .reservation import Box, Instance

# float slack for ball membership; lets the search sit on the ball boundary
BALL_TOL = 1e-12

CSV_COLUMNS = ("n", "epsilon", "mode", "seed", "stability_gap", "regret", "bound", "gap_ratio", "regret_ratio")


class InstanceFamily(str, enum.Enum):
    RANDOM_DISCRETE = "random_discrete"
    BERNOULLI_LIKE = "bernoulli_like"


def random_discrete(rng: np.random.Generator, max_atoms: int = 4) -> Discrete:
    k = int(rng.integers(1, max_atoms + 1))
    values = np.unique(np.round(rng.random(k), 6))
    probs = rng.dirichlet(np.ones(len(values)))
    return Discrete(tuple(zip(values.tolist(), probs.tolist())))


def random_pwl_cdf(rng: np.random.Generator, max_knots: int = 6) -> PiecewiseLinearCdf:
    """Random piecewise-linear CDF; may carry an atom at 0 and flat stretches."""
    k = int(rng.integers(0, max_knots - 1))
    xs = np.concatenate([[0.0], np.unique(np.round(rng.uniform(0.01, 0.99, k), 6)), [1.0]])
    fs = np.sort(rng.random(len(xs)))
    if rng.random() < 0.5:
        fs[0] = 0.0
    if rng.random() < 0.3 and len(fs) > 2:
        fs[-2] = 1.0
    fs[-1] = 1.0
    return PiecewiseLinearCdf(tuple(zip(xs.tolist(), fs.tolist())))


def random_discrete_instance(rng: np.random.Generator, n: int, max_atoms: int = 4) -> Instance:
    """Boxes with 1..max_atoms random atoms and costs up to 1.25x the mean.

    Costs above the mean make some reservation prices negative, so those
    boxes are exercised too.
    """
    boxes = []
    for _ in range(n):
        d = random_discrete(rng, max_atoms)
        boxes.append(Box(float(rng.uniform(0.0, 1.25)) * d.mean(), d))
    return Instance(tuple(boxes))


def bernoulli_instance(rng: np.random.Generator, n: int) -> Instance:
    boxes = []
    for _ in range(n):
        p = float(rng.uniform(0.05, 0.95))
        boxes.append(Box(float(rng.uniform(0.0, 1.25)) * p, Discrete.bernoulli(p)))
    return Instance(tuple(boxes))


def draw_instance(family: InstanceFamily, rng: np.random.Generator, n: int) -> Instance:
    if InstanceFamily(family) is InstanceFamily.BERNOULLI_LIKE:
        return bernoulli_instance(rng, n)
    return random_discrete_instance(rng, n)


def _check_pair(inst: Instance, other: Instance) -> None:
    if inst.n != other.n:
        raise CostMismatch(f"instances have {inst.n} and {other.n} boxes")
    if inst.costs != other.costs:
        raise CostMismatch("instances must share the same box costs")


def box_distances(inst: Instance, other: Instance) -> list[float]:
    _check_pair(inst, other)
    return [kolmogorov_distance(a, b) for a, b in zip(inst.dists, other.dists)]


def stability_gap(inst: Instance, perturbed: Instance) -> float:
    """``|W_sigma(D) - W_sigma(D')|`` for the policy tuned to the true laws."""
    _check_pair(inst, perturbed)
    policy = ThresholdPolicy.optimal(inst)
    return abs(expected_utility_exact(policy, inst) - expected_utility_exact(policy, perturbed))


def regret(inst: Instance, believed: Instance) -> float:
    """Utility lost on the true laws by tuning the policy to ``believed``."""
    _check_pair(inst, believed)
    right = ThresholdPolicy.optimal(inst)
    wrong = ThresholdPolicy.optimal(believed)
    return expected_utility_exact(right, inst) - expected_utility_exact(wrong, inst)


def hybrid_swap_gaps(inst: Instance, perturbed: Instance) -> np.ndarray:
    """Per-box terms of the telescoping swap from ``inst`` to ``perturbed``.

    Boxes are swapped in the policy's inspection order, so every swap sees
    already-perturbed laws before it and true laws after it. Entry ``i`` is
    the absolute change caused by swapping box ``i``.
    """
    _check_pair(inst, perturbed)
    policy = ThresholdPolicy.optimal(inst)
    dists = list(inst.dists)
    gaps = np.zeros(inst.n)
    prev = expected_utility_exact(policy, inst)
    for i in policy.order:
        dists[i] = perturbed.dists[i]
        cur = expected_utility_exact(policy, inst.with_dists(dists))
        gaps[i] = abs(cur - prev)
        prev = cur
    return gaps


@dataclass(frozen=True)
class RobustnessReport:
    n: int
    epsilon: float
    stability_gap: float
    regret: float
    bound: float
    gap_ratio: float
    regret_ratio: float
    per_box_gaps: tuple[float, ...]
    box_distances: tuple[float, ...]
    mode: str = ""
    seed: int | None = None
    perturbed: Instance | None = field(default=None, repr=False, compare=False)

    def csv_row(self) -> dict[str, str]:
        row = {}
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            row[name] = repr(v) if isinstance(v, float) else ("" if v is None else str(v))
        return row

    def summary(self) -> str:
        lines = [f"{f.name}: {_fmt(getattr(self, f.name))}" for f in fields(self) if f.name != "perturbed"]
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    if isinstance(v, tuple):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return "" if v is None else str(v)


def build_report(inst: Instance, perturbed: Instance, epsilon: float, mode: str = "", seed: int | None = None) -> RobustnessReport:
    dist = box_distances(inst, perturbed)
    sigma = ThresholdPolicy.optimal(inst)
    sigma_believed = ThresholdPolicy.optimal(perturbed)
    w_true = expected_utility_exact(sigma, inst)
    gap = abs(w_true - expected_utility_exact(sigma, perturbed))
    loss = w_true - expected_utility_exact(sigma_believed, inst)
    bound = inst.n * epsilon
    return RobustnessReport(
        n=inst.n,
        epsilon=float(epsilon),
        stability_gap=gap,
        regret=loss,
        bound=bound,
        gap_ratio=gap / bound if bound > 0 else 0.0,
        regret_ratio=loss / bound if bound > 0 else 0.0,
        per_box_gaps=tuple(hybrid_swap_gaps(inst, perturbed).tolist()),
        box_distances=tuple(dist),
        mode=str(mode),
        seed=seed,
        perturbed=perturbed,
    )


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple[int, ...]
    epsilon_values: tuple[float, ...]
    instances_per_cell: int
    modes: tuple[PerturbationMode, ...] = tuple(PerturbationMode)
    seed: int = 0
    instance_family: InstanceFamily = InstanceFamily.RANDOM_DISCRETE

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "epsilon_values", tuple(float(e) for e in self.epsilon_values))
        object.__setattr__(self, "modes", tuple(PerturbationMode(m) for m in self.modes))
        object.__setattr__(self, "instance_family", InstanceFamily(self.instance_family))
        if not self.n_values or min(self.n_values) < 1:
            raise ValueError("n_values must be a non-empty list of positive integers")
        if not self.epsilon_values or not all(0.0 <= e <= 1.0 for e in self.epsilon_values):
            raise InvalidEpsilon("epsilon_values must be a non-empty list inside [0, 1]")
        if self.instances_per_cell < 1 or not self.modes:
            raise ValueError("instances_per_cell and modes must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    @classmethod
    def from_dict(cls, raw: dict) -> SweepConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown sweep config fields: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "epsilon_values": list(self.epsilon_values),
            "instances_per_cell": self.instances_per_cell,
            "modes": [m.value for m in self.modes],
            "seed": self.seed,
            "instance_family": self.instance_family.value,
        }


def derive_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1, dtype=np.uint64)[0])


def perturb_instance(inst: Instance, epsilon: float, mode, seed: int) -> Instance:
    """Perturb every box independently; box ``j`` uses a seed derived from ``(seed, j)``."""
    return inst.with_dists(
        perturb(d, PerturbationSpec(epsilon, mode, derive_seed(seed, j))) for j, d in enumerate(inst.dists)
    )


def _sweep_cell(config: SweepConfig, key: tuple[int, int, int, int]) -> RobustnessReport:
    ni, ei, mi, rep = key
    n, eps, mode = config.n_values[ni], config.epsilon_values[ei], config.modes[mi]
    seed = derive_seed(config.seed, ni, ei, mi, rep)
    inst = draw_instance(config.instance_family, np.random.default_rng(seed), n)
    return build_report(inst, perturb_instance(inst, eps, mode, seed), eps, mode.value, seed)


def run_sweep(config: SweepConfig, workers: int = 1) -> list[RobustnessReport]:
    """One report per (n, epsilon, mode, replicate), in that nesting order."""
    keys = [
        (ni, ei, mi, rep)
        for ni in range(len(config.n_values))
        for ei in range(len(config.epsilon_values))
        for mi in range(len(config.modes))
        for rep in range(config.instances_per_cell)
    ]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda k: _sweep_cell(config, k), keys))
    return [_sweep_cell(config, k) for k in keys]


def reports_to_csv(reports, out=None) -> str:
    buf = io.StringIO() if out is None else out
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue() if out is None else ""


def adversarial_search(inst: Instance, epsilon: float, budget: int, seed: int) -> RobustnessReport:
    """Hill-climb over CDF shifts inside the epsilon ball to maximise regret.

    Each box's believed CDF is its true CDF plus a displacement at the
    support points, projected back into the ball. The search starts from the
    uniform down/up shifts of every box (and their per-box sign patterns
    while the budget allows), then does coordinate ascent from random
    restarts. ``budget`` counts regret evaluations. Heuristic: the result is
    a lower bound on the worst case.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidEpsilon(f"epsilon must lie in [0, 1], got {epsilon!r}")
    rng = np.random.default_rng(seed)
    w_true = expected_utility_exact(ThresholdPolicy.optimal(inst), inst)
    sizes = [len(cdf_at_support(d)) for d in inst.dists]
    spent = 0

    def believed(deltas) -> Instance:
        return inst.with_dists(project_cdf(d, dl, epsilon) for d, dl in zip(inst.dists, deltas))

    def score(deltas) -> float:
        nonlocal spent
        spent += 1
        b = believed(deltas)
        return w_true - expected_utility_exact(ThresholdPolicy.optimal(b), inst)

    starts = []
    for pattern in range(2 ** min(inst.n, 10)):
        signs = [1.0 if (pattern >> j) & 1 == 0 else -1.0 for j in range(inst.n)]
        starts.append([np.full(k, s * epsilon) for k, s in zip(sizes, signs)])

    best_deltas = [np.zeros(k) for k in sizes]
    best = score(best_deltas)
    for cand in starts:
        if spent >= budget:
            break
        val = score(cand)
        if val > best:
            best, best_deltas = val, cand

    while spent < budget and epsilon > 0.0:
        cur = [rng.uniform(-epsilon, epsilon, k) for k in sizes]
        cur_val = score(cur)
        step = epsilon
        while spent < budget and step > epsilon * 1e-3:
            improved = False
            for j, k in enumerate(sizes):
                for t in range(k - 1):
                    for sgn in (1.0, -1.0):
                        if spent >= budget:
                            break
                        trial = [a.copy() for a in cur]
                        trial[j][t] = float(np.clip(trial[j][t] + sgn * step, -epsilon, epsilon))
                        val = score(trial)
                        if val > cur_val:
                            cur, cur_val, improved = trial, val, True
            if not improved:
                step *= 0.5
        if cur_val > best:
            best, best_deltas = cur_val, cur

    found = believed(best_deltas)
    report = build_report(inst, found, epsilon, "adversarial", seed)
    if max(report.box_distances) > epsilon + BALL_TOL:
        raise AssertionError("adversarial candidate left the epsilon ball")
    return report
