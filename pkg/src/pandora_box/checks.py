"""Property suites run by ``pandora-box check`` and the acceptance tests.

Every suite returns a ``CheckResult``. Sizes and tolerances are fixed here;
seeds are parameters so the determinism suite can replay them.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import instance_file
from .distribution import Discrete, PiecewiseLinearCdf
from .policy import (
    ThresholdPolicy,
    box_reached,
    capped_benchmark,
    conditional_utility,
    expected_utility_exact,
    expected_utility_mc,
)
from .reservation import Instance, expected_excess, reservation_price, thresholds
from .robustness import (
    InstanceFamily,
    SweepConfig,
    build_report,
    derive_seed,
    random_discrete,
    random_discrete_instance,
    random_pwl_cdf,
    reports_to_csv,
    run_sweep,
)

EXACT_TOL = 1e-9
RESIDUAL_TOL = 1e-10
# absolute floor under 3 * stderr so exactly-deterministic instances compare equal
MC_FLOOR = 1e-12

SWEEP_N = (1, 2, 3, 4)
SWEEP_EPS = (0.01, 0.05, 0.1)
SWEEP_REPLICATES = 50


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    artifacts: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        result.seconds = time.perf_counter() - start
        return result

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_reservation(seed: int = 1, pairs: int = 200) -> CheckResult:
    """Root residual on random laws plus the two closed-form cases, under 1 s."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(pairs):
        d = random_discrete(rng, 6) if k % 2 == 0 else random_pwl_cdf(rng)
        c = float(rng.uniform(0.0, d.mean()))
        worst = max(worst, abs(expected_excess(d, reservation_price(d, c)) - c))
    uni = abs(reservation_price(PiecewiseLinearCdf.uniform(), 0.125) - 0.5)
    ber = abs(reservation_price(Discrete.bernoulli(0.5), 0.25) - 0.5)
    elapsed = time.perf_counter() - start
    ok = worst <= RESIDUAL_TOL and uni <= RESIDUAL_TOL and ber <= RESIDUAL_TOL and elapsed < 1.0
    return CheckResult(
        "reservation solver",
        ok,
        f"{pairs} pairs, max residual {worst:.3g}; uniform err {uni:.3g}; bernoulli err {ber:.3g}; {elapsed:.3f}s < 1s",
    )


def benchmark_suite(seed: int = 2, count: int = 500) -> list[Instance]:
    rng = np.random.default_rng(seed)
    return [random_discrete_instance(rng, int(rng.integers(1, 5)), 4) for _ in range(count)]


@_timed
def check_benchmark_equality(seed: int = 2, count: int = 500) -> CheckResult:
    """Reservation-price policy utility equals the capped-value benchmark."""
    start = time.perf_counter()
    worst = 0.0
    for inst in benchmark_suite(seed, count):
        w = expected_utility_exact(ThresholdPolicy.optimal(inst), inst)
        worst = max(worst, abs(w - capped_benchmark(inst)))
    elapsed = time.perf_counter() - start
    ok = worst <= EXACT_TOL and elapsed < 10.0
    return CheckResult("benchmark equality", ok, f"{count} instances, max |W - E[max kappa]| = {worst:.3g}; {elapsed:.2f}s < 10s")


def random_taus(rng: np.random.Generator, sigma: np.ndarray, count: int) -> list[np.ndarray]:
    """Half jitter around ``sigma``, half unrelated random thresholds."""
    out = []
    for k in range(count):
        if k % 2 == 0:
            out.append(sigma + rng.normal(0.0, 0.15, len(sigma)))
        else:
            out.append(rng.uniform(-0.2, 1.1, len(sigma)))
    return out


@_timed
def check_threshold_optimality(seed: int = 2, count: int = 500, taus_per_instance: int = 100) -> CheckResult:
    start = time.perf_counter()
    rng = np.random.default_rng(derive_seed(seed, 1))
    worst = -math.inf
    for inst in benchmark_suite(seed, count):
        sigma = thresholds(inst)
        w_sigma = expected_utility_exact(ThresholdPolicy(tuple(sigma)), inst)
        for tau in random_taus(rng, sigma, taus_per_instance):
            worst = max(worst, expected_utility_exact(ThresholdPolicy(tuple(tau)), inst) - w_sigma)
    elapsed = time.perf_counter() - start
    ok = worst <= EXACT_TOL and elapsed < 60.0
    return CheckResult(
        "threshold optimality",
        ok,
        f"{count}x{taus_per_instance} thresholds, max W_tau - W_sigma = {worst:.3g}; {elapsed:.2f}s < 60s",
    )


def oracle_agreement_rows(seed: int = 4, count: int = 100, trials: int = 100_000) -> list[tuple[int, float, float, float]]:
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(count):
        inst = random_discrete_instance(rng, int(rng.integers(1, 5)), 4)
        policy = ThresholdPolicy.optimal(inst)
        exact = expected_utility_exact(policy, inst)
        est = expected_utility_mc(policy, inst, trials, derive_seed(seed, k))
        rows.append((k, exact, est.mean, est.stderr))
    return rows


def oracle_rows_csv(rows) -> str:
    lines = ["instance,exact,mc_mean,mc_stderr"]
    lines += [f"{k},{e!r},{m!r},{s!r}" for k, e, m, s in rows]
    return "\n".join(lines) + "\n"


@_timed
def check_oracle_agreement(seed: int = 4, count: int = 100, trials: int = 100_000) -> CheckResult:
    rows = oracle_agreement_rows(seed, count, trials)
    hits = sum(abs(m - e) <= 3.0 * s + MC_FLOOR for _, e, m, s in rows)
    ok = hits >= math.ceil(0.99 * count)
    return CheckResult(
        "oracle agreement",
        ok,
        f"MC ({trials} trials) within 3 stderr of exact on {hits}/{count} instances (need >= 99%)",
        artifacts={"csv": oracle_rows_csv(rows)},
    )


def _pairs(d):
    return list(zip(d.values.tolist(), d.probs.tolist()))


def decomposition_rhs(policy: ThresholdPolicy, inst: Instance, prefix_values, x: float) -> float:
    """``E[max(B(x), max_later kappa_j)] - cost of boxes up to the pinned one``.

    Plain-Python enumeration over the later boxes' atoms, independent of the
    vectorised policy evaluator.
    """
    i = len(prefix_values)
    order = policy.order
    b = max([float(v) for v in prefix_values] + [float(x)])
    paid = math.fsum(inst.boxes[order[pos]].cost for pos in range(i + 1))
    later = [order[pos] for pos in range(i + 1, inst.n)]
    total = []
    for combo in itertools.product(*[_pairs(inst.boxes[j].dist) for j in later]):
        prob = math.prod(p for _, p in combo)
        kappas = [min(policy.tau[j], v) for j, (v, _) in zip(later, combo)]
        total.append(prob * max([b] + kappas))
    return math.fsum(total) - paid


def conditional_configs(seed: int = 5, count: int = 200):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        inst = random_discrete_instance(rng, int(rng.integers(2, 5)), 4)
        i = int(rng.integers(0, inst.n))
        # small prefix values keep later boxes reachable in most configurations
        prefix = (rng.random(i) * rng.uniform(0.05, 0.8)).round(6).tolist()
        out.append((inst, prefix))
    return out


@_timed
def check_conditional_utility(seed: int = 5, count: int = 200) -> CheckResult:
    """g is nondecreasing and 1-Lipschitz; decomposition identity when opened."""
    xs = np.round(np.arange(101) * 0.01, 10)
    worst_mono = worst_lip = worst_id = 0.0
    reached = 0
    for inst, prefix in conditional_configs(seed, count):
        policy = ThresholdPolicy.optimal(inst)
        g = np.array([conditional_utility(policy, inst, prefix, x) for x in xs])
        dg = g[:, None] - g[None, :]
        dx = xs[:, None] - xs[None, :]
        upper = dx >= 0
        worst_mono = max(worst_mono, float(np.max(-dg[upper])))
        worst_lip = max(worst_lip, float(np.max((dg - dx)[upper])))
        if box_reached(policy, prefix):
            reached += 1
            rhs = np.array([decomposition_rhs(policy, inst, prefix, x) for x in xs])
            worst_id = max(worst_id, float(np.max(np.abs(g - rhs))))
    ok = worst_mono <= EXACT_TOL and worst_lip <= EXACT_TOL and worst_id <= EXACT_TOL and reached > 0
    return CheckResult(
        "conditional utility",
        ok,
        f"{count} configs x 101 grid points: max decrease {worst_mono:.3g}, max Lipschitz excess {worst_lip:.3g}; "
        f"identity max err {worst_id:.3g} on {reached} opened configs",
    )


def robustness_sweeps(seed: int = 6, replicates: int = SWEEP_REPLICATES):
    """The acceptance sweep, run for both instance families."""
    return {
        fam: run_sweep(SweepConfig(SWEEP_N, SWEEP_EPS, replicates, seed=seed, instance_family=fam))
        for fam in InstanceFamily
    }


@_timed
def check_stability_bound(sweeps) -> CheckResult:
    worst_gap = worst_box = worst_tel = -math.inf
    total = 0
    for reports in sweeps.values():
        for r in reports:
            total += 1
            worst_gap = max(worst_gap, r.stability_gap - r.bound)
            worst_box = max(worst_box, max(g - r.epsilon for g in r.per_box_gaps))
            worst_box = max(worst_box, max(g - d for g, d in zip(r.per_box_gaps, r.box_distances)))
            worst_tel = max(worst_tel, r.stability_gap - math.fsum(r.per_box_gaps))
    ok = worst_gap <= EXACT_TOL and worst_box <= EXACT_TOL and worst_tel <= EXACT_TOL
    max_ratio = max(r.gap_ratio for reports in sweeps.values() for r in reports)
    return CheckResult(
        "stability bound",
        ok,
        f"{total} reports: max(gap - n*eps) = {worst_gap:.3g}, max(box gap - eps_i) = {worst_box:.3g}, "
        f"max(gap - sum box gaps) = {worst_tel:.3g}, max gap ratio {max_ratio:.6f}",
    )


def tight_instance() -> tuple[Instance, Instance]:
    """One Bernoulli(1/2) box of cost 0.45 against the prior shifted down by 0.05."""
    true = Instance.from_pairs([(0.45, Discrete.bernoulli(0.5))])
    believed = Instance.from_pairs([(0.45, Discrete(((0.0, 0.55), (1.0, 0.45))))])
    return true, believed


@_timed
def check_regret_bound(sweeps) -> CheckResult:
    lo, hi = math.inf, -math.inf
    total = 0
    for reports in sweeps.values():
        for r in reports:
            total += 1
            lo = min(lo, r.regret)
            hi = max(hi, r.regret - r.bound)
    true, believed = tight_instance()
    tight = build_report(true, believed, 0.05)
    tight_ok = abs(tight.regret - 0.05) <= EXACT_TOL and abs(tight.regret_ratio - 1.0) <= EXACT_TOL
    ok = lo >= -EXACT_TOL and hi <= EXACT_TOL and tight_ok
    return CheckResult(
        "regret bound",
        ok,
        f"{total} reports: min regret {lo:.3g}, max(regret - n*eps) = {hi:.3g}; "
        f"tight instance regret {tight.regret:.12g}, ratio {tight.regret_ratio:.12g}",
    )


def sweep_csv(sweeps) -> str:
    return "".join(reports_to_csv(sweeps[fam]) for fam in InstanceFamily)


@_timed
def check_determinism(seed_mc: int = 4, seed_sweep: int = 6) -> CheckResult:
    mc_a = oracle_rows_csv(oracle_agreement_rows(seed_mc))
    mc_b = oracle_rows_csv(oracle_agreement_rows(seed_mc))
    sw_a = sweep_csv(robustness_sweeps(seed_sweep))
    sw_b = sweep_csv(robustness_sweeps(seed_sweep))
    ok = mc_a == mc_b and sw_a == sw_b
    return CheckResult(
        "determinism",
        ok,
        f"oracle CSV identical: {mc_a == mc_b} ({len(mc_a)} bytes); sweep CSV identical: {sw_a == sw_b} ({len(sw_a)} bytes)",
    )


def corpus_files():
    root = resources.files("pandora_box") / "corpus"
    return sorted((p for p in root.iterdir() if p.name.endswith(".json") and p.name != "sweep.json"), key=lambda p: p.name)


@_timed
def check_corpus() -> CheckResult:
    """Shipped instance files parse, round-trip, and satisfy the oracle triangle."""
    problems = []
    files = corpus_files()
    for path in files:
        inst = instance_file.loads(path.read_text(encoding="utf-8"))
        if instance_file.loads(instance_file.dumps(inst)) != inst:
            problems.append(f"{path.name}: round trip changed the instance")
        if all(isinstance(d, Discrete) for d in inst.dists):
            policy = ThresholdPolicy.optimal(inst)
            exact = expected_utility_exact(policy, inst)
            if abs(exact - capped_benchmark(inst)) > EXACT_TOL:
                problems.append(f"{path.name}: exact and capped oracles disagree")
            est = expected_utility_mc(policy, inst, 20_000, 0)
            if abs(est.mean - exact) > 4.0 * est.stderr + MC_FLOOR:
                problems.append(f"{path.name}: Monte Carlo far from exact")
    detail = f"{len(files)} files" + ("" if not problems else ": " + "; ".join(problems))
    return CheckResult("shipped corpus", not problems and bool(files), detail)


def run_all(include_determinism: bool = False, echo=None) -> list[CheckResult]:
    """Run suites 1-7 and the corpus check; ``echo`` receives each result as it lands."""
    results = []

    def record(res):
        results.append(res)
        if echo is not None:
            echo(res)

    record(check_reservation())
    record(check_benchmark_equality())
    record(check_threshold_optimality())
    record(check_oracle_agreement())
    record(check_conditional_utility())
    start = time.perf_counter()
    sweeps = robustness_sweeps()
    sweep_time = time.perf_counter() - start
    t1 = check_stability_bound(sweeps)
    t1.seconds += sweep_time
    t1.detail += f"; sweep {sweep_time:.1f}s < 300s"
    t1.passed = t1.passed and sweep_time < 300.0
    record(t1)
    record(check_regret_bound(sweeps))
    if include_determinism:
        record(check_determinism())
    record(check_corpus())
    return results
