import itertools
import math

import numpy as np
import pytest

from pandora_box.checks import decomposition_rhs
from pandora_box.distribution import Discrete, PiecewiseLinearCdf
from pandora_box.errors import DimensionMismatch, ExplosionCap, UnsupportedContinuous
from pandora_box.policy import (
    ThresholdPolicy,
    Trace,
    box_reached,
    capped_benchmark,
    conditional_utility,
    expected_utility_exact,
    expected_utility_mc,
    inspection_order,
    policy_utilities,
    run_policy,
)
from pandora_box.reservation import Instance
from pandora_box.robustness import random_discrete_instance

FAIR = Discrete(((0.0, 0.5), (1.0, 0.5)))


def brute_expectation(policy, inst):
    """Pure-Python enumeration through the scalar simulator."""
    terms = []
    for combo in itertools.product(*[list(zip(d.values.tolist(), d.probs.tolist())) for d in inst.dists]):
        prob = math.prod(p for _, p in combo)
        terms.append(prob * run_policy(policy, inst.costs, [v for v, _ in combo]).utility)
    return math.fsum(terms)


def test_inspection_order_examples():
    assert inspection_order((0.5, 0.8, 0.5)) == (1, 0, 2)
    assert inspection_order((0.3,)) == (0,)
    assert inspection_order((0.2, 0.2, 0.2, 0.2)) == (0, 1, 2, 3)


def test_run_policy_stops_when_best_reaches_threshold():
    t = run_policy(ThresholdPolicy((0.8, 0.5)), (0.1, 0.1), (0.6, 0.9))
    assert t.opened == (0,) and t.accepted == 0
    assert t.utility == pytest.approx(0.5, abs=1e-15)


def test_run_policy_opens_second_box():
    t = run_policy(ThresholdPolicy((0.8, 0.5)), (0.1, 0.1), (0.3, 0.9))
    assert t.opened == (0, 1) and t.accepted == 1
    assert t.values_seen == (0.3, 0.9)
    assert t.utility == pytest.approx(0.7, abs=1e-15)


def test_run_policy_negative_threshold_never_opens():
    t = run_policy(ThresholdPolicy((-0.1,)), (0.3,), (0.9,))
    assert t == Trace((), None, (), 0.0)


def test_run_policy_stops_on_tie():
    t = run_policy(ThresholdPolicy((0.8, 0.5)), (0.1, 0.1), (0.5, 0.9))
    assert t.opened == (0,)


def test_run_policy_accept_tie_goes_to_smaller_index():
    t = run_policy(ThresholdPolicy((0.5, 0.9)), (0.0, 0.0), (0.4, 0.4))
    assert t.opened == (1, 0) and t.accepted == 0


def test_run_policy_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        run_policy(ThresholdPolicy((0.5, 0.4)), (0.1,), (0.2, 0.3))
    with pytest.raises(DimensionMismatch):
        run_policy(ThresholdPolicy((0.5, 0.4)), (0.1, 0.1), (0.2,))


def test_trace_accounting_and_vectorised_agreement():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        policy = ThresholdPolicy(tuple(rng.uniform(-0.2, 1.1, n)))
        costs = tuple(rng.uniform(0, 0.3, n))
        values = rng.random((20, n))
        vec = policy_utilities(policy, costs, values)
        for row, u in zip(values, vec):
            t = run_policy(policy, costs, row)
            got = 0.0 if t.accepted is None else row[t.accepted]
            assert t.utility == got - math.fsum(costs[policy.order[k]] for k in range(len(t.opened)))
            assert set(t.opened) == {policy.order[k] for k in range(len(t.opened))}
            assert t.utility == u


def test_trace_record_round_trip():
    t = run_policy(ThresholdPolicy((0.8, 0.5)), (0.1, 0.1), (0.3, 0.9))
    line = t.to_record()
    assert line == "opened=1,2 accepted=2 values=0.3,0.9 utility=0.7"
    assert Trace.from_record(line) == t
    empty = Trace((), None, (), 0.0)
    assert Trace.from_record(empty.to_record()) == empty


def test_exact_examples():
    single = Instance.from_pairs([(0.25, FAIR)])
    assert expected_utility_exact(ThresholdPolicy((0.5,)), single) == pytest.approx(0.25, abs=1e-15)
    assert expected_utility_exact(ThresholdPolicy((-0.1,)), single) == 0.0
    pair = Instance.from_pairs([(0.25, FAIR), (0.25, FAIR)])
    # (0.75 + 0.75 + 0.5 - 0.5) / 4
    assert expected_utility_exact(ThresholdPolicy((0.5, 0.5)), pair) == pytest.approx(0.375, abs=1e-15)


def test_exact_matches_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(100):
        inst = random_discrete_instance(rng, int(rng.integers(1, 5)))
        policy = ThresholdPolicy(tuple(rng.uniform(-0.2, 1.1, inst.n)))
        assert expected_utility_exact(policy, inst) == pytest.approx(brute_expectation(policy, inst), abs=1e-12)


def test_exact_errors():
    cont = Instance.from_pairs([(0.1, PiecewiseLinearCdf.uniform())])
    with pytest.raises(UnsupportedContinuous):
        expected_utility_exact(ThresholdPolicy((0.5,)), cont)
    with pytest.raises(UnsupportedContinuous):
        capped_benchmark(cont)
    wide = Discrete(tuple((k / 10, 0.1) for k in range(10)))
    big = Instance.from_pairs([(0.1, wide)] * 3)
    with pytest.raises(ExplosionCap):
        expected_utility_exact(ThresholdPolicy((0.5,) * 3), big, cap=999)
    assert expected_utility_exact(ThresholdPolicy((0.5,) * 3), big, cap=1000) > -1.0


def test_capped_examples():
    assert capped_benchmark(Instance.from_pairs([(0.25, FAIR)])) == pytest.approx(0.25, abs=1e-10)
    assert capped_benchmark(Instance.from_pairs([(0.5, FAIR), (0.7, FAIR)])) == 0.0
    # P(at least one X = 1) * 0.5
    assert capped_benchmark(Instance.from_pairs([(0.25, FAIR), (0.25, FAIR)])) == pytest.approx(0.375, abs=1e-10)


def test_sigma_policy_matches_capped_benchmark():
    rng = np.random.default_rng(21)
    for _ in range(60):
        inst = random_discrete_instance(rng, int(rng.integers(1, 5)))
        policy = ThresholdPolicy.optimal(inst)
        assert abs(expected_utility_exact(policy, inst) - capped_benchmark(inst)) <= 1e-9
        for _ in range(10):
            tau = ThresholdPolicy(tuple(rng.uniform(-0.2, 1.1, inst.n)))
            assert expected_utility_exact(tau, inst) <= expected_utility_exact(policy, inst) + 1e-9


def test_mc_point_masses_has_zero_stderr():
    inst = Instance.from_pairs([(0.1, Discrete.point_mass(0.4)), (0.05, Discrete.point_mass(0.9))])
    policy = ThresholdPolicy.optimal(inst)
    est = expected_utility_mc(policy, inst, 5000, 1)
    assert est.stderr == 0.0
    assert est.mean == run_policy(policy, inst.costs, (0.4, 0.9)).utility
    assert est.ci95 == (est.mean, est.mean)


def test_mc_single_box_within_three_stderr():
    inst = Instance.from_pairs([(0.25, FAIR)])
    est = expected_utility_mc(ThresholdPolicy((0.5,)), inst, 100_000, 2)
    assert abs(est.mean - 0.25) <= 3 * est.stderr
    assert est.trials == 100_000
    assert est.ci95[0] == pytest.approx(est.mean - 1.96 * est.stderr)


def test_mc_is_deterministic_and_worker_independent():
    inst = Instance.from_pairs([(0.1, FAIR), (0.05, PiecewiseLinearCdf.uniform())])
    policy = ThresholdPolicy.optimal(inst)
    a = expected_utility_mc(policy, inst, 100_001, 42)
    b = expected_utility_mc(policy, inst, 100_001, 42)
    c = expected_utility_mc(policy, inst, 100_001, 42, workers=4)
    assert a == b == c
    assert expected_utility_mc(policy, inst, 1000, 43) != expected_utility_mc(policy, inst, 1000, 42)


def test_mc_matches_stderr_formula():
    inst = Instance.from_pairs([(0.25, FAIR)])
    est = expected_utility_mc(ThresholdPolicy((0.5,)), inst, 1000, 5)
    # utilities are 0.75 or -0.25, so the sample std follows from the hit fraction
    p = est.mean + 0.25
    std = math.sqrt(p * (1 - p) * 1000 / 999)
    assert est.stderr == pytest.approx(std / math.sqrt(1000), rel=1e-9)


def test_mc_needs_two_trials():
    with pytest.raises(ValueError):
        expected_utility_mc(ThresholdPolicy((0.5,)), Instance.from_pairs([(0.25, FAIR)]), 1, 0)


def test_mc_handles_continuous_boxes():
    inst = Instance.from_pairs([(0.125, PiecewiseLinearCdf.uniform())])
    est = expected_utility_mc(ThresholdPolicy((0.5,)), inst, 100_000, 7)
    # open always: E[X] - c = 0.375
    assert abs(est.mean - 0.375) <= 3 * est.stderr


def threshold_pair():
    return Instance.from_pairs([(0.1, FAIR), (0.1, Discrete(((0.0, 0.8), (1.0, 0.2))))])


def test_conditional_utility_examples():
    inst = threshold_pair()
    policy = ThresholdPolicy((0.8, 0.5))
    assert conditional_utility(policy, inst, [0.3], 0.7) == pytest.approx(0.5, abs=1e-15)
    for x in np.linspace(0, 1, 11):
        assert conditional_utility(policy, inst, [0.9], x) == pytest.approx(0.8, abs=1e-15)


def test_conditional_utility_monotone_lipschitz():
    inst = threshold_pair()
    policy = ThresholdPolicy.optimal(inst)
    xs = np.arange(101) / 100
    for prefix in ([], [0.1], [0.3], [0.6], [0.95]):
        g = np.array([conditional_utility(policy, inst, prefix, x) for x in xs])
        diffs = np.diff(g)
        assert np.all(diffs >= -1e-9)
        assert np.all(diffs <= np.diff(xs) + 1e-9)


def test_decomposition_identity_when_box_opened():
    rng = np.random.default_rng(13)
    checked = 0
    for _ in range(80):
        inst = random_discrete_instance(rng, int(rng.integers(2, 5)))
        policy = ThresholdPolicy.optimal(inst)
        prefix = list(rng.random(int(rng.integers(0, inst.n))) * 0.5)
        if not box_reached(policy, prefix):
            continue
        checked += 1
        for x in (0.0, 0.17, 0.5, 0.93, 1.0):
            assert conditional_utility(policy, inst, prefix, x) == pytest.approx(
                decomposition_rhs(policy, inst, prefix, x), abs=1e-9
            )
    assert checked >= 10


def test_conditional_utility_prefix_too_long():
    inst = threshold_pair()
    with pytest.raises(DimensionMismatch):
        conditional_utility(ThresholdPolicy((0.8, 0.5)), inst, [0.1, 0.2], 0.3)


def test_box_reached():
    policy = ThresholdPolicy((0.8, 0.5))
    assert box_reached(policy, [])
    assert box_reached(policy, [0.3])
    assert not box_reached(policy, [0.5])
    assert not box_reached(ThresholdPolicy((-0.1,)), [])
    assert not box_reached(ThresholdPolicy((0.5, -0.1)), [0.2])
