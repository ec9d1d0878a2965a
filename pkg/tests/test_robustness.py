import csv
import io

import numpy as np
import pytest

from pandora_box.distribution import Discrete, PerturbationMode, PiecewiseLinearCdf
from pandora_box.errors import CostMismatch, InvalidEpsilon, UnsupportedContinuous
from pandora_box.policy import ThresholdPolicy, expected_utility_exact
from pandora_box.reservation import Instance
from pandora_box.robustness import (
    CSV_COLUMNS,
    SweepConfig,
    adversarial_search,
    box_distances,
    build_report,
    hybrid_swap_gaps,
    perturb_instance,
    random_discrete_instance,
    regret,
    reports_to_csv,
    run_sweep,
    stability_gap,
)

FAIR = Discrete(((0.0, 0.5), (1.0, 0.5)))
SHIFTED = Discrete(((0.0, 0.55), (1.0, 0.45)))


def tight_pair():
    return Instance.from_pairs([(0.45, FAIR)]), Instance.from_pairs([(0.45, SHIFTED)])


def test_stability_gap_examples():
    true, believed = tight_pair()
    assert stability_gap(true, true) == 0.0
    # W(D) = 0.5 - 0.45, W(D') = 0.45 - 0.45
    assert stability_gap(true, believed) == pytest.approx(0.05, abs=1e-12)


def test_regret_examples():
    true, believed = tight_pair()
    assert regret(true, true) == 0.0
    # sigma' = 0: the box is never opened under the wrong prior
    assert ThresholdPolicy.optimal(believed).tau == (0.0,)
    assert regret(true, believed) == pytest.approx(0.05, abs=1e-12)


def test_regret_uses_true_laws():
    true, believed = tight_pair()
    wrong = ThresholdPolicy.optimal(believed)
    direct = expected_utility_exact(ThresholdPolicy.optimal(true), true) - expected_utility_exact(wrong, true)
    assert regret(true, believed) == direct


def test_cost_mismatch():
    a = Instance.from_pairs([(0.45, FAIR)])
    with pytest.raises(CostMismatch):
        stability_gap(a, Instance.from_pairs([(0.4, FAIR)]))
    with pytest.raises(CostMismatch):
        regret(a, Instance.from_pairs([(0.45, FAIR), (0.45, FAIR)]))
    with pytest.raises(CostMismatch):
        hybrid_swap_gaps(a, Instance.from_pairs([(0.1, FAIR)]))


def test_continuous_instances_rejected():
    a = Instance.from_pairs([(0.1, PiecewiseLinearCdf.uniform())])
    with pytest.raises(UnsupportedContinuous):
        stability_gap(a, a)


def test_hybrid_gaps_zero_for_identical():
    inst = random_discrete_instance(np.random.default_rng(1), 3)
    assert np.all(hybrid_swap_gaps(inst, inst) == 0.0)


def test_hybrid_gaps_bounded_per_box_and_telescoping():
    rng = np.random.default_rng(17)
    for k in range(150):
        n = int(rng.integers(1, 4))
        inst = random_discrete_instance(rng, n)
        mode = list(PerturbationMode)[k % 3]
        eps = float(rng.choice([0.01, 0.05, 0.1, 0.2]))
        pert = perturb_instance(inst, eps, mode, k)
        gaps = hybrid_swap_gaps(inst, pert)
        dist = box_distances(inst, pert)
        assert np.all(gaps <= np.array(dist) + 1e-9)
        assert np.all(gaps <= eps + 1e-9)
        assert gaps.sum() >= stability_gap(inst, pert) - 1e-9


def test_report_fields():
    true, believed = tight_pair()
    r = build_report(true, believed, 0.05, "manual", 3)
    assert r.n == 1 and r.bound == 0.05
    assert r.regret_ratio == pytest.approx(1.0, abs=1e-9)
    assert r.gap_ratio == pytest.approx(1.0, abs=1e-9)
    assert r.per_box_gaps == pytest.approx((0.05,))
    zero = build_report(true, true, 0.0)
    assert zero.gap_ratio == 0.0 and zero.regret_ratio == 0.0


def test_sweep_zero_epsilon_is_all_zero():
    reports = run_sweep(SweepConfig((1, 2, 3), (0.0,), 5, seed=9))
    assert len(reports) == 3 * 3 * 5
    assert all(r.stability_gap == 0.0 and r.regret == 0.0 for r in reports)


@pytest.mark.parametrize("family", ["random_discrete", "bernoulli_like"])
def test_sweep_respects_bounds(family):
    reports = run_sweep(SweepConfig((1, 2, 3), (0.02, 0.1), 8, seed=4, instance_family=family))
    for r in reports:
        assert -1e-9 <= r.regret <= r.n * r.epsilon + 1e-9
        assert r.stability_gap <= r.n * r.epsilon + 1e-9
        assert max(r.box_distances) <= r.epsilon
    assert max(r.gap_ratio for r in reports) <= 1 + 1e-6


def test_sweep_is_reproducible_and_worker_independent():
    cfg = SweepConfig((1, 2), (0.05,), 6, seed=123)
    a = reports_to_csv(run_sweep(cfg))
    b = reports_to_csv(run_sweep(cfg))
    c = reports_to_csv(run_sweep(cfg, workers=3))
    assert a == b == c
    assert a != reports_to_csv(run_sweep(SweepConfig((1, 2), (0.05,), 6, seed=124)))


def test_csv_schema_and_round_trip_precision():
    true, believed = tight_pair()
    r = build_report(true, believed, 0.05, "manual", 7)
    rows = list(csv.DictReader(io.StringIO(reports_to_csv([r]))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert float(rows[0]["regret"]) == r.regret
    assert rows[0]["mode"] == "manual" and rows[0]["seed"] == "7"


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"n_values": [1], "epsilon_values": [0.1], "instances_per_cell": 1, "bogus": 1})
    with pytest.raises(InvalidEpsilon):
        SweepConfig((1,), (1.5,), 1)
    with pytest.raises(ValueError):
        SweepConfig((0,), (0.1,), 1)
    with pytest.raises(ValueError):
        SweepConfig((1,), (0.1,), 0)
    cfg = SweepConfig.from_dict({"n_values": [2], "epsilon_values": [0.1], "instances_per_cell": 2,
                                 "modes": ["shift_up"], "instance_family": "bernoulli_like"})
    assert SweepConfig.from_dict(cfg.to_dict()) == cfg


def test_adversarial_zero_epsilon():
    inst = random_discrete_instance(np.random.default_rng(2), 2)
    r = adversarial_search(inst, 0.0, 20, 0)
    assert r.regret == 0.0


def test_adversarial_recovers_tight_instance():
    true, _ = tight_pair()
    r = adversarial_search(true, 0.05, 30, 0)
    assert r.regret_ratio == pytest.approx(1.0, abs=1e-9)
    assert r.regret == pytest.approx(0.05, abs=1e-12)


def test_adversarial_stays_feasible_and_dominates_start():
    rng = np.random.default_rng(31)
    for k in range(8):
        inst = random_discrete_instance(rng, int(rng.integers(1, 4)))
        eps = 0.08
        r = adversarial_search(inst, eps, 60, k)
        assert max(r.box_distances) <= eps + 1e-12
        assert r.regret >= regret(inst, perturb_instance(inst, eps, "shift_down", 0)) - 1e-12
        assert r.regret >= -1e-9


def test_adversarial_budget_validation():
    true, _ = tight_pair()
    with pytest.raises(ValueError):
        adversarial_search(true, 0.05, 0, 0)
