"""Command-line driver.

Exit codes: 0 success, 1 usage or input error, 2 property-suite failure.
Box indices are printed 1-based.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import checks, instance_file
from .distribution import PerturbationMode, kolmogorov_distance
from .errors import PandoraError
from .policy import (
    ThresholdPolicy,
    capped_benchmark,
    expected_utility_exact,
    expected_utility_mc,
    run_policy,
)
from .reservation import thresholds
from .robustness import SweepConfig, build_report, perturb_instance, reports_to_csv, run_sweep


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _g(x: float) -> str:
    return format(float(x), ".12g")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _policy(inst, tau) -> ThresholdPolicy:
    if tau is None:
        return ThresholdPolicy.optimal(inst)
    if len(tau) != inst.n:
        raise UsageError(f"--tau has {len(tau)} entries but the instance has {inst.n} boxes")
    return ThresholdPolicy(tuple(tau))


def _estimate_text(est) -> str:
    lo, hi = est.ci95
    return f"mean={_g(est.mean)} stderr={_g(est.stderr)} trials={est.trials} ci95=[{_g(lo)}, {_g(hi)}]"


def cmd_solve(args) -> int:
    inst = instance_file.load(args.instance)
    sigma = thresholds(inst)
    policy = ThresholdPolicy(tuple(sigma))
    print("sigma: " + " ".join(_g(s) for s in sigma))
    print("order: " + " ".join(str(i + 1) for i in policy.order))
    return 0


def cmd_simulate(args) -> int:
    inst = instance_file.load(args.instance)
    policy = _policy(inst, args.tau)
    if args.values is not None:
        if len(args.values) != inst.n:
            raise UsageError(f"--values has {len(args.values)} entries but the instance has {inst.n} boxes")
        print(run_policy(policy, inst.costs, args.values).to_record())
        return 0
    print(_estimate_text(expected_utility_mc(policy, inst, args.trials, args.seed, args.workers)))
    return 0


def cmd_eval(args) -> int:
    inst = instance_file.load(args.instance)
    if args.oracle == "capped":
        if args.tau is not None:
            raise UsageError("--tau does not apply to the capped oracle")
        print(_g(capped_benchmark(inst)))
    elif args.oracle == "exact":
        print(_g(expected_utility_exact(_policy(inst, args.tau), inst)))
    else:
        print(_estimate_text(expected_utility_mc(_policy(inst, args.tau), inst, args.trials, args.seed, args.workers)))
    return 0


def cmd_perturb(args) -> int:
    inst = instance_file.load(args.instance)
    out = perturb_instance(inst, args.epsilon, args.mode, args.seed)
    instance_file.dump(out, args.out)
    for i, (a, b) in enumerate(zip(inst.dists, out.dists), 1):
        print(f"box {i}: d_K = {_g(kolmogorov_distance(a, b))}")
    return 0


def cmd_regret(args) -> int:
    true = instance_file.load(args.true_instance)
    believed = instance_file.load(args.believed_instance)
    eps = max(kolmogorov_distance(a, b) for a, b in zip(true.dists, believed.dists)) if true.n == believed.n else 0.0
    if args.epsilon is not None:
        eps = args.epsilon
    report = build_report(true, believed, eps, mode="file")
    print(report.summary())
    print()
    print(reports_to_csv([report]), end="")
    return 0


def cmd_sweep(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config = SweepConfig.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad sweep config: {exc}") from None
    text = reports_to_csv(run_sweep(config, args.workers))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def cmd_check(args) -> int:
    results = checks.run_all(include_determinism=args.determinism, echo=lambda r: print(r.line(), flush=True))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pandora-box", description="Pandora's box search with inaccurate priors.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="reservation prices and inspection order")
    p.add_argument("instance")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="one trace (--values) or a Monte Carlo estimate (--trials)")
    p.add_argument("instance")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--values", type=_floats, help="comma-separated realized box values")
    group.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=_floats, help="override thresholds (default: reservation prices)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="expected utility by one oracle")
    p.add_argument("instance")
    p.add_argument("--oracle", choices=("exact", "capped", "mc"), default="exact")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=_floats)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="write an epsilon-perturbed copy of an instance")
    p.add_argument("instance")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--mode", choices=[m.value for m in PerturbationMode], default=PerturbationMode.SHIFT_DOWN.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("regret", help="stability gap and regret of a believed prior")
    p.add_argument("true_instance")
    p.add_argument("believed_instance")
    p.add_argument("--epsilon", type=float, help="radius for the bound (default: max per-box d_K)")
    p.set_defaults(func=cmd_regret)

    p = sub.add_parser("sweep", help="robustness sweep to CSV")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run every property suite")
    p.add_argument("--determinism", action="store_true", help="also replay the seeded suites")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code or 0
    try:
        return args.func(args)
    except (PandoraError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
