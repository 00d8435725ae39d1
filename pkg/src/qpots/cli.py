"""Command-line harness for benchmark runs and solver validation sweeps."""

from __future__ import annotations

import argparse
import sys

from .errors import InvalidArgumentError
from .gp import LandmarkRule, NystromConfig
from .harness import ExperimentConfig, run, solver_validation_sweeps, summarize
from .nsga2 import EvolverConfig
from .problems import get_problem, list_problems


def _parse_nystrom(text: str) -> NystromConfig:
    token = text.strip().lower()
    if token == "off":
        return NystromConfig(enabled=False)
    if token == "pareto":
        return NystromConfig(enabled=True, landmark_rule=LandmarkRule.NONDOMINATED_TRAINING_POINTS)
    if token.startswith("first:"):
        m = int(token.split(":", 1)[1])
        return NystromConfig(enabled=True, landmark_rule=LandmarkRule.FIRST_M, max_landmarks=m)
    raise argparse.ArgumentTypeError(f"expected off|pareto|first:<m>, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpots",
        description="Batch Pareto-optimal Thompson sampling benchmark harness",
    )
    parser.add_argument("--mode", choices=["run", "nsga2-only"], default="run")
    parser.add_argument("--problem", default="branin-currin", help=f"one of: {', '.join(list_problems())}")
    parser.add_argument("--policy", choices=["qpots", "sobol"], default="qpots")
    parser.add_argument("--q", type=int, default=1, help="batch size per iteration")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--budget", type=int, default=None, help="total oracle evaluations")
    parser.add_argument("--n-seed", type=int, default=None, help="initial design size (default 10*d)")
    parser.add_argument("--noise", type=float, default=1e-3, help="observation noise variance")
    parser.add_argument("--reps", type=int, default=10, help="number of replicates")
    parser.add_argument("--pop-size", type=int, default=None, help="inner solver population (default 100*d)")
    parser.add_argument("--n-gen", type=int, default=100, help="inner solver generations")
    parser.add_argument("--nystrom", type=_parse_nystrom, default=NystromConfig(enabled=False))
    parser.add_argument("--eq-tol", type=float, default=1e-2, help="equality tolerance (standardized units)")
    parser.add_argument("--restarts", type=int, default=4, help="GP fit restarts")
    parser.add_argument("--workers", type=int, default=1, help="parallel replicate workers")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.mode == "nsga2-only":
        sweeps = solver_validation_sweeps()
        print("median normalized IGD on the constrained demo problem")
        print("generations sweep (pop fixed at 100):")
        for g, v in sweeps["ngen"].items():
            print(f"  ngen={g:4d}  igd={v:.5f}")
        print("population sweep (generations fixed at 50):")
        for p, v in sweeps["npop"].items():
            print(f"  npop={p:4d}  igd={v:.5f}")
        return 0

    if args.budget is None:
        print("--budget is required in run mode", file=sys.stderr)
        return 2

    problem = get_problem(args.problem)
    evolver = None
    if args.pop_size is not None or args.n_gen != 100:
        pop = args.pop_size if args.pop_size is not None else 100 * problem.dim
        evolver = EvolverConfig(pop_size=pop, n_generations=args.n_gen)

    config = ExperimentConfig(
        problem=args.problem,
        policy=args.policy,
        q=args.q,
        n_seed=args.n_seed,
        budget=args.budget,
        noise_variance=args.noise,
        nystrom=args.nystrom,
        evolver=evolver,
        replicates=args.reps,
        master_seed=args.seed,
        output_dir=args.out,
        eq_tolerance=args.eq_tol,
        fit_restarts=args.restarts,
        workers=args.workers,
    )
    try:
        traces = run(config)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    table = summarize(traces)
    last = table[-1]
    print(f"{args.policy} on {args.problem}: {len(traces)} replicate(s), "
          f"final HV {last[2]:.6g} +/- {last[3]:.6g} at {int(last[1])} evaluations")
    if args.out:
        print(f"traces and summary written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
