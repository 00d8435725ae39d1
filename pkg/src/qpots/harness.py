"""Outer optimization loop, replicated experiments, and persistent traces.

A run seeds each replicate with uniform-random observations, then alternates
GP refits, batch acquisition (or Sobol baseline draws), and oracle
observations until the evaluation budget is spent, recording the hypervolume
of the feasible nondominated observations and cumulative wall-clock time
after every iteration.  Traces persist incrementally (CSV plus a JSON state
sidecar) so an interrupted replicate resumes from its last completed
iteration and reproduces the uninterrupted trace.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .acquisition import AcquisitionRound, acquire
from .errors import (
    AcquisitionFailureError,
    InvalidArgumentError,
    NotAvailableError,
    NumericalFailureError,
)
from .gp import Dataset, GpModel, NystromConfig, fit
from .nsga2 import ConstraintTag, EvolverConfig, minimize
from .pareto import hypervolume, igd, nondominated_filter
from .problems import NoisyOracle, Problem, get_problem

SOBOL_MAX_DIM = 21201  # largest dimension with published direction numbers

TRACE_HEADER = ["iter", "evals", "hypervolume", "cum_seconds", "points"]
SUMMARY_HEADER = ["iter", "evals", "hv_mean", "hv_std"]


@dataclass
class ExperimentConfig:
    """Resolved settings for one experiment (all replicates, one policy)."""

    problem: str
    budget: int
    policy: str = "qpots"
    q: int = 1
    n_seed: int | None = None  # default 10 * d
    noise_variance: float = 1e-3
    nystrom: NystromConfig = field(default_factory=NystromConfig)
    evolver: EvolverConfig | None = None  # default pop 100 * d
    replicates: int = 10
    master_seed: int = 0
    output_dir: str | None = None
    eq_tolerance: float = 1e-2
    fit_restarts: int = 4
    max_retries: int = 5
    hv_noiseless: bool = False
    workers: int = 1

    def resolve(self, problem: Problem) -> "ExperimentConfig":
        """Fill in dimension-dependent defaults and validate."""
        n_seed = self.n_seed if self.n_seed is not None else 10 * problem.dim
        evolver = self.evolver or EvolverConfig(pop_size=100 * problem.dim, n_generations=100)
        cfg = ExperimentConfig(
            problem=self.problem,
            budget=self.budget,
            policy=self.policy,
            q=self.q,
            n_seed=n_seed,
            noise_variance=self.noise_variance,
            nystrom=self.nystrom,
            evolver=evolver,
            replicates=self.replicates,
            master_seed=self.master_seed,
            output_dir=self.output_dir,
            eq_tolerance=self.eq_tolerance,
            fit_restarts=self.fit_restarts,
            max_retries=self.max_retries,
            hv_noiseless=self.hv_noiseless,
            workers=self.workers,
        )
        if cfg.policy not in ("qpots", "sobol"):
            raise InvalidArgumentError(f"unknown policy {cfg.policy!r}")
        if cfg.n_seed < 2:
            raise InvalidArgumentError("n_seed must be >= 2")
        if cfg.budget <= cfg.n_seed:
            raise InvalidArgumentError("budget must exceed n_seed")
        if (cfg.budget - cfg.n_seed) % cfg.q != 0:
            raise InvalidArgumentError("budget - n_seed must be divisible by q")
        if cfg.replicates < 1:
            raise InvalidArgumentError("replicates must be >= 1")
        return cfg

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["nystrom"] = {
            "enabled": self.nystrom.enabled,
            "landmark_rule": self.nystrom.landmark_rule.value,
            "max_landmarks": self.nystrom.max_landmarks,
        }
        if self.evolver is not None:
            d["evolver"] = asdict(self.evolver)
        return d


@dataclass
class IterationRecord:
    iteration: int
    evals: int
    hypervolume: float
    cum_seconds: float
    points: np.ndarray  # (k, d) natural units; empty for the seed record

    def format_points(self) -> str:
        return ";".join(",".join(repr(float(v)) for v in row) for row in np.atleast_2d(self.points)) \
            if np.asarray(self.points).size else ""


@dataclass
class RunTrace:
    """Per-iteration records for one replicate."""

    replicate: int
    records: list[IterationRecord] = field(default_factory=list)

    @property
    def hypervolumes(self) -> np.ndarray:
        return np.array([r.hypervolume for r in self.records])

    @property
    def final_hypervolume(self) -> float:
        return self.records[-1].hypervolume

    def write_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for r in self.records:
                writer.writerow(
                    [r.iteration, r.evals, repr(float(r.hypervolume)), repr(float(r.cum_seconds)), r.format_points()]
                )


@dataclass
class SeedDesign:
    """Initial design: sites (unit and natural coordinates) with observations."""

    sites_unit: np.ndarray
    sites_natural: np.ndarray
    objectives: np.ndarray  # maximization convention, noisy
    constraints: np.ndarray


def seed_design(problem: Problem, n_seed: int, rng, noise_variance: float = 0.0) -> SeedDesign:
    """Uniform-random initial design observed once through a noisy oracle.

    The same rng stream drives both the site draw and the observation noise,
    so a fixed (master seed, replicate) pair yields the identical design for
    every policy.
    """
    if n_seed < 2:
        raise InvalidArgumentError("n_seed must be >= 2")
    sites_unit = rng.random((n_seed, problem.dim))
    sites_natural = problem.denormalize(sites_unit)
    oracle = NoisyOracle(problem, noise_variance, rng)
    objs, cons = oracle.observe(sites_natural)
    return SeedDesign(sites_unit, sites_natural, objs, cons)


def sobol_batch(dim: int, index: int, q: int) -> np.ndarray:
    """Points ``index .. index+q-1`` of the unscrambled base-2 Sobol sequence.

    Returned in the unit box; callers map to their natural domain.
    """
    if dim < 1 or dim > SOBOL_MAX_DIM:
        raise NotAvailableError(f"Sobol direction numbers unavailable for dimension {dim}")
    if index < 0 or q < 1:
        raise InvalidArgumentError("index must be >= 0 and q >= 1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        engine = qmc.Sobol(d=dim, scramble=False)
        if index:
            engine.fast_forward(index)
        return engine.random(q)


def feasible_mask(constraints: np.ndarray, tags: Sequence[ConstraintTag], eq_tolerance: float) -> np.ndarray:
    cons = np.atleast_2d(np.asarray(constraints, dtype=float))
    ok = np.ones(cons.shape[0], dtype=bool)
    for j, tag in enumerate(tags):
        if tag is ConstraintTag.EQUALITY:
            ok &= np.abs(cons[:, j]) <= eq_tolerance
        else:
            ok &= cons[:, j] >= 0.0
    return ok


def observed_hypervolume(
    problem: Problem,
    objectives: np.ndarray,
    constraints: np.ndarray,
    eq_tolerance: float = 1e-2,
) -> float:
    """Hypervolume of the feasible nondominated observations w.r.t. the registry reference."""
    objo = np.atleast_2d(objectives)
    mask = feasible_mask(constraints, problem.constraint_tags, eq_tolerance)
    if not mask.any():
        return 0.0
    feas = objo[mask]
    front = feas[nondominated_filter(feas)]
    return hypervolume(front, problem.reference_point)


def _fit_models(
    sites: np.ndarray,
    values: np.ndarray,
    noise_variance: float,
    restarts: int,
    rng,
) -> list[GpModel]:
    models = []
    for k in range(values.shape[1]):
        ds = Dataset(sites, values[:, k], noise_variance)
        models.append(fit(ds, restarts=restarts, rng=rng))
    return models


class _StateCodec:
    """JSON round trip for a replicate's resumable state."""

    @staticmethod
    def dump(path: Path, state: dict) -> None:
        payload = dict(state)
        for key in ("sites_unit", "objectives", "constraints"):
            payload[key] = np.asarray(state[key]).tolist()
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            json.dump(payload, fh)
        tmp.replace(path)

    @staticmethod
    def load(path: Path) -> dict:
        with open(path) as fh:
            state = json.load(fh)
        for key in ("sites_unit", "objectives", "constraints"):
            state[key] = np.asarray(state[key], dtype=float)
        return state


def run_replicate(
    config: ExperimentConfig,
    problem: Problem,
    replicate: int,
    out_dir: Path | None = None,
    clock: Callable[[], float] = time.perf_counter,
    on_iteration: Callable | None = None,
) -> RunTrace:
    """Run (or resume) one replicate and return its trace.

    ``on_iteration(iteration, sites_unit, objectives, constraints, models)``
    fires after each recorded iteration with the data gathered so far;
    ``models`` is None for the seed record and for the Sobol policy.
    """
    cfg = config
    d = problem.dim
    tags = problem.constraint_tags
    trace = RunTrace(replicate=replicate)
    trace_path = state_path = events_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_path = out_dir / f"trace_rep{replicate}.csv"
        state_path = out_dir / f"state_rep{replicate}.json"
        events_path = out_dir / f"events_rep{replicate}.log"

    rng = np.random.default_rng(cfg.master_seed ^ replicate)
    oracle = NoisyOracle(problem, cfg.noise_variance, rng)

    if state_path is not None and state_path.exists():
        state = _StateCodec.load(state_path)
        sites_unit = state["sites_unit"]
        objectives = state["objectives"]
        constraints = state["constraints"]
        rng.bit_generator.state = state["rng_state"]
        iteration = int(state["iteration"])
        sobol_index = int(state["sobol_index"])
        cum_seconds = float(state["cum_seconds"])
        for row in state["records"]:
            trace.records.append(
                IterationRecord(
                    iteration=int(row[0]),
                    evals=int(row[1]),
                    hypervolume=float(row[2]),
                    cum_seconds=float(row[3]),
                    points=np.array(row[4], dtype=float).reshape(-1, d) if row[4] else np.empty((0, d)),
                )
            )
    else:
        t0 = clock()
        design = seed_design(problem, cfg.n_seed, rng, cfg.noise_variance)
        sites_unit = design.sites_unit
        objectives = np.atleast_2d(design.objectives)
        constraints = np.atleast_2d(design.constraints)
        cum_seconds = clock() - t0
        iteration = 0
        sobol_index = 0
        hv = _trace_hv(cfg, problem, sites_unit, objectives, constraints)
        trace.records.append(
            IterationRecord(0, sites_unit.shape[0], hv, cum_seconds, np.empty((0, d)))
        )
        _persist(cfg, trace, trace_path, state_path, rng, iteration, sobol_index, cum_seconds,
                 sites_unit, objectives, constraints)
        if on_iteration is not None:
            on_iteration(0, sites_unit, objectives, constraints, None)

    while sites_unit.shape[0] < cfg.budget:
        k = min(cfg.q, cfg.budget - sites_unit.shape[0])
        iteration += 1
        t0 = clock()
        models = None
        try:
            if cfg.policy == "sobol":
                new_unit = sobol_batch(d, sobol_index, k)
                sobol_index += k
            else:
                obj_models = _fit_models(
                    sites_unit, objectives, cfg.noise_variance, cfg.fit_restarts, rng
                )
                con_models = (
                    _fit_models(sites_unit, constraints, cfg.noise_variance, cfg.fit_restarts, rng)
                    if tags
                    else []
                )
                models = obj_models + con_models
                round_ = AcquisitionRound(
                    objective_models=obj_models,
                    constraint_models=con_models,
                    constraint_tags=tags,
                    observed_sites=sites_unit,
                    evolver=_reseed(cfg.evolver, rng),
                    q=k,
                    eq_tolerance=cfg.eq_tolerance,
                    nystrom=cfg.nystrom,
                )
                new_unit = acquire(round_, rng, max_retries=cfg.max_retries).points
        except (AcquisitionFailureError, NumericalFailureError, InvalidArgumentError) as exc:
            new_unit = rng.random((1, d))
            _log_event(events_path, iteration, f"fallback random point: {exc}")

        # never observe an exact duplicate of an already observed site
        fresh = []
        for row in new_unit:
            if np.linalg.norm(sites_unit - row[None, :], axis=1).min() <= 1e-9:
                row = rng.random(d)
                _log_event(events_path, iteration, "duplicate candidate replaced by random point")
            fresh.append(row)
        new_unit = np.array(fresh)

        objs, cons = oracle.observe(problem.denormalize(new_unit))
        sites_unit = np.vstack([sites_unit, new_unit])
        objectives = np.vstack([objectives, np.atleast_2d(objs)])
        constraints = np.vstack([constraints, np.atleast_2d(cons)])

        hv = _trace_hv(cfg, problem, sites_unit, objectives, constraints)
        cum_seconds += clock() - t0
        trace.records.append(
            IterationRecord(
                iteration,
                sites_unit.shape[0],
                hv,
                cum_seconds,
                problem.denormalize(new_unit),
            )
        )
        _persist(cfg, trace, trace_path, state_path, rng, iteration, sobol_index, cum_seconds,
                 sites_unit, objectives, constraints)
        if on_iteration is not None:
            on_iteration(iteration, sites_unit, objectives, constraints, models)

    return trace


def _reseed(evolver: EvolverConfig, rng) -> EvolverConfig:
    seed = int(rng.integers(0, 2**63 - 1))
    return EvolverConfig(
        pop_size=evolver.pop_size,
        n_generations=evolver.n_generations,
        crossover_prob=evolver.crossover_prob,
        crossover_eta=evolver.crossover_eta,
        mutation_prob=evolver.mutation_prob,
        mutation_eta=evolver.mutation_eta,
        seed=seed,
    )


def _trace_hv(cfg, problem, sites_unit, objectives, constraints) -> float:
    objs, cons = objectives, constraints
    if cfg.hv_noiseless:
        objs, cons = problem.evaluate(problem.denormalize(sites_unit))
        objs, cons = np.atleast_2d(objs), np.atleast_2d(cons)
    return observed_hypervolume(problem, objs, cons, cfg.eq_tolerance)


def _log_event(events_path: Path | None, iteration: int, message: str) -> None:
    if events_path is None:
        return
    with open(events_path, "a") as fh:
        fh.write(f"iteration {iteration}: {message}\n")


def _persist(cfg, trace, trace_path, state_path, rng, iteration, sobol_index, cum_seconds,
             sites_unit, objectives, constraints) -> None:
    if trace_path is None:
        return
    trace.write_csv(trace_path)
    _StateCodec.dump(
        state_path,
        {
            "iteration": iteration,
            "sobol_index": sobol_index,
            "cum_seconds": cum_seconds,
            "rng_state": rng.bit_generator.state,
            "sites_unit": sites_unit,
            "objectives": objectives,
            "constraints": constraints,
            "records": [
                [r.iteration, r.evals, r.hypervolume, r.cum_seconds,
                 np.asarray(r.points).ravel().tolist()]
                for r in trace.records
            ],
        },
    )


def run(
    config: ExperimentConfig,
    clock: Callable[[], float] = time.perf_counter,
    on_iteration: Callable | None = None,
) -> list[RunTrace]:
    """Run all replicates of an experiment, persisting traces and a summary."""
    problem = get_problem(config.problem)
    cfg = config.resolve(problem)
    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "config.json", "w") as fh:
            json.dump(cfg.to_json_dict(), fh, indent=2)

    def one(r: int) -> RunTrace:
        return run_replicate(cfg, problem, r, out_dir, clock=clock, on_iteration=on_iteration)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            traces = list(pool.map(one, range(cfg.replicates)))
    else:
        traces = [one(r) for r in range(cfg.replicates)]

    if out_dir is not None:
        write_summary(out_dir / "summary.csv", traces)
    return traces


def summarize(traces: Sequence[RunTrace]) -> np.ndarray:
    """Per-iteration mean and sample std (n-1) of hypervolume across replicates.

    Returns rows of (iter, evals, hv_mean, hv_std); replicate traces must
    align exactly.
    """
    if len(traces) < 1:
        raise InvalidArgumentError("summarize requires at least one trace")
    lengths = {len(t.records) for t in traces}
    if len(lengths) != 1:
        raise InvalidArgumentError("replicate traces have unequal lengths")
    hv = np.array([[r.hypervolume for r in t.records] for t in traces])
    iters = np.array([r.iteration for r in traces[0].records])
    evals = np.array([r.evals for r in traces[0].records])
    mean = hv.mean(axis=0)
    std = hv.std(axis=0, ddof=1) if hv.shape[0] > 1 else np.zeros(hv.shape[1])
    return np.column_stack([iters, evals, mean, std])


def write_summary(path: Path, traces: Sequence[RunTrace]) -> None:
    table = summarize(traces)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for it, ev, m, s in table:
            writer.writerow([int(it), int(ev), repr(float(m)), repr(float(s))])


# ---------------------------------------------------------------------------
# Solver validation sweeps (generation / population studies)
# ---------------------------------------------------------------------------


def _demo_evaluate(problem: Problem):
    def evaluate(u: np.ndarray):
        x = problem.denormalize(u)
        objs, cons = problem.evaluate(x)
        return -np.atleast_2d(objs), np.atleast_2d(cons)

    return evaluate


def solver_validation_sweeps(
    ngen_values: Sequence[int] = (10, 20, 30, 40, 50, 100),
    npop_values: Sequence[int] = (20, 50, 100, 250, 500),
    fixed_pop: int = 100,
    fixed_ngen: int = 50,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    front_samples: int = 600,
) -> dict:
    """Median normalized IGD of the solver on the constrained demo problem.

    Sweeps the generation count at fixed population and the population size at
    fixed generations; the front is compared against the analytic front in
    range-normalized objective space.
    """
    problem = get_problem("constrained-demo")
    reference = problem.analytic_front_fn(front_samples)
    evaluate = _demo_evaluate(problem)

    def median_igd(pop: int, ngen: int) -> float:
        vals = []
        for seed in seeds:
            cfg = EvolverConfig(pop_size=pop, n_generations=ngen, seed=seed)
            front = minimize(
                evaluate, problem.dim, cfg, constraint_tags=problem.constraint_tags
            )
            if front.is_empty:
                vals.append(np.inf)
                continue
            vals.append(igd(front.points, reference, normalize=True))
        return float(np.median(vals))

    return {
        "ngen": {int(g): median_igd(fixed_pop, g) for g in ngen_values},
        "npop": {int(p): median_igd(p, fixed_ngen) for p in npop_values},
    }
