"""Elitist nondominated-sorting evolutionary solver on the unit box.

Serves as the inner optimizer over cheap posterior sample paths and as a
standalone multiobjective solver for validation against analytic fronts.
Constraints are handled by feasibility dominance: feasible beats infeasible,
infeasible individuals compare by aggregate violation, feasible individuals
compare by Pareto dominance.  Minimization convention throughout this module;
callers maximizing negate their objectives.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .pareto import ParetoFront, peel_fronts


class ConstraintTag(Enum):
    INEQUALITY = "inequality"  # feasible when value >= 0
    EQUALITY = "equality"  # feasible when |value| <= tolerance


@dataclass(frozen=True)
class EvolverConfig:
    pop_size: int = 100
    n_generations: int = 100
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_prob: float | None = None  # default 1/d at run time
    mutation_eta: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 2 or self.pop_size % 2 != 0:
            raise InvalidArgumentError("pop_size must be even and >= 2")
        if self.n_generations < 1:
            raise InvalidArgumentError("n_generations must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if p is not None and not (0.0 <= p <= 1.0):
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")
        if self.crossover_eta <= 0 or self.mutation_eta <= 0:
            raise InvalidArgumentError("distribution indices must be positive")


@dataclass
class Individual:
    genome: np.ndarray
    objectives: np.ndarray
    violation: float = 0.0
    rank: int | None = None
    crowding: float = 0.0


def constrained_dominates(a: Individual, b: Individual) -> bool:
    """Feasibility-dominance comparison of two individuals."""
    a_feas = a.violation <= 0.0
    b_feas = b.violation <= 0.0
    if a_feas and not b_feas:
        return True
    if not a_feas and b_feas:
        return False
    if not a_feas and not b_feas:
        return a.violation < b.violation
    fa, fb = np.asarray(a.objectives), np.asarray(b.objectives)
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def _crowding(objs: np.ndarray) -> np.ndarray:
    n, k = objs.shape
    if n <= 2:
        return np.full(n, np.inf)
    crowd = np.zeros(n)
    for j in range(k):
        order = np.argsort(objs[:, j], kind="stable")
        span = objs[order[-1], j] - objs[order[0], j]
        crowd[order[0]] = np.inf
        crowd[order[-1]] = np.inf
        if span > 0:
            interior = order[1:-1]
            crowd[interior] += (objs[order[2:], j] - objs[order[:-2], j]) / span
    return crowd


def crowding_distance(front: Sequence[Individual]) -> None:
    """Assign crowding distances to a front of individuals in place."""
    if len(front) == 0:
        raise InvalidArgumentError("crowding_distance requires a nonempty front")
    objs = np.array([ind.objectives for ind in front], dtype=float)
    for ind, c in zip(front, _crowding(objs)):
        ind.crowding = float(c)


def _constrained_dominance_matrix(objs: np.ndarray, cv: np.ndarray) -> np.ndarray:
    feas = cv <= 0.0
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=2)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=2)
    obj_dom = le & lt
    fi = feas[:, None]
    fj = feas[None, :]
    both_infeas = ~fi & ~fj
    by_violation = cv[:, None] < cv[None, :]
    return (fi & ~fj) | (both_infeas & by_violation) | (fi & fj & obj_dom)


def _ranks(objs: np.ndarray, cv: np.ndarray) -> np.ndarray:
    fronts = peel_fronts(_constrained_dominance_matrix(objs, cv))
    ranks = np.empty(objs.shape[0], dtype=int)
    for level, front in enumerate(fronts):
        ranks[front] = level
    return ranks


def _crowding_by_front(objs: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    crowd = np.zeros(objs.shape[0])
    for level in np.unique(ranks):
        members = np.flatnonzero(ranks == level)
        crowd[members] = _crowding(objs[members])
    return crowd


def _tournament(rng, ranks: np.ndarray, crowd: np.ndarray) -> np.ndarray:
    n = ranks.size
    a = rng.permutation(n)
    b = rng.permutation(n)
    coin = rng.random(n) < 0.5
    winners = np.empty(n, dtype=int)
    for i in range(n):
        if ranks[a[i]] != ranks[b[i]]:
            winners[i] = a[i] if ranks[a[i]] < ranks[b[i]] else b[i]
        elif crowd[a[i]] != crowd[b[i]]:
            winners[i] = a[i] if crowd[a[i]] > crowd[b[i]] else b[i]
        else:
            winners[i] = a[i] if coin[i] else b[i]
    return winners


def _sbx(rng, parents: np.ndarray, prob: float, eta: float) -> np.ndarray:
    half = parents.shape[0] // 2
    d = parents.shape[1]
    p1 = parents[:half]
    p2 = parents[half : 2 * half]
    u = rng.random((half, d))
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)),
        (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
    )
    gene_mask = rng.random((half, d)) <= 0.5
    pair_mask = (rng.random(half) <= prob)[:, None]
    apply = gene_mask & pair_mask
    c1 = np.where(apply, 0.5 * ((1 + beta) * p1 + (1 - beta) * p2), p1)
    c2 = np.where(apply, 0.5 * ((1 - beta) * p1 + (1 + beta) * p2), p2)
    return np.clip(np.vstack([c1, c2]), 0.0, 1.0)


def _polynomial_mutation(rng, pop: np.ndarray, prob: float, eta: float) -> np.ndarray:
    u = rng.random(pop.shape)
    delta = np.where(
        u < 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)) - 1.0,
        1.0 - (2.0 * (1.0 - u)) ** (1.0 / (eta + 1.0)),
    )
    mask = rng.random(pop.shape) < prob
    return np.clip(pop + delta * mask, 0.0, 1.0)


def _environmental_selection(objs: np.ndarray, ranks: np.ndarray, pop_size: int) -> np.ndarray:
    """Indices surviving into the next generation.

    Whole fronts are admitted in rank order; the first front that overflows is
    truncated by repeatedly dropping its least-crowded member (crowding
    recomputed after each removal, boundary members last to go).
    """
    keep: list[int] = []
    for level in range(int(ranks.max()) + 1):
        members = np.flatnonzero(ranks == level)
        if len(keep) + members.size <= pop_size:
            keep.extend(members.tolist())
            if len(keep) == pop_size:
                break
            continue
        survivors = members.tolist()
        while len(keep) + len(survivors) > pop_size:
            crowd = _crowding(objs[survivors])
            worst = int(np.argmin(crowd))  # ties: lowest index, stable
            survivors.pop(worst)
        keep.extend(survivors)
        break
    return np.array(sorted(keep), dtype=int)


def _violations(cons: np.ndarray | None, tags, eq_tolerance) -> np.ndarray:
    if cons is None:
        return np.zeros(0)
    cons = np.atleast_2d(np.asarray(cons, dtype=float))
    tol = np.broadcast_to(np.asarray(eq_tolerance, dtype=float), (cons.shape[1],))
    viol = np.zeros_like(cons)
    for j, tag in enumerate(tags):
        if tag is ConstraintTag.EQUALITY:
            viol[:, j] = np.maximum(0.0, np.abs(cons[:, j]) - tol[j])
        else:
            viol[:, j] = np.maximum(0.0, -cons[:, j])
    return viol.sum(axis=1)


def minimize(
    evaluate: Callable,
    n_var: int,
    config: EvolverConfig,
    constraint_tags: Sequence[ConstraintTag] | None = None,
    eq_tolerance: float | np.ndarray = 0.0,
    on_generation: Callable | None = None,
    initial_population: np.ndarray | None = None,
) -> ParetoFront:
    """Run the evolutionary solver and return the final nondominated front.

    ``evaluate`` receives a (P, n_var) block of genomes in the unit box and
    returns a (P, K) objective matrix, or a tuple ``(objectives,
    constraint_values)`` when ``constraint_tags`` is given.  Objectives are
    minimized; inequality constraint values are feasible at >= 0, equality
    values at ``|value| <= eq_tolerance``.  When constraints are present and no
    feasible individual survives, the returned front is empty.

    ``initial_population`` rows (unit-box genomes) are injected into the first
    generation, truncated to the population size; the remainder is uniform
    random.  Results stay deterministic given the config seed.
    """
    rng = np.random.default_rng(config.seed)
    tags = tuple(constraint_tags or ())
    pm = config.mutation_prob if config.mutation_prob is not None else 1.0 / n_var

    def run_eval(x: np.ndarray):
        result = evaluate(x)
        if tags:
            objs, cons = result
            return np.atleast_2d(np.asarray(objs, dtype=float)), _violations(cons, tags, eq_tolerance)
        objs = np.atleast_2d(np.asarray(result, dtype=float))
        return objs, np.zeros(objs.shape[0])

    pop = rng.random((config.pop_size, n_var))
    if initial_population is not None and len(initial_population) > 0:
        warm = np.clip(np.atleast_2d(np.asarray(initial_population, dtype=float)), 0.0, 1.0)
        warm = warm[: config.pop_size]
        pop[: warm.shape[0]] = warm
    objs, cv = run_eval(pop)
    ranks = _ranks(objs, cv)
    crowd = _crowding_by_front(objs, ranks)

    for gen in range(config.n_generations):
        parents = _tournament(rng, ranks, crowd)
        children = _sbx(rng, pop[parents], config.crossover_prob, config.crossover_eta)
        children = _polynomial_mutation(rng, children, pm, config.mutation_eta)
        child_objs, child_cv = run_eval(children)

        all_pop = np.vstack([pop, children])
        all_objs = np.vstack([objs, child_objs])
        all_cv = np.concatenate([cv, child_cv])
        all_ranks = _ranks(all_objs, all_cv)
        keep = _environmental_selection(all_objs, all_ranks, config.pop_size)
        pop, objs, cv = all_pop[keep], all_objs[keep], all_cv[keep]
        ranks = all_ranks[keep]
        crowd = _crowding_by_front(objs, ranks)

        if on_generation is not None:
            on_generation(gen, pop, objs, cv, ranks)

    final_ranks = _ranks(objs, cv)
    first = np.flatnonzero(final_ranks == 0)
    if tags and np.all(cv[first] > 0):
        return ParetoFront.empty(objs.shape[1], n_var)
    return ParetoFront(points=objs[first], preimages=pop[first])
