"""Inner evolutionary solver: dominance rules, crowding, and convergence."""

import numpy as np
import pytest

from qpots.errors import InvalidArgumentError
from qpots.nsga2 import (
    ConstraintTag,
    EvolverConfig,
    Individual,
    constrained_dominates,
    crowding_distance,
    minimize,
)
from qpots.pareto import hypervolume, igd


def linear_tradeoff(x):
    return np.column_stack([x[:, 0], 1.0 - x[:, 0]])


def sphere_pair(x):
    a = np.zeros(x.shape[1])
    b = np.full(x.shape[1], 0.6)
    return np.column_stack([((x - a) ** 2).sum(axis=1), ((x - b) ** 2).sum(axis=1)])


class TestConfig:
    def test_odd_population_rejected(self):
        with pytest.raises(InvalidArgumentError):
            EvolverConfig(pop_size=41)

    def test_bad_probability_rejected(self):
        with pytest.raises(InvalidArgumentError):
            EvolverConfig(crossover_prob=1.5)


class TestConstrainedDominates:
    def test_feasibility_precedence(self):
        a = Individual(np.zeros(1), np.array([9.0, 9.0]), violation=0.0)
        b = Individual(np.zeros(1), np.array([0.0, 0.0]), violation=0.5)
        assert constrained_dominates(a, b)
        assert not constrained_dominates(b, a)

    def test_smaller_violation_wins(self):
        a = Individual(np.zeros(1), np.array([1.0]), violation=0.2)
        b = Individual(np.zeros(1), np.array([0.0]), violation=0.5)
        assert constrained_dominates(a, b)

    def test_both_feasible_reduces_to_dominance(self):
        a = Individual(np.zeros(1), np.array([1.0, 3.0]))
        b = Individual(np.zeros(1), np.array([2.0, 3.0]))
        assert constrained_dominates(a, b)  # minimization
        assert not constrained_dominates(b, a)


class TestCrowding:
    def test_two_points_both_infinite(self):
        front = [Individual(np.zeros(1), np.array([0.0, 1.0])), Individual(np.zeros(1), np.array([1.0, 0.0]))]
        crowding_distance(front)
        assert all(np.isinf(ind.crowding) for ind in front)

    def test_collinear_equally_spaced_middle(self):
        front = [
            Individual(np.zeros(1), np.array([0.0, 2.0])),
            Individual(np.zeros(1), np.array([1.0, 1.0])),
            Individual(np.zeros(1), np.array([2.0, 0.0])),
        ]
        crowding_distance(front)
        assert front[1].crowding == pytest.approx(2.0)
        assert np.isinf(front[0].crowding) and np.isinf(front[2].crowding)

    def test_degenerate_range_interior_zero(self):
        front = [Individual(np.zeros(1), np.array([1.0, 1.0])) for _ in range(4)]
        crowding_distance(front)
        crowds = [ind.crowding for ind in front]
        assert sum(np.isinf(crowds)) == 2
        assert all(c == 0.0 for c in crowds if not np.isinf(c))

    def test_empty_front_rejected(self):
        with pytest.raises(InvalidArgumentError):
            crowding_distance([])


class TestMinimize:
    def test_linear_tradeoff_front(self):
        cfg = EvolverConfig(pop_size=40, n_generations=50, seed=3)
        front = minimize(linear_tradeoff, 1, cfg)
        t = np.linspace(0, 1, 500)
        reference = np.column_stack([t, 1 - t])
        assert igd(front.points, reference) <= 0.01

    def test_single_objective_collapses_to_minimum(self):
        def sq(x):
            return ((x - 0.5) ** 2).sum(axis=1, keepdims=True)

        front = minimize(sq, 2, EvolverConfig(pop_size=40, n_generations=60, seed=0))
        assert np.all(np.abs(front.preimages - 0.5) < 1e-2)

    def test_infeasible_everywhere_returns_empty(self):
        def oracle(x):
            return np.zeros((len(x), 1)), -np.ones((len(x), 1))

        front = minimize(
            oracle,
            2,
            EvolverConfig(pop_size=20, n_generations=5, seed=0),
            constraint_tags=[ConstraintTag.INEQUALITY],
        )
        assert front.is_empty

    def test_determinism(self):
        cfg = EvolverConfig(pop_size=24, n_generations=20, seed=11)
        f1 = minimize(sphere_pair, 3, cfg)
        f2 = minimize(sphere_pair, 3, cfg)
        assert np.array_equal(f1.points, f2.points)
        assert np.array_equal(f1.preimages, f2.preimages)

    def test_genomes_stay_in_unit_box(self):
        seen = []

        def spy(gen, pop, objs, cv, ranks):
            seen.append((pop.min(), pop.max()))

        minimize(sphere_pair, 4, EvolverConfig(pop_size=20, n_generations=15, seed=2), on_generation=spy)
        assert all(lo >= 0.0 and hi <= 1.0 for lo, hi in seen)

    def test_elitism_hypervolume_nondecreasing(self):
        ref = np.array([-1.0, -1.0])
        history = []

        def watch(gen, pop, objs, cv, ranks):
            front = objs[ranks == 0]
            history.append(hypervolume(-front, ref))

        minimize(sphere_pair, 5, EvolverConfig(pop_size=60, n_generations=25, seed=4), on_generation=watch)
        assert all(b >= a - 1e-12 for a, b in zip(history, history[1:]))

    def test_equality_constraint_band(self):
        # equality |x0 - 0.5| <= tol handled through the tolerance band
        def oracle(x):
            return np.column_stack([x[:, 0], 1 - x[:, 0]]), (x[:, 0] - 0.5)[:, None]

        front = minimize(
            oracle,
            1,
            EvolverConfig(pop_size=30, n_generations=40, seed=5),
            constraint_tags=[ConstraintTag.EQUALITY],
            eq_tolerance=0.05,
        )
        assert not front.is_empty
        assert np.all(np.abs(front.preimages[:, 0] - 0.5) <= 0.05 + 1e-9)

    def test_generation_and_population_sweeps_improve_igd(self):
        # compressed version of the generation/population study
        from qpots.harness import solver_validation_sweeps

        sweeps = solver_validation_sweeps(
            ngen_values=(5, 20, 60),
            npop_values=(20, 60),
            fixed_pop=60,
            fixed_ngen=30,
            seeds=(0, 1, 2),
            front_samples=300,
        )
        ngen_igd = list(sweeps["ngen"].values())
        npop_igd = list(sweeps["npop"].values())
        assert all(a >= b for a, b in zip(ngen_igd, ngen_igd[1:]))
        assert all(a >= b for a, b in zip(npop_igd, npop_igd[1:]))
