"""Outer loop: seeding, Sobol baseline, traces, persistence, summaries."""

import csv
import math
import numpy as np
import pytest

from qpots.errors import InvalidArgumentError, NotAvailableError
from qpots.harness import (
    ExperimentConfig,
    RunTrace,
    IterationRecord,
    observed_hypervolume,
    run,
    run_replicate,
    seed_design,
    sobol_batch,
    summarize,
)
from qpots.nsga2 import EvolverConfig
from qpots.problems import get_problem


def tick_clock():
    """Deterministic stand-in for perf_counter: one unit per call."""
    counter = {"t": 0.0}

    def clock():
        counter["t"] += 1.0
        return counter["t"]

    return clock


def small_config(**over):
    base = dict(
        problem="branin-currin",
        policy="qpots",
        q=2,
        n_seed=8,
        budget=14,
        noise_variance=1e-3,
        evolver=EvolverConfig(pop_size=16, n_generations=6),
        replicates=2,
        master_seed=123,
        fit_restarts=1,
    )
    base.update(over)
    return ExperimentConfig(**base)


class TestSeedDesign:
    def test_paired_across_policies(self):
        problem = get_problem("zdt3")
        a = seed_design(problem, 12, np.random.default_rng(99 ^ 3), 1e-3)
        b = seed_design(problem, 12, np.random.default_rng(99 ^ 3), 1e-3)
        assert np.array_equal(a.sites_unit, b.sites_unit)
        assert np.array_equal(a.objectives, b.objectives)

    def test_sites_within_bounds(self):
        problem = get_problem("osy")
        design = seed_design(problem, 50, np.random.default_rng(0))
        lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
        assert np.all(design.sites_natural >= lo) and np.all(design.sites_natural <= hi)

    def test_uniformity(self):
        problem = get_problem("branin-currin")
        design = seed_design(problem, 10_000, np.random.default_rng(1))
        assert np.all(np.abs(design.sites_unit.mean(axis=0) - 0.5) < 0.02)

    def test_requires_two_points(self):
        with pytest.raises(InvalidArgumentError):
            seed_design(get_problem("zdt3"), 1, np.random.default_rng(0))


class TestSobol:
    def test_first_point_is_lower_corner(self):
        pts = sobol_batch(3, 0, 2)
        assert np.array_equal(pts[0], np.zeros(3))

    def test_prefix_is_stratified_per_dimension(self):
        for dim in (2, 5):
            pts = sobol_batch(dim, 0, 64)
            lower = (pts < 0.5).sum(axis=0)
            assert np.all(lower == 32)

    def test_deterministic(self):
        assert np.array_equal(sobol_batch(4, 7, 5), sobol_batch(4, 7, 5))

    def test_fast_forward_consistent_with_prefix(self):
        whole = sobol_batch(3, 0, 12)
        tail = sobol_batch(3, 5, 7)
        assert np.allclose(whole[5:], tail)

    def test_unsupported_dimension(self):
        with pytest.raises(NotAvailableError):
            sobol_batch(30_000, 0, 1)


class TestObservedHypervolume:
    def test_infeasible_points_excluded(self):
        problem = get_problem("osy")
        objs = np.array([[10.0, -5.0], [20.0, -4.0]])
        cons = np.array([[1, 1, 1, 1, 1, 1], [-1, 1, 1, 1, 1, 1]], dtype=float)
        with_infeasible = observed_hypervolume(problem, objs, cons)
        only_first = observed_hypervolume(problem, objs[:1], cons[:1])
        assert with_infeasible == only_first

    def test_no_feasible_gives_zero(self):
        problem = get_problem("osy")
        objs = np.array([[10.0, -5.0]])
        cons = -np.ones((1, 6))
        assert observed_hypervolume(problem, objs, cons) == 0.0


class TestRun:
    def test_budget_accounting_and_trace_shape(self, tmp_path):
        cfg = small_config(output_dir=str(tmp_path))
        traces = run(cfg, clock=tick_clock())
        assert len(traces) == 2
        for trace in traces:
            assert trace.records[0].evals == 8
            assert trace.records[-1].evals == 14
            assert [r.evals for r in trace.records] == [8, 10, 12, 14]
            secs = [r.cum_seconds for r in trace.records]
            assert all(b >= a for a, b in zip(secs, secs[1:]))

    def test_sobol_policy_accounting(self, tmp_path):
        cfg = small_config(policy="sobol", output_dir=str(tmp_path))
        traces = run(cfg, clock=tick_clock())
        assert all(t.records[-1].evals == 14 for t in traces)

    def test_budget_equal_seed_rejected(self):
        with pytest.raises(InvalidArgumentError):
            small_config(budget=8).resolve(get_problem("branin-currin"))

    def test_budget_divisibility_enforced(self):
        with pytest.raises(InvalidArgumentError):
            small_config(budget=15).resolve(get_problem("branin-currin"))

    def test_noiseless_hv_monotone(self, tmp_path):
        cfg = small_config(noise_variance=0.0, output_dir=str(tmp_path), replicates=1)
        (trace,) = run(cfg, clock=tick_clock())
        hv = trace.hypervolumes
        assert np.all(np.diff(hv) >= -1e-12)

    def test_determinism_byte_identical(self, tmp_path):
        cfg1 = small_config(output_dir=str(tmp_path / "a"))
        cfg2 = small_config(output_dir=str(tmp_path / "b"))
        run(cfg1, clock=tick_clock())
        run(cfg2, clock=tick_clock())
        for rep in range(2):
            a = (tmp_path / "a" / f"trace_rep{rep}.csv").read_bytes()
            b = (tmp_path / "b" / f"trace_rep{rep}.csv").read_bytes()
            assert a == b

    def test_resume_reproduces_uninterrupted_run(self, tmp_path):
        problem = get_problem("branin-currin")
        cfg = small_config().resolve(problem)

        full_dir = tmp_path / "full"
        trace_full = run_replicate(cfg, problem, 0, full_dir, clock=tick_clock())

        part_dir = tmp_path / "part"
        calls = {"n": 0}

        class Interrupt(Exception):
            pass

        def interrupting(iteration, *args):
            calls["n"] += 1
            if iteration == 1:
                raise Interrupt()

        with pytest.raises(Interrupt):
            run_replicate(cfg, problem, 0, part_dir, clock=tick_clock(), on_iteration=interrupting)
        trace_resumed = run_replicate(cfg, problem, 0, part_dir, clock=tick_clock())

        assert (part_dir / "trace_rep0.csv").read_bytes() == (full_dir / "trace_rep0.csv").read_bytes()
        assert trace_resumed.final_hypervolume == trace_full.final_hypervolume

    def test_paired_seed_design_across_policies(self, tmp_path):
        problem = get_problem("branin-currin")
        qp = run_replicate(small_config().resolve(problem), problem, 1, tmp_path / "q", clock=tick_clock())
        so = run_replicate(
            small_config(policy="sobol").resolve(problem), problem, 1, tmp_path / "s", clock=tick_clock()
        )
        assert qp.records[0].hypervolume == so.records[0].hypervolume

    def test_config_json_written(self, tmp_path):
        import json

        cfg = small_config(output_dir=str(tmp_path))
        run(cfg, clock=tick_clock())
        payload = json.loads((tmp_path / "config.json").read_text())
        assert payload["problem"] == "branin-currin"
        assert payload["n_seed"] == 8
        assert payload["nystrom"]["enabled"] is False
        assert payload["evolver"]["pop_size"] == 16

    def test_trace_csv_schema(self, tmp_path):
        cfg = small_config(output_dir=str(tmp_path), replicates=1)
        run(cfg, clock=tick_clock())
        with open(tmp_path / "trace_rep0.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "evals", "hypervolume", "cum_seconds", "points"]
        assert rows[1][4] == ""  # seed record carries no acquisition points
        pts = rows[2][4].split(";")
        assert len(pts) == 2 and all(len(p.split(",")) == 2 for p in pts)


class TestSummarize:
    def _trace(self, rep, hvs):
        records = [
            IterationRecord(i, 8 + 2 * i, hv, float(i), np.empty((0, 2)))
            for i, hv in enumerate(hvs)
        ]
        return RunTrace(replicate=rep, records=records)

    def test_single_replicate_zero_std(self):
        table = summarize([self._trace(0, [1.0, 2.0])])
        assert np.array_equal(table[:, 3], [0.0, 0.0])

    def test_sample_std_convention(self):
        table = summarize([self._trace(0, [1.0, 1.0]), self._trace(1, [3.0, 3.0])])
        assert table[0, 2] == pytest.approx(2.0)
        assert table[0, 3] == pytest.approx(math.sqrt(2.0))

    def test_unequal_lengths_rejected(self):
        with pytest.raises(InvalidArgumentError):
            summarize([self._trace(0, [1.0]), self._trace(1, [1.0, 2.0])])

    def test_summary_csv(self, tmp_path):
        cfg = small_config(output_dir=str(tmp_path))
        run(cfg, clock=tick_clock())
        with open(tmp_path / "summary.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "evals", "hv_mean", "hv_std"]
        assert len(rows) == 5
