"""GP regression, sample-path, and low-rank square-root checks.

Expected values marked as oracle comparisons are produced by independent
dense linear algebra written out in the test, never by the code under test.
"""

import math

import numpy as np
import pytest

from qpots.errors import InvalidArgumentError, NumericalFailureError
from qpots.gp import (
    Dataset,
    KernelFamily,
    KernelSpec,
    PathSampler,
    build_model,
    chol_psd,
    fit,
    joint_sample,
    kernel_eval,
    kernel_matrix,
    nystrom_sqrt,
    posterior,
    posterior_block,
)

M52 = KernelFamily.MATERN52
SE = KernelFamily.SQUARED_EXPONENTIAL


def dense_posterior_oracle(spec, sites, values, noise, x):
    """Hand-rolled dense solve of the posterior mean/variance pair."""
    kmat = kernel_matrix(spec, sites) + noise * np.eye(len(values))
    kx = kernel_matrix(spec, sites, np.atleast_2d(x))[:, 0]
    sol = np.linalg.solve(kmat, values)
    mean = kx @ sol
    var = kernel_eval(spec, x, x) - kx @ np.linalg.solve(kmat, kx)
    return mean, var


class TestKernel:
    def test_zero_distance_gives_signal_variance(self):
        for family, sv in ((M52, 1.7), (SE, 0.3)):
            spec = KernelSpec(family, np.array([0.2, 0.9]), sv)
            assert kernel_eval(spec, [0.4, 0.6], [0.4, 0.6]) == pytest.approx(sv)

    def test_matern52_closed_form_at_unit_distance(self):
        spec = KernelSpec(M52, np.ones(3), 1.0)
        expected = (1 + math.sqrt(5) + 5.0 / 3.0) * math.exp(-math.sqrt(5))
        assert kernel_eval(spec, [0, 0, 0], [1, 0, 0]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.52399, abs=5e-6)

    def test_squared_exponential_closed_form(self):
        spec = KernelSpec(SE, np.ones(2), 2.0)
        assert kernel_eval(spec, [0, 0], [1, 1]) == pytest.approx(2 * math.exp(-1), abs=1e-12)

    def test_symmetry_and_anisotropy(self):
        spec = KernelSpec(M52, np.array([0.3, 2.0]), 1.2)
        a, b = np.array([0.1, 0.9]), np.array([0.7, 0.2])
        assert kernel_eval(spec, a, b) == pytest.approx(kernel_eval(spec, b, a))
        iso = KernelSpec(M52, np.array([0.3, 0.3]), 1.2)
        assert kernel_eval(spec, a, b) != pytest.approx(kernel_eval(iso, a, b))

    def test_dimension_mismatch(self):
        spec = KernelSpec(M52, np.ones(2), 1.0)
        with pytest.raises(InvalidArgumentError):
            kernel_eval(spec, [0, 0, 0], [1, 0, 0])

    def test_invalid_hyperparameters_rejected(self):
        with pytest.raises(InvalidArgumentError):
            KernelSpec(M52, np.array([0.0, 1.0]), 1.0)
        with pytest.raises(InvalidArgumentError):
            KernelSpec(M52, np.ones(2), -1.0)
        with pytest.raises(InvalidArgumentError):
            KernelSpec(M52, np.array([np.inf]), 1.0)


class TestDataset:
    def test_rejects_sites_outside_unit_box(self):
        with pytest.raises(InvalidArgumentError):
            Dataset(np.array([[1.2, 0.0]]), np.array([0.0]), 0.0)

    def test_rejects_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            Dataset(np.zeros((2, 1)), np.zeros(3), 0.0)

    def test_rejects_duplicates_within_tolerance(self):
        sites = np.array([[0.5, 0.5], [0.5, 0.5 + 1e-12]])
        with pytest.raises(InvalidArgumentError):
            Dataset(sites, np.zeros(2), 0.0)


class TestFit:
    def test_sine_loo_rmse(self):
        # brute-force leave-one-out on the fitted hyperparameters
        rng = np.random.default_rng(0)
        x = np.linspace(0.0, 1.0, 20)[:, None]
        y = np.sin(2 * np.pi * x[:, 0])
        model = fit(Dataset(x, y, 1e-3), restarts=2, rng=rng)
        errs = []
        for i in range(20):
            keep = np.arange(20) != i
            sub = build_model(Dataset(x[keep], y[keep], 1e-3), model.kernel)
            mean, _ = posterior(sub, x[i])
            errs.append(mean - y[i])
        assert np.sqrt(np.mean(np.square(errs))) < 0.1

    def test_constant_data_interpolated(self):
        x = np.linspace(0.0, 1.0, 6)[:, None]
        y = np.full(6, 3.7)
        model = fit(Dataset(x, y, 0.0), restarts=1)
        means, _ = posterior(model, x)
        assert np.max(np.abs(means - 3.7)) < 1e-6

    def test_identical_rng_stream_is_bit_identical(self):
        rng = np.random.default_rng(5)
        x = rng.random((15, 2))
        y = np.cos(4 * x[:, 0]) + x[:, 1]
        ds = Dataset(x, y, 1e-3)
        m1 = fit(ds, restarts=3, rng=np.random.default_rng(9))
        m2 = fit(ds, restarts=3, rng=np.random.default_rng(9))
        assert np.array_equal(m1.kernel.lengthscales, m2.kernel.lengthscales)
        assert m1.kernel.signal_variance == m2.kernel.signal_variance

    def test_requires_two_points(self):
        with pytest.raises(InvalidArgumentError):
            fit(Dataset(np.array([[0.5]]), np.array([1.0]), 0.0))

    def test_cholesky_factor_reconstructs(self):
        rng = np.random.default_rng(1)
        x = rng.random((12, 2))
        y = rng.standard_normal(12)
        model = fit(Dataset(x, y, 1e-3), restarts=1, rng=rng)
        target = (
            kernel_matrix(model.kernel, x)
            + (model.noise_variance_std + model.jitter) * np.eye(12)
        )
        rebuilt = model.chol @ model.chol.T
        rel = np.linalg.norm(rebuilt - target) / np.linalg.norm(target)
        assert rel < 1e-8

    def test_jitter_ladder_failure_carries_ladder(self):
        # numerically rank-one covariance whose scale swamps the whole ladder
        rng = np.random.default_rng(2)
        x = 0.5 + 1e-9 * rng.random((40, 1))
        ds = Dataset(x, np.ones(40), 0.0, duplicate_tolerance=1e-13)
        spec = KernelSpec(SE, np.array([1e2]), 1e20)
        with pytest.raises(NumericalFailureError) as err:
            build_model(ds, spec, standardize=False)
        assert len(err.value.jitter_ladder) > 0


class TestPosterior:
    def test_noiseless_interpolation(self):
        rng = np.random.default_rng(3)
        x = rng.random((10, 2))
        y = np.sin(x[:, 0] * 3) * x[:, 1]
        model = fit(Dataset(x, y, 0.0), restarts=1, rng=rng)
        for i in range(10):
            mean, var = posterior(model, x[i])
            assert abs(mean - y[i]) < 1e-6
            assert var < 1e-6

    def test_reversion_to_prior_far_from_data(self):
        x = np.array([[0.0], [0.01]])
        y = np.array([5.0, 5.1])
        spec = KernelSpec(SE, np.array([0.01]), 2.0)
        model = build_model(Dataset(x, y, 0.0), spec, standardize=False)
        mean, var = posterior(model, np.array([1.0]))
        assert mean == pytest.approx(0.0, abs=1e-8)
        assert var == pytest.approx(2.0, rel=1e-6)

    def test_matches_dense_oracle(self):
        x = np.linspace(0, 1, 5)[:, None]
        y = np.array([0.1, 0.9, -0.4, 0.5, 0.2])
        spec = KernelSpec(M52, np.array([0.3]), 1.4)
        noise = 1e-3
        model = build_model(Dataset(x, y, noise), spec, standardize=False)
        xq = np.array([0.125])
        mean, var = posterior(model, xq)
        omean, ovar = dense_posterior_oracle(spec, x, y, noise, xq)
        assert mean == pytest.approx(omean, abs=1e-10)
        assert var == pytest.approx(ovar, abs=1e-10)

    def test_random_instances_match_dense_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = int(rng.integers(3, 12))
            d = int(rng.integers(1, 4))
            x = rng.random((n, d))
            y = rng.standard_normal(n)
            spec = KernelSpec(
                M52 if rng.random() < 0.5 else SE,
                rng.uniform(0.2, 1.5, size=d),
                float(rng.uniform(0.5, 3.0)),
            )
            noise = float(rng.uniform(0, 1e-2))
            model = build_model(Dataset(x, y, noise), spec, standardize=False)
            xq = rng.random(d)
            mean, var = posterior(model, xq)
            omean, ovar = dense_posterior_oracle(spec, x, y, noise, xq)
            assert mean == pytest.approx(omean, abs=1e-10)
            assert var == pytest.approx(max(ovar, 0.0), abs=1e-10)

    def test_variance_clamped_nonnegative(self):
        rng = np.random.default_rng(6)
        x = rng.random((30, 1))
        model = fit(Dataset(x, np.sin(6 * x[:, 0]), 0.0), restarts=1, rng=rng)
        _, var = posterior(model, x)
        assert np.all(var >= 0.0)

    def test_variance_decay_on_nested_designs(self):
        grid = np.linspace(0, 1, 256)[:, None]
        sup_vars = []
        for n in (5, 10, 20, 40):
            x = np.linspace(0, 1, n)[:, None]
            y = np.sin(2 * np.pi * x[:, 0])
            model = fit(Dataset(x, y, 1e-3), restarts=2, rng=np.random.default_rng(8))
            _, var = posterior(model, grid)
            sup_vars.append(float(np.max(var)))
        assert all(a > b for a, b in zip(sup_vars, sup_vars[1:]))


class TestPathSampler:
    def _model(self, seed=0, n=8, noise=1e-3):
        rng = np.random.default_rng(seed)
        x = rng.random((n, 2))
        y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2
        return build_model(
            Dataset(x, y, noise), KernelSpec(M52, np.array([0.4, 0.6]), 1.5)
        )

    def test_requery_is_exact(self):
        model = self._model()
        sampler = PathSampler([model], np.random.default_rng(1))
        block = np.random.default_rng(2).random((6, 2))
        first = joint_sample(sampler, 0, block)
        again = joint_sample(sampler, 0, block)
        assert np.array_equal(first, again)
        shuffled = block[::-1]
        assert np.array_equal(joint_sample(sampler, 0, shuffled), first[::-1])

    def test_within_block_duplicates_share_value(self):
        model = self._model()
        sampler = PathSampler([model], np.random.default_rng(1))
        block = np.array([[0.2, 0.2], [0.8, 0.1], [0.2, 0.2]])
        vals = joint_sample(sampler, 0, block)
        assert vals[0] == vals[2]

    def test_path_interpolates_training_data_at_low_noise(self):
        model = self._model(noise=0.0)
        sampler = PathSampler([model], np.random.default_rng(3))
        vals = joint_sample(sampler, 0, model.data.sites)
        assert np.max(np.abs(vals - model.data.values)) < 1e-4

    def test_monte_carlo_mean_matches_posterior(self):
        model = self._model()
        point = np.array([[0.35, 0.55]])
        mean, var = posterior(model, point[0])
        n_paths = 2000
        draws = np.empty(n_paths)
        for p in range(n_paths):
            sampler = PathSampler([model], np.random.default_rng(10_000 + p))
            draws[p] = joint_sample(sampler, 0, point)[0]
        assert abs(draws.mean() - mean) <= 3.0 * math.sqrt(var) / math.sqrt(n_paths)

    def test_monte_carlo_covariance_matches_posterior_block(self):
        model = self._model()
        pts = np.array([[0.3, 0.4], [0.6, 0.7]])
        _, cov = posterior_block(model, pts)
        n_paths = 2000
        draws = np.empty((n_paths, 2))
        for p in range(n_paths):
            sampler = PathSampler([model], np.random.default_rng(50_000 + p))
            draws[p] = joint_sample(sampler, 0, pts)
        emp = np.cov(draws.T)
        assert abs(emp[0, 1] - cov[0, 1]) <= 0.10 * abs(cov).max()

    def test_incremental_conditioning_matches_joint_draw_stats(self):
        # drawing A then B must distribute like drawing [A; B] jointly
        model = self._model()
        a = np.array([[0.15, 0.85], [0.9, 0.9]])
        b = np.array([[0.5, 0.2]])
        mean_ex, cov_ex = posterior_block(model, np.vstack([a, b]))
        n_paths = 3000
        draws = np.empty((n_paths, 3))
        for p in range(n_paths):
            sampler = PathSampler([model], np.random.default_rng(90_000 + p))
            va = joint_sample(sampler, 0, a)
            vb = joint_sample(sampler, 0, b)
            draws[p] = np.concatenate([va, vb])
        assert np.allclose(draws.mean(axis=0), mean_ex, atol=4 * np.sqrt(np.diag(cov_ex) / n_paths) + 1e-9)
        assert np.abs(np.cov(draws.T) - cov_ex).max() <= 0.12 * np.abs(cov_ex).max()

    def test_same_seed_same_path(self):
        model = self._model()
        block = np.random.default_rng(4).random((5, 2))
        v1 = joint_sample(PathSampler([model], np.random.default_rng(7)), 0, block)
        v2 = joint_sample(PathSampler([model], np.random.default_rng(7)), 0, block)
        assert np.array_equal(v1, v2)

    def test_landmark_mode_is_consistent_and_unbiased(self):
        model = self._model(n=12)
        landmarks = model.data.sites[:5]
        block = np.random.default_rng(5).random((4, 2))
        sampler = PathSampler([model], np.random.default_rng(11), landmarks=landmarks)
        v1 = joint_sample(sampler, 0, block)
        assert np.array_equal(joint_sample(sampler, 0, block), v1)
        mean, _ = posterior(model, block)
        n_paths = 2000
        acc = np.zeros(4)
        for p in range(n_paths):
            s = PathSampler([model], np.random.default_rng(200_000 + p), landmarks=landmarks)
            acc += joint_sample(s, 0, block)
        assert np.allclose(acc / n_paths, mean, atol=0.08)


class TestNystromSqrt:
    def _cov(self, n, seed=0, lengthscale=0.5):
        rng = np.random.default_rng(seed)
        x = rng.random((n, 2))
        spec = KernelSpec(M52, np.full(2, lengthscale), 1.0)
        return kernel_matrix(spec, x)

    def test_full_rank_exactness(self):
        cov = self._cov(30)
        root = nystrom_sqrt(cov, cov)
        rel = np.linalg.norm(root @ root.T - cov) / np.linalg.norm(cov)
        assert rel < 1e-6

    def test_rank_deficient_exactness(self):
        # rank-r covariance built from an explicit factor; landmarks span the rank
        rng = np.random.default_rng(1)
        factor = rng.standard_normal((20, 4))
        cov = factor @ factor.T
        rows = cov[:6]
        root = nystrom_sqrt(rows, cov[:6, :6])
        assert np.linalg.norm(root @ root.T - cov) / np.linalg.norm(cov) < 1e-6

    def test_rank_one_formula_by_hand(self):
        cov = np.array([[2.0, 0.8, 0.3], [0.8, 1.5, 0.6], [0.3, 0.6, 1.1]])
        root = nystrom_sqrt(cov[:1], cov[:1, :1])
        oracle = np.outer(cov[0], cov[0]) / cov[0, 0]
        assert np.allclose(root @ root.T, oracle, atol=1e-12)

    def test_error_monotone_in_nested_landmarks(self):
        cov = self._cov(60, seed=2)
        errs = []
        for m in (2, 5, 10, 20, 40, 60):
            root = nystrom_sqrt(cov[:m], cov[:m, :m])
            errs.append(np.linalg.norm(root @ root.T - cov))
        assert all(a >= b - 1e-9 for a, b in zip(errs, errs[1:]))

    def test_non_finite_rejected(self):
        bad = np.full((2, 2), np.nan)
        with pytest.raises(NumericalFailureError):
            nystrom_sqrt(bad, bad)


class TestCholPsd:
    def test_reports_jitter_used(self):
        ones = np.ones((5, 5))
        chol, jitter = chol_psd(ones)
        assert jitter > 0.0
        assert np.allclose(chol @ chol.T, ones + jitter * np.eye(5), atol=1e-10)

    def test_failure_carries_ladder(self):
        bad = -np.eye(3)
        with pytest.raises(NumericalFailureError) as err:
            chol_psd(bad)
        assert tuple(err.value.jitter_ladder)
