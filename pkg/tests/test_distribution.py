import math

import numpy as np
import pytest
from scipy import stats

from mptraj import (BoundaryCondition, DimensionError, NumericalError,
                    TimePairBatch, TrajectoryDistribution, ValidationError,
                    WeightsDistribution, evaluate_position, gaussian_nll,
                    marginal, pair_nll, per_time_marginals, sample_time_pairs,
                    sample_trajectories, trajectory_distribution)
from mptraj.distribution import (trajectory_distribution_json_dict,
                                 weights_distribution_from_dict,
                                 weights_distribution_json_dict)
from tests.conftest import random_weights_distribution

LN_TWO_PI = 1.8378770664093455


def _case(bank, dofs=2, seed=0, t_b=0.0):
    rng = np.random.default_rng(seed)
    wdist = random_weights_distribution(dofs, bank.weight_dim, rng)
    bc = BoundaryCondition(t_b, rng.standard_normal(dofs),
                           rng.standard_normal(dofs))
    return wdist, bc


class TestWeightsDistribution:
    def test_rejects_upper_entries(self):
        chol = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValidationError, match="lower-triangular"):
            WeightsDistribution(np.zeros(2), chol)

    def test_rejects_zero_diagonal(self):
        with pytest.raises(ValidationError, match="strictly positive"):
            WeightsDistribution(np.zeros(2), np.zeros((2, 2)))

    def test_semidefinite_hook(self):
        wdist = WeightsDistribution(np.ones(2), np.zeros((2, 2)),
                                    allow_semidefinite=True)
        assert np.all(wdist.covariance() == 0.0)

    def test_from_covariance_round_trip(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 4))
        cov = a @ a.T + 0.5 * np.eye(4)
        wdist = WeightsDistribution.from_covariance(rng.standard_normal(4), cov)
        np.testing.assert_allclose(wdist.covariance(), cov, atol=1e-12)

    def test_from_covariance_rejects_indefinite(self):
        cov = np.diag([1.0, -2.0])
        with pytest.raises(NumericalError, match="not positive definite"):
            WeightsDistribution.from_covariance(np.zeros(2), cov)


class TestTrajectoryDistribution:
    def test_index_set_is_dof_major(self, small_bank):
        wdist, bc = _case(small_bank)
        times = np.array([0.0, 0.5, 1.0])
        dist = trajectory_distribution(wdist, bc, times, small_bank)
        assert dist.index_set == ((0.0, 0), (0.5, 0), (1.0, 0),
                                  (0.0, 1), (0.5, 1), (1.0, 1))

    def test_mean_is_mean_weight_trajectory(self, small_bank):
        wdist, bc = _case(small_bank, seed=3)
        times = np.linspace(0.0, 1.0, 9)
        dist = trajectory_distribution(wdist, bc, times, small_bank)
        pos = evaluate_position(wdist.mean, bc, times, small_bank)
        np.testing.assert_array_equal(dist.mean.reshape(2, 9), pos)

    def test_covariance_against_explicit_columns(self, small_bank):
        # independent route: build the weight-to-position map column by
        # column with unit weight vectors and a zero boundary, then form
        # H Sigma_w H^T directly
        wdist, bc = _case(small_bank, seed=5)
        times = np.linspace(0.2, 0.9, 4)
        dist = trajectory_distribution(wdist, bc, times, small_bank,
                                       noise_var=1e-4)
        zero_bc = BoundaryCondition(bc.t_b, np.zeros(2), np.zeros(2))
        columns = []
        for j in range(wdist.dim):
            e = np.zeros(wdist.dim)
            e[j] = 1.0
            columns.append(evaluate_position(e, zero_bc, times, small_bank).ravel())
        hmat = np.stack(columns, axis=1)
        expected = hmat @ wdist.covariance() @ hmat.T + 1e-4 * np.eye(8)
        scale = np.max(np.abs(expected))
        np.testing.assert_allclose(dist.cov, expected, atol=1e-12 * scale)

    def test_positive_semidefinite_without_noise(self, small_bank):
        wdist, bc = _case(small_bank, seed=7)
        times = np.linspace(0.0, 1.0, 12)
        dist = trajectory_distribution(wdist, bc, times, small_bank,
                                       noise_var=0.0)
        eigs = np.linalg.eigvalsh(dist.cov)
        assert eigs.min() > -1e-12 * max(1.0, eigs.max())

    def test_boundary_time_has_zero_variance(self, small_bank):
        wdist, bc = _case(small_bank, t_b=0.25, seed=9)
        dist = trajectory_distribution(wdist, bc, np.array([0.25, 0.8]),
                                       small_bank, noise_var=0.0)
        for idx, (t, _) in enumerate(dist.index_set):
            if t == 0.25:
                assert dist.cov[idx, idx] == 0.0

    def test_negative_noise_rejected(self, small_bank):
        wdist, bc = _case(small_bank)
        with pytest.raises(ValidationError):
            trajectory_distribution(wdist, bc, [0.5], small_bank, noise_var=-1.0)

    def test_asymmetric_cov_rejected(self):
        cov = np.array([[1.0, 0.1], [0.2, 1.0]])
        with pytest.raises(ValidationError, match="symmetric"):
            TrajectoryDistribution(((0.0, 0), (1.0, 0)), np.zeros(2), cov, 0.0)


class TestMarginal:
    def test_sub_block_is_bit_exact(self, small_bank):
        wdist, bc = _case(small_bank, seed=11)
        times = np.linspace(0.0, 1.0, 5)
        dist = trajectory_distribution(wdist, bc, times, small_bank)
        sub = marginal(dist, [1, 3, 8])
        assert sub.index_set == tuple(dist.index_set[i] for i in (1, 3, 8))
        assert np.array_equal(sub.mean, dist.mean[[1, 3, 8]])
        assert np.array_equal(sub.cov, dist.cov[np.ix_([1, 3, 8], [1, 3, 8])])

    def test_out_of_range(self, small_bank):
        wdist, bc = _case(small_bank)
        dist = trajectory_distribution(wdist, bc, [0.5], small_bank)
        with pytest.raises(ValidationError, match="out of range"):
            marginal(dist, [0, 2])

    def test_per_time_marginals_match_joint(self, small_bank):
        wdist, bc = _case(small_bank, seed=13)
        times = np.linspace(0.0, 1.0, 6)
        dist = trajectory_distribution(wdist, bc, times, small_bank,
                                       noise_var=1e-5)
        mtimes, means, covs = per_time_marginals(wdist, bc, times, small_bank,
                                                 noise_var=1e-5)
        t_count = times.shape[0]
        scale = np.max(np.abs(dist.cov))
        for j in range(t_count):
            idx = [j, t_count + j]
            np.testing.assert_allclose(means[j], dist.mean[idx], atol=1e-13)
            np.testing.assert_allclose(covs[j], dist.cov[np.ix_(idx, idx)],
                                       atol=1e-12 * scale)


class TestNll:
    def test_matches_scipy(self, small_bank):
        wdist, bc = _case(small_bank, seed=15)
        times = np.linspace(0.1, 1.0, 4)
        dist = trajectory_distribution(wdist, bc, times, small_bank,
                                       noise_var=1e-4)
        rng = np.random.default_rng(1)
        values = dist.mean + 0.1 * rng.standard_normal(dist.dim)
        ours = gaussian_nll(dist, values)
        ref = -stats.multivariate_normal(mean=dist.mean, cov=dist.cov).logpdf(values)
        assert ours == pytest.approx(ref, rel=1e-9)

    def test_identity_at_mean_is_half_dim_ln_two_pi(self):
        dist = TrajectoryDistribution(((0.0, 0), (1.0, 0)), np.array([0.3, -0.7]),
                                      np.eye(2), 1.0)
        assert gaussian_nll(dist, dist.mean) == pytest.approx(LN_TWO_PI, abs=1e-12)

    def test_singular_covariance_reported(self):
        dist = TrajectoryDistribution(((0.0, 0), (1.0, 0)), np.zeros(2),
                                      np.zeros((2, 2)), 0.0)
        with pytest.raises(NumericalError, match="noise_var"):
            gaussian_nll(dist, np.zeros(2))

    def test_length_mismatch(self):
        dist = TrajectoryDistribution(((0.0, 0),), np.zeros(1), np.eye(1), 0.0)
        with pytest.raises(DimensionError):
            gaussian_nll(dist, np.zeros(3))


class TestSampling:
    def test_deterministic_under_seed(self, small_bank):
        wdist, bc = _case(small_bank, seed=17)
        times = np.linspace(0.0, 1.0, 8)
        a = sample_trajectories(wdist, bc, times, small_bank, 5, seed=42)
        b = sample_trajectories(wdist, bc, times, small_bank, 5, seed=42)
        c = sample_trajectories(wdist, bc, times, small_bank, 5, seed=43)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_every_sample_hits_boundary_exactly(self, small_bank):
        wdist, bc = _case(small_bank, t_b=0.5, seed=19)
        times = np.array([0.0, 0.5, 1.0])
        pos, vel = sample_trajectories(wdist, bc, times, small_bank, 64,
                                       seed=0, with_velocities=True)
        np.testing.assert_array_equal(pos[:, :, 1], np.broadcast_to(bc.y_b, (64, 2)))
        np.testing.assert_array_equal(vel[:, :, 1], np.broadcast_to(bc.dy_b, (64, 2)))

    def test_moments_approach_analytic(self, small_bank):
        wdist, bc = _case(small_bank, seed=21)
        times = np.array([0.3, 0.8])
        count = 20000
        pos = sample_trajectories(wdist, bc, times, small_bank, count, seed=5)
        flat = pos.reshape(count, -1)
        dist = trajectory_distribution(wdist, bc, times, small_bank,
                                       noise_var=0.0)
        emp_mean = flat.mean(axis=0)
        emp_cov = np.cov(flat.T)
        scale = np.linalg.norm(dist.cov)
        assert np.linalg.norm(emp_mean - dist.mean.reshape(2, 2).ravel()) < 0.05 * math.sqrt(np.trace(dist.cov))
        assert np.linalg.norm(emp_cov - dist.cov.reshape(4, 4)) < 0.05 * scale

    def test_count_validation(self, small_bank):
        wdist, bc = _case(small_bank)
        with pytest.raises(ValidationError):
            sample_trajectories(wdist, bc, [0.5], small_bank, 0, seed=0)


class TestTimePairs:
    def test_equal_times_rejected(self):
        with pytest.raises(ValidationError, match="t == t'"):
            TimePairBatch(np.array([[0.5, 0.5]]))

    def test_allow_equal_override(self):
        batch = TimePairBatch(np.array([[0.5, 0.5]]), allow_equal=True)
        assert batch.count == 1

    def test_sampled_pairs_are_distinct_and_sorted(self, small_bank):
        times = np.linspace(0.0, 1.0, 11)
        batch = sample_time_pairs(times, 500, seed=3)
        assert batch.count == 500
        assert np.all(batch.times[:, 0] < batch.times[:, 1])
        assert np.all(np.isin(batch.times, times))

    def test_pair_frequencies_are_uniform(self):
        # 5 grid times -> 10 unordered pairs; chi-square with 9 degrees of
        # freedom has a 0.999 quantile of 27.9
        times = np.linspace(0.0, 1.0, 5)
        batch = sample_time_pairs(times, 100000, seed=11)
        keys = [tuple(p) for p in batch.times]
        _, counts = np.unique(keys, axis=0, return_counts=True)
        assert counts.size == 10
        expected = 100000 / 10
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < 27.9

    def test_pair_nll_identity_case(self, small_bank):
        # degenerate weights plus unit observation noise: at the mean each
        # 2-entry pair contributes exactly ln(2 pi)
        dim = small_bank.weight_dim
        wdist = WeightsDistribution(np.zeros(dim), np.zeros((dim, dim)),
                                    allow_semidefinite=True)
        bc = BoundaryCondition(0.0, np.zeros(1), np.zeros(1))
        batch = TimePairBatch(np.array([[0.2, 0.7], [0.1, 0.9]]))
        means = np.zeros((2, 2))
        nll = pair_nll(batch.with_values(means), wdist, bc, small_bank,
                       noise_var=1.0)
        assert nll == pytest.approx(LN_TWO_PI, abs=1e-12)

    def test_pair_nll_requires_values(self, small_bank):
        wdist, bc = _case(small_bank)
        batch = sample_time_pairs(np.linspace(0, 1, 6), 3, seed=0)
        with pytest.raises(ValidationError, match="truth values"):
            pair_nll(batch, wdist, bc, small_bank)


class TestJson:
    def test_weights_round_trip_bit_exact(self, small_bank):
        rng = np.random.default_rng(23)
        wdist = random_weights_distribution(2, small_bank.weight_dim, rng)
        data = weights_distribution_json_dict(wdist, dofs=2,
                                              num_basis=small_bank.config.num_basis)
        back, dofs, num_basis = weights_distribution_from_dict(data)
        assert (dofs, num_basis) == (2, small_bank.config.num_basis)
        assert np.array_equal(back.mean, wdist.mean)
        assert np.array_equal(back.chol, wdist.chol)

    def test_trajectory_dict_schema(self, small_bank):
        wdist, bc = _case(small_bank)
        dist = trajectory_distribution(wdist, bc, [0.25, 0.75], small_bank)
        data = trajectory_distribution_json_dict(dist)
        assert data["noise_var"] == dist.noise_var
        assert len(data["index_set"]) == dist.dim
        assert len(data["cov_lower"]) == dist.dim * (dist.dim + 1) // 2
