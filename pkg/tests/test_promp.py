import numpy as np
import pytest

from oracles import ridge_by_lstsq
from prompkls.analysis import reconstruction_loss
from prompkls.errors import (
    IncompatibleSeries,
    InsufficientDemonstrations,
    InvalidArgument,
    SingularSystemError,
)
from prompkls.phase_basis import feature_matrix, make_basis_config, make_phase_grid
from prompkls.promp import (
    CHANNELS,
    GaussianSeries,
    PrompModel,
    TrajectorySet,
    check_compatible,
    empirical_series,
    fit_coupled_weights,
    fit_promp,
    fit_single_weights,
    joint_marginal,
    marginal_series,
    sample_trajectories,
)


def _model(m, d, mean, cov, noise, t=21):
    return PrompModel(make_basis_config(m), make_phase_grid(t), np.asarray(mean, float),
                      np.asarray(cov, float), noise, 10)


class TestSingleWeights:
    def test_hand_solved_constant_basis(self):
        phi = np.ones((2, 1))
        assert fit_single_weights([2.0, 4.0], phi, 0.0) == pytest.approx([3.0], abs=1e-14)
        assert fit_single_weights([2.0, 4.0], phi, 1.0) == pytest.approx([2.0], abs=1e-14)

    def test_zero_targets(self, grid, rng):
        phi = feature_matrix(make_basis_config(8), grid)
        assert np.all(fit_single_weights(np.zeros((3, 101)), phi, 0.5) == 0.0)

    def test_matches_lstsq(self, grid, rng):
        phi = feature_matrix(make_basis_config(12), grid)
        y = rng.normal(size=(6, 101))
        w = fit_single_weights(y, phi, 1e-3).reshape(6, 12)
        for d in range(6):
            np.testing.assert_allclose(w[d], ridge_by_lstsq(phi, y[d], 1e-3), rtol=1e-9, atol=1e-11)

    def test_channel_blocked_layout(self, grid, rng):
        phi = feature_matrix(make_basis_config(4), grid)
        y = rng.normal(size=(3, 101))
        w = fit_single_weights(y, phi, 0.0)
        np.testing.assert_allclose(w[4:8], fit_single_weights(y[1], phi, 0.0), rtol=1e-12)

    def test_coupled_equals_blocks(self, grid, rng):
        phi = feature_matrix(make_basis_config(10), grid)
        y = rng.normal(size=(6, 101))
        np.testing.assert_allclose(fit_coupled_weights(y, phi, 1e-6), fit_single_weights(y, phi, 1e-6),
                                   rtol=0, atol=1e-10)

    def test_shape_mismatch(self, grid):
        phi = feature_matrix(make_basis_config(5), grid)
        with pytest.raises(InvalidArgument):
            fit_single_weights(np.zeros((6, 50)), phi, 0.0)
        with pytest.raises(InvalidArgument):
            fit_single_weights(np.zeros((6, 101)), phi, -1.0)

    def test_singular_names_channel(self):
        phi = feature_matrix(make_basis_config(5), make_phase_grid(3))
        with pytest.raises(SingularSystemError, match="hand_x"):
            fit_single_weights(np.zeros((6, 3)), phi, 0.0, CHANNELS)
        # damping restores solvability
        assert np.all(np.isfinite(fit_single_weights(np.ones((6, 3)), phi, 1e-3)))


class TestFit:
    def test_identical_demos_cov_is_jitter(self, grid):
        demo = np.sin(np.linspace(0, 3, 101))[None, :].repeat(2, 0)
        data = TrajectorySet(np.stack([demo, demo]), grid)
        model = fit_promp(data, make_basis_config(10))
        np.testing.assert_array_equal(model.weight_cov, 1e-12 * np.eye(20))

    def test_noiseless_round_trip(self, grid, rng):
        basis = make_basis_config(20, 0.0)
        phi = feature_matrix(basis, grid)
        w_true = rng.normal(size=(6, 20))
        values = np.einsum("tm,dm->dt", phi, w_true)[None].repeat(5, 0)
        model = fit_promp(TrajectorySet(values, grid), basis)
        np.testing.assert_allclose(model.weight_mean, w_true.reshape(-1), rtol=0, atol=1e-8)
        assert model.noise_var == 1e-8

    def test_monte_carlo_mean(self, grid, rng):
        basis = make_basis_config(6)
        phi = feature_matrix(basis, grid)
        mu = rng.normal(size=6)
        sd = 0.5
        w = mu + sd * rng.standard_normal((500, 1, 6))
        data = TrajectorySet(np.einsum("tm,ndm->ndt", phi, w), grid, ("x",))
        model = fit_promp(data, basis)
        assert np.all(np.abs(model.weight_mean - mu) < 3 * sd / np.sqrt(500))

    def test_cov_symmetric_psd(self, synth_set, basis):
        model = fit_promp(synth_set, basis)
        cov = model.weight_cov
        assert np.max(np.abs(cov - cov.T)) <= 1e-10
        assert np.linalg.eigvalsh(cov).min() >= 0
        assert model.noise_var >= 1e-8

    def test_errors(self, grid, basis):
        with pytest.raises(InsufficientDemonstrations):
            fit_promp(TrajectorySet(np.zeros((1, 6, 101)), grid), basis)
        bad = np.zeros((3, 6, 101))
        bad[1, 2, 40] = np.nan
        with pytest.raises(InvalidArgument):
            fit_promp(TrajectorySet(bad, grid), basis)
        with pytest.raises(InvalidArgument):
            fit_promp(TrajectorySet(np.zeros((3, 6, 5)), make_phase_grid(5)), make_basis_config(6))

    def test_round_trip_reconstruction_loss(self, grid, rng):
        basis = make_basis_config(20, 0.0)
        phi = feature_matrix(basis, grid)
        w = rng.normal(size=(6, 20)) + 0.3 * rng.standard_normal((200, 6, 20))
        data = TrajectorySet(np.einsum("tm,ndm->ndt", phi, w), grid)
        assert reconstruction_loss(data, fit_promp(data, basis)) < 1e-6

    def test_capacity_monotone(self, synth_set):
        residuals = [fit_promp(synth_set, make_basis_config(m)).noise_var for m in (5, 10, 15, 20)]
        assert all(b <= a for a, b in zip(residuals, residuals[1:]))


class TestMarginals:
    def test_zero_cov_gives_noise(self):
        series = marginal_series(_model(4, 2, np.ones(8), np.zeros((8, 8)), 0.3))
        np.testing.assert_allclose(series.variances, 0.3, rtol=1e-14)
        np.testing.assert_allclose(series.means, 1.0, rtol=1e-12)

    def test_single_basis(self):
        series = marginal_series(_model(1, 1, [2.0], [[0.7]], 0.1))
        np.testing.assert_allclose(series.variances, 0.8, rtol=1e-14)
        np.testing.assert_allclose(series.means, 2.0, rtol=1e-14)

    def test_matches_dense_joint(self, rng):
        a = rng.normal(size=(15, 15))
        cov = a @ a.T + 0.1 * np.eye(15)
        model = _model(5, 3, rng.normal(size=15), cov, 0.05)
        series = marginal_series(model)
        mean, joint = joint_marginal(model)
        np.testing.assert_allclose(series.means.reshape(-1), mean, rtol=1e-12)
        np.testing.assert_allclose(series.variances.reshape(-1), np.diag(joint), rtol=1e-12)
        # spot check against an explicit phi S phi^T + sigma^2
        phi = feature_matrix(model.basis, model.grid)
        t = 7
        block = cov[5:10, 5:10]
        assert series.variances[1, t] == pytest.approx(phi[t] @ block @ phi[t] + 0.05, rel=1e-12)

    def test_variance_floor(self):
        series = marginal_series(_model(3, 1, np.zeros(3), np.zeros((3, 3)), 1e-8), variance_floor=1e-4)
        assert np.all(series.variances == 1e-4)


class TestSampling:
    def test_deterministic(self, synth_set, basis):
        model = fit_promp(synth_set, basis)
        a = sample_trajectories(model, 5, 42).values
        b = sample_trajectories(model, 5, 42).values
        assert a.tobytes() == b.tobytes()
        assert sample_trajectories(model, 5, 43).values.tobytes() != a.tobytes()

    def test_degenerate_model(self):
        model = _model(4, 1, np.arange(4.0), np.zeros((4, 4)), 1e-8)
        values = sample_trajectories(model, 10, 0).values
        target = marginal_series(model).means
        assert np.max(np.abs(values - target)) < 1e-3

    def test_monte_carlo_variance(self, synth_set):
        model = fit_promp(synth_set, make_basis_config(10))
        draws = sample_trajectories(model, 10_000, 5)
        ratio = draws.values.var(axis=0, ddof=1) / marginal_series(model).variances
        assert np.max(np.abs(ratio - 1)) < 0.05

    def test_count_positive(self, synth_set, basis):
        with pytest.raises(InvalidArgument):
            sample_trajectories(fit_promp(synth_set, basis), 0, 0)


class TestEmpirical:
    def test_hand_computed(self):
        grid = make_phase_grid(2)
        data = TrajectorySet(np.array([[[1.0, 5.0]], [[3.0, 5.0]]]), grid, ("x",))
        series = empirical_series(data)
        assert series.means.tolist() == [[2.0, 5.0]]
        assert series.variances.tolist() == [[2.0, 1e-8]]

    def test_large_n_recovers_parameters(self, grid, rng):
        data = TrajectorySet(1.5 + 0.4 * rng.standard_normal((20_000, 1, 101)), grid, ("x",))
        series = empirical_series(data)
        assert np.all(np.abs(series.means - 1.5) < 3 * 0.4 / np.sqrt(20_000))
        assert np.all(np.abs(series.variances / 0.16 - 1) < 0.05)

    def test_needs_two(self, grid):
        with pytest.raises(InsufficientDemonstrations):
            empirical_series(TrajectorySet(np.zeros((1, 6, 101)), grid))


class TestTypes:
    def test_trajectory_set_validation(self, grid):
        with pytest.raises(InvalidArgument):
            TrajectorySet(np.zeros((2, 6, 50)), grid)
        with pytest.raises(InvalidArgument):
            TrajectorySet(np.zeros((2, 6, 101)), grid, ("a", "b"))
        data = TrajectorySet(np.zeros((3, 6, 101)), grid)
        assert data.channels == CHANNELS and data.num_demos == 3

    def test_series_requires_positive_variance(self, grid):
        with pytest.raises(InvalidArgument):
            GaussianSeries(grid, np.zeros((1, 101)), np.zeros((1, 101)))

    def test_compatibility(self, grid):
        a = GaussianSeries(grid, np.zeros((6, 101)), np.ones((6, 101)))
        with pytest.raises(IncompatibleSeries):
            check_compatible(a, GaussianSeries(make_phase_grid(51), np.zeros((6, 51)), np.ones((6, 51))))
        with pytest.raises(IncompatibleSeries):
            check_compatible(a, GaussianSeries(grid, np.zeros((3, 101)), np.ones((3, 101))))
