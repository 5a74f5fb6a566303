import math

import numpy as np
import pytest

from oracles import kl_by_quadrature
from prompkls.analysis import fitted_series
from prompkls.divergence import (
    Gaussian1D,
    channel_kls,
    kl_gaussian,
    sliding_window_kls,
    symmetric_kl,
    trajectory_set_kls,
    window_points,
)
from prompkls.errors import IncompatibleSeries, InvalidArgument
from prompkls.phase_basis import make_basis_config, make_phase_grid
from prompkls.promp import GaussianSeries, TrajectorySet
from prompkls.synth import Perturbation, SynthScenario, generate_trajectory_set


def _series(grid, means, variances):
    return GaussianSeries(grid, np.asarray(means, float), np.asarray(variances, float))


def test_kl_examples():
    assert kl_gaussian(Gaussian1D(0, 1), Gaussian1D(0, 1)) == 0.0
    assert kl_gaussian(Gaussian1D(0, 1), Gaussian1D(1, 1)) == pytest.approx(0.5, abs=1e-15)
    assert kl_gaussian(Gaussian1D(0, 4), Gaussian1D(0, 1)) == pytest.approx(1.5 - math.log(2), abs=1e-15)


@pytest.mark.parametrize("mp,sp,mq,sq,frozen", [
    # values produced by kl_by_quadrature, frozen
    (0.0, 2.0, 0.0, 1.0, 0.8068528194400548),
    (0.0, 1.0, 0.0, 2.0, 0.3181471805599453),
    (1.5, 0.7, -0.3, 1.9, 1.0151493287260855),
    (-2.0, 3.0, 2.5, 0.4, 88.89134697945771),
])
def test_kl_matches_frozen_quadrature(mp, sp, mq, sq, frozen):
    assert kl_gaussian(Gaussian1D(mp, sp**2), Gaussian1D(mq, sq**2)) == pytest.approx(frozen, abs=1e-9)
    assert kl_by_quadrature(mp, sp, mq, sq) == pytest.approx(frozen, abs=1e-9)


def test_symmetric_examples():
    p = Gaussian1D(0.3, 2.2)
    assert symmetric_kl(p, p) == 0.0
    assert symmetric_kl(Gaussian1D(0, 1), Gaussian1D(1, 1)) == pytest.approx(0.5, abs=1e-15)
    assert symmetric_kl(Gaussian1D(0, 4), Gaussian1D(0, 1)) == pytest.approx(0.5625, abs=1e-15)
    q = Gaussian1D(-1.0, 0.3)
    assert symmetric_kl(p, q) == pytest.approx(0.5 * (kl_gaussian(p, q) + kl_gaussian(q, p)), rel=1e-13)


@pytest.mark.parametrize("v", [0.0, -1.0, math.inf, math.nan])
def test_gaussian_rejects_variance(v):
    with pytest.raises(InvalidArgument):
        Gaussian1D(0.0, v)


def test_set_kls_identity_and_shift():
    grid = make_phase_grid(51)
    a = _series(grid, np.random.default_rng(0).normal(size=(6, 51)), np.full((6, 51), 0.25))
    assert trajectory_set_kls(a, a) == 0.0
    b = _series(grid, a.means + 0.3, a.variances)
    assert trajectory_set_kls(a, b) == pytest.approx(0.3**2 / (2 * 0.25), rel=1e-12)
    np.testing.assert_allclose(channel_kls(a, b), 0.18, rtol=1e-12)


def test_set_kls_averages_points_and_channels():
    grid = make_phase_grid(3)
    a = _series(grid, np.zeros((2, 3)), np.ones((2, 3)))
    shift = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
    b = _series(grid, shift, np.ones((2, 3)))
    # pointwise values 0, .5, 0 and 0, 0, 2
    assert trajectory_set_kls(a, b) == pytest.approx(2.5 / 6, rel=1e-14)
    np.testing.assert_allclose(channel_kls(a, b), [0.5 / 3, 2 / 3], rtol=1e-14)


def test_set_kls_incompatible():
    a = _series(make_phase_grid(5), np.zeros((6, 5)), np.ones((6, 5)))
    with pytest.raises(IncompatibleSeries):
        trajectory_set_kls(a, _series(make_phase_grid(6), np.zeros((6, 6)), np.ones((6, 6))))


def test_split_halves_shrink_with_n():
    grid = make_phase_grid(101)
    basis = make_basis_config(15)
    scenario = SynthScenario(rng_seed=11, shape_seed=2, session_jitter=0.0)
    values = {}
    for n in (20, 200):
        data = generate_trajectory_set(scenario, "inward", 2 * n, grid)
        half = [TrajectorySet(data.values[i::2], grid) for i in (0, 1)]
        values[n] = trajectory_set_kls(*(fitted_series(h, basis) for h in half))
    assert values[200] < values[20] < 0.5


def test_window_points():
    assert window_points(0.1, 101) == 11
    assert window_points(1.0, 101) == 101
    assert window_points(0.01, 101) == 2
    with pytest.raises(InvalidArgument):
        window_points(0.005, 101)
    with pytest.raises(InvalidArgument):
        window_points(0.0, 101)
    with pytest.raises(InvalidArgument):
        window_points(1.5, 101)


def test_window_flat_curves(grid):
    rng = np.random.default_rng(3)
    a = _series(grid, rng.normal(size=(6, 101)), np.full((6, 101), 0.5))
    curve = sliding_window_kls(a, a)
    assert np.all(curve.values == 0)
    assert len(curve.values) == 91
    assert curve.centers[0] == pytest.approx(0.05) and curve.centers[-1] == pytest.approx(0.95)
    assert np.all(np.diff(curve.centers) > 0)
    b = _series(grid, a.means - 0.4, a.variances)
    np.testing.assert_allclose(sliding_window_kls(a, b).values, 0.16, rtol=1e-12)


def test_window_full_equals_set_kls(grid):
    rng = np.random.default_rng(4)
    a = _series(grid, rng.normal(size=(6, 101)), rng.uniform(0.1, 2, (6, 101)))
    b = _series(grid, rng.normal(size=(6, 101)), rng.uniform(0.1, 2, (6, 101)))
    curve = sliding_window_kls(a, b, 1.0)
    assert curve.values.shape == (1,)
    assert curve.values[0] == pytest.approx(trajectory_set_kls(a, b), rel=1e-12)
    assert curve.centers[0] == 0.5


def test_window_stride(grid):
    rng = np.random.default_rng(5)
    a = _series(grid, rng.normal(size=(6, 101)), np.ones((6, 101)))
    b = _series(grid, rng.normal(size=(6, 101)), np.ones((6, 101)))
    full = sliding_window_kls(a, b, 0.1, 1)
    strided = sliding_window_kls(a, b, 0.1, 5)
    np.testing.assert_allclose(strided.values, full.values[::5], rtol=1e-12)
    with pytest.raises(InvalidArgument):
        sliding_window_kls(a, b, 0.1, 0)


def test_window_locates_bump(grid, basis):
    prae = generate_trajectory_set(SynthScenario(rng_seed=1, shape_seed=5), "outward", 20, grid)
    bump = Perturbation("localized-bump", 2.0, phase_window=(0.1, 0.2))
    post = generate_trajectory_set(SynthScenario(rng_seed=2, shape_seed=5, perturbation=bump),
                                   "outward", 20, grid)
    curve = sliding_window_kls(fitted_series(prae, basis), fitted_series(post, basis), 0.1)
    assert 0.05 <= curve.centers[curve.values.argmax()] <= 0.25
