"""Probabilistic movement primitives over phase-normalized trajectory sets.

Every demonstration is projected onto the RBF features by ridge regression.
The per-demo weights are then summarized by a Gaussian, and the Gaussian is
pushed back through the features to get a distribution over trajectories.

Weight vectors are laid out channel-blocked: entries ``[d*M:(d+1)*M]`` hold
the M weights of channel ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (
    IncompatibleSeries,
    InsufficientDemonstrations,
    InvalidArgument,
    SingularSystemError,
)
from .phase_basis import BasisConfig, PhaseGrid, feature_matrix

CHANNELS = ("hand_x", "hand_y", "hand_z", "wrist_x", "wrist_y", "wrist_z")

VARIANCE_FLOOR = 1e-8
NOISE_FLOOR = 1e-8
# Weight covariance jitter, relative to its mean diagonal entry.
COV_JITTER = 1e-8
COV_JITTER_MIN = 1e-12


def default_channels(num_channels: int) -> tuple:
    if num_channels == len(CHANNELS):
        return CHANNELS
    return tuple(f"ch{d}" for d in range(num_channels))


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """n demonstrations of D channels sampled on a shared phase grid.

    ``values`` has shape (n, D, T).
    """

    values: np.ndarray
    grid: PhaseGrid
    channels: tuple | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise InvalidArgument(f"trajectory values must be (n, D, T), got shape {values.shape}")
        if values.shape[2] != self.grid.length:
            raise InvalidArgument(
                f"trajectory length {values.shape[2]} does not match grid length {self.grid.length}")
        channels = default_channels(values.shape[1]) if self.channels is None else tuple(self.channels)
        if len(channels) != values.shape[1]:
            raise InvalidArgument(f"{len(channels)} channel names given for {values.shape[1]} channels")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", channels)

    @property
    def num_demos(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_channels(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True, eq=False)
class GaussianSeries:
    """Independent univariate Gaussians per (channel, phase point); arrays are (D, T)."""

    grid: PhaseGrid
    means: np.ndarray
    variances: np.ndarray
    channels: tuple | None = None

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        variances = np.asarray(self.variances, dtype=float)
        if means.shape != variances.shape or means.ndim != 2 or means.shape[1] != self.grid.length:
            raise InvalidArgument(
                f"means {means.shape} and variances {variances.shape} must both be (D, {self.grid.length})")
        if not np.all(variances > 0):
            raise InvalidArgument("series variances must be strictly positive")
        channels = default_channels(means.shape[0]) if self.channels is None else tuple(self.channels)
        if len(channels) != means.shape[0]:
            raise InvalidArgument(f"{len(channels)} channel names given for {means.shape[0]} channels")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "channels", channels)

    @property
    def num_channels(self) -> int:
        return int(self.means.shape[0])


@dataclass(frozen=True, eq=False)
class PrompModel:
    basis: BasisConfig
    grid: PhaseGrid
    weight_mean: np.ndarray
    weight_cov: np.ndarray
    noise_var: float
    num_demos: int
    channels: tuple | None = None

    def __post_init__(self):
        if self.channels is None:
            object.__setattr__(self, "channels", default_channels(self.num_channels))

    @property
    def num_channels(self) -> int:
        return self.weight_mean.shape[0] // self.basis.num_basis

    def channel_block(self, d: int):
        """Mean and covariance of the weights of channel ``d``."""
        m = self.basis.num_basis
        sl = slice(d * m, (d + 1) * m)
        return self.weight_mean[sl], self.weight_cov[sl, sl]


def _ridge_factor(phi: np.ndarray, lam: float, channels: Sequence[str]):
    m = phi.shape[1]
    gram = phi.T @ phi + lam * np.eye(m)
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError:
        factor = None
    if factor is not None:
        diag = np.abs(np.diag(factor[0]))
        if diag.min() ** 2 > np.finfo(float).eps * m * diag.max() ** 2:
            return factor
    # Phi is shared by every channel, so the first channel is the first to fail.
    name = channels[0] if channels else "0"
    raise SingularSystemError(
        f"ridge system is singular for channel {name!r} "
        f"(M={m}, T={phi.shape[0]}, lambda={lam}); use lambda > 0 or fewer basis functions")


def _ridge_solve(phi: np.ndarray, lam: float, rhs: np.ndarray, channels: Sequence[str] = CHANNELS):
    """Solve (Phi^T Phi + lam I) W = Phi^T rhs for every column of ``rhs``."""
    factor = _ridge_factor(phi, lam, channels)
    return linalg.cho_solve(factor, phi.T @ rhs, check_finite=False)


def fit_single_weights(trajectory, phi, lam: float, channels: Sequence[str] | None = None) -> np.ndarray:
    """Ridge weights of one (D, T) demonstration, returned channel-blocked (M*D,).

    The coupled feature matrix is block diagonal with identical blocks, so the
    coupled solve splits into D independent M-dimensional ridge problems that
    share one factorization.
    """
    y = np.asarray(trajectory, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    if y.ndim != 2 or phi.ndim != 2 or y.shape[1] != phi.shape[0]:
        raise InvalidArgument(
            f"trajectory shape {y.shape} incompatible with feature matrix shape {phi.shape}")
    if lam < 0:
        raise InvalidArgument(f"ridge lambda must be >= 0, got {lam}")
    if channels is None:
        channels = [f"ch{d}" for d in range(y.shape[0])]
    w = _ridge_solve(phi, lam, y.T, channels)  # (M, D)
    return w.T.reshape(-1)


def coupled_feature_matrix(phi: np.ndarray, num_channels: int) -> np.ndarray:
    """Block-diagonal (T*D, M*D) matrix with ``phi`` repeated on the diagonal."""
    return linalg.block_diag(*([np.asarray(phi, dtype=float)] * num_channels))


def fit_coupled_weights(trajectory, phi, lam: float) -> np.ndarray:
    """Direct solve of the full coupled (M*D) ridge system. Reference path only."""
    y = np.atleast_2d(np.asarray(trajectory, dtype=float))
    a = coupled_feature_matrix(phi, y.shape[0])
    lhs = a.T @ a + lam * np.eye(a.shape[1])
    return np.linalg.solve(lhs, a.T @ y.reshape(-1))


def _check_finite(data: TrajectorySet):
    if not np.all(np.isfinite(data.values)):
        raise InvalidArgument("trajectory set contains non-finite values")


def fit_promp(data: TrajectorySet, basis: BasisConfig, noise_floor: float = NOISE_FLOOR) -> PrompModel:
    """Fit a ProMP to a trajectory set.

    The weight covariance is the unbiased sample covariance of the per-demo
    weights plus a small diagonal jitter; the observation noise is the mean
    squared residual of each demo against its own reconstruction.
    """
    if data.num_demos < 2:
        raise InsufficientDemonstrations(
            f"fitting needs at least 2 demonstrations, got {data.num_demos}")
    _check_finite(data)
    n, d, t = data.values.shape
    m = basis.num_basis
    if m > t:
        raise InvalidArgument(f"num_basis {m} exceeds phase points {t}")
    phi = feature_matrix(basis, data.grid)
    rhs = data.values.reshape(n * d, t).T
    w = _ridge_solve(phi, basis.ridge_lambda, rhs, data.channels)  # (M, n*D)
    residual = rhs - phi @ w
    noise_var = max(float(np.mean(residual**2)), noise_floor)

    weights = w.T.reshape(n, d * m)
    mean = weights.mean(axis=0)
    centered = weights - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    jitter = max(COV_JITTER * np.trace(cov) / (d * m), COV_JITTER_MIN)
    cov[np.diag_indices_from(cov)] += jitter
    return PrompModel(basis, data.grid, mean, cov, noise_var, n, data.channels)


def marginal_series(model: PrompModel, variance_floor: float = VARIANCE_FLOOR) -> GaussianSeries:
    """Per-channel, per-phase marginals of the trajectory distribution."""
    phi = feature_matrix(model.basis, model.grid)
    m = model.basis.num_basis
    d = model.num_channels
    mu = model.weight_mean.reshape(d, m)
    means = mu @ phi.T
    variances = np.empty_like(means)
    for k in range(d):
        block = model.weight_cov[k * m:(k + 1) * m, k * m:(k + 1) * m]
        variances[k] = np.einsum("tm,mk,tk->t", phi, block, phi)
    variances = np.maximum(variances + model.noise_var, variance_floor)
    return GaussianSeries(model.grid, means, variances, model.channels)


def joint_marginal(model: PrompModel):
    """Mean (D*T,) and full covariance of the stacked trajectory, channels coupled."""
    phi = feature_matrix(model.basis, model.grid)
    a = coupled_feature_matrix(phi, model.num_channels)
    mean = a @ model.weight_mean
    cov = a @ model.weight_cov @ a.T + model.noise_var * np.eye(a.shape[0])
    return mean, cov


def sample_trajectories(model: PrompModel, count: int, rng_seed: int) -> TrajectorySet:
    """Draw ``count`` trajectories from the model; deterministic in ``rng_seed``."""
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(rng_seed)
    phi = feature_matrix(model.basis, model.grid)
    m = model.basis.num_basis
    d = model.num_channels
    w = rng.multivariate_normal(model.weight_mean, model.weight_cov, size=count, method="eigh")
    values = np.einsum("tm,ndm->ndt", phi, w.reshape(count, d, m))
    values += rng.normal(0.0, np.sqrt(model.noise_var), size=values.shape)
    return TrajectorySet(values, model.grid, model.channels)


def empirical_series(data: TrajectorySet, variance_floor: float = VARIANCE_FLOOR) -> GaussianSeries:
    """Per-channel, per-phase sample mean and unbiased sample variance."""
    if data.num_demos < 2:
        raise InsufficientDemonstrations(
            f"empirical variance needs at least 2 demonstrations, got {data.num_demos}")
    _check_finite(data)
    means = data.values.mean(axis=0)
    variances = np.maximum(data.values.var(axis=0, ddof=1), variance_floor)
    return GaussianSeries(data.grid, means, variances, data.channels)


def check_compatible(a, b):
    """Raise IncompatibleSeries unless ``a`` and ``b`` share grid and channel count."""
    if not a.grid.same_as(b.grid):
        raise IncompatibleSeries(
            f"phase grids differ ({a.grid.length} vs {b.grid.length} points)")
    if a.num_channels != b.num_channels:
        raise IncompatibleSeries(f"channel counts differ ({a.num_channels} vs {b.num_channels})")
