"""Movement phase grids and normalized radial basis features.

A stroke of arbitrary duration is mapped onto the phase interval [0, 1].
Each phase value is described by M Gaussian bumps with uniformly spaced
centers, normalized so the feature row sums to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

# Bandwidth is this fraction of the squared center spacing.
BANDWIDTH_FACTOR = 0.2


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Uniform phase grid from 0 to 1, both endpoints included."""

    points: np.ndarray

    @property
    def length(self) -> int:
        return int(self.points.shape[0])

    def same_as(self, other: "PhaseGrid") -> bool:
        return self.length == other.length and np.array_equal(self.points, other.points)


@dataclass(frozen=True, eq=False)
class BasisConfig:
    centers: np.ndarray
    bandwidths: np.ndarray
    ridge_lambda: float

    @property
    def num_basis(self) -> int:
        return int(self.centers.shape[0])


def make_phase_grid(length: int) -> PhaseGrid:
    if int(length) != length or length < 2:
        raise InvalidArgument(f"phase grid needs at least 2 points, got {length}")
    points = np.linspace(0.0, 1.0, int(length))
    points.setflags(write=False)
    return PhaseGrid(points)


def make_basis_config(num_basis: int, ridge_lambda: float = 1e-6) -> BasisConfig:
    """Build M uniformly spaced RBFs on [0, 1].

    The bandwidth of every basis is ``0.2 * spacing**2``. With a single basis
    there is no spacing, so it sits at 0.5 with bandwidth 0.2.
    """
    if int(num_basis) != num_basis or num_basis < 1:
        raise InvalidArgument(f"num_basis must be >= 1, got {num_basis}")
    if not np.isfinite(ridge_lambda) or ridge_lambda < 0:
        raise InvalidArgument(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    num_basis = int(num_basis)
    if num_basis == 1:
        centers = np.array([0.5])
        bandwidths = np.array([BANDWIDTH_FACTOR])
    else:
        centers = np.linspace(0.0, 1.0, num_basis)
        spacing = 1.0 / (num_basis - 1)
        bandwidths = np.full(num_basis, BANDWIDTH_FACTOR * spacing**2)
    centers.setflags(write=False)
    bandwidths.setflags(write=False)
    return BasisConfig(centers, bandwidths, float(ridge_lambda))


def _features(config: BasisConfig, z: np.ndarray) -> np.ndarray:
    log_phi = -((z[:, None] - config.centers[None, :]) ** 2) / (2.0 * config.bandwidths[None, :])
    # shift by the row max before exponentiating; the normalization cancels it
    log_phi -= log_phi.max(axis=1, keepdims=True)
    phi = np.exp(log_phi)
    return phi / phi.sum(axis=1, keepdims=True)


def eval_features(config: BasisConfig, phase: float) -> np.ndarray:
    """Normalized feature row of length M at a single phase value."""
    if not (0.0 <= phase <= 1.0):
        raise InvalidArgument(f"phase must lie in [0, 1], got {phase}")
    return _features(config, np.array([float(phase)]))[0]


def feature_matrix(config: BasisConfig, grid: PhaseGrid) -> np.ndarray:
    """T x M matrix whose row t is the feature row at grid point t."""
    return _features(config, grid.points)
