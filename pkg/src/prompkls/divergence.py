"""Kullback-Leibler divergences between Gaussian trajectory distributions.

All divergences here operate on univariate marginals. Trajectory-level
values are plain averages over phase points and channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .promp import GaussianSeries, check_compatible

DEFAULT_WINDOW_FRACTION = 0.1
# Rounding slack when clamping divergences that must be nonnegative.
NEGATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Gaussian1D:
    mean: float
    variance: float

    def __post_init__(self):
        if not (self.variance > 0) or not math.isfinite(self.variance):
            raise InvalidArgument(f"variance must be positive and finite, got {self.variance}")


@dataclass(frozen=True, eq=False)
class DivergenceCurve:
    window_fraction: float
    centers: np.ndarray
    values: np.ndarray


def _clamp(value):
    value = np.asarray(value, dtype=float)
    if np.any(value < -NEGATIVE_TOLERANCE):
        raise ArithmeticError(f"divergence came out negative: {value.min()}")
    return np.maximum(value, 0.0)


def kl_gaussian(p: Gaussian1D, q: Gaussian1D) -> float:
    """KL(p || q) for univariate Gaussians, closed form."""
    ratio = p.variance / q.variance
    value = 0.5 * (ratio - 1.0 - math.log(ratio) + (p.mean - q.mean) ** 2 / q.variance)
    return float(_clamp(value))


def symmetric_kl_arrays(mean_a, var_a, mean_b, var_b) -> np.ndarray:
    """Elementwise symmetric KL.

    The log terms of the two directions cancel, leaving
    ((va - vb)**2 + d**2 * (va + vb)) / (4 va vb), which is exactly symmetric
    and nonnegative in floating point.
    """
    var_a = np.asarray(var_a, dtype=float)
    var_b = np.asarray(var_b, dtype=float)
    diff2 = (np.asarray(mean_a, dtype=float) - np.asarray(mean_b, dtype=float)) ** 2
    return ((var_a - var_b) ** 2 + diff2 * (var_a + var_b)) / (4.0 * var_a * var_b)


def symmetric_kl(p: Gaussian1D, q: Gaussian1D) -> float:
    return float(symmetric_kl_arrays(p.mean, p.variance, q.mean, q.variance))


def pointwise_kls(a: GaussianSeries, b: GaussianSeries) -> np.ndarray:
    """(D, T) array of symmetric KL between matching marginals."""
    check_compatible(a, b)
    return symmetric_kl_arrays(a.means, a.variances, b.means, b.variances)


def channel_kls(a: GaussianSeries, b: GaussianSeries) -> np.ndarray:
    """Phase-averaged symmetric KL per channel, shape (D,)."""
    return pointwise_kls(a, b).mean(axis=1)


def trajectory_set_kls(a: GaussianSeries, b: GaussianSeries) -> float:
    """Symmetric KL averaged over every phase point and channel."""
    return float(pointwise_kls(a, b).mean())


def window_points(window_fraction: float, grid_length: int) -> int:
    """Number of grid points covered by a window of the given phase width."""
    if not (0.0 < window_fraction <= 1.0):
        raise InvalidArgument(f"window_fraction must lie in (0, 1], got {window_fraction}")
    steps = window_fraction * (grid_length - 1)
    # tolerate fractions like 0.1 * 100 = 10.000000000000002
    if steps < 1.0 - 1e-9:
        raise InvalidArgument(
            f"window fraction {window_fraction} is narrower than one grid step "
            f"on a {grid_length}-point grid")
    return int(math.floor(steps + 1e-9)) + 1


def sliding_window_kls(a: GaussianSeries, b: GaussianSeries,
                       window_fraction: float = DEFAULT_WINDOW_FRACTION,
                       stride: int = 1) -> DivergenceCurve:
    """Symmetric KL restricted to a window slid along the phase axis.

    Each value averages the channel-mean divergence over the grid points in
    the window; the center is the midpoint of the window's first and last
    phase points.
    """
    if int(stride) != stride or stride < 1:
        raise InvalidArgument(f"stride must be a positive integer, got {stride}")
    per_point = pointwise_kls(a, b).mean(axis=0)
    z = a.grid.points
    k = window_points(window_fraction, len(z))
    starts = np.arange(0, len(z) - k + 1, int(stride))
    csum = np.concatenate([[0.0], np.cumsum(per_point)])
    values = (csum[starts + k] - csum[starts]) / k
    centers = 0.5 * (z[starts] + z[starts + k - 1])
    return DivergenceCurve(float(window_fraction), centers, _clamp(values))
