"""Synthetic tapping recordings and trajectory sets with known ground truth.

A stroke of channel ``d`` at phase ``z`` is

    sum_k a_dk * (1 + s * e_k) * exp(-(z - c_dk)**2 / (2 w_dk**2)) + o_d + noise

with relative amplitude jitter ``e_k ~ N(0, 1)`` scaled by ``amp_jitter``,
one offset ``o_d ~ N(0, offset_std**2)`` per stroke, and white noise per
sample. The amplitudes ``a_dk`` are the template's, multiplied once per
recording by ``1 + session_jitter * N(0, 1)`` gains drawn from the recording
seed: the subject never repeats a session exactly. Mean and variance per
phase point of one recording are therefore known in closed form (see
:func:`analytic_series`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument
from .phase_basis import PhaseGrid
from .promp import CHANNELS, GaussianSeries, TrajectorySet
from .segmentation import (
    DIRECTIONS,
    EXPERIMENTS,
    SAMPLE_RATE_HZ,
    SESSION_PHASES,
    STIMULI,
    RawRecording,
    RecordingMeta,
    inward_origin,
)

PERTURBATION_KINDS = ("mean-shift", "variance-scale", "axis-flip", "localized-bump")
FLIP_CHANNELS = ("hand_x", "hand_y", "wrist_x", "wrist_y")


@dataclass(frozen=True, eq=False)
class StrokeTemplate:
    """Gaussian bumps per channel; each array is (D, K), unused bumps have zero amplitude."""

    amplitudes: np.ndarray
    centers: np.ndarray
    widths: np.ndarray

    def unit_bumps(self, z) -> np.ndarray:
        """Unscaled bump shapes at phases ``z`` -> (D, K, len(z))."""
        z = np.asarray(z, dtype=float)
        return np.exp(-((z[None, None, :] - self.centers[..., None]) ** 2)
                      / (2.0 * self.widths[..., None] ** 2))

    def bump_values(self, z) -> np.ndarray:
        return self.amplitudes[..., None] * self.unit_bumps(z)

    def evaluate(self, z) -> np.ndarray:
        """Template mean on phases ``z`` -> (D, len(z))."""
        return self.bump_values(z).sum(axis=1)


def random_template(seed, num_channels: int = len(CHANNELS), bumps=(3, 5),
                    amplitude=(1.0, 4.0), width=(0.06, 0.12)) -> StrokeTemplate:
    rng = np.random.default_rng(seed)
    k_max = bumps[1]
    amps = np.zeros((num_channels, k_max))
    centers = np.full((num_channels, k_max), 0.5)
    widths = np.full((num_channels, k_max), 0.1)
    for d in range(num_channels):
        k = rng.integers(bumps[0], bumps[1] + 1)
        amps[d, :k] = rng.uniform(*amplitude, size=k) * rng.choice([-1.0, 1.0], size=k)
        centers[d, :k] = rng.uniform(0.15, 0.85, size=k)
        widths[d, :k] = rng.uniform(*width, size=k)
    return StrokeTemplate(amps, centers, widths)


@dataclass(frozen=True)
class Perturbation:
    kind: str
    magnitude: float
    channels: tuple | None = None  # None means every channel (FLIP_CHANNELS for axis-flip)
    phase_window: tuple | None = None
    directions: tuple | None = None  # None means both stroke directions

    def __post_init__(self):
        if self.directions is not None and any(d not in DIRECTIONS for d in self.directions):
            raise InvalidArgument(f"directions must be drawn from {DIRECTIONS}, got {self.directions}")
        if self.kind not in PERTURBATION_KINDS:
            raise InvalidArgument(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "localized-bump":
            if self.phase_window is None:
                raise InvalidArgument("localized-bump needs a phase_window")
        if self.phase_window is not None:
            lo, hi = self.phase_window
            if not (0.0 <= lo < hi <= 1.0):
                raise InvalidArgument(f"phase window must satisfy 0 <= lo < hi <= 1, got {self.phase_window}")

    def applies_to(self, direction: str) -> bool:
        return self.directions is None or direction in self.directions

    def channel_indices(self, names) -> list:
        wanted = self.channels
        if wanted is None:
            wanted = FLIP_CHANNELS if self.kind == "axis-flip" else names
        missing = [c for c in wanted if c not in names]
        if missing:
            raise InvalidArgument(f"perturbation names unknown channels {missing}")
        return [names.index(c) for c in wanted]


def window_bump(z, window) -> np.ndarray:
    """Raised-cosine bump of height 1 supported on ``window``."""
    lo, hi = window
    z = np.asarray(z, dtype=float)
    u = (z - lo) / (hi - lo)
    inside = (u > 0) & (u < 1)
    return np.where(inside, 0.5 - 0.5 * np.cos(2 * np.pi * np.clip(u, 0, 1)), 0.0)


def _perturb(values, z, mean, perturbation: Perturbation, names):
    """Apply ``perturbation`` to (..., D, T) values sampled at phases ``z``."""
    if perturbation.magnitude == 0:
        return values
    out = np.array(values, dtype=float, copy=True)
    idx = perturbation.channel_indices(list(names))
    kind = perturbation.kind
    if kind == "mean-shift":
        out[..., idx, :] += perturbation.magnitude
    elif kind == "variance-scale":
        factor = 1.0 + perturbation.magnitude
        out[..., idx, :] = mean[idx] + factor * (out[..., idx, :] - mean[idx])
    elif kind == "axis-flip":
        out[..., idx, :] *= -1.0
    else:
        out[..., idx, :] += perturbation.magnitude * window_bump(z, perturbation.phase_window)
    return out


def apply_perturbation(data: TrajectorySet, perturbation: Perturbation | None) -> TrajectorySet:
    """Return a perturbed copy; variance-scale scales deviations about the empirical mean."""
    if perturbation is None:
        return data
    mean = data.values.mean(axis=0)
    values = _perturb(data.values, data.grid.points, mean, perturbation, data.channels)
    return TrajectorySet(values, data.grid, data.channels, dict(data.metadata))


@dataclass(frozen=True)
class SynthScenario:
    rng_seed: int = 0
    shape_seed: int = 0
    num_strokes: int = 44
    stroke_duration_ms: tuple = (340.0, 460.0)
    noise_std: float = 0.3
    amp_jitter: float = 0.1
    offset_std: float = 0.2
    session_jitter: float = 0.15
    perturbation: Perturbation | None = None
    sample_rate_hz: float = SAMPLE_RATE_HZ
    rest_ms: float = 500.0
    pad_amplitude: float = 1.0
    pad_noise: float = 0.01
    meta: RecordingMeta = field(default_factory=RecordingMeta)

    def __post_init__(self):
        lo, hi = self.stroke_duration_ms
        if not (0 < lo <= hi):
            raise InvalidArgument(f"stroke durations must be positive, got {self.stroke_duration_ms}")
        if self.num_strokes < 1:
            raise InvalidArgument(f"num_strokes must be >= 1, got {self.num_strokes}")
        for name in ("noise_std", "amp_jitter", "offset_std", "session_jitter", "pad_noise"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be nonnegative")

    def base_template(self, direction: str) -> StrokeTemplate:
        return random_template([self.shape_seed, DIRECTIONS.index(direction)])

    def template(self, direction: str) -> StrokeTemplate:
        """Template of this recording, session gains applied."""
        base = self.base_template(direction)
        if self.session_jitter == 0:
            return base
        rng = np.random.default_rng([self.rng_seed, 1000 + DIRECTIONS.index(direction)])
        gains = 1.0 + self.session_jitter * rng.standard_normal(base.amplitudes.shape)
        return StrokeTemplate(base.amplitudes * gains, base.centers, base.widths)


def _stroke_values(scenario: SynthScenario, template: StrokeTemplate, z, rng, count: int = 1,
                   with_noise: bool = True):
    """(count, D, len(z)) strokes without perturbation."""
    d, k = template.amplitudes.shape
    jitter = 1.0 + scenario.amp_jitter * rng.standard_normal((count, d, k))
    values = np.einsum("dk,ndk,dkt->ndt", template.amplitudes, jitter, template.unit_bumps(z))
    values += scenario.offset_std * rng.standard_normal((count, d, 1))
    if with_noise:
        values += scenario.noise_std * rng.standard_normal(values.shape)
    return values


def analytic_series(scenario: SynthScenario, direction: str, grid: PhaseGrid) -> GaussianSeries:
    """Exact per-phase mean and variance of the stroke generator, perturbation included."""
    template = scenario.template(direction)
    bumps = template.bump_values(grid.points)
    mean = bumps.sum(axis=1)
    var = (scenario.amp_jitter**2 * (bumps**2).sum(axis=1)
           + scenario.offset_std**2 + scenario.noise_std**2)
    p = scenario.perturbation
    if p is not None and p.magnitude != 0 and p.applies_to(direction):
        idx = p.channel_indices(list(CHANNELS))
        if p.kind == "mean-shift":
            mean[idx] += p.magnitude
        elif p.kind == "variance-scale":
            var[idx] *= (1.0 + p.magnitude) ** 2
        elif p.kind == "axis-flip":
            mean[idx] *= -1.0
        else:
            mean[idx] += p.magnitude * window_bump(grid.points, p.phase_window)
    return GaussianSeries(grid, mean, var, CHANNELS)


def generate_trajectory_set(scenario: SynthScenario, direction: str, count: int,
                            grid: PhaseGrid) -> TrajectorySet:
    """Strokes sampled directly on the phase grid, skipping raw signal and segmentation."""
    rng = np.random.default_rng([scenario.rng_seed, DIRECTIONS.index(direction)])
    template = scenario.template(direction)
    values = _stroke_values(scenario, template, grid.points, rng, count)
    if scenario.perturbation is not None and scenario.perturbation.applies_to(direction):
        mean = template.evaluate(grid.points)
        values = _perturb(values, grid.points, mean, scenario.perturbation, CHANNELS)
    metadata = dict(scenario.meta.as_dict(), direction=direction)
    return TrajectorySet(values, grid, CHANNELS, metadata)


def generate_recording(scenario: SynthScenario) -> RawRecording:
    """Raw 6-channel recording with pad impulses at every stroke boundary.

    Taps alternate between the pads starting with ``pad_a``; there are
    ``num_strokes + 1`` taps in total. Stroke ``i`` occupies samples
    ``[tap_i, tap_{i+1})`` and its phase runs from exactly 0 to exactly 1.
    """
    rng = np.random.default_rng(scenario.rng_seed)
    fs = scenario.sample_rate_hz
    lo, hi = scenario.stroke_duration_ms
    durations = rng.uniform(lo, hi, size=scenario.num_strokes)
    lengths = np.maximum(np.round(durations * 1e-3 * fs).astype(int), 2)
    rest = int(round(scenario.rest_ms * 1e-3 * fs))
    taps = rest + np.concatenate([[0], np.cumsum(lengths)])
    total = int(taps[-1] + rest)

    num_channels = len(CHANNELS)
    data = scenario.offset_std * rng.standard_normal((num_channels, 1)) + np.zeros((num_channels, total))
    origin = inward_origin(scenario.meta)
    templates = {d: scenario.template(d) for d in DIRECTIONS}
    for i, (start, length) in enumerate(zip(taps[:-1], lengths)):
        pad = "a" if i % 2 == 0 else "b"
        direction = "inward" if pad == origin else "outward"
        z = np.linspace(0.0, 1.0, length)
        # white noise is added to the whole recording at once below
        stroke = _stroke_values(scenario, templates[direction], z, rng, with_noise=False)[0]
        if scenario.perturbation is not None and scenario.perturbation.applies_to(direction):
            mean = templates[direction].evaluate(z)
            stroke = _perturb(stroke, z, mean, scenario.perturbation, CHANNELS)
        data[:, start:start + length] = stroke
    data += scenario.noise_std * rng.standard_normal(data.shape)

    # pad noise is clipped at 3 std; unbounded Gaussian noise over ~1e8 samples per
    # study crosses the 6-sigma tap threshold every few studies
    pad_a = scenario.pad_noise * np.clip(rng.standard_normal(total), -3.0, 3.0)
    pad_b = scenario.pad_noise * np.clip(rng.standard_normal(total), -3.0, 3.0)
    decay = np.exp(-np.arange(int(0.02 * fs)) / (0.002 * fs)) * scenario.pad_amplitude
    for i, t in enumerate(taps):
        target = pad_a if i % 2 == 0 else pad_b
        span = min(len(decay), total - t)
        target[t:t + span] += decay[:span]
    return RawRecording(fs, dict(zip(CHANNELS, data)), pad_a, pad_b, scenario.meta)


@dataclass(frozen=True)
class StudyDesign:
    """Participants x stimuli x session phases x experiments, one recording each.

    Every recording of one (participant, experiment) pair shares a stroke
    template, so unperturbed phases are draws from the same generator.
    """

    seed: int = 0
    participants: tuple = tuple(f"p{i:02d}" for i in range(1, 11))
    stimuli: tuple = STIMULI
    session_phases: tuple = SESSION_PHASES
    experiments: tuple = tuple(EXPERIMENTS)
    scenario: SynthScenario = field(default_factory=SynthScenario)
    perturbations: tuple = ()  # of (RecordingMeta-like dict, Perturbation)

    def perturbation_for(self, meta: RecordingMeta):
        for where, perturbation in self.perturbations:
            if all(getattr(meta, key) == value for key, value in where.items()):
                return perturbation
        return None


def _derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def study_scenarios(design: StudyDesign) -> list:
    """One SynthScenario per recording, in a fixed order."""
    scenarios = []
    for pi, participant in enumerate(design.participants):
        for stimulus in design.stimuli:
            for phase in design.session_phases:
                for experiment in design.experiments:
                    meta = RecordingMeta(participant, stimulus, phase, experiment)
                    scenarios.append(replace(
                        design.scenario,
                        rng_seed=_derive_seed(design.seed, 1, pi, STIMULI.index(stimulus),
                                              SESSION_PHASES.index(phase), experiment),
                        shape_seed=_derive_seed(design.seed, 2, pi, experiment),
                        perturbation=design.perturbation_for(meta),
                        meta=meta,
                    ))
    return scenarios
