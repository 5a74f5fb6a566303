"""Turn raw tapping recordings into resampled stroke trajectory sets.

Pipeline per recording: detect taps on both pad channels, cut the signal
between consecutive taps, label each stroke inward or outward, keep the
strokes just before the final one, and resample them onto a phase grid.

Pad convention
--------------
``pad_a`` is the left pad in left-right experiments and the far (anterior)
pad in forward-backward experiments; ``pad_b`` is the other one. An inward
stroke is one during which the elbow flexes. The pad an inward stroke
departs from is:

==================  =========  ==============
tapping direction   arm side   inward departs
==================  =========  ==============
left-right          left       pad_a
left-right          right      pad_b
forward-backward    left       pad_a
forward-backward    right      pad_a
==================  =========  ==============

Strokes departing from the other pad are outward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import InsufficientStrokes, InvalidArgument, MalformedRecording
from .phase_basis import PhaseGrid
from .promp import CHANNELS, TrajectorySet

SAMPLE_RATE_HZ = 2000.0
STIMULI = ("Sham", "tDCS", "tACS", "tRNS")
SESSION_PHASES = ("erst", "prae", "post1", "post2", "post3")
POST_PHASES = ("post1", "post2", "post3")
ARM_SIDES = ("left", "right")
DIRECTIONS = ("inward", "outward")

# experiment index -> (tapping direction, speed, hand)
EXPERIMENTS = {
    1: ("left-right", "rhythmic", "right"),
    2: ("left-right", "rhythmic", "left"),
    3: ("left-right", "rapid", "right"),
    4: ("left-right", "rapid", "left"),
    5: ("forward-backward", "rhythmic", "right"),
    6: ("forward-backward", "rhythmic", "left"),
    7: ("forward-backward", "rapid", "right"),
    8: ("forward-backward", "rapid", "left"),
}

INWARD_ORIGIN = {
    ("left-right", "left"): "a",
    ("left-right", "right"): "b",
    ("forward-backward", "left"): "a",
    ("forward-backward", "right"): "a",
}


@dataclass(frozen=True)
class RecordingMeta:
    participant: str = "p0"
    stimulus: str = "Sham"
    session_phase: str = "prae"
    experiment: int = 1
    arm_side: str | None = None

    def __post_init__(self):
        if self.stimulus not in STIMULI:
            raise InvalidArgument(f"unknown stimulus {self.stimulus!r}; expected one of {STIMULI}")
        if self.session_phase not in SESSION_PHASES:
            raise InvalidArgument(
                f"unknown session phase {self.session_phase!r}; expected one of {SESSION_PHASES}")
        if self.experiment not in EXPERIMENTS:
            raise InvalidArgument(f"experiment index must be 1-8, got {self.experiment}")
        if self.arm_side is None:
            object.__setattr__(self, "arm_side", EXPERIMENTS[self.experiment][2])
        elif self.arm_side not in ARM_SIDES:
            raise InvalidArgument(f"arm side must be 'left' or 'right', got {self.arm_side!r}")

    @property
    def tapping_direction(self) -> str:
        return EXPERIMENTS[self.experiment][0]

    def as_dict(self) -> dict:
        return {
            "participant": self.participant,
            "stimulus": self.stimulus,
            "session_phase": self.session_phase,
            "experiment": self.experiment,
            "arm_side": self.arm_side,
        }


@dataclass(frozen=True, eq=False)
class RawRecording:
    sample_rate_hz: float
    channels: dict
    pad_a: np.ndarray
    pad_b: np.ndarray
    meta: RecordingMeta = field(default_factory=RecordingMeta)

    def __post_init__(self):
        if not (self.sample_rate_hz > 0):
            raise InvalidArgument(f"sample rate must be positive, got {self.sample_rate_hz}")
        n = len(self.pad_a)
        lengths = {len(self.pad_b)} | {len(v) for v in self.channels.values()}
        if lengths != {n}:
            raise InvalidArgument("all recording series must have equal length")

    @property
    def num_samples(self) -> int:
        return len(self.pad_a)

    def channel_matrix(self, names=CHANNELS) -> np.ndarray:
        return np.vstack([np.asarray(self.channels[name], dtype=float) for name in names])


@dataclass(frozen=True, eq=False)
class StrokeSegment:
    direction: str
    start_index: int
    end_index: int
    values: np.ndarray  # (D, end_index - start_index)


@dataclass(frozen=True)
class SegmentationParams:
    threshold_sigma: float = 6.0
    refractory_ms: float = 150.0
    count: int = 20
    cutoff_hz: float | None = None


def inward_origin(meta: RecordingMeta) -> str:
    return INWARD_ORIGIN[(meta.tapping_direction, meta.arm_side)]


def detect_taps(pad, sample_rate: float, threshold_sigma: float = 6.0,
                refractory_ms: float = 150.0) -> list:
    """Sample indices where the pad signal leaves its resting band.

    The band is median +/- ``threshold_sigma`` robust standard deviations
    (1.4826 * MAD, falling back to the plain std when the MAD is zero).
    Crossings closer than the refractory window to the last kept tap are
    dropped.
    """
    x = np.asarray(pad, dtype=float)
    if x.size == 0:
        raise InvalidArgument("pad series is empty")
    deviation = np.abs(x - np.median(x))
    scale = 1.4826 * np.median(deviation)
    if scale == 0:
        scale = x.std()
    if scale == 0:
        return []
    candidates = np.flatnonzero(deviation > threshold_sigma * scale)
    refractory = refractory_ms * 1e-3 * sample_rate
    taps = []
    for idx in candidates:
        if not taps or idx - taps[-1] >= refractory:
            taps.append(int(idx))
    return taps


def segment_strokes(rec: RawRecording, params: SegmentationParams = SegmentationParams(),
                    data: np.ndarray | None = None) -> list:
    """Cut the recording into strokes between consecutive taps.

    ``data`` overrides the (D, N) channel matrix, e.g. with a filtered copy.
    """
    taps_a = detect_taps(rec.pad_a, rec.sample_rate_hz, params.threshold_sigma, params.refractory_ms)
    taps_b = detect_taps(rec.pad_b, rec.sample_rate_hz, params.threshold_sigma, params.refractory_ms)
    if not taps_a or not taps_b:
        raise InsufficientStrokes(
            f"both pads must register taps, found {len(taps_a)} on pad_a and {len(taps_b)} on pad_b")
    events = sorted([(i, "a") for i in taps_a] + [(i, "b") for i in taps_b])
    for (i0, p0), (i1, p1) in zip(events, events[1:]):
        if p0 == p1 or i0 == i1:
            raise MalformedRecording(
                f"taps are not interleaved: pad_{p0} at sample {i0} followed by pad_{p1} at sample {i1}")
    if data is None:
        data = rec.channel_matrix()
    origin = inward_origin(rec.meta)
    segments = []
    for (start, pad), (end, _) in zip(events, events[1:]):
        direction = "inward" if pad == origin else "outward"
        segments.append(StrokeSegment(direction, start, end, data[:, start:end]))
    return segments


def select_training_strokes(segments, count: int = 20):
    """Per direction, the ``count`` strokes right before the final stroke.

    The final stroke of each direction is dropped. Returns (inward, outward).
    """
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    selected = {}
    for direction in DIRECTIONS:
        strokes = [s for s in segments if s.direction == direction]
        if len(strokes) < count + 1:
            raise InsufficientStrokes(
                f"{direction}: need {count + 1} strokes ({count} plus the dropped final one), "
                f"found {len(strokes)}")
        selected[direction] = strokes[-(count + 1):-1]
    return selected["inward"], selected["outward"]


def resample_segment(segment, grid: PhaseGrid) -> np.ndarray:
    """Linearly interpolate a (D, L) stroke onto the phase grid -> (D, T)."""
    values = segment.values if isinstance(segment, StrokeSegment) else segment
    values = np.atleast_2d(np.asarray(values, dtype=float))
    length = values.shape[1]
    if length < 2:
        raise InvalidArgument(f"segment needs at least 2 samples, got {length}")
    pos = grid.points * (length - 1)
    lo = np.minimum(np.floor(pos).astype(int), length - 2)
    frac = pos - lo
    return values[:, lo] * (1.0 - frac) + values[:, lo + 1] * frac


def lowpass_filter(series, sample_rate: float, cutoff_hz: float, order: int = 2) -> np.ndarray:
    """Zero-phase Butterworth low-pass (forward-backward)."""
    x = np.asarray(series, dtype=float)
    if not (0 < cutoff_hz < sample_rate / 2):
        raise InvalidArgument(
            f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist={sample_rate / 2} Hz)")
    sos = signal.butter(order, cutoff_hz, btype="low", fs=sample_rate, output="sos")
    padlen = min(3 * (2 * len(sos) + 1), x.shape[-1] - 1)
    return signal.sosfiltfilt(sos, x, axis=-1, padlen=padlen)


def build_trajectory_sets(rec: RawRecording, grid: PhaseGrid,
                          params: SegmentationParams = SegmentationParams()) -> dict:
    """Inward and outward trajectory sets of one recording, keyed by direction."""
    data = rec.channel_matrix()
    if params.cutoff_hz is not None:
        data = lowpass_filter(data, rec.sample_rate_hz, params.cutoff_hz)
    segments = segment_strokes(rec, params, data)
    inward, outward = select_training_strokes(segments, params.count)
    sets = {}
    for direction, strokes in (("inward", inward), ("outward", outward)):
        values = np.stack([resample_segment(s, grid) for s in strokes])
        metadata = dict(rec.meta.as_dict(), direction=direction)
        sets[direction] = TrajectorySet(values, grid, CHANNELS, metadata)
    return sets


def build_trajectory_set(rec: RawRecording, direction: str, grid: PhaseGrid,
                         params: SegmentationParams = SegmentationParams()) -> TrajectorySet:
    if direction not in DIRECTIONS:
        raise InvalidArgument(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    return build_trajectory_sets(rec, grid, params)[direction]
