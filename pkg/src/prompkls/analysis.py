"""Evaluation protocols: reconstruction loss, prae-vs-post comparisons,
pooled 3-sigma outlier screening and batch summaries."""

from __future__ import annotations

import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .divergence import trajectory_set_kls
from .errors import InsufficientData, InvalidArgument, PrompError
from .phase_basis import BasisConfig, make_basis_config
from .promp import (
    VARIANCE_FLOOR,
    GaussianSeries,
    PrompModel,
    TrajectorySet,
    check_compatible,
    empirical_series,
    fit_promp,
    marginal_series,
)
from .segmentation import DIRECTIONS, POST_PHASES, STIMULI

log = logging.getLogger(__name__)

DEFAULT_OUTLIER_SIGMA = 3.0


@dataclass(frozen=True, order=True)
class ComparisonKey:
    stimulus: str
    participant: str
    experiment: int
    post_phase: str
    direction: str

    def __post_init__(self):
        if self.post_phase not in POST_PHASES:
            raise InvalidArgument(f"post phase must be one of {POST_PHASES}, got {self.post_phase!r}")
        if not 1 <= self.experiment <= 8:
            raise InvalidArgument(f"experiment must be 1-8, got {self.experiment}")
        if self.direction not in DIRECTIONS:
            raise InvalidArgument(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")

    def sort_key(self):
        return (_stimulus_rank(self.stimulus), self.participant, self.experiment,
                POST_PHASES.index(self.post_phase), DIRECTIONS.index(self.direction))


@dataclass(frozen=True)
class ReportEntry:
    key: ComparisonKey
    kls: float
    outlier: bool


@dataclass(frozen=True)
class SummaryRow:
    stimulus: str
    post_phase: str
    direction: str
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class ComparisonReport:
    entries: tuple = ()
    summary: tuple = ()
    outlier_sigma: float = DEFAULT_OUTLIER_SIGMA
    outlier_threshold: float | None = None
    pooled_mean: float | None = None
    pooled_std: float | None = None
    corrupted: tuple = ()  # (label, reason) pairs
    skipped: tuple = ()  # labels of groups with posts but no prae
    header: dict = field(default_factory=dict)

    def value(self, key: ComparisonKey) -> float:
        for e in self.entries:
            if e.key == key:
                return e.kls
        raise KeyError(key)

    def summary_by(self):
        return {(r.stimulus, r.post_phase, r.direction): r for r in self.summary}


def reconstruction_loss(data: TrajectorySet, model: PrompModel,
                        variance_floor: float = VARIANCE_FLOOR) -> float:
    """Symmetric KL between the empirical series of ``data`` and the model marginals."""
    check_compatible(data, model)
    return trajectory_set_kls(empirical_series(data, variance_floor),
                              marginal_series(model, variance_floor))


def fitted_series(data: TrajectorySet, basis: BasisConfig,
                  variance_floor: float = VARIANCE_FLOOR) -> GaussianSeries:
    return marginal_series(fit_promp(data, basis), variance_floor)


def compare_phase_pair(prae: TrajectorySet, post: TrajectorySet, basis: BasisConfig,
                       variance_floor: float = VARIANCE_FLOOR) -> float:
    """Fit both sets and compare their reconstructed distributions."""
    check_compatible(prae, post)
    return trajectory_set_kls(fitted_series(prae, basis, variance_floor),
                              fitted_series(post, basis, variance_floor))


def detect_outliers(values: Sequence[float], sigma: float = DEFAULT_OUTLIER_SIGMA):
    """Single-pass k-sigma rule with population mean and std over all values.

    Returns ``(mean, std, flags)``; a value is flagged when it is strictly
    greater than ``mean + sigma * std``. With N values no single point can sit
    more than (N - 1) / sqrt(N) population stds above the mean, so for N <= 10
    and sigma = 3 nothing is ever flagged.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise InsufficientData(f"outlier detection needs at least 2 values, got {x.size}")
    mean = float(x.mean())
    std = float(x.std())
    threshold = mean + sigma * std
    return mean, std, [bool(v > threshold) for v in x]


def _stimulus_rank(stimulus: str):
    return (STIMULI.index(stimulus) if stimulus in STIMULI else len(STIMULI), stimulus)


def _summarize(entries) -> tuple:
    groups = defaultdict(list)
    for e in entries:
        if not e.outlier:
            groups[(e.key.stimulus, e.key.post_phase, e.key.direction)].append(e.kls)
    order = lambda g: (_stimulus_rank(g[0]), POST_PHASES.index(g[1]), DIRECTIONS.index(g[2]))
    rows = []
    for group in sorted(groups, key=order):
        vals = np.asarray(groups[group])
        rows.append(SummaryRow(*group, float(vals.mean()), float(vals.std()), int(vals.size)))
    return tuple(rows)


def report_from_series(series: Mapping, outlier_sigma: float = DEFAULT_OUTLIER_SIGMA,
                       corrupted: Sequence = (), header: dict | None = None) -> ComparisonReport:
    """Assemble a report from fitted marginal series.

    ``series`` maps (stimulus, participant, experiment, session_phase,
    direction) to a GaussianSeries. Erst entries are ignored.
    """
    groups = defaultdict(dict)
    for (stimulus, participant, experiment, phase, direction), s in series.items():
        if phase == "erst":
            continue
        groups[(stimulus, participant, int(experiment), direction)][phase] = s

    values = []
    skipped = []
    for (stimulus, participant, experiment, direction), phases in groups.items():
        if "prae" not in phases:
            label = f"{stimulus}/{participant}/e{experiment}/{direction}"
            log.warning("no prae set for %s; skipping %d post comparison(s)",
                        label, sum(p in phases for p in POST_PHASES))
            skipped.append(label)
            continue
        for post in POST_PHASES:
            if post in phases:
                key = ComparisonKey(stimulus, participant, experiment, post, direction)
                values.append((key, trajectory_set_kls(phases["prae"], phases[post])))
    values.sort(key=lambda kv: kv[0].sort_key())

    threshold = mean = std = None
    flags = [False] * len(values)
    if len(values) >= 2:
        mean, std, flags = detect_outliers([v for _, v in values], outlier_sigma)
        threshold = mean + outlier_sigma * std
    elif values:
        log.warning("only one comparison value; outlier screening skipped")
    entries = tuple(ReportEntry(k, v, f) for (k, v), f in zip(values, flags))
    return ComparisonReport(
        entries=entries,
        summary=_summarize(entries),
        outlier_sigma=float(outlier_sigma),
        outlier_threshold=threshold,
        pooled_mean=mean,
        pooled_std=std,
        corrupted=tuple(sorted(corrupted)),
        skipped=tuple(sorted(skipped)),
        header=dict(header or {}),
    )


def batch_report(dataset: Mapping, basis: BasisConfig,
                 outlier_sigma: float = DEFAULT_OUTLIER_SIGMA,
                 variance_floor: float = VARIANCE_FLOOR,
                 header: dict | None = None) -> ComparisonReport:
    """Prae-vs-post comparison report over a keyed collection of trajectory sets.

    Sets whose fit fails are reported as corrupted and take no part in the
    outlier statistics.
    """
    series = {}
    corrupted = []
    for key, data in dataset.items():
        if key[3] == "erst":
            continue
        try:
            series[key] = fitted_series(data, basis, variance_floor)
        except PrompError as exc:
            label = "/".join(str(k) for k in key)
            log.warning("corrupted set %s: %s", label, exc)
            corrupted.append((label, str(exc)))
    return report_from_series(series, outlier_sigma, corrupted, header)


@dataclass(frozen=True)
class SweepRow:
    num_basis: int
    loss_mean: float
    loss_std: float


def hyperparameter_sweep(data: Sequence[TrajectorySet], m_values: Sequence[int],
                         ridge_lambda: float = 1e-6) -> list:
    """Reconstruction loss per number of basis functions, mean/std across sets."""
    data = list(data)
    if not data:
        raise InvalidArgument("sweep needs at least one trajectory set")
    if not len(m_values):
        raise InvalidArgument("sweep needs at least one M value")
    unique = list(dict.fromkeys(int(m) for m in m_values))
    if len(unique) < len(m_values):
        warnings.warn(f"duplicate M values dropped: {list(m_values)} -> {unique}", stacklevel=2)
    shortest = min(d.grid.length for d in data)
    too_big = [m for m in unique if m > shortest]
    if too_big:
        raise InvalidArgument(f"M values {too_big} exceed the {shortest} phase points")
    rows = []
    for m in unique:
        basis = make_basis_config(m, ridge_lambda)
        losses = np.array([reconstruction_loss(d, fit_promp(d, basis)) for d in data])
        rows.append(SweepRow(m, float(losses.mean()), float(losses.std())))
    return rows
