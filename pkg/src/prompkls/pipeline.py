"""Recording-level batch driver: segment, fit and compare many recordings.

Each job turns one recording (from disk or from a synthetic scenario) into
the fitted marginal series of its inward and outward stroke sets. Jobs are
independent and may run in worker processes; the report is assembled
serially afterwards in a fixed order, so the result does not depend on the
worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .analysis import ComparisonReport, fitted_series, report_from_series
from .config import RunConfig
from .errors import PrompError
from .formats import ManifestEntry, read_recording
from .phase_basis import BasisConfig, PhaseGrid, make_basis_config, make_phase_grid
from .segmentation import RawRecording, SegmentationParams, build_trajectory_sets
from .synth import StudyDesign, SynthScenario, generate_recording, study_scenarios

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineSettings:
    grid: PhaseGrid
    basis: BasisConfig
    segmentation: SegmentationParams
    variance_floor: float

    @classmethod
    def from_config(cls, config: RunConfig) -> "PipelineSettings":
        return cls(
            grid=make_phase_grid(config.phase_points),
            basis=make_basis_config(config.num_basis, config.ridge_lambda),
            segmentation=SegmentationParams(config.threshold_sigma, config.refractory_ms,
                                            config.strokes_per_set, config.filter_cutoff_hz),
            variance_floor=config.variance_floor,
        )


def load_source(source) -> RawRecording:
    if isinstance(source, RawRecording):
        return source
    if isinstance(source, SynthScenario):
        return generate_recording(source)
    if isinstance(source, ManifestEntry):
        return read_recording(source.path, source.meta, source.sample_rate_hz)
    raise TypeError(f"unsupported recording source {type(source).__name__}")


def _label(meta) -> str:
    return f"{meta.stimulus}/{meta.participant}/{meta.session_phase}/e{meta.experiment}"


def process_source(source, settings: PipelineSettings):
    """Returns (meta, {direction: series}, None) or (meta, None, reason) on a pipeline failure."""
    rec = load_source(source)
    try:
        sets = build_trajectory_sets(rec, settings.grid, settings.segmentation)
        series = {d: fitted_series(s, settings.basis, settings.variance_floor)
                  for d, s in sets.items()}
    except PrompError as exc:
        return rec.meta, None, f"{type(exc).__name__}: {exc}"
    return rec.meta, series, None


def _process(args):
    return process_source(*args)


def run_batch(sources, config: RunConfig, header: dict | None = None) -> ComparisonReport:
    """Full prae-vs-post protocol over the given recording sources."""
    config.validate()
    settings = PipelineSettings.from_config(config)
    jobs = [(s, settings) for s in sources]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_process, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        results = [_process(job) for job in jobs]

    series = {}
    corrupted = []
    for meta, by_direction, reason in results:
        if by_direction is None:
            log.warning("corrupted recording %s: %s", _label(meta), reason)
            corrupted.append((_label(meta), reason))
            continue
        for direction, s in by_direction.items():
            series[(meta.stimulus, meta.participant, meta.experiment, meta.session_phase, direction)] = s
    full_header = {"rng_seed": config.rng_seed, "config": config.as_dict(),
                   "recordings": len(jobs)}
    full_header.update(header or {})
    return report_from_series(series, config.outlier_sigma, corrupted, full_header)


def run_synthetic_study(design: StudyDesign, config: RunConfig) -> ComparisonReport:
    """Generate every recording of ``design`` in memory and run the batch on it."""
    return run_batch(study_scenarios(design), config, {"study_seed": design.seed})
