"""Probabilistic movement primitives for comparing repetitive arm-movement stroke sets.

Strokes are fitted with normalized radial basis functions, the weight
distribution is propagated to per-phase Gaussian marginals and two sets are
compared with the closed-form symmetric Kullback-Leibler divergence.
"""

from .analysis import (
    ComparisonKey,
    ComparisonReport,
    batch_report,
    compare_phase_pair,
    detect_outliers,
    hyperparameter_sweep,
    reconstruction_loss,
)
from .config import RunConfig, load_config, parse_config
from .divergence import (
    kl_gaussian,
    sliding_window_kls,
    symmetric_kl,
    trajectory_set_kls,
)
from .errors import (
    ConfigError,
    IncompatibleSeries,
    InsufficientData,
    InsufficientDemonstrations,
    InsufficientStrokes,
    InvalidArgument,
    MalformedRecording,
    ParseError,
    PrompError,
    SingularSystemError,
)
from .phase_basis import BasisConfig, PhaseGrid, eval_features, feature_matrix, make_basis_config, make_phase_grid
from .pipeline import run_batch, run_synthetic_study
from .promp import (
    CHANNELS,
    GaussianSeries,
    PrompModel,
    TrajectorySet,
    empirical_series,
    fit_promp,
    marginal_series,
    sample_trajectories,
)
from .segmentation import RawRecording, RecordingMeta, build_trajectory_sets, detect_taps, segment_strokes
from .synth import Perturbation, StudyDesign, SynthScenario, generate_recording, generate_trajectory_set

__version__ = "0.1.0"
