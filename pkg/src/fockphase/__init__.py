"""Emergence of a relative phase between condensates prepared in Fock states.

Two (or three) condensates with exactly known populations have no relative
phase, yet a sequence of particle detections makes one appear.  The package
computes detection-sequence probabilities two ways: as a phase integral
(``engine``), which is accurate when few particles are detected, and
exactly on the Fock state (``oracle``).
"""
from .config import ExperimentConfig, load_config, validate
from .engine import (
    CircularStats,
    EventFactorModel,
    candidate_events,
    circular_stats,
    event_factor,
    event_factor3,
    pattern_probability,
    posterior,
    posterior_update,
    predictive_density,
    sample_record,
    sequence_probability,
)
from .errors import (
    CapExceededError,
    ConfigValidationError,
    FockPhaseError,
    InvalidSpecError,
    NoOrientationError,
    QuadratureDegreeError,
    TruncationError,
    ZeroProbabilityRecordError,
)
from .model import (
    CondensateSpec,
    DetectionEvent,
    GeneralModePair,
    MeasurementRecord,
    PhaseDistribution,
    Region,
    RegionLayout,
    canonical_angle,
    contrast_ratio,
    reduce_position,
    three_mode_event,
)
from .oracle import (
    OracleResult,
    elementary_symmetric,
    exact_sequence_probability,
    remote_orientation_exact,
    twomode_spin_sequential,
)
from .priors import (
    CoherentSpec,
    NumberSuperposition,
    coherent_coefficients,
    coherent_prior,
    engine_prior,
    g_from_coefficients,
    g_general,
    uniform_prior,
)
from .spin import (
    AnglePolicy,
    RemotePrediction,
    predict_remote_orientation,
    rayleigh_test,
    run_region_experiment,
    wallis_reference,
)

__version__ = "0.1.0"
