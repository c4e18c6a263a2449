"""Measurement-induced geometric phases: qubit Kraus chains, Gaussian-beam optics,
topological-index scans and genetic-algorithm fitting of crystal imperfections."""
from .errors import (
    AmbiguityError,
    AnnihilationError,
    DomainError,
    GeodesicError,
    NonQuantizedWarning,
    NoTransitionError,
    TermLimitError,
)
from .gafit import ExperimentRecord, GAConfig, GAResult, evolve, loss, records_from_genome
from .optics import (
    BeamField,
    GaussianTerm,
    OpticsConfig,
    StageConfig,
    fringe_fit,
    ideal_setup,
    interference_readout,
    overlap,
    setup_amplitude,
    single_stage_kraus_equivalence_check,
)
from .phase import (
    PhaseCurve,
    ProtocolFamily,
    bargmann_oracle,
    chi_of_theta,
    critical_strength,
    geometric_phase,
    spherical_excess_oracle,
    topological_index,
    unwrap_curve,
)
from .qubit import MeasurementSpec, PureQubitState, kraus_pair, make_state, null_kraus, sequence_amplitude
from .scan import ScanSpec, SetupTemplate, chi_curve_vs_alpha, locate_transition, phase_diagram

__all__ = [
    "AmbiguityError",
    "AnnihilationError",
    "BeamField",
    "DomainError",
    "ExperimentRecord",
    "GAConfig",
    "GAResult",
    "GaussianTerm",
    "GeodesicError",
    "MeasurementSpec",
    "NoTransitionError",
    "NonQuantizedWarning",
    "OpticsConfig",
    "PhaseCurve",
    "ProtocolFamily",
    "PureQubitState",
    "ScanSpec",
    "SetupTemplate",
    "StageConfig",
    "TermLimitError",
    "bargmann_oracle",
    "chi_curve_vs_alpha",
    "chi_of_theta",
    "critical_strength",
    "evolve",
    "fringe_fit",
    "geometric_phase",
    "ideal_setup",
    "interference_readout",
    "kraus_pair",
    "locate_transition",
    "loss",
    "make_state",
    "null_kraus",
    "overlap",
    "phase_diagram",
    "records_from_genome",
    "sequence_amplitude",
    "setup_amplitude",
    "single_stage_kraus_equivalence_check",
    "spherical_excess_oracle",
    "topological_index",
    "unwrap_curve",
]
