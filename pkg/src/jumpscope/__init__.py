"""Detect jumps of f and kinks of f' from samples with bounded noise."""

from ._kernels import BACKEND
from .detector import Thresholds, classify_kinks, detect, refine_jump_location
from .differentiator import central_difference, derivative_table, error_bound
from .errors import (
    ConstraintsInfeasible,
    DetectionError,
    DomainNotUnit,
    DomainTooSmall,
    InputError,
    InvalidClass,
    InvalidSpec,
    JumpscopeError,
    ModeUnsupportedKinks,
    NonUniformGrid,
    NotRefinable,
    OutOfDomain,
    ParseError,
)
from .model import (
    DetectionGrid,
    DetectionReport,
    Event,
    EventKind,
    FunctionSource,
    SampledGridSource,
    SignalSource,
    SmoothnessClass,
    Variant,
    make_step_policy,
)
from .synth import PieceSpec, add_noise, build_signal, random_corpus

__all__ = [
    "BACKEND",
    "ConstraintsInfeasible",
    "DetectionError",
    "DetectionGrid",
    "DetectionReport",
    "DomainNotUnit",
    "DomainTooSmall",
    "Event",
    "EventKind",
    "FunctionSource",
    "InputError",
    "InvalidClass",
    "InvalidSpec",
    "JumpscopeError",
    "ModeUnsupportedKinks",
    "NonUniformGrid",
    "NotRefinable",
    "OutOfDomain",
    "ParseError",
    "PieceSpec",
    "SampledGridSource",
    "SignalSource",
    "SmoothnessClass",
    "Thresholds",
    "Variant",
    "add_noise",
    "build_signal",
    "central_difference",
    "classify_kinks",
    "derivative_table",
    "detect",
    "error_bound",
    "make_step_policy",
    "random_corpus",
    "refine_jump_location",
]
