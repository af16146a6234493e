"""Finite-dimensional two-scale models and their hypothesis checks."""

from .galerkin import ReactionDiffusionParams, galerkin_truncate
from .loader import (
    ModelFile,
    assemble_model,
    build_model,
    build_model_with_report,
    load_model_file,
    read_model_file,
)
from .spec import ControlData, ModelConstants, ModelSpec
from .spectral import NoiseMap, SpectralOperator
from .validation import HypothesisCheck, ValidationReport, validate_model

__all__ = [
    "ControlData",
    "HypothesisCheck",
    "ModelConstants",
    "ModelFile",
    "ModelSpec",
    "NoiseMap",
    "ReactionDiffusionParams",
    "SpectralOperator",
    "ValidationReport",
    "assemble_model",
    "build_model",
    "build_model_with_report",
    "galerkin_truncate",
    "load_model_file",
    "read_model_file",
    "validate_model",
]
