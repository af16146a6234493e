"""Forward simulation of the slow, fast and frozen-x fast equations."""

from .grid import TimeGrid
from .noise import NoiseStreams
from .simulate import (
    ContractionCheck,
    MomentEstimate,
    PathBundle,
    coupled_fast_contraction,
    fast_moment_profile,
    fast_moment_sup,
    simulate_frozen_fast,
    simulate_slow_paths,
    simulate_two_scale_paths,
    slow_moment_bound,
)
from .steppers import step_fast_explicit, step_fast_semi_implicit, step_slow_exact
from .storage import export_step_statistics, load_bundle, save_bundle

__all__ = [
    "ContractionCheck",
    "MomentEstimate",
    "NoiseStreams",
    "PathBundle",
    "TimeGrid",
    "coupled_fast_contraction",
    "export_step_statistics",
    "fast_moment_profile",
    "fast_moment_sup",
    "load_bundle",
    "save_bundle",
    "simulate_frozen_fast",
    "simulate_slow_paths",
    "simulate_two_scale_paths",
    "slow_moment_bound",
    "step_fast_explicit",
    "step_fast_semi_implicit",
    "step_slow_exact",
]
