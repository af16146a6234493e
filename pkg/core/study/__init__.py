"""收敛实验编排层。"""

from .config import StudyConfig, load_study_config
from .plots import emit_plots
from .report import ConvergenceReport, ConvergenceRow
from .run_store import RunStore
from .runner import run_convergence_study, run_reaction_diffusion_example

__all__ = [
    "ConvergenceReport",
    "ConvergenceRow",
    "RunStore",
    "StudyConfig",
    "emit_plots",
    "load_study_config",
    "run_convergence_study",
    "run_reaction_diffusion_example",
]
