"""Config-driven pipeline stages and the ``augment`` command line."""

from .config import PipelineConfig, config_from_dict, derive_seed, load_config
from .stages import COMMANDS, STAGES, NoSurvivorsError, StageInputError, StageResult, run_pipeline

__all__ = [
    "COMMANDS",
    "NoSurvivorsError",
    "PipelineConfig",
    "STAGES",
    "StageInputError",
    "StageResult",
    "config_from_dict",
    "derive_seed",
    "load_config",
    "run_pipeline",
]
