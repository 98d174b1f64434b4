"""Experiment configuration, image I/O, time loops and the command-line tool."""

from .config import ExperimentConfig, Problem, load_config, parse_config, serialize_config
from .images import RasterImage, field_to_image, image_to_field, load_pgm, save_pgm, threshold
from .presets import builtin_initial_conditions, two_stripes
from .runner import RunResult, run_experiment

__all__ = [
    "ExperimentConfig",
    "Problem",
    "load_config",
    "parse_config",
    "serialize_config",
    "RasterImage",
    "field_to_image",
    "image_to_field",
    "load_pgm",
    "save_pgm",
    "threshold",
    "builtin_initial_conditions",
    "two_stripes",
    "RunResult",
    "run_experiment",
]
