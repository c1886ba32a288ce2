from .config_io import ALGORITHMS, CHECKPOINT_GRID, ExperimentSpec, LearnerParams, load_config, parse_overrides
from .experiment import (
    ExperimentError,
    ExperimentResult,
    FlightResult,
    RunMetrics,
    build_world,
    fly_mcts,
    fly_policy,
    generate_layout,
    run_experiment,
    run_seed,
)
from .export import check_trace, export_csv, read_trajectory

__all__ = [
    "ALGORITHMS",
    "CHECKPOINT_GRID",
    "ExperimentSpec",
    "LearnerParams",
    "load_config",
    "parse_overrides",
    "ExperimentError",
    "ExperimentResult",
    "FlightResult",
    "RunMetrics",
    "build_world",
    "fly_mcts",
    "fly_policy",
    "generate_layout",
    "run_experiment",
    "run_seed",
    "check_trace",
    "export_csv",
    "read_trajectory",
]
