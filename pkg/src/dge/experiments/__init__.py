from .config import ExperimentConfig, config_from_dict, config_schema, load_config
from .runner import (
    RunRecord,
    load_real,
    run_evaluate_experiment,
    run_experiment,
    run_select_experiment,
    run_subgroups_experiment,
    run_sweep,
    run_train_experiment,
    run_uq_experiment,
)

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "config_from_dict",
    "config_schema",
    "load_config",
    "load_real",
    "run_evaluate_experiment",
    "run_experiment",
    "run_select_experiment",
    "run_subgroups_experiment",
    "run_sweep",
    "run_train_experiment",
    "run_uq_experiment",
]
