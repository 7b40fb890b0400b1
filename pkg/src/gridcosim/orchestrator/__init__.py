"""Scenario loading, the closed operating loop and the command line."""
from .loop import PHASES, OperatorAction, RunReport, run_batch, run_closed_loop, substream
from .scenario import (
    ACCESS_MODES,
    ATTACK_MODES,
    FORMATS,
    AttackerConfig,
    DatasetConfig,
    OperatorConfig,
    Scenario,
    ScenarioValidationError,
    bundled_path,
    bundled_scenarios,
    load_scenario,
    validate_scenario,
)
