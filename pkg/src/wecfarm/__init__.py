"""Layout and power-take-off optimization for wave-energy converter farms."""

from .farm import (
    BudgetExhausted,
    Evaluator,
    FarmBounds,
    FarmCodec,
    FarmLayout,
    distance_penalty,
    random_feasible_layout,
    read_layout,
    write_layout,
)
from .harness import METHODS, ExperimentConfig, run_experiment, run_method
from .hydro import EvaluationResult, HydroModel, farm_power
from .scenario import WaveScenario, load_scenario, monochromatic
from .stats import rank_sum_test, summarize

__version__ = "0.1.0"

__all__ = [
    "METHODS",
    "BudgetExhausted",
    "EvaluationResult",
    "Evaluator",
    "ExperimentConfig",
    "FarmBounds",
    "FarmCodec",
    "FarmLayout",
    "HydroModel",
    "WaveScenario",
    "distance_penalty",
    "farm_power",
    "load_scenario",
    "monochromatic",
    "random_feasible_layout",
    "rank_sum_test",
    "read_layout",
    "run_experiment",
    "run_method",
    "summarize",
    "write_layout",
]
