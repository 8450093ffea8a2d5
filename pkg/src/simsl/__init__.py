"""Single-index models with a surface link for individualized dose rules."""

from .doserule import DoseRuleEvaluation, argmax_dose, estimate_value_test, optimal_dose
from .errors import InputError, NumericalError, SimslError
from .model import Dataset, SimslConfig, SimslModel, bootstrap_beta_ci, fit_simsl
from .simulation import ScenarioSpec, gen_scenario, run_benchmark, true_value_scenario

__all__ = [
    "Dataset",
    "DoseRuleEvaluation",
    "InputError",
    "NumericalError",
    "ScenarioSpec",
    "SimslConfig",
    "SimslError",
    "SimslModel",
    "argmax_dose",
    "bootstrap_beta_ci",
    "estimate_value_test",
    "fit_simsl",
    "gen_scenario",
    "optimal_dose",
    "run_benchmark",
    "true_value_scenario",
]
