from .gradient import (CriticEstimate, analytic_volatility_gradient, expected_estimator,
                       finite_difference_gradient, fitted_table_critic, ivo_critic, ivo_gradient,
                       return_gradient, table_critic)
from .nested import NestedConfig, nested_solve
from .results import SolveResult, save_result
from .train import TrainConfig, TrainingDiverged, ivo_train, trvo_train
from .value_iteration import VIResult, value_iteration_modified

__all__ = [
    "CriticEstimate", "analytic_volatility_gradient", "expected_estimator",
    "finite_difference_gradient", "fitted_table_critic", "ivo_critic", "ivo_gradient",
    "return_gradient", "table_critic", "NestedConfig", "nested_solve", "SolveResult",
    "save_result", "TrainConfig", "TrainingDiverged", "ivo_train", "trvo_train", "VIResult",
    "value_iteration_modified",
]
