from .execution import (ExecutionConfig, ExecutionEnv, RewardScaled, execution_env,
                        inventory_path, scaled_execution_env)
from .grid import GridConfig, GridWorld, default_grid, grid_env, load_grid, most_likely_path
from .toy import ToyEnv, ToyEnvConfig, toy_closed_form, toy_discretized, toy_env

__all__ = [
    "ExecutionConfig", "ExecutionEnv", "RewardScaled", "execution_env", "inventory_path",
    "scaled_execution_env", "GridConfig", "GridWorld", "default_grid", "grid_env", "load_grid",
    "most_likely_path", "ToyEnv", "ToyEnvConfig", "toy_closed_form", "toy_discretized", "toy_env",
]
