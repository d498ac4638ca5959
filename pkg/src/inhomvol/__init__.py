"""Risk-averse reinforcement learning with per-step reward targets."""

from .losses import LossSpec, loss_eval
from .mdp import (Batch, DiscountSpec, Trajectory, cumulated_discount, discounted_return,
                  rollout, rollout_batch)
from .risk import (RiskReport, TargetSchedule, evaluate_policy, fit_targets, homog_penalty,
                   inhom_penalty, return_variance)

__version__ = "0.1.0"

__all__ = [
    "LossSpec", "loss_eval", "Batch", "DiscountSpec", "Trajectory", "cumulated_discount",
    "discounted_return", "rollout", "rollout_batch", "RiskReport", "TargetSchedule",
    "evaluate_policy", "fit_targets", "homog_penalty", "inhom_penalty", "return_variance",
]
