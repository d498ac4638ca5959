"""Liquidation of a block of shares under linear permanent and temporary impact.

State columns are ``(t/T, S, N, I, C)``: normalised time, unaffected price,
inventory, cumulated permanent impact and cash. Policies see the first three.

At step i the agent sells the fraction ``a`` of its remaining inventory,
i.e. trades ``n = -a * N`` (negative means selling). The trade executes at
``X + sign(n) * (epsilon + eta * |n|)`` with ``X = S + I`` the reference
price before the trade; the trade's permanent impact ``g * n`` then moves the
reference price for the remaining position. The last step liquidates whatever
is left, whatever the action. The reward is the change in mark-to-market
value ``V = N * X + C`` over the period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..mdp import ActionSpace

T_COL, S_COL, N_COL, I_COL, C_COL = range(5)


@dataclass(frozen=True)
class ExecutionConfig:
    s0: float = 50.0
    sigma: float = 0.95
    g: float = 2.5e-7
    epsilon_cost: float = 1.0 / 16.0
    eta: float = 2.5e-6
    dt: float = 1.0
    T: float = 5.0
    n0: float = 1e6
    min_fraction: float = 0.0

    def __post_init__(self):
        for name in ("s0", "g", "epsilon_cost", "eta", "dt", "T", "n0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError("T / dt must be a positive integer")
        if self.min_fraction > 0:
            raise ValueError("min_fraction must be <= 0 (negative values allow buying)")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


class ExecutionEnv:
    def __init__(self, cfg: ExecutionConfig | None = None):
        self.cfg = cfg or ExecutionConfig()
        self.max_horizon = self.cfg.n_steps
        self.action_space = ActionSpace.interval(self.cfg.min_fraction, 1.0)

    def reset(self, n, rng):
        c = self.cfg
        s = np.zeros((n, 5))
        s[:, S_COL] = c.s0
        s[:, N_COL] = c.n0
        return s

    def trade_size(self, states, actions, step):
        c = self.cfg
        frac = np.clip(np.asarray(actions, dtype=float), c.min_fraction, 1.0)
        if step == self.max_horizon - 1:
            frac = np.ones(len(states))
        return -frac * states[:, N_COL]

    def step(self, states, actions, step, rng):
        c = self.cfg
        n = self.trade_size(states, actions, step)
        S, N, I, C = (states[:, k] for k in (S_COL, N_COL, I_COL, C_COL))
        X = S + I
        spread = np.sign(n) * (c.epsilon_cost + c.eta * np.abs(n))
        dS = c.sigma * math.sqrt(c.dt) * rng.standard_normal(len(states))
        N1 = N + n
        if step == self.max_horizon - 1:
            N1 = np.zeros_like(N1)
        nxt = np.empty_like(states)
        nxt[:, T_COL] = (step + 1) * c.dt / c.T
        nxt[:, S_COL] = S + dS
        nxt[:, N_COL] = N1
        nxt[:, I_COL] = I + c.g * n
        nxt[:, C_COL] = C - n * (X + spread)
        # V' - V written without the large offsets N * X and C, which cancel
        reward = N1 * (dS + c.g * n) - np.abs(n) * (c.epsilon_cost + c.eta * np.abs(n))
        return nxt, reward

    def is_terminal(self, states, step):
        return np.full(len(states), step >= self.max_horizon)

    def features(self, states, step):
        out = np.zeros((len(states), self.max_horizon))
        out[:, step] = 1.0
        return out

    def value(self, states):
        """Mark-to-market value N * (S + I) + C."""
        return states[:, N_COL] * (states[:, S_COL] + states[:, I_COL]) + states[:, C_COL]

    def with_config(self, **changes) -> "ExecutionEnv":
        return ExecutionEnv(replace(self.cfg, **changes))


def execution_env(cfg: ExecutionConfig | None = None) -> ExecutionEnv:
    return ExecutionEnv(cfg)


class RewardScaled:
    """Divides rewards by ``scale``; risk aversions convert with :meth:`solver_beta`.

    Raw objective ``E[G] - beta * vol`` equals ``scale * (E[G'] - beta * scale * vol')``
    in scaled rewards ``G'``, so a raw ``beta`` becomes ``beta * scale`` for a
    quadratic penalty.
    """

    def __init__(self, env, scale: float):
        self.env = env
        self.scale = float(scale)
        self.max_horizon = env.max_horizon
        self.action_space = env.action_space

    def reset(self, n, rng):
        return self.env.reset(n, rng)

    def step(self, states, actions, step, rng):
        nxt, r = self.env.step(states, actions, step, rng)
        return nxt, r / self.scale

    def is_terminal(self, states, step):
        return self.env.is_terminal(states, step)

    def features(self, states, step):
        return self.env.features(states, step)

    def solver_beta(self, beta: float) -> float:
        return beta * self.scale

    def __getattr__(self, name):
        return getattr(self.env, name)


def scaled_execution_env(cfg: ExecutionConfig | None = None) -> RewardScaled:
    env = ExecutionEnv(cfg)
    return RewardScaled(env, env.cfg.n0 * env.cfg.s0)


def inventory_path(batch, cfg: ExecutionConfig) -> np.ndarray:
    """Mean fraction of shares left at steps 0..n_steps."""
    return batch.states[:, :, N_COL].mean(axis=0) / cfg.n0
