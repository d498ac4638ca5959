"""Two-step toy problem whose return is identically one.

At step 0 the agent picks a0 and the next state is drawn as
s1 ~ Normal(a0, a0**2); the chain then moves to s2 = 1 whatever it does.
Rewards are state increments, r1 = s1 and r2 = 1 - s1.

Draws of s1 are rounded to multiples of 2**-40. For |s1| < 2**12 the
increment 1 - s1 is then exact in binary floating point, so every return is
exactly one rather than one up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from ..mdp import ActionSpace
from ..tabular import StepLaw, TabularMDP


@dataclass(frozen=True)
class ToyEnvConfig:
    horizon: int = 2
    gamma: float = 1.0

    def __post_init__(self):
        if self.horizon != 2 or self.gamma != 1.0:
            raise ValueError("the toy problem is defined for horizon 2 and gamma 1 only")


QUANTUM = 2.0 ** -40


class ToyEnv:
    max_horizon = 2
    action_space = ActionSpace.interval()

    def __init__(self, cfg: ToyEnvConfig | None = None):
        self.cfg = cfg or ToyEnvConfig()

    def reset(self, n, rng):
        return np.zeros((n, 1))

    def step(self, states, actions, step, rng):
        n = len(states)
        if step == 0:
            a = np.asarray(actions, dtype=float).reshape(n)
            s1 = np.round((a + np.abs(a) * rng.standard_normal(n)) / QUANTUM) * QUANTUM
            return s1[:, None], s1
        s1 = states[:, 0]
        return np.ones((n, 1)), 1.0 - s1

    def is_terminal(self, states, step):
        return np.full(len(states), step >= 2)

    @staticmethod
    def features(states, step):
        out = np.zeros((len(states), 2))
        out[:, step] = 1.0
        return out


def toy_env(cfg: ToyEnvConfig | None = None) -> ToyEnv:
    return ToyEnv(cfg)


@dataclass(frozen=True)
class ToyOptima:
    homog_argmin: float
    inhom_argmin: float


def toy_closed_form(beta: float) -> ToyOptima:
    """Minimisers of the two volatility criteria; both are free of beta."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return ToyOptima(homog_argmin=0.25, inhom_argmin=0.0)


def toy_homog_volatility(a0):
    return 2.0 * np.square(a0) + 2.0 * np.square(np.asarray(a0) - 0.5)


def toy_inhom_volatility(a0):
    return 2.0 * np.square(a0)


def toy_discretized(n_grid: int = 201, low: float = -1.0, high: float = 1.0, n_nodes: int = 20):
    """Tabular version with a0 restricted to a grid and s1 on Gauss-Hermite nodes.

    The quadrature integrates polynomials up to degree ``2 * n_nodes - 1`` in
    the Gaussian draw exactly, so quadratic penalties are reproduced without
    discretisation error. Step-1 state ``g * n_nodes + k`` means action ``g``
    was played and node ``k`` was drawn. Returns ``(mdp, action_grid)``.
    """
    grid = np.linspace(low, high, n_grid)
    z, w = hermegauss(n_nodes)
    w = w / w.sum()
    S1 = n_grid * n_nodes
    s1 = grid[:, None] + np.abs(grid)[:, None] * z[None, :]

    nxt0 = np.arange(S1).reshape(1, n_grid, n_nodes)
    prob0 = np.broadcast_to(w, (1, n_grid, n_nodes)).copy()
    law0 = StepLaw(nxt0, prob0, s1.reshape(1, n_grid, n_nodes))

    r2 = (1.0 - s1.reshape(S1))[:, None, None] * np.ones((1, n_grid, 1))
    law1 = StepLaw(np.zeros((S1, n_grid, 1), dtype=int), np.ones((S1, n_grid, 1)), r2)
    terminal = [np.zeros(1, bool), np.zeros(S1, bool), np.ones(1, bool)]
    return TabularMDP([law0, law1], terminal, [1.0], n_grid), grid
