"""Random small tabular MDPs for exact property checks."""

from __future__ import annotations

import numpy as np

from .tabular import StepLaw, TabularMDP


def random_micro_mdp(rng: np.random.Generator, max_states: int = 4, max_actions: int = 3,
                     max_horizon: int = 3, stochastic_horizon: bool | None = None,
                     n_branches: int = 2, min_actions: int = 1) -> TabularMDP:
    """Draw an MDP with at most the given sizes.

    Rewards are multiples of 1/4 in [-2, 2] and branch probabilities are
    multiples of 1/8. With
    ``stochastic_horizon`` the last state index is terminal from step 1 on,
    so episodes may stop early.
    """
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(min_actions, max_actions + 1))
    H = int(rng.integers(1, max_horizon + 1))
    if stochastic_horizon is None:
        stochastic_horizon = bool(rng.integers(2))
    laws = []
    for _ in range(H):
        nxt = rng.integers(0, S, size=(S, A, n_branches))
        raw = rng.integers(1, 8, size=(S, A, n_branches)).astype(float)
        prob = _eighths(raw)
        rew = rng.integers(-8, 9, size=(S, A, n_branches)) / 4.0
        laws.append(StepLaw(nxt, prob, rew))
    term = np.zeros(S, bool)
    if stochastic_horizon:
        term[S - 1] = True
    terminal = [np.zeros(S, bool)] + [term.copy() for _ in range(H - 1)] + [np.ones(S, bool)]
    init = np.zeros(S)
    init[: S - 1 if stochastic_horizon else S] = 1.0
    init /= init.sum()
    return TabularMDP(laws, terminal, init, A)


def _eighths(raw: np.ndarray) -> np.ndarray:
    """Normalise the last axis to multiples of 1/8 summing to one."""
    p = np.floor(8.0 * raw / raw.sum(axis=-1, keepdims=True))
    p[..., 0] += 8.0 - p.sum(axis=-1)
    return p / 8.0
