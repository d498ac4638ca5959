"""Finite, time-indexed MDPs with exact laws.

Transitions are stored sparsely: at step ``i`` the pair (s, a) leads to one
of ``K`` branches ``(next_state[s, a, k], reward[s, a, k])`` with probability
``prob[s, a, k]``. States are indexed per step, so the state space may change
with time (the discretised toy problem relies on this).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import ActionSpace, Batch


@dataclass(frozen=True)
class StepLaw:
    next_state: np.ndarray  # (S_i, A, K) int
    prob: np.ndarray        # (S_i, A, K)
    reward: np.ndarray      # (S_i, A, K)

    @property
    def n_states(self) -> int:
        return self.prob.shape[0]


class TabularMDP:
    def __init__(self, laws, terminal, init, n_actions: int):
        self.laws = list(laws)
        self.terminal = [np.asarray(t, dtype=bool) for t in terminal]
        self.init = np.asarray(init, dtype=float)
        self.n_actions = int(n_actions)
        self.max_horizon = len(self.laws)
        self.action_space = ActionSpace.discrete(self.n_actions)
        if len(self.terminal) != self.max_horizon + 1:
            raise ValueError("need one terminal mask per step 0..H")
        for i, law in enumerate(self.laws):
            if law.prob.shape[1] != self.n_actions:
                raise ValueError(f"step {i}: action axis does not match n_actions")
            if law.n_states != len(self.terminal[i]):
                raise ValueError(f"step {i}: state count mismatch")
            if law.next_state.max(initial=0) >= len(self.terminal[i + 1]):
                raise ValueError(f"step {i}: next state out of range")
            live = ~self.terminal[i]
            sums = law.prob[live].sum(axis=-1)
            if not np.allclose(sums, 1.0, atol=1e-12):
                raise ValueError(f"step {i}: branch probabilities do not sum to one")
        if not np.isclose(self.init.sum(), 1.0):
            raise ValueError("initial distribution does not sum to one")

    @classmethod
    def homogeneous(cls, next_state, prob, reward, terminal, init, horizon: int):
        law = StepLaw(np.asarray(next_state), np.asarray(prob, float), np.asarray(reward, float))
        return cls([law] * horizon, [terminal] * (horizon + 1), init, law.prob.shape[1])

    @property
    def n_states(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.terminal)

    def reward_range(self) -> tuple[float, float]:
        lo, hi = np.inf, -np.inf
        for i, law in enumerate(self.laws):
            live = ~self.terminal[i]
            r = law.reward[live][law.prob[live] > 0]
            if r.size:
                lo, hi = min(lo, r.min()), max(hi, r.max())
        return float(lo), float(hi)

    # EnvModel interface
    def reset(self, n, rng):
        return rng.choice(len(self.init), size=n, p=self.init)

    def step(self, states, actions, step, rng):
        law = self.laws[step]
        states = np.asarray(states, dtype=int)
        actions = np.asarray(actions, dtype=int)
        p = law.prob[states, actions]
        u = rng.random(len(states))
        k = (np.cumsum(p, axis=1) < u[:, None]).sum(axis=1)
        k = np.minimum(k, p.shape[1] - 1)
        return law.next_state[states, actions, k], law.reward[states, actions, k]

    def is_terminal(self, states, step):
        return self.terminal[min(step, self.max_horizon)][np.asarray(states, dtype=int)]


def policy_tables(policy, mdp: TabularMDP) -> list[np.ndarray]:
    """Per-step (S_i, A) action probability tables of a tabular policy."""
    return [np.asarray(policy.probs(np.arange(mdp.n_states[i]), i)) for i in range(mdp.max_horizon)]


def step_atoms(mdp: TabularMDP, tables):
    """Exact law of each reward r_{i+1} on the event that step i+1 is reached.

    Returns per step ``(values, weights)`` with unnormalised weights summing to
    P(horizon >= i+1), plus the vector of those survival probabilities.
    """
    d = mdp.init * ~mdp.terminal[0]
    atoms, survival = [], []
    for i, law in enumerate(mdp.laws):
        d = d * ~mdp.terminal[i]
        mass = d.sum()
        survival.append(mass)
        W = d[:, None, None] * tables[i][:, :, None] * law.prob
        keep = W > 0
        vals, wts = law.reward[keep], W[keep]
        if vals.size:
            uniq, inv = np.unique(vals, return_inverse=True)
            wts = np.bincount(inv.ravel(), weights=wts, minlength=len(uniq))
            vals = uniq
        atoms.append((vals, wts))
        d = np.bincount(law.next_state[keep], weights=W[keep], minlength=mdp.n_states[i + 1])
    return atoms, np.array(survival)


def enumerate_paths(mdp: TabularMDP, tables, max_paths: int = 2_000_000):
    """Every outcome path with positive probability, as a weighted :class:`Batch`."""
    H = mdp.max_horizon
    s0 = np.flatnonzero(mdp.init > 0)
    prob = mdp.init[s0].astype(float)
    states = np.zeros((len(s0), H + 1), dtype=int)
    states[:, 0] = s0
    actions = np.zeros((len(s0), H), dtype=int)
    rewards = np.zeros((len(s0), H))
    horizons = np.full(len(s0), H, dtype=int)
    alive = ~mdp.terminal[0][s0]
    if not alive.all():
        raise ValueError("initial state is terminal")
    for i, law in enumerate(mdp.laws):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        s = states[idx, i]
        w = prob[idx, None, None] * tables[i][s][:, :, None] * law.prob[s]
        p_i, a_i, k_i = np.nonzero(w > 0)
        rows = idx[p_i]
        new_states = states[rows].copy()
        new_states[:, i + 1] = law.next_state[s[p_i], a_i, k_i]
        new_actions = actions[rows].copy()
        new_actions[:, i] = a_i
        new_rewards = rewards[rows].copy()
        new_rewards[:, i] = law.reward[s[p_i], a_i, k_i]
        new_prob = w[p_i, a_i, k_i]
        ended = mdp.terminal[i + 1][new_states[:, i + 1]]
        new_h = np.where(ended, i + 1, H)
        dead = np.flatnonzero(~alive)
        states = np.concatenate([states[dead], new_states])
        actions = np.concatenate([actions[dead], new_actions])
        rewards = np.concatenate([rewards[dead], new_rewards])
        horizons = np.concatenate([horizons[dead], new_h])
        prob = np.concatenate([prob[dead], new_prob])
        alive = np.concatenate([np.zeros(len(dead), bool), ~ended])
        if len(prob) > max_paths:
            raise ValueError(f"path enumeration exceeds {max_paths} paths")
    return Batch(states, actions, rewards, horizons), prob
