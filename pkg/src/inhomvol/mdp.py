"""Episodic, time-inhomogeneous MDP plumbing shared by every environment and solver.

Environments are vectorised: they advance a whole batch of episodes at once,
and a rollout produces a :class:`Batch` of padded arrays. A single episode is
a :class:`Trajectory`. Step indices past an episode's realised horizon are
masked out rather than filled with an absorbing state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np


class RolloutError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscountSpec:
    gamma: float = 1.0
    max_horizon: int | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.max_horizon is not None and self.max_horizon < 1:
            raise ValueError("max_horizon must be positive")
        if self.gamma == 1.0 and self.max_horizon is None:
            raise ValueError("gamma == 1 requires a finite max_horizon")

    def weights(self, horizon: int) -> np.ndarray:
        """Discount factors gamma**i for i = 0..horizon-1."""
        return self.gamma ** np.arange(horizon, dtype=float)


@dataclass(frozen=True)
class ActionSpace:
    kind: str  # "discrete" or "interval"
    n: int = 0
    low: float = -math.inf
    high: float = math.inf

    @classmethod
    def discrete(cls, n: int) -> "ActionSpace":
        return cls("discrete", n=n)

    @classmethod
    def interval(cls, low: float = -math.inf, high: float = math.inf) -> "ActionSpace":
        return cls("interval", low=low, high=high)


class EnvModel(Protocol):
    """Vectorised episodic environment.

    ``states`` arrays have the batch on axis 0. ``step`` is the 0-based index
    of the decision being taken; the reward it returns is r_{step+1}.
    """

    max_horizon: int
    action_space: ActionSpace

    def reset(self, n: int, rng: np.random.Generator) -> np.ndarray: ...

    def step(self, states: np.ndarray, actions: np.ndarray, step: int,
             rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]: ...

    def is_terminal(self, states: np.ndarray, step: int) -> np.ndarray: ...


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if len(self.rewards) != self.horizon or len(self.actions) != self.horizon:
            raise ValueError("rewards and actions must have `horizon` entries")
        if len(self.states) != self.horizon + 1:
            raise ValueError("states must have `horizon + 1` entries")


@dataclass
class Batch:
    """Padded episodes: ``rewards[n, i]`` is r_{i+1} of episode n if ``i < horizons[n]``."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    horizons: np.ndarray
    extras: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.horizons)

    @property
    def max_horizon(self) -> int:
        return int(self.horizons.max()) if len(self.horizons) else 0

    @property
    def mask(self) -> np.ndarray:
        width = self.rewards.shape[1]
        return np.arange(width)[None, :] < self.horizons[:, None]

    def __getitem__(self, n: int) -> Trajectory:
        h = int(self.horizons[n])
        return Trajectory(self.states[n, : h + 1].copy(), self.actions[n, :h].copy(),
                          self.rewards[n, :h].copy(), h)

    def trajectories(self) -> list[Trajectory]:
        return [self[n] for n in range(len(self))]

    @classmethod
    def from_trajectories(cls, trajs: Sequence[Trajectory]) -> "Batch":
        if not trajs:
            raise ValueError("empty sample")
        width = max(t.horizon for t in trajs)
        n = len(trajs)
        s0 = np.asarray(trajs[0].states)
        a0 = np.asarray(trajs[0].actions)
        states = np.zeros((n, width + 1) + s0.shape[1:], dtype=s0.dtype)
        actions = np.zeros((n, width) + a0.shape[1:], dtype=a0.dtype)
        rewards = np.zeros((n, width))
        for k, t in enumerate(trajs):
            states[k, : t.horizon + 1] = t.states
            actions[k, : t.horizon] = t.actions
            rewards[k, : t.horizon] = t.rewards
        horizons = np.array([t.horizon for t in trajs], dtype=int)
        return cls(states, actions, rewards, horizons)


def as_batch(sample) -> Batch:
    if isinstance(sample, Batch):
        return sample
    if isinstance(sample, Trajectory):
        return Batch.from_trajectories([sample])
    return Batch.from_trajectories(list(sample))


def spawn_rngs(root_seed: int, n_workers: int) -> list[np.random.Generator]:
    """Independent generators for parallel workers, derived from one root seed."""
    children = np.random.SeedSequence(root_seed).spawn(n_workers)
    return [np.random.default_rng(c) for c in children]


def rollout_batch(env: EnvModel, policy, n: int, rng: np.random.Generator,
                  disc: DiscountSpec | None = None, deterministic: bool = False) -> Batch:
    """Run ``n`` episodes of ``policy`` in ``env``.

    Every episode stops at its first terminal state or at ``env.max_horizon``.
    With ``deterministic=True`` the policy's modal action is taken.
    """
    _check_action_space(env, policy)
    limit = env.max_horizon
    if limit is None:
        if disc is None or disc.gamma == 1.0:
            raise RolloutError("unbounded horizon with gamma == 1")
        limit = disc.max_horizon or int(math.ceil(math.log(1e-12) / math.log(disc.gamma)))

    s = env.reset(n, rng)
    states = np.zeros((n, limit + 1) + s.shape[1:], dtype=s.dtype)
    states[:, 0] = s
    actions = None
    rewards = np.zeros((n, limit))
    horizons = np.full(n, limit, dtype=int)
    alive = ~env.is_terminal(s, 0)
    if not alive.all():
        raise RolloutError("initial state is terminal")

    # finished episodes keep their last state; only live rows reach the policy and the model,
    # since a frozen state need not exist in a later step's state space
    for i in range(limit):
        idx = np.flatnonzero(alive)
        s_live = s[idx]
        a = policy.mode(s_live, i) if deterministic else policy.sample(s_live, i, rng)
        if actions is None:
            actions = np.zeros((n, limit) + a.shape[1:], dtype=a.dtype)
        nxt_live, r = env.step(s_live, a, i, rng)
        nxt = s.copy()
        nxt[idx] = nxt_live
        actions[idx, i] = a
        rewards[idx, i] = r
        states[:, i + 1] = nxt
        ended = idx[env.is_terminal(nxt_live, i + 1)]
        horizons[ended] = i + 1
        alive[ended] = False
        s = nxt
        if not alive.any():
            break
    if disc is not None and disc.gamma == 1.0 and disc.max_horizon is not None:
        if horizons.max() > disc.max_horizon:
            raise RolloutError("episode ran past max_horizon with gamma == 1")
    return Batch(states, actions, rewards, horizons)


def rollout(env: EnvModel, policy, rng: np.random.Generator,
            disc: DiscountSpec | None = None, deterministic: bool = False) -> Trajectory:
    return rollout_batch(env, policy, 1, rng, disc, deterministic)[0]


def _check_action_space(env, policy):
    pspace = getattr(policy, "action_space", None)
    if pspace is None:
        return
    espace = env.action_space
    if pspace.kind != espace.kind or (espace.kind == "discrete" and pspace.n != espace.n):
        raise ValueError(f"policy action space {pspace} does not match env {espace}")


def discounted_return(traj, disc: DiscountSpec) -> float:
    """Sum of gamma**(i-1) * r_i over the realised episode."""
    rewards = np.asarray(traj.rewards, dtype=float)[: traj.horizon]
    return math.fsum(disc.weights(len(rewards)) * rewards)


def batch_returns(batch: Batch, disc: DiscountSpec) -> np.ndarray:
    w = disc.weights(batch.rewards.shape[1])
    return np.where(batch.mask, batch.rewards * w, 0.0).sum(axis=1)


def cumulated_discount(horizon: int | None, gamma: float) -> float:
    """Sum of gamma**(i-1) for i = 1..horizon; ``None`` means unbounded."""
    if horizon is None or math.isinf(horizon):
        if gamma >= 1.0:
            raise ValueError("unbounded horizon requires gamma < 1")
        return 1.0 / (1.0 - gamma)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if gamma == 1.0:
        return float(horizon)
    return (1.0 - gamma ** horizon) / (1.0 - gamma)


def cumulated_discounts(horizons: np.ndarray, gamma: float) -> np.ndarray:
    horizons = np.asarray(horizons, dtype=float)
    if gamma == 1.0:
        return horizons
    return (1.0 - gamma ** horizons) / (1.0 - gamma)
