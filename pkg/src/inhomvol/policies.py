"""Stochastic policies with flat parameter vectors and score functions.

All methods are vectorised over a batch of states at a single step index.
``weighted_score(states, actions, step, coef)`` returns
sum_n coef[n] * grad log pi(actions[n] | states[n]) without materialising the
per-sample gradients.
"""

from __future__ import annotations

import numpy as np

from .mdp import ActionSpace


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class TabularSoftmaxPolicy:
    """Time-indexed logits theta[i, s, a]; state spaces may differ per step."""

    def __init__(self, n_states, n_actions: int, theta=None):
        self.n_states = tuple(int(s) for s in n_states)
        self.n_actions = int(n_actions)
        self.action_space = ActionSpace.discrete(self.n_actions)
        sizes = [s * self.n_actions for s in self.n_states]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.dim = int(self._offsets[-1])
        self.theta = np.zeros(self.dim) if theta is None else np.array(theta, dtype=float)
        if self.theta.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} parameters, got {self.theta.shape}")

    @classmethod
    def for_mdp(cls, mdp, theta=None):
        return cls(mdp.n_states[: mdp.max_horizon], mdp.n_actions, theta)

    @property
    def params(self):
        return self.theta.copy()

    def set_params(self, theta):
        self.theta = np.array(theta, dtype=float)

    def logits(self, step, params=None):
        p = self.theta if params is None else params
        lo, hi = self._offsets[step], self._offsets[step + 1]
        return p[lo:hi].reshape(self.n_states[step], self.n_actions)

    def probs(self, states, step, params=None):
        return _softmax(self.logits(step, params)[np.asarray(states, dtype=int)])

    def sample(self, states, step, rng):
        p = self.probs(states, step)
        u = rng.random(len(p))
        a = (np.cumsum(p, axis=1) < u[:, None]).sum(axis=1)
        return np.minimum(a, self.n_actions - 1)

    def mode(self, states, step):
        return np.argmax(self.probs(states, step), axis=1)

    def log_prob(self, states, actions, step, params=None):
        z = self.logits(step, params)[np.asarray(states, dtype=int)]
        z = z - z.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1))
        return z[np.arange(len(z)), np.asarray(actions, dtype=int)] - lse

    def weighted_score(self, states, actions, step, coef):
        states = np.asarray(states, dtype=int)
        actions = np.asarray(actions, dtype=int)
        p = self.probs(states, step)
        g = -coef[:, None] * p
        g[np.arange(len(states)), actions] += coef
        block = np.zeros((self.n_states[step], self.n_actions))
        np.add.at(block, states, g)
        out = np.zeros(self.dim)
        out[self._offsets[step]: self._offsets[step + 1]] = block.ravel()
        return out

    def grad_log_prob(self, states, actions, step):
        """Dense (n, dim) score matrix."""
        states = np.asarray(states, dtype=int)
        actions = np.asarray(actions, dtype=int)
        n, A = len(states), self.n_actions
        g = -self.probs(states, step)
        g[np.arange(n), actions] += 1.0
        out = np.zeros((n, self.dim))
        cols = self._offsets[step] + states[:, None] * A + np.arange(A)[None, :]
        out[np.arange(n)[:, None], cols] = g
        return out


class DeterministicTabularPolicy:
    """Greedy table: ``actions[i][s]`` is the action taken in state s at step i."""

    def __init__(self, actions, n_actions: int):
        self.actions = [np.asarray(a, dtype=int) for a in actions]
        self.n_actions = int(n_actions)
        self.action_space = ActionSpace.discrete(self.n_actions)

    def probs(self, states, step):
        a = self.actions[step][np.asarray(states, dtype=int)]
        out = np.zeros((len(a), self.n_actions))
        out[np.arange(len(a)), a] = 1.0
        return out

    def sample(self, states, step, rng):
        return self.mode(states, step)

    def mode(self, states, step):
        return self.actions[step][np.asarray(states, dtype=int)]


class FixedActionPolicy:
    """Plays ``values[step]`` regardless of the state."""

    def __init__(self, values, action_space: ActionSpace | None = None):
        self.values = list(values)
        self.action_space = action_space

    def sample(self, states, step, rng):
        return self.mode(states, step)

    def mode(self, states, step):
        v = self.values[min(step, len(self.values) - 1)]
        dtype = int if self.action_space is not None and self.action_space.kind == "discrete" else float
        return np.full(len(states), v, dtype=dtype)


def step_onehot(horizon: int):
    """Feature map giving each step its own mean parameter."""
    def features(states, step):
        out = np.zeros((len(states), horizon))
        out[:, step] = 1.0
        return out
    features.size = horizon
    return features


class GaussianPolicy:
    """Gaussian on a pre-action u with mean ``features(s, i) @ w`` and a shared log-std.

    With ``bounds=(low, high)`` the emitted action is
    ``low + (high - low) * sigmoid(u)``. The squash does not depend on the
    parameters, so the score in action space equals the score of u, which is
    recovered from the action through the inverse map.
    """

    def __init__(self, features, n_features: int | None = None, log_std: float = 0.0,
                 bounds=None, log_std_bounds=(-7.0, 2.0), mean_init=None):
        self.features = features
        self.n_features = int(n_features if n_features is not None else features.size)
        self.bounds = None if bounds is None else (float(bounds[0]), float(bounds[1]))
        self.log_std_bounds = log_std_bounds
        w = np.zeros(self.n_features) if mean_init is None else np.asarray(mean_init, float)
        self.theta = np.concatenate([w, [log_std]])
        self.dim = self.n_features + 1
        lo, hi = self.bounds if self.bounds else (-np.inf, np.inf)
        self.action_space = ActionSpace.interval(lo, hi)

    @property
    def params(self):
        return self.theta.copy()

    def set_params(self, theta):
        theta = np.array(theta, dtype=float)
        theta[-1] = np.clip(theta[-1], *self.log_std_bounds)
        self.theta = theta

    def mean(self, states, step, params=None):
        p = self.theta if params is None else params
        return self.features(states, step) @ p[:-1]

    def std(self, params=None):
        p = self.theta if params is None else params
        return float(np.exp(p[-1]))

    def _squash(self, u):
        if self.bounds is None:
            return u
        lo, hi = self.bounds
        return lo + (hi - lo) / (1.0 + np.exp(-u))

    def _unsquash(self, a):
        if self.bounds is None:
            return np.asarray(a, dtype=float)
        lo, hi = self.bounds
        y = (np.asarray(a, dtype=float) - lo) / (hi - lo)
        y = np.clip(y, 1e-15, 1.0 - 1e-15)
        return np.log(y) - np.log1p(-y)

    def sample(self, states, step, rng):
        u = self.mean(states, step) + self.std() * rng.standard_normal(len(states))
        return self._squash(u)

    def mode(self, states, step):
        return self._squash(self.mean(states, step))

    def log_prob(self, states, actions, step, params=None):
        p = self.theta if params is None else params
        u = self._unsquash(actions)
        z = (u - self.mean(states, step, p)) / np.exp(p[-1])
        return -0.5 * z * z - p[-1] - 0.5 * np.log(2.0 * np.pi)

    def grad_log_prob(self, states, actions, step):
        u = self._unsquash(actions)
        phi = self.features(states, step)
        s = self.std()
        z = (u - phi @ self.theta[:-1]) / s
        return np.column_stack([phi * (z / s)[:, None], z * z - 1.0])

    def weighted_score(self, states, actions, step, coef):
        return coef @ self.grad_log_prob(states, actions, step)
