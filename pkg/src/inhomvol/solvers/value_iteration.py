"""Finite-horizon dynamic programming on the penalty-adjusted reward r - ell(r - target)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..losses import LossSpec
from ..mdp import DiscountSpec
from ..policies import DeterministicTabularPolicy
from ..tabular import TabularMDP

TIE_TOL = 1e-12


@dataclass
class VIResult:
    policy: DeterministicTabularPolicy
    values: list            # V_i over states of step i, i = 0..H
    targets: np.ndarray
    value: float            # expected optimal value under the initial law
    steps_computed: int


def greedy(q: np.ndarray) -> np.ndarray:
    """Lowest action index among those within TIE_TOL of the row maximum."""
    best = q.max(axis=1, keepdims=True)
    near = q >= best - TIE_TOL * (1.0 + np.abs(best))
    return np.argmax(near, axis=1)


def value_iteration_modified(mdp: TabularMDP, targets, spec: LossSpec, disc: DiscountSpec,
                             warm: VIResult | None = None) -> VIResult:
    """Exact backward induction for fixed targets.

    With ``warm`` from a solve on the same model, loss and discount, the value
    functions of steps whose downstream targets are unchanged are reused; the
    result is identical to a cold solve.
    """
    if not isinstance(mdp, TabularMDP):
        raise TypeError("value iteration needs a TabularMDP")
    t = np.asarray(getattr(targets, "targets", targets), dtype=float)
    H = mdp.max_horizon
    if t.shape != (H,):
        raise ValueError(f"need {H} targets, got {t.shape}")

    values = [None] * (H + 1)
    actions = [None] * H
    values[H] = np.zeros(mdp.n_states[H])
    start = H - 1
    if warm is not None:
        changed = np.flatnonzero(t != warm.targets)
        last = int(changed.max()) if changed.size else -1
        for i in range(last + 1, H + 1):
            values[i] = warm.values[i]
        for i in range(last + 1, H):
            actions[i] = warm.policy.actions[i]
        start = last

    steps = 0
    for i in range(start, -1, -1):
        law = mdp.laws[i]
        r = law.reward
        adj = r - spec.evaluate(r - t[i])
        cont = disc.gamma * values[i + 1][law.next_state]
        q = np.where(law.prob > 0, law.prob * (adj + cont), 0.0).sum(axis=2)
        term = mdp.terminal[i]
        q[term] = 0.0
        a = greedy(q)
        actions[i] = a
        values[i] = q[np.arange(len(a)), a]
        steps += 1
    value = float(mdp.init @ values[0])
    return VIResult(DeterministicTabularPolicy(actions, mdp.n_actions), values, t.copy(), value, steps)
