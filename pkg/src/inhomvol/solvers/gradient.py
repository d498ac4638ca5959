"""Action-volatility critics and score-function gradients of the risk terms.

Decision ``i`` (0-based) is followed by reward r_{i+1}. The action-volatility
of that decision is the discounted penalty still to come,
``X_i = sum_{j > i} gamma**(j-i-1) * ell(r_j - target_j)``, and
``grad varsigma = E[sum_i gamma**i * X_i * grad log pi_i(a_i | s_i)]``.
Targets are held fixed in the gradient: they minimise the penalty, so their
own dependence on the parameters drops out to first order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exact import exact_objective, exact_targets, exact_x_table
from ..losses import LossSpec
from ..mdp import Batch, DiscountSpec, as_batch
from ..risk import TargetSchedule, _as_targets
from ..tabular import TabularMDP, enumerate_paths, policy_tables


@dataclass(frozen=True)
class CriticEstimate:
    """Per-sample action-volatility values.

    ``x_values[n, i]`` is X for decision i of episode n; column ``K`` (and
    every column at or past the episode's horizon) is zero because the state
    there is terminal.
    """

    x_values: np.ndarray
    targets: TargetSchedule
    kind: str = "mc"


def tail_sums(values: np.ndarray, mask: np.ndarray, gamma: float) -> np.ndarray:
    """``out[n, i] = sum_{j >= i} gamma**(j-i) * values[n, j]`` over masked entries, width K+1."""
    n, K = values.shape
    out = np.zeros((n, K + 1))
    v = np.where(mask, values, 0.0)
    for i in range(K - 1, -1, -1):
        out[:, i] = v[:, i] + gamma * out[:, i + 1]
    return out


def step_penalties(batch: Batch, targets, spec: LossSpec) -> np.ndarray:
    """``ell(r_{i+1} - target_{i+1})`` on live entries, zero elsewhere."""
    t = _as_targets(targets)
    K = batch.rewards.shape[1]
    if len(t) < batch.max_horizon:
        raise ValueError(f"target schedule has {len(t)} steps, sample reaches {batch.max_horizon}")
    tt = np.zeros(K)
    tt[: min(K, len(t))] = t[:K]
    mask = batch.mask
    dev = np.where(mask, batch.rewards - tt[None, :], 0.0)
    return np.where(mask, spec.evaluate(dev), 0.0)


def ivo_critic(sample, targets, spec: LossSpec, disc: DiscountSpec) -> CriticEstimate:
    """Monte Carlo tail sums of the per-step penalty."""
    batch = as_batch(sample)
    if not isinstance(targets, TargetSchedule):
        t = np.asarray(targets, dtype=float)
        targets = TargetSchedule(t, np.zeros(len(t), dtype=int))
    X = tail_sums(step_penalties(batch, targets, spec), batch.mask, disc.gamma)
    X[~_decision_mask(batch)] = 0.0
    return CriticEstimate(X, targets, "mc")


def table_critic(mdp: TabularMDP, batch: Batch, tables, targets, spec: LossSpec,
                 disc: DiscountSpec) -> CriticEstimate:
    """Exact X(s, a) from backward induction, looked up at the visited pairs."""
    X_tab = exact_x_table(mdp, tables, targets, spec, disc)
    return _lookup(batch, X_tab, targets, "table")


def fitted_table_critic(batch: Batch, targets, spec: LossSpec, disc: DiscountSpec,
                        n_states, n_actions: int) -> CriticEstimate:
    """Average Monte Carlo X per visited (step, state, action); unvisited cells stay zero."""
    mc = ivo_critic(batch, targets, spec, disc)
    K = batch.rewards.shape[1]
    tables = []
    for i in range(K):
        live = batch.horizons > i
        s = batch.states[live, i].astype(int)
        a = batch.actions[live, i].astype(int)
        tot = np.zeros((n_states[i], n_actions))
        cnt = np.zeros((n_states[i], n_actions))
        np.add.at(tot, (s, a), mc.x_values[live, i])
        np.add.at(cnt, (s, a), 1.0)
        tables.append(np.divide(tot, cnt, out=np.zeros_like(tot), where=cnt > 0))
    return _lookup(batch, tables, mc.targets, "fitted-table")


def _lookup(batch, X_tab, targets, kind) -> CriticEstimate:
    n, K = batch.rewards.shape
    X = np.zeros((n, K + 1))
    live = _decision_mask(batch)
    for i in range(min(K, len(X_tab))):
        rows = np.flatnonzero(live[:, i])
        X[rows, i] = X_tab[i][batch.states[rows, i].astype(int), batch.actions[rows, i].astype(int)]
    if not isinstance(targets, TargetSchedule):
        t = np.asarray(targets, dtype=float)
        targets = TargetSchedule(t, np.zeros(len(t), dtype=int))
    return CriticEstimate(X, targets, kind)


def _decision_mask(batch: Batch) -> np.ndarray:
    """(n, K+1) mask of decisions actually taken."""
    K = batch.rewards.shape[1]
    return np.arange(K + 1)[None, :] < batch.horizons[:, None]


def loo_baseline(values: np.ndarray, batch: Batch, by_state: bool = False) -> np.ndarray:
    """Leave-one-out mean of ``values`` per step (and per discrete state).

    Each episode's baseline is built from the other episodes only, so it does
    not depend on the episode's own actions and the estimator stays unbiased.
    """
    n, K = batch.rewards.shape
    out = np.zeros_like(values)
    live = _decision_mask(batch)
    for i in range(K):
        rows = np.flatnonzero(live[:, i])
        if rows.size < 2:
            continue
        v = values[rows, i]
        if by_state:
            keys = batch.states[rows, i].astype(int)
            uniq, inv = np.unique(keys, return_inverse=True)
            tot = np.bincount(inv, weights=v, minlength=len(uniq))
            cnt = np.bincount(inv, minlength=len(uniq)).astype(float)
        else:
            inv = np.zeros(rows.size, dtype=int)
            tot, cnt = np.array([v.sum()]), np.array([float(rows.size)])
        c = cnt[inv] - 1.0
        out[rows, i] = np.divide(tot[inv] - v, c, out=np.zeros_like(v), where=c > 0)
    return out


def score_gradient(batch: Batch, coef: np.ndarray, policy, weights=None, out=None) -> np.ndarray:
    """``sum_n w_n sum_i coef[n, i] * grad log pi_i(a_i | s_i) / sum_n w_n``.

    Steps are accumulated in a fixed order, so the result is reproducible
    bit for bit across runs.
    """
    n, K = batch.rewards.shape
    dim = policy.dim
    if out is None:
        out = np.zeros(dim)
    elif out.shape != (dim,):
        raise ValueError(f"gradient buffer has shape {out.shape}, policy has {dim} parameters")
    else:
        out[:] = 0.0
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    total = math.fsum(w)
    live = _decision_mask(batch)
    for i in range(K):
        rows = np.flatnonzero(live[:, i])
        if rows.size == 0:
            continue
        c = w[rows] * coef[rows, i] / total
        out += policy.weighted_score(batch.states[rows, i], batch.actions[rows, i], i, c)
    return out


def ivo_gradient(sample, critic: CriticEstimate, policy, disc: DiscountSpec, weights=None,
                 baseline=None, out=None) -> np.ndarray:
    """Score-function estimate of the gradient of the inhomogeneous penalty.

    Args:
        sample: the episodes the critic was computed on, drawn from ``policy``.
        critic: per-sample action-volatility values.
        policy: the sampling policy.
        disc: discounting.
        weights: optional episode weights (path probabilities for exact expectations).
        baseline: None, ``"step"`` / ``"state"`` for a leave-one-out mean, or an
            array shaped like ``critic.x_values``.
        out: optional preallocated gradient buffer.
    """
    batch = as_batch(sample)
    X = critic.x_values
    if isinstance(baseline, str):
        X = X - loo_baseline(X, batch, by_state=baseline == "state")
    elif baseline is not None:
        X = X - np.asarray(baseline, dtype=float)
    K = batch.rewards.shape[1]
    coef = X[:, :K] * disc.weights(K)[None, :]
    return score_gradient(batch, coef, policy, weights, out)


def return_gradient(sample, policy, disc: DiscountSpec, weights=None, baseline=None) -> np.ndarray:
    """Reward-to-go score-function estimate of the gradient of the expected return."""
    batch = as_batch(sample)
    G = tail_sums(batch.rewards, batch.mask, disc.gamma)
    G[~_decision_mask(batch)] = 0.0
    crit = CriticEstimate(G, TargetSchedule(np.zeros(0), np.zeros(0, dtype=int)), "return")
    return ivo_gradient(batch, crit, policy, disc, weights, baseline)


# ---------------------------------------------------------------- exact oracles

def exact_penalty(mdp: TabularMDP, policy, spec: LossSpec, disc: DiscountSpec, params=None) -> float:
    """Inhomogeneous penalty with targets refitted under the policy."""
    if params is not None:
        old = policy.params
        policy.set_params(params)
    try:
        tables = policy_tables(policy, mdp)
        return exact_objective(mdp, tables, spec, disc).penalty
    finally:
        if params is not None:
            policy.set_params(old)


def expected_estimator(mdp: TabularMDP, policy, spec: LossSpec, disc: DiscountSpec,
                       baseline=None) -> np.ndarray:
    """Exact expectation of :func:`ivo_gradient`, averaging over every outcome path."""
    tables = policy_tables(policy, mdp)
    targets = exact_targets(mdp, tables, spec)
    batch, prob = enumerate_paths(mdp, tables)
    crit = ivo_critic(batch, targets, spec, disc)
    if baseline == "exact":
        X_tab = exact_x_table(mdp, tables, targets, spec, disc)
        V = [(tables[i] * X_tab[i]).sum(axis=1) for i in range(mdp.max_horizon)]
        b = np.zeros_like(crit.x_values)
        live = _decision_mask(batch)
        for i in range(mdp.max_horizon):
            rows = np.flatnonzero(live[:, i])
            b[rows, i] = V[i][batch.states[rows, i]]
        baseline = b
    return ivo_gradient(batch, crit, policy, disc, weights=prob, baseline=baseline)


def analytic_volatility_gradient(mdp: TabularMDP, policy, spec: LossSpec,
                                 disc: DiscountSpec) -> np.ndarray:
    """Policy-gradient form from state occupancies and the exact X table.

    ``grad = sum_i gamma**i sum_s d_i(s) sum_a grad pi_i(a|s) X_i(s, a)``;
    for a softmax row, ``d pi(a) / d theta_b = pi(a) (1[a = b] - pi(b))``.
    Only defined for :class:`TabularSoftmaxPolicy`.
    """
    tables = policy_tables(policy, mdp)
    targets = exact_targets(mdp, tables, spec)
    X = exact_x_table(mdp, tables, targets, spec, disc)
    grad = np.zeros(policy.dim)
    d = mdp.init * ~mdp.terminal[0]
    for i, law in enumerate(mdp.laws):
        d = d * ~mdp.terminal[i]
        p = tables[i]
        v = (p * X[i]).sum(axis=1, keepdims=True)
        block = disc.gamma ** i * d[:, None] * p * (X[i] - v)
        grad[policy._offsets[i]: policy._offsets[i + 1]] = block.ravel()
        W = d[:, None, None] * p[:, :, None] * law.prob
        d = np.bincount(law.next_state.ravel(), weights=W.ravel(), minlength=mdp.n_states[i + 1])
    return grad


def finite_difference_gradient(fun, params, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``fun`` at ``params``."""
    params = np.asarray(params, dtype=float)
    out = np.zeros_like(params)
    for k in range(len(params)):
        e = np.zeros_like(params)
        e[k] = h
        out[k] = (fun(params + e) - fun(params - e)) / (2.0 * h)
    return out


def episode_gradients(sample, coef: np.ndarray, policy) -> np.ndarray:
    """Per-episode terms ``sum_i coef[n, i] * grad log pi_i`` as an (n, dim) matrix."""
    batch = as_batch(sample)
    n, K = batch.rewards.shape
    out = np.zeros((n, policy.dim))
    live = _decision_mask(batch)
    for i in range(K):
        rows = np.flatnonzero(live[:, i])
        if rows.size:
            g = policy.grad_log_prob(batch.states[rows, i], batch.actions[rows, i], i)
            out[rows] += coef[rows, i, None] * g
    return out
