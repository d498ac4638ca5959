"""Per-step targets and the risk metrics built on them.

Every metric takes an optional ``weights`` vector over episodes. Monte Carlo
samples leave it unset; an exact path enumeration passes path probabilities,
which turns each sample average into the exact expectation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .losses import LossSpec
from .mdp import Batch, DiscountSpec, as_batch, batch_returns, cumulated_discounts, rollout_batch


class TargetFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class TargetSchedule:
    targets: np.ndarray
    support_counts: np.ndarray

    def __len__(self):
        return len(self.targets)

    def __getitem__(self, i):
        return self.targets[i]


@dataclass(frozen=True)
class RiskReport:
    expected_return: float
    inhom_volatility: float
    homog_volatility: float
    return_variance: float
    objective: float
    j_pi: float
    n_episodes: int = 0

    def as_record(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in self.as_record().items())


def _wmean(x, w=None) -> float:
    x = np.asarray(x, dtype=float)
    if w is None:
        return math.fsum(x) / len(x)
    w = np.asarray(w, dtype=float)
    return math.fsum(w * x) / math.fsum(w)


def weighted_median(values, weights=None) -> float:
    """Median; with an even split the two middle values are averaged."""
    v = np.asarray(values, dtype=float)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    cum = np.cumsum(w)
    half = 0.5 * cum[-1]
    k = int(np.searchsorted(cum, half, side="left"))
    if math.isclose(cum[k], half, rel_tol=1e-12, abs_tol=0.0) and k + 1 < len(v):
        return 0.5 * (v[k] + v[k + 1])
    return float(v[k])


def fit_target_1d(values, spec: LossSpec, weights=None, xtol: float = 1e-12) -> float:
    """Minimiser over t of the (weighted) mean of ell(values - t)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise TargetFitError("no support")
    w = None if weights is None else np.asarray(weights, dtype=float)
    if w is not None:
        keep = w > 0
        v, w = v[keep], w[keep]
        if v.size == 0:
            raise TargetFitError("no support with positive weight")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    rule = spec.closed_form_target
    if rule == "mean":
        return _wmean(v, w)
    if rule == "median":
        return weighted_median(v, w)

    # The minimiser lies within [min, max]: outside that range every deviation
    # has the same sign and moving t inward lowers the penalty.
    def stationarity(t):
        return _wmean(spec.derivative(v - t), w)

    g_lo, g_hi = stationarity(lo), stationarity(hi)
    if g_lo <= 0.0:
        return lo
    if g_hi >= 0.0:
        return hi
    try:
        t = brentq(stationarity, lo, hi, xtol=xtol * max(1.0, hi - lo), maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise TargetFitError(f"target search failed on [{lo}, {hi}]: {exc}") from exc
    scale = abs(_wmean(np.abs(spec.derivative(v - t)), w)) + 1e-12
    residual = stationarity(t)
    if not abs(residual) <= 1e-6 * max(1.0, scale):
        raise TargetFitError(
            f"first-order condition not met: residual {residual:.3e} at t={t!r} "
            f"(bracket [{lo}, {hi}], {v.size} atoms)")
    return t


def fit_targets(sample, spec: LossSpec, disc: DiscountSpec | None = None,
                weights=None) -> TargetSchedule:
    """One target per step, fitted on the episodes still running at that step."""
    batch = as_batch(sample)
    K = batch.max_horizon
    targets = np.empty(K)
    counts = np.empty(K, dtype=int)
    for i in range(K):
        alive = batch.horizons > i
        counts[i] = int(alive.sum())
        if counts[i] == 0:
            raise TargetFitError(f"step {i + 1} has no supporting episode")
        w = None if weights is None else np.asarray(weights)[alive]
        targets[i] = fit_target_1d(batch.rewards[alive, i], spec, w)
    return TargetSchedule(targets, counts)


def _as_targets(targets) -> np.ndarray:
    if isinstance(targets, TargetSchedule):
        return np.asarray(targets.targets, dtype=float)
    return np.asarray(targets, dtype=float)


def episode_penalties(batch: Batch, targets, spec: LossSpec, disc: DiscountSpec) -> np.ndarray:
    """Discounted sum of ell(r_i - target_i) for each episode."""
    t = _as_targets(targets)
    K = batch.max_horizon
    if len(t) < K:
        raise ValueError(f"target schedule has {len(t)} steps, sample reaches {K}")
    r = batch.rewards[:, :K]
    mask = batch.mask[:, :K]
    dev = np.where(mask, r - t[None, :K], 0.0)
    return (spec.evaluate(dev) * mask * disc.weights(K)[None, :]).sum(axis=1)


def inhom_penalty(sample, targets, spec: LossSpec, disc: DiscountSpec, weights=None) -> float:
    batch = as_batch(sample)
    return _wmean(episode_penalties(batch, targets, spec, disc), weights)


def homog_center(sample, disc: DiscountSpec, weights=None) -> float:
    """J_pi: expected return per unit of cumulated discount."""
    batch = as_batch(sample)
    G = batch_returns(batch, disc)
    return _wmean(G / cumulated_discounts(batch.horizons, disc.gamma), weights)


def homog_penalty(sample, disc: DiscountSpec, weights=None) -> float:
    """Homogeneous reward volatility around J_pi (without the beta factor)."""
    batch = as_batch(sample)
    J = homog_center(batch, disc, weights)
    K = batch.rewards.shape[1]
    dev2 = np.where(batch.mask, (batch.rewards - J) ** 2, 0.0)
    return _wmean((dev2 * disc.weights(K)[None, :]).sum(axis=1), weights)


def return_variance(sample, disc: DiscountSpec, weights=None) -> float:
    batch = as_batch(sample)
    G = batch_returns(batch, disc)
    m = _wmean(G, weights)
    return _wmean((G - m) ** 2, weights)


def report_from_batch(batch: Batch, spec: LossSpec, disc: DiscountSpec, weights=None,
                      targets=None) -> RiskReport:
    if targets is None:
        targets = fit_targets(batch, spec, disc, weights)
    expected = _wmean(batch_returns(batch, disc), weights)
    penalty = inhom_penalty(batch, targets, spec, disc, weights)
    return RiskReport(
        expected_return=expected,
        inhom_volatility=penalty,
        homog_volatility=homog_penalty(batch, disc, weights),
        return_variance=return_variance(batch, disc, weights),
        objective=expected - penalty,
        j_pi=homog_center(batch, disc, weights),
        n_episodes=len(batch),
    )


def evaluate_policy(env, policy, spec: LossSpec, disc: DiscountSpec, n_episodes: int,
                    seed: int, deterministic: bool = False) -> RiskReport:
    if n_episodes < 2:
        raise ValueError("n_episodes must be at least 2")
    rng = np.random.default_rng(seed)
    batch = rollout_batch(env, policy, n_episodes, rng, disc, deterministic)
    return report_from_batch(batch, spec, disc)
