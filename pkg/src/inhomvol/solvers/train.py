"""Policy-gradient training for the inhomogeneous (IVO) and homogeneous (TRVO) criteria.

Each iteration collects a batch, builds per-decision advantage coefficients,
and takes a few Adam steps on a ratio-clipped surrogate. If the mean
total-variation shift between the old and new policy (estimated on the batch)
exceeds the trust radius, the update is halved until it does not.

IVO coefficients are reward-to-go sums of the penalised reward
``m_j = r_j - ell(r_j - target_j)``: the return gradient minus the risk
gradient of :mod:`.gradient` in one estimator.

TRVO uses the homogeneous penalty ``beta * (r - J)^2``. Its centre
``J = E[G / Gamma]`` moves with the policy; the chain-rule term
``c * grad J`` with ``c = -2 beta E[sum_i gamma^(i-1) (r_i - J)]`` enters as
an extra whole-episode coefficient. It vanishes when the horizon is fixed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..losses import LossSpec
from ..mdp import Batch, DiscountSpec, batch_returns, cumulated_discounts, rollout_batch
from ..risk import TargetSchedule, evaluate_policy, fit_targets, homog_center, report_from_batch
from .gradient import _decision_mask, loo_baseline, score_gradient, tail_sums
from .results import SolveResult


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 200
    batch_size: int = 1000
    lr: float = 0.05
    epochs: int = 5
    clip: float = 0.2
    trust_radius: float = 0.1   # cap on the mean total-variation shift per iteration
    max_backtracks: int = 10
    n_eval: int = 2000
    eval_seed: int = 12345
    seed: int = 0
    target_smoothing: float = 0.0
    baseline: str = "step"      # "step", "state" or "none"


class Adam:
    def __init__(self, dim: int, lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        """Ascent direction for ``grad``."""
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mh = self.m / (1 - self.b1 ** self.t)
        vh = self.v / (1 - self.b2 ** self.t)
        return self.lr * mh / (np.sqrt(vh) + self.eps)


def _log_probs(policy, batch: Batch, params=None) -> np.ndarray:
    n, K = batch.rewards.shape
    out = np.zeros((n, K))
    live = _decision_mask(batch)
    for i in range(K):
        rows = np.flatnonzero(live[:, i])
        if rows.size:
            out[rows, i] = policy.log_prob(batch.states[rows, i], batch.actions[rows, i], i, params)
    return out


def policy_shift(policy, batch: Batch, old_logp: np.ndarray, params=None) -> float:
    """Batch estimate of the mean total-variation distance to the sampling policy.

    ``TV = E_old |pi_new / pi_old - 1| / 2`` per visited state, averaged over
    the decisions in the batch.
    """
    live = _decision_mask(batch)[:, : old_logp.shape[1]]
    new = _log_probs(policy, batch, params)
    ratio = np.exp(np.where(live, new - old_logp, 0.0))
    return 0.5 * float(np.abs(ratio - 1.0)[live].mean())


def ivo_coefficients(batch: Batch, targets, spec: LossSpec, disc: DiscountSpec) -> np.ndarray:
    """Reward-to-go of the penalised reward; row n, column i belongs to decision i."""
    t = np.asarray(getattr(targets, "targets", targets), dtype=float)
    K = batch.rewards.shape[1]
    tt = np.zeros(K)
    tt[: len(t[:K])] = t[:K]
    mask = batch.mask
    m = np.where(mask, batch.rewards - spec.evaluate(np.where(mask, batch.rewards - tt, 0.0)), 0.0)
    return tail_sums(m, mask, disc.gamma)[:, :K]


def trvo_coefficients(batch: Batch, beta: float, disc: DiscountSpec) -> tuple[np.ndarray, np.ndarray, float]:
    """Causal coefficients and the whole-episode J term of the homogeneous objective.

    Returns ``(causal, episode, J)`` where ``causal[n, i]`` multiplies
    ``gamma^i grad log pi_i`` and ``episode[n]`` multiplies every score of
    episode n without discount.
    """
    K = batch.rewards.shape[1]
    mask = batch.mask
    J = homog_center(batch, disc)
    dev = np.where(mask, batch.rewards - J, 0.0)
    m = np.where(mask, batch.rewards - beta * dev * dev, 0.0)
    causal = tail_sums(m, mask, disc.gamma)[:, :K]
    w = disc.weights(K)
    c = -2.0 * beta * float(np.mean((dev * w).sum(axis=1)))
    gam = cumulated_discounts(batch.horizons, disc.gamma)
    episode = -c * batch_returns(batch, disc) / gam
    return causal, episode, J


def _advantages(batch: Batch, causal: np.ndarray, episode, disc: DiscountSpec, how: str) -> np.ndarray:
    """Discount-weighted, baselined and standardised per-decision coefficients."""
    K = causal.shape[1]
    live = _decision_mask(batch)[:, :K]
    wide = np.zeros((causal.shape[0], K + 1))
    wide[:, :K] = causal
    if how != "none":
        wide -= loo_baseline(wide, batch, by_state=how == "state")
    adv = wide[:, :K] * disc.weights(K)[None, :]
    if episode is not None:
        ep = np.asarray(episode, dtype=float)
        ep = ep - (ep.sum() - ep) / max(len(ep) - 1, 1)
        adv = adv + ep[:, None]
    adv = np.where(live, adv, 0.0)
    sd = float(adv[live].std())
    return adv / sd if sd > 0 else adv


def _surrogate_step(policy, batch, adv, old_logp, cfg: TrainConfig, opt: Adam):
    """Adam steps on the clipped surrogate, then the trust-region check."""
    theta0 = policy.params
    live = _decision_mask(batch)[:, : adv.shape[1]]
    count = float(live.sum())
    for _ in range(cfg.epochs):
        logp = _log_probs(policy, batch)
        ratio = np.exp(np.where(live, logp - old_logp, 0.0))
        # the clipped branch is active (zero gradient) once the ratio has moved
        # past the clip range in the direction favoured by the advantage
        active = ~(((adv > 0) & (ratio > 1 + cfg.clip)) | ((adv < 0) & (ratio < 1 - cfg.clip)))
        coef = np.where(live & active, adv * ratio, 0.0) * (len(batch) / count)
        grad = score_gradient(batch, coef, policy)
        if not np.all(np.isfinite(grad)):
            raise TrainingDiverged(f"non-finite surrogate gradient at parameters {policy.params}")
        policy.set_params(policy.params + opt.step(grad))
    delta = policy.params - theta0
    for _ in range(cfg.max_backtracks):
        if policy_shift(policy, batch, old_logp) <= cfg.trust_radius:
            break
        delta *= 0.5
        policy.set_params(theta0 + delta)
    else:
        if policy_shift(policy, batch, old_logp) > cfg.trust_radius:
            policy.set_params(theta0)


def _checked(evaluate, policy, where: str) -> float:
    try:
        value = evaluate(policy)
    except ValueError as err:
        # the loss refuses non-finite deviations; report that as divergence
        raise TrainingDiverged(f"{err} {where}, parameters {policy.params}") from err
    if not math.isfinite(value):
        raise TrainingDiverged(f"objective {value} {where}, parameters {policy.params}")
    return value


def _train(env, policy, disc: DiscountSpec, cfg: TrainConfig, coefficients, evaluate, final_report):
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(policy.dim, cfg.lr)
    trace = []
    best_val, best_params = -math.inf, policy.params
    state = {}
    for it in range(cfg.iterations):
        value = _checked(evaluate, policy, f"at iteration {it}")
        trace.append(value)
        if value > best_val:
            best_val, best_params = value, policy.params
        batch = rollout_batch(env, policy, cfg.batch_size, rng, disc)
        causal, episode = coefficients(batch, state)
        adv = _advantages(batch, causal, episode, disc, cfg.baseline)
        old = _log_probs(policy, batch)
        _surrogate_step(policy, batch, adv, old, cfg, opt)
    value = _checked(evaluate, policy, "after training")
    trace.append(value)
    if value > best_val:
        best_val, best_params = value, policy.params
    policy.set_params(best_params)
    report, targets = final_report(policy)
    return SolveResult(policy=policy, targets=targets, report=report, trace=trace, seed=cfg.seed,
                       iterations=cfg.iterations, wall_time=time.perf_counter() - t_start,
                       converged=True, extras={"best_eval_objective": best_val})


def _eval_batch(env, policy, disc, cfg):
    # common random numbers: the same evaluation seed at every iteration
    return rollout_batch(env, policy, cfg.n_eval, np.random.default_rng(cfg.eval_seed), disc)


def ivo_train(env, policy0, spec: LossSpec, disc: DiscountSpec, cfg: TrainConfig | None = None) -> SolveResult:
    """Maximise ``E[G] - inhomogeneous ell-volatility`` over the policy parameters."""
    cfg = cfg or TrainConfig()

    def coefficients(batch, state):
        t = fit_targets(batch, spec, disc).targets
        prev = state.get("targets")
        if cfg.target_smoothing > 0 and prev is not None and len(prev) == len(t):
            t = cfg.target_smoothing * prev + (1.0 - cfg.target_smoothing) * t
        state["targets"] = t
        return ivo_coefficients(batch, t, spec, disc), None

    def evaluate(policy):
        return report_from_batch(_eval_batch(env, policy, disc, cfg), spec, disc).objective

    def final_report(policy):
        seed = cfg.eval_seed + 1
        rep = evaluate_policy(env, policy, spec, disc, cfg.n_eval, seed)
        batch = rollout_batch(env, policy, cfg.n_eval, np.random.default_rng(seed), disc)
        return rep, fit_targets(batch, spec, disc)

    return _train(env, policy0, disc, cfg, coefficients, evaluate, final_report)


def trvo_train(env, policy0, beta: float, disc: DiscountSpec, cfg: TrainConfig | None = None) -> SolveResult:
    """Maximise ``E[G] - beta * homogeneous volatility``; ``beta = 0`` is plain policy gradient."""
    cfg = cfg or TrainConfig()
    if beta < 0:
        raise ValueError("beta must be non-negative")
    spec = LossSpec("quadratic", beta) if beta > 0 else LossSpec("none")

    def coefficients(batch, state):
        causal, episode, _ = trvo_coefficients(batch, beta, disc)
        return causal, episode

    def homog_objective(batch):
        rep = report_from_batch(batch, spec, disc)
        return rep.expected_return - beta * rep.homog_volatility, rep

    def evaluate(policy):
        return homog_objective(_eval_batch(env, policy, disc, cfg))[0]

    def final_report(policy):
        batch = rollout_batch(env, policy, cfg.n_eval, np.random.default_rng(cfg.eval_seed + 1), disc)
        value, rep = homog_objective(batch)
        J = rep.j_pi
        K = batch.max_horizon
        targets = TargetSchedule(np.full(K, J), np.array([(batch.horizons > i).sum() for i in range(K)]))
        return rep, targets

    res = _train(env, policy0, disc, cfg, coefficients, evaluate, final_report)
    res.extras["homog_objective"] = res.report.expected_return - beta * res.report.homog_volatility
    return res
