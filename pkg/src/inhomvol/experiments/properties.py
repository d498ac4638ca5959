"""The invariant battery behind ``inhomvol verify``.

Each check returns a :class:`PropertyResult`. Exact checks use path
enumeration on small random MDPs; sampling checks use fixed seeds, so the
report is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..envs.execution import N_COL, ExecutionEnv
from ..envs.grid import GridConfig, GridWorld
from ..envs.toy import toy_env
from ..exact import exact_report, exact_x_table
from ..losses import KINDS, LossSpec
from ..mdp import DiscountSpec, batch_returns, rollout_batch
from ..micro import random_micro_mdp
from ..policies import FixedActionPolicy, TabularSoftmaxPolicy
from ..risk import fit_targets, inhom_penalty, return_variance
from ..solvers.gradient import exact_penalty, expected_estimator, finite_difference_gradient
from ..solvers.nested import NestedConfig, nested_solve
from ..tabular import StepLaw, TabularMDP, enumerate_paths, policy_tables, step_atoms

EXACT_TOL = 1e-12


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _random_softmax(mdp, rng, scale=1.5):
    pol = TabularSoftmaxPolicy.for_mdp(mdp)
    pol.set_params(scale * rng.standard_normal(pol.dim))
    return pol


def check_loss_shapes() -> PropertyResult:
    x = np.linspace(-10, 10, 2001)
    h = 1e-5
    worst = 0.0
    for kind in KINDS[1:]:
        for beta in (0.1, 0.5, 1.0, 2.0):
            spec = LossSpec(kind, beta)
            v = spec.evaluate(x)
            if spec.evaluate(np.array([0.0]))[0] != 0.0 or v.min() < 0:
                return PropertyResult("loss-shapes", False, f"{kind} beta={beta}: ell(0) != 0 or ell < 0")
            if np.min(v[:-2] - 2 * v[1:-1] + v[2:]) < -1e-9 * max(1.0, np.abs(v).max()):
                return PropertyResult("loss-shapes", False, f"{kind} beta={beta}: not convex")
            # central differences are only second-order accurate away from kinks
            kink = {"absolute": 0.0, "monotone": 1.0 / (2.0 * beta)}.get(kind)
            xs = x if kink is None else x[np.abs(x - kink) > 2 * h]
            fd = (spec.evaluate(xs + h) - spec.evaluate(xs - h)) / (2 * h)
            d = spec.derivative(xs)
            worst = max(worst, float(np.max(np.abs(fd - d) / np.maximum(1.0, np.abs(d)))))
    mono, quad = LossSpec("monotone", 0.5), LossSpec("quadratic", 0.5)
    below = bool(np.all(mono.evaluate(x) <= quad.evaluate(x) + 1e-15))
    ok = worst <= 1e-6 and below
    return PropertyResult("loss-shapes", ok, f"max derivative error {worst:.2e}; monotone <= quadratic: {below}")


def check_inequalities(n_mdps: int = 100, seed: int = 0) -> list[PropertyResult]:
    """Volatility inequality on every MDP, variance inequality on the fixed-horizon ones."""
    rng = np.random.default_rng(seed)
    spec = LossSpec("quadratic", 1.0)
    vol_gap, var_gap, n_fixed = math.inf, math.inf, 0
    for k in range(n_mdps):
        stochastic = k % 2 == 1
        mdp = random_micro_mdp(rng, stochastic_horizon=stochastic)
        gamma = 1.0 if k % 3 == 0 else float(rng.uniform(0.5, 1.0))
        disc = DiscountSpec(gamma, mdp.max_horizon)
        rep = exact_report(mdp, policy_tables(_random_softmax(mdp, rng), mdp), spec, disc)
        vol_gap = min(vol_gap, rep.homog_volatility - rep.inhom_volatility)
        if not stochastic:
            n_fixed += 1
            Gamma = disc.weights(mdp.max_horizon).sum()
            var_gap = min(var_gap, Gamma * rep.inhom_volatility - rep.return_variance)
    return [
        PropertyResult("volatility-inequality", vol_gap >= -EXACT_TOL,
                       f"min(homog - inhom) = {vol_gap:.3e} over {n_mdps} MDPs"),
        PropertyResult("variance-inequality", var_gap >= -EXACT_TOL,
                       f"min(Gamma * inhom - variance) = {var_gap:.3e} over {n_fixed} fixed-horizon MDPs"),
    ]


def counterexample_mdp() -> TabularMDP:
    """Reward 1 at every step; the episode stops after step 1 with probability 1/2."""
    law0 = StepLaw(np.array([[[0, 1]]]), np.array([[[0.5, 0.5]]]), np.array([[[1.0, 1.0]]]))
    law1 = StepLaw(np.array([[[0]], [[0]]]), np.array([[[1.0]], [[1.0]]]), np.array([[[1.0]], [[1.0]]]))
    terminal = [np.array([False]), np.array([False, True]), np.array([True])]
    return TabularMDP([law0, law1], terminal, [1.0], 1)


def check_counterexample() -> PropertyResult:
    mdp = counterexample_mdp()
    rep = exact_report(mdp, [np.ones((1, 1)), np.ones((2, 1))], LossSpec("quadratic", 1.0),
                       DiscountSpec(1.0, 2))
    ok = rep.inhom_volatility == 0.0 and rep.return_variance > 0.0
    return PropertyResult("stochastic-horizon-counterexample", ok,
                          f"inhom = {rep.inhom_volatility!r}, variance = {rep.return_variance!r}")


def check_quadratic_decomposition(n_mdps: int = 30, seed: int = 1) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_mdps):
        mdp = random_micro_mdp(rng, stochastic_horizon=False)
        disc = DiscountSpec(float(rng.uniform(0.5, 1.0)), mdp.max_horizon)
        tables = policy_tables(_random_softmax(mdp, rng), mdp)
        rep = exact_report(mdp, tables, LossSpec("quadratic", 1.0), disc)
        atoms, surv = step_atoms(mdp, tables)
        total = 0.0
        for i, (v, w) in enumerate(atoms):
            p = w / w.sum()
            m = float(p @ v)
            total += disc.gamma ** i * surv[i] * float(p @ (v - m) ** 2)
        worst = max(worst, abs(total - rep.inhom_volatility))
    return PropertyResult("quadratic-decomposition", worst <= 1e-12, f"max abs error {worst:.2e}")


def check_target_optimality(seed: int = 2) -> PropertyResult:
    rng = np.random.default_rng(seed)
    env = GridWorld(GridConfig(noise_prob=0.3, max_steps=8))
    disc = DiscountSpec(1.0, 8)
    pol = _random_softmax(env.tabular(), rng, scale=0.5)
    batch = rollout_batch(env, pol, 400, rng, disc)
    for kind in KINDS[1:]:
        spec = LossSpec(kind, 0.05)
        t = fit_targets(batch, spec, disc).targets
        base = inhom_penalty(batch, t, spec, disc)
        for i in range(len(t)):
            for d in (1e-2, -1e-2, 1.0, -1.0):
                tt = t.copy()
                tt[i] += d
                if inhom_penalty(batch, tt, spec, disc) < base - 1e-12 * max(1.0, abs(base)):
                    return PropertyResult("target-optimality", False, f"{kind}: step {i + 1} shift {d}")
    return PropertyResult("target-optimality", True, f"no single-target shift lowers the penalty ({len(t)} steps)")


def check_toy_identities(seed: int = 3) -> PropertyResult:
    env = toy_env()
    disc = DiscountSpec(1.0, 2)
    rng = np.random.default_rng(seed)
    worst_dev, worst_var = 0.0, 0.0
    for a0 in (-1.0, -0.3, 0.0, 0.25, 0.7, 2.0):
        batch = rollout_batch(env, FixedActionPolicy([a0, 0.0]), 2000, rng, disc)
        G = batch_returns(batch, disc)
        worst_dev = max(worst_dev, float(np.abs(G - 1.0).max()))
        worst_var = max(worst_var, return_variance(batch, disc))
    ok = worst_dev <= 1e-12 and worst_var <= 1e-24
    return PropertyResult("toy-return-identity", ok, f"max |G - 1| = {worst_dev:.1e}, max variance = {worst_var:.1e}")


def check_execution_invariants(seed: int = 4) -> PropertyResult:
    env = ExecutionEnv()
    disc = DiscountSpec(1.0, env.max_horizon)
    rng = np.random.default_rng(seed)

    class RandomFraction:
        action_space = env.action_space

        def sample(self, states, step, rng):
            return rng.uniform(0.0, 1.0, len(states))

        def mode(self, states, step):
            return np.full(len(states), 0.5)

    batch = rollout_batch(env, RandomFraction(), 500, rng, disc)
    v0 = env.value(batch.states[:, 0])
    vT = env.value(batch.states[:, -1])
    G = batch.rewards.sum(axis=1)
    rel = float(np.max(np.abs(G - (vT - v0)) / np.maximum(1.0, np.abs(vT - v0))))
    flat = float(np.abs(batch.states[:, -1, N_COL]).max())
    ok = rel <= 1e-9 and flat == 0.0
    return PropertyResult("execution-telescoping", ok, f"max relative telescoping error {rel:.1e}, max |N_T| {flat}")


def check_grid_bounds(seed: int = 5) -> PropertyResult:
    env = GridWorld()
    cfg = env.cfg
    disc = DiscountSpec(1.0, cfg.max_steps)
    rng = np.random.default_rng(seed)
    pol = TabularSoftmaxPolicy.for_mdp(env.tabular())
    batch = rollout_batch(env, pol, 2000, rng, disc)
    G = batch_returns(batch, disc)
    lo = cfg.obstacle_reward + (cfg.max_steps - 1) * cfg.step_reward
    ok = bool(G.min() >= lo and G.max() <= cfg.goal_reward and batch.horizons.max() <= cfg.max_steps)
    return PropertyResult("grid-bounds", ok, f"returns in [{G.min()}, {G.max()}], longest episode {batch.horizons.max()}")


def check_bellman(seed: int = 6, n_mdps: int = 20) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_mdps):
        mdp = random_micro_mdp(rng, min_actions=2)
        disc = DiscountSpec(float(rng.uniform(0.5, 1.0)), mdp.max_horizon)
        tables = policy_tables(_random_softmax(mdp, rng), mdp)
        spec = LossSpec("monotone", 0.7)
        t = rng.uniform(-1, 1, mdp.max_horizon)
        X = exact_x_table(mdp, tables, t, spec, disc)
        # residual of X_i(s, a) = E[ell(r - t_i) + gamma * sum_b pi(b|s') X_{i+1}(s', b)]
        batch, prob = enumerate_paths(mdp, tables)
        for i in range(mdp.max_horizon):
            law = mdp.laws[i]
            nxt = np.zeros(mdp.n_states[i + 1])
            if i + 1 < mdp.max_horizon:
                nxt = np.where(mdp.terminal[i + 1], 0.0, (tables[i + 1] * X[i + 1]).sum(axis=1))
            rhs = (law.prob * (spec.evaluate(law.reward - t[i]) + disc.gamma * nxt[law.next_state])).sum(axis=2)
            rhs[mdp.terminal[i]] = 0.0
            worst = max(worst, float(np.abs(X[i] - rhs).max()))
        # and the policy-averaged X at step 0 equals the exact penalty with these targets
        v0 = float(mdp.init @ (tables[0] * X[0]).sum(axis=1))
        worst = max(worst, abs(v0 - inhom_penalty(batch, t, spec, disc, prob)))
    return PropertyResult("bellman-consistency", worst < 1e-12, f"max residual {worst:.2e}")


def check_gradient(n_mdps: int = 10, seed: int = 7) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_mdps):
        mdp = random_micro_mdp(rng, min_actions=2, stochastic_horizon=k % 2 == 1)
        disc = DiscountSpec(float(rng.uniform(0.5, 1.0)), mdp.max_horizon)
        pol = _random_softmax(mdp, rng)
        spec = LossSpec(("quadratic", "monotone", "exponential")[k % 3], 0.7)
        exp_est = expected_estimator(mdp, pol, spec, disc)
        fd = finite_difference_gradient(lambda p: exact_penalty(mdp, pol, spec, disc, p), pol.params)
        worst = max(worst, float(np.linalg.norm(exp_est - fd) / max(np.linalg.norm(fd), 1e-300)))
    return PropertyResult("gradient-correctness", worst <= 1e-6, f"max relative error {worst:.2e}")


def check_warm_start(seed: int = 8) -> PropertyResult:
    grid = ("x..G", ".R..", "....")
    env = GridWorld(GridConfig(grid=grid, max_steps=6))
    disc = DiscountSpec(1.0, 6)
    spec = LossSpec("quadratic", 0.05)
    a = nested_solve(env.tabular(), spec, disc, NestedConfig(seed=seed, warm_start=True, n_eval=10))
    b = nested_solve(env.tabular(), spec, disc, NestedConfig(seed=seed, warm_start=False, n_eval=10))
    diff = float(np.abs(a.targets.targets - b.targets.targets).max())
    return PropertyResult("warm-start-equivalence", diff <= 1e-12, f"max target difference {diff:.1e}")


def run_suite(seed: int = 0) -> list[PropertyResult]:
    out = [check_loss_shapes()]
    out += check_inequalities(seed=seed)
    out += [check_counterexample(), check_quadratic_decomposition(seed=seed + 1),
            check_target_optimality(seed=seed + 2), check_toy_identities(seed=seed + 3),
            check_execution_invariants(seed=seed + 4), check_grid_bounds(seed=seed + 5),
            check_bellman(seed=seed + 6), check_gradient(seed=seed + 7), check_warm_start(seed=seed + 8)]
    return out
