"""Bilevel solver: outer search over the target vector, exact dynamic program inside.

For fixed targets the best policy solves a plain finite-horizon problem with
reward r - ell(r - target), so the outer function
``V(t) = max_pi E[sum gamma^i (r - ell(r - t))]`` is cheap to evaluate, and
its maximum equals the best attainable mean-ell-volatility objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..exact import exact_objective, exact_targets
from ..losses import LossSpec
from ..mdp import DiscountSpec
from ..risk import TargetSchedule, evaluate_policy
from ..tabular import TabularMDP, policy_tables
from .results import SolveResult
from .value_iteration import VIResult, value_iteration_modified


@dataclass(frozen=True)
class NestedConfig:
    budget: int = 2000          # inner solves
    restarts: int = 5
    init_step: float = 0.25     # fractions of the reward range
    coarse_step: float = 0.05   # every start is searched down to this step
    min_step: float = 5e-3      # the best start is refined down to this step
    max_polish: int = 100
    warm_start: bool = True
    seed: int = 0
    n_eval: int = 2000
    tol: float = 1e-10


class _BudgetExhausted(Exception):
    pass


class _Search:
    def __init__(self, mdp, spec, disc, cfg):
        self.mdp, self.spec, self.disc, self.cfg = mdp, spec, disc, cfg
        self.evaluations = 0
        self.trace: list[float] = []
        self.best: VIResult | None = None

    def solve(self, t, warm=None) -> VIResult:
        if self.evaluations >= self.cfg.budget:
            raise _BudgetExhausted
        self.evaluations += 1
        res = value_iteration_modified(self.mdp, t, self.spec, self.disc,
                                       warm if self.cfg.warm_start else None)
        if self.best is None or res.value > self.best.value:
            self.best = res
        return res

    def better(self, new, old) -> bool:
        return new.value > old.value + self.cfg.tol * (1.0 + abs(old.value))

    def refit(self, res: VIResult) -> np.ndarray:
        tables = policy_tables(res.policy, self.mdp)
        return exact_targets(self.mdp, tables, self.spec, fallback=res.targets).targets

    def polish(self, res: VIResult) -> VIResult:
        """Alternate exact target refits and policy solves until neither helps."""
        for _ in range(self.cfg.max_polish):
            t = self.refit(res)
            if np.array_equal(t, res.targets):
                break
            new = self.solve(t, res)
            if not self.better(new, res):
                break
            res = new
        self.trace.append(self.best.value)
        return res

    def coordinate(self, res: VIResult, step: float, min_step: float) -> VIResult:
        """Coordinate ascent on the targets; the step halves after a pass without gain."""
        H = len(res.targets)
        while step >= min_step:
            improved = False
            for k in range(H):
                for sign in (1.0, -1.0):
                    t = res.targets.copy()
                    t[k] += sign * step
                    new = self.solve(t, res)
                    if self.better(new, res):
                        res, improved = new, True
                        break
            if improved:
                res = self.polish(res)
            else:
                step *= 0.5
                self.trace.append(self.best.value)
        return res


def nested_solve(mdp: TabularMDP, spec: LossSpec, disc: DiscountSpec,
                 cfg: NestedConfig | None = None) -> SolveResult:
    cfg = cfg or NestedConfig()
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    H = mdp.max_horizon
    lo, hi = mdp.reward_range()
    span = max(hi - lo, 1e-12)
    search = _Search(mdp, spec, disc, cfg)
    converged = True

    # the first start uses the targets of the risk-neutral optimum
    neutral = value_iteration_modified(mdp, np.zeros(H), LossSpec("none"), disc)
    starts = [exact_targets(mdp, policy_tables(neutral.policy, mdp), spec,
                            fallback=np.full(H, 0.5 * (lo + hi))).targets]
    starts += [rng.uniform(lo, hi, size=H) for _ in range(cfg.restarts)]

    results = []
    try:
        for t0 in starts:
            res = search.polish(search.solve(t0))
            res = search.coordinate(res, cfg.init_step * span, cfg.coarse_step * span)
            results.append(res)
        best = max(results, key=lambda r: r.value)
        search.coordinate(best, cfg.coarse_step * span, cfg.min_step * span)
    except _BudgetExhausted:
        converged = False
    best = search.best

    # fixed-point certificate: refitting targets under the returned policy
    tables = policy_tables(best.policy, mdp)
    final = exact_objective(mdp, tables, spec, disc,
                            exact_targets(mdp, tables, spec, fallback=best.targets))
    gap = final.objective - best.value
    certified = gap <= 1e-8 * (1.0 + abs(best.value))

    report = evaluate_policy(mdp, best.policy, spec, disc, cfg.n_eval, cfg.seed + 1)
    return SolveResult(
        policy=best.policy,
        targets=TargetSchedule(final.targets.targets, final.targets.support_counts),
        report=report,
        trace=search.trace or [best.value],
        seed=cfg.seed,
        iterations=search.evaluations,
        wall_time=time.perf_counter() - t_start,
        converged=converged and certified,
        extras={"exact_objective": final.objective, "outer_value": best.value,
                "fixed_point_gap": gap, "evaluations": search.evaluations},
    )
