"""Exact evaluation of tabular policies from the forward law of each reward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .losses import LossSpec
from .mdp import DiscountSpec
from .risk import RiskReport, TargetSchedule, fit_target_1d, report_from_batch
from .tabular import TabularMDP, enumerate_paths, step_atoms


@dataclass(frozen=True)
class ExactValue:
    expected_return: float
    penalty: float
    targets: TargetSchedule
    survival: np.ndarray

    @property
    def objective(self) -> float:
        return self.expected_return - self.penalty


def exact_targets(mdp: TabularMDP, tables, spec: LossSpec, fallback=None) -> TargetSchedule:
    """Optimal per-step targets; unreachable steps take ``fallback`` (or NaN)."""
    atoms, survival = step_atoms(mdp, tables)
    H = mdp.max_horizon
    out = np.full(H, np.nan) if fallback is None else np.array(fallback, dtype=float)
    counts = np.zeros(H, dtype=int)
    for i, (vals, wts) in enumerate(atoms):
        if vals.size == 0 or survival[i] <= 0:
            continue
        counts[i] = vals.size
        out[i] = fit_target_1d(vals, spec, wts)
    return TargetSchedule(out, counts)


def exact_objective(mdp: TabularMDP, tables, spec: LossSpec, disc: DiscountSpec,
                    targets=None) -> ExactValue:
    """Expected return and inhomogeneous penalty; targets refitted unless given."""
    atoms, survival = step_atoms(mdp, tables)
    if targets is None:
        targets = exact_targets(mdp, tables, spec)
    t = np.asarray(getattr(targets, "targets", targets), dtype=float)
    if not isinstance(targets, TargetSchedule):
        targets = TargetSchedule(t, np.array([v.size for v, _ in atoms]))
    ret, pen = [], []
    for i, (vals, wts) in enumerate(atoms):
        if vals.size == 0:
            continue
        g = disc.gamma ** i
        ret.append(g * math.fsum(wts * vals))
        pen.append(g * math.fsum(wts * spec.evaluate(vals - t[i])))
    return ExactValue(math.fsum(ret), math.fsum(pen), targets, survival)


def exact_x_table(mdp: TabularMDP, tables, targets, spec: LossSpec, disc: DiscountSpec):
    """Action-volatility X_i(s, a) by backward induction.

    ``X[i][s, a]`` is the expected discounted penalty of rewards r_{i+1}, ...
    given (s_i, a_i) = (s, a); it is zero in terminal states.
    """
    t = np.asarray(getattr(targets, "targets", targets), dtype=float)
    H = mdp.max_horizon
    X = [None] * (H + 1)
    X[H] = np.zeros((mdp.n_states[H], mdp.n_actions))
    for i in range(H - 1, -1, -1):
        law = mdp.laws[i]
        if i + 1 < H:
            nxt_val = (tables[i + 1] * X[i + 1]).sum(axis=1)
            nxt_val = np.where(mdp.terminal[i + 1], 0.0, nxt_val)
        else:
            nxt_val = np.zeros(mdp.n_states[H])
        pen = spec.evaluate(law.reward - t[i])
        Xi = (law.prob * (pen + disc.gamma * nxt_val[law.next_state])).sum(axis=2)
        Xi[mdp.terminal[i]] = 0.0
        X[i] = Xi
    return X[:H]


def exact_report(mdp: TabularMDP, tables, spec: LossSpec, disc: DiscountSpec) -> RiskReport:
    """Every risk metric as an exact expectation over the enumerated outcome paths."""
    batch, prob = enumerate_paths(mdp, tables)
    return report_from_batch(batch, spec, disc, weights=prob)
