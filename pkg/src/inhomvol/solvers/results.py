"""Solver output and its on-disk run-directory layout."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..risk import RiskReport, TargetSchedule


@dataclass
class SolveResult:
    policy: object
    targets: TargetSchedule
    report: RiskReport
    trace: list
    seed: int
    iterations: int
    wall_time: float
    converged: bool = True
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.trace:
            raise ValueError("trace must not be empty")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def policy_vector(policy) -> np.ndarray:
    if hasattr(policy, "params"):
        return np.asarray(policy.params, dtype=float)
    if hasattr(policy, "actions"):
        return np.concatenate([np.asarray(a, dtype=float).ravel() for a in policy.actions])
    raise TypeError(f"cannot serialise policy of type {type(policy).__name__}")


def save_result(result: SolveResult, directory) -> Path:
    """Write ``policy.txt``, ``targets.csv``, ``trace.csv``, ``report.txt`` and ``meta.txt``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "policy.txt").write_text("".join(fmt(v) + "\n" for v in policy_vector(result.policy)))
    with open(out / "targets.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "target", "support"])
        for i, (t, c) in enumerate(zip(result.targets.targets, result.targets.support_counts)):
            w.writerow([i + 1, fmt(t), int(c)])
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective"])
        for i, v in enumerate(result.trace):
            w.writerow([i, fmt(v)])
    (out / "report.txt").write_text(result.report.to_text())
    meta = {"seed": result.seed, "iterations": result.iterations,
            "converged": result.converged, "wall_time": result.wall_time}
    meta.update({k: v for k, v in result.extras.items() if np.isscalar(v)})
    (out / "meta.txt").write_text("".join(f"{k} = {fmt(v) if not isinstance(v, str) else v}\n"
                                          for k, v in meta.items()))
    return out


def read_key_values(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
