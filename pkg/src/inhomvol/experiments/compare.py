"""Differences between two run directories of the same experiment."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..solvers.results import read_key_values
from .runner import read_csv


class ComparisonError(ValueError):
    pass


@dataclass
class DiffReport:
    experiment: str
    lines: list = field(default_factory=list)
    max_distance: float = 0.0

    def regressed(self, tol: float) -> bool:
        return self.max_distance > tol

    def to_text(self) -> str:
        head = f"experiment = {self.experiment}\nmax_distance = {self.max_distance!r}\n"
        return head + "".join(line + "\n" for line in self.lines)


def _meta(d: Path) -> dict:
    f = d / "experiment.txt"
    if not f.is_file():
        raise ComparisonError(f"{d} is not a run directory (no experiment.txt)")
    return read_key_values(f)


def _table(d: Path, name: str):
    f = d / name
    if not f.is_file():
        raise ComparisonError(f"{f} is missing")
    return read_csv(f)


def _mean_by(rows, header, key_cols, value_col):
    ki = [header.index(k) for k in key_cols]
    vi = header.index(value_col)
    acc: dict = {}
    for r in rows:
        acc.setdefault(tuple(r[k] for k in ki), []).append(float(r[vi]))
    return {k: float(np.mean(v)) for k, v in acc.items()}


def compare_runs(dir_a, dir_b) -> DiffReport:
    a, b = Path(dir_a), Path(dir_b)
    ma, mb = _meta(a), _meta(b)
    if ma["experiment"] != mb["experiment"]:
        raise ComparisonError(f"cannot compare {ma['experiment']!r} with {mb['experiment']!r}")
    rep = DiffReport(ma["experiment"])
    rep.lines.append(f"solvers = {ma['solver']} vs {mb['solver']}")
    kind = ma["experiment"]
    if kind == "execution":
        _compare_execution(a, b, rep)
    elif kind == "gridworld":
        _compare_grid(a, b, rep)
    elif kind == "toy":
        _compare_toy(a, b, rep)
    else:
        _compare_properties(a, b, rep)
    return rep


def _compare_execution(a, b, rep):
    ha, ra = _table(a, "inventory.csv")
    hb, rb = _table(b, "inventory.csv")
    for col in ha[1:]:
        if col not in hb:
            rep.lines.append(f"beta {col}: only in first run")
            continue
        ya = np.array([float(r[ha.index(col)]) for r in ra])
        yb = np.array([float(r[hb.index(col)]) for r in rb])
        if len(ya) != len(yb):
            raise ComparisonError(f"beta {col}: curves have {len(ya)} and {len(yb)} rows")
        dist = float(np.abs(ya - yb).max())
        rep.max_distance = max(rep.max_distance, dist)
        rep.lines.append(f"beta {col}: max curve distance {dist!r}; first-step fraction "
                         f"{1 - ya[1]!r} vs {1 - yb[1]!r}")
    sa, sra = _table(a, "summary.csv")
    sb, srb = _table(b, "summary.csv")
    oa = _mean_by(sra, sa, ["beta"], "objective")
    ob = _mean_by(srb, sb, ["beta"], "objective")
    for k in oa:
        if k in ob:
            rep.lines.append(f"beta {k[0]}: mean objective delta {ob[k] - oa[k]!r}")


def _compare_grid(a, b, rep):
    ha, ra = _table(a, "paths.csv")
    hb, rb = _table(b, "paths.csv")
    pa, pb = {}, {}
    for rows, out in ((ra, pa), (rb, pb)):
        for beta, seed, _, r, c in rows:
            out.setdefault((beta, seed), []).append((int(r), int(c)))
    for key in pa:
        if key not in pb:
            rep.lines.append(f"beta {key[0]} seed {key[1]}: only in first run")
            continue
        same = pa[key] == pb[key]
        if not same:
            rep.max_distance = max(rep.max_distance, 1.0 + abs(len(pa[key]) - len(pb[key])))
        rep.lines.append(f"beta {key[0]} seed {key[1]}: paths {'identical' if same else 'differ'} "
                         f"(lengths {len(pa[key]) - 1} vs {len(pb[key]) - 1})")
    sa, sra = _table(a, "summary.csv")
    sb, srb = _table(b, "summary.csv")
    oa = _mean_by(sra, sa, ["beta", "seed"], "exact_objective")
    ob = _mean_by(srb, sb, ["beta", "seed"], "exact_objective")
    for k in oa:
        if k in ob:
            d = ob[k] - oa[k]
            rep.max_distance = max(rep.max_distance, abs(d))
            rep.lines.append(f"beta {k[0]} seed {k[1]}: objective delta {d!r}")


def _compare_toy(a, b, rep):
    ha, ra = _table(a, "optimum.csv")
    hb, rb = _table(b, "optimum.csv")
    oa = _mean_by(ra, ha, ["criterion", "beta"], "argmin")
    ob = _mean_by(rb, hb, ["criterion", "beta"], "argmin")
    for k in oa:
        if k in ob:
            d = ob[k] - oa[k]
            rep.max_distance = max(rep.max_distance, abs(d))
            rep.lines.append(f"{k[0]} beta {k[1]}: argmin {oa[k]!r} vs {ob[k]!r}")


def _compare_properties(a, b, rep):
    ha, ra = _table(a, "properties.csv")
    hb, rb = _table(b, "properties.csv")
    pa = {r[0]: r[1] for r in ra}
    pb = {r[0]: r[1] for r in rb}
    for k in pa:
        if pa[k] != pb.get(k):
            rep.max_distance = max(rep.max_distance, 1.0)
            rep.lines.append(f"{k}: {pa[k]} vs {pb.get(k)}")
        else:
            rep.lines.append(f"{k}: {pa[k]}")
