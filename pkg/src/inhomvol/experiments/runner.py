"""Run an :class:`ExperimentSpec` and write its tables, plots and per-run directories.

Every CSV is a deterministic function of the experiment config and its seeds: numbers are
written with ``repr`` and nothing time-dependent goes into a CSV (wall times
live in the per-run ``meta.txt`` files).
"""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..envs.execution import ExecutionEnv, RewardScaled, inventory_path
from ..envs.grid import GridWorld, most_likely_path
from ..envs.toy import toy_closed_form, toy_discretized, toy_env
from ..losses import LossSpec
from ..mdp import DiscountSpec, rollout_batch
from ..policies import DeterministicTabularPolicy, GaussianPolicy, step_onehot
from ..risk import evaluate_policy, homog_penalty
from ..solvers.nested import nested_solve
from ..solvers.results import fmt, save_result
from ..solvers.train import ivo_train, trvo_train
from ..tabular import enumerate_paths, policy_tables
from . import render
from .config import ExperimentSpec, format_beta


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _write_spec(out: Path, spec: ExperimentSpec) -> None:
    (out / "experiment.txt").write_text("".join(f"{k} = {v}\n" for k, v in spec.as_record().items()))


def run_experiment(spec: ExperimentSpec, output=None) -> Path:
    # dispatch on the experiment name; the combination was validated on construction
    out = Path(output if output is not None else spec.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_spec(out, spec)
    runner = {"toy": _run_toy, "execution": _run_execution, "gridworld": _run_gridworld,
              "property-suite": _run_properties}[spec.experiment]
    runner(spec, out)
    return out


def _run_dir(out: Path, beta: float, seed: int) -> Path:
    return out / "runs" / f"beta={format_beta(beta)}" / f"seed={seed}"


def _gaussian(spec: ExperimentSpec, n_features: int, bounds=None) -> GaussianPolicy:
    p = spec.policy
    return GaussianPolicy(step_onehot(n_features), log_std=p.log_std, bounds=bounds,
                          log_std_bounds=(p.log_std_floor, p.log_std_ceiling),
                          mean_init=np.full(n_features, p.mean_init))


# ---------------------------------------------------------------- toy

def toy_homog_argmin(mdp, grid, disc) -> float:
    """Grid action minimising the exact homogeneous volatility of the discretised toy problem."""
    best, best_a = np.inf, None
    S1 = mdp.n_states[1]
    for g, a in enumerate(grid):
        pol = DeterministicTabularPolicy([np.array([g]), np.zeros(S1, dtype=int)], mdp.n_actions)
        batch, prob = enumerate_paths(mdp, policy_tables(pol, mdp))
        v = homog_penalty(batch, disc, prob)
        if v < best - 1e-12:
            best, best_a = v, float(a)
    return best_a


def _run_toy(spec: ExperimentSpec, out: Path) -> None:
    disc = DiscountSpec(1.0, 2)
    rows = []
    if spec.solver == "closed-form":
        for beta in spec.betas:
            opt = toy_closed_form(beta)
            rows.append(["closed-form", "homog", format_beta(beta), "", opt.homog_argmin])
            rows.append(["closed-form", "inhom", format_beta(beta), "", opt.inhom_argmin])
    elif spec.solver == "nested":
        mdp, grid = toy_discretized()
        homog = toy_homog_argmin(mdp, grid, disc)
        for beta in spec.betas:
            rows.append(["grid-enumeration", "homog", format_beta(beta), "", homog])
            for seed in spec.seeds:
                res = nested_solve(mdp, spec.loss_spec(beta), disc, replace(spec.nested, seed=seed))
                save_result(res, _run_dir(out, beta, seed))
                rows.append(["nested", "inhom", format_beta(beta), seed,
                             float(grid[res.policy.actions[0][0]])])
    else:
        env = toy_env()
        for beta in spec.betas:
            for seed in spec.seeds:
                cfg = replace(spec.train, seed=seed, eval_seed=spec.train.eval_seed + seed)
                pol = _gaussian(spec, 2)
                if spec.solver == "ivo":
                    res = ivo_train(env, pol, spec.loss_spec(beta), disc, cfg)
                else:
                    res = trvo_train(env, pol, beta, disc, cfg)
                save_result(res, _run_dir(out, beta, seed))
                crit = "inhom" if spec.solver == "ivo" else "homog"
                rows.append([spec.solver, crit, format_beta(beta), seed,
                             float(res.policy.mode(np.zeros((1, 1)), 0)[0])])
    write_csv(out / "optimum.csv", ["solver", "criterion", "beta", "seed", "argmin"], rows)


# ---------------------------------------------------------------- execution

def mode_inventory_path(env, policy, disc) -> np.ndarray:
    """Fraction of shares left at each step when the policy plays its modal action."""
    batch = rollout_batch(env, policy, 1, np.random.default_rng(0), disc, deterministic=True)
    return inventory_path(batch, env.cfg)


def _run_execution(spec: ExperimentSpec, out: Path) -> None:
    cfg = spec.execution_config()
    raw = ExecutionEnv(cfg)
    env = RewardScaled(raw, cfg.n0 * cfg.s0)
    T = raw.max_horizon
    disc = DiscountSpec(1.0, T)
    mean_paths, per_seed, summary = {}, [], []
    for beta in spec.betas:
        b = env.solver_beta(beta)
        paths = []
        for seed in spec.seeds:
            tcfg = replace(spec.train, seed=seed, eval_seed=spec.train.eval_seed + seed)
            pol = _gaussian(spec, T, bounds=(cfg.min_fraction, 1.0))
            if spec.solver == "ivo":
                res = ivo_train(env, pol, LossSpec(spec.loss, b), disc, tcfg)
            else:
                res = trvo_train(env, pol, b, disc, tcfg)
            save_result(res, _run_dir(out, beta, seed))
            path = mode_inventory_path(env, res.policy, disc)
            paths.append(path)
            per_seed.extend([format_beta(beta), seed, k, float(v)] for k, v in enumerate(path))
            # risk figures in raw currency, for the loss and beta as quoted
            rep = evaluate_policy(raw, res.policy, spec.loss_spec(beta), disc,
                                  spec.train.n_eval, tcfg.eval_seed + 1)
            summary.append([spec.solver, format_beta(beta), seed, rep.objective, rep.expected_return,
                            rep.inhom_volatility, rep.homog_volatility, rep.return_variance,
                            float(1.0 - path[1])])
        mean_paths[beta] = np.mean(paths, axis=0)
    header = ["step"] + [format_beta(b) for b in spec.betas]
    rows = [[k] + [float(mean_paths[b][k]) for b in spec.betas] for k in range(T + 1)]
    write_csv(out / "inventory.csv", header, rows)
    write_csv(out / "inventory_by_seed.csv", ["beta", "seed", "step", "fraction_left"], per_seed)
    write_csv(out / "summary.csv", ["solver", "beta", "seed", "objective", "expected_return",
                                    "inhom_volatility", "homog_volatility", "return_variance",
                                    "first_step_fraction"], summary)
    render_dir(out)


# ---------------------------------------------------------------- gridworld

def path_end(env: GridWorld, path) -> str:
    r, c = path[-1]
    kind = env.kinds[r][c]
    return kind if kind in ("goal", "obstacle") else "open"


def _run_gridworld(spec: ExperimentSpec, out: Path) -> None:
    gcfg = spec.grid_config()
    env = GridWorld(gcfg)
    mdp = env.tabular()
    disc = DiscountSpec(gcfg.gamma, gcfg.max_steps)
    (out / "grid.txt").write_text("".join(row + "\n" for row in gcfg.grid))
    path_rows, summary = [], []
    for beta in spec.betas:
        for seed in spec.seeds:
            res = nested_solve(mdp, spec.loss_spec(beta), disc, replace(spec.nested, seed=seed))
            save_result(res, _run_dir(out, beta, seed))
            path = most_likely_path(env, res.policy)
            path_rows.extend([format_beta(beta), seed, k, r, c] for k, (r, c) in enumerate(path))
            summary.append([format_beta(beta), seed, len(path) - 1, path_end(env, path),
                            float(res.extras["exact_objective"]), res.report.expected_return,
                            res.report.inhom_volatility, str(res.converged), res.iterations])
    write_csv(out / "paths.csv", ["beta", "seed", "step", "row", "col"], path_rows)
    write_csv(out / "summary.csv", ["beta", "seed", "length", "end", "exact_objective",
                                    "expected_return", "inhom_volatility", "converged",
                                    "inner_solves"], summary)
    render_dir(out)


# ---------------------------------------------------------------- property suite

def _run_properties(spec: ExperimentSpec, out: Path) -> None:
    from .properties import run_suite

    results = run_suite(seed=spec.seeds[0])
    write_csv(out / "properties.csv", ["property", "passed", "detail"],
              [[r.name, str(r.passed), r.detail] for r in results])
    (out / "report.txt").write_text("".join(r.line() + "\n" for r in results))


# ---------------------------------------------------------------- rendering

def render_dir(directory) -> list[Path]:
    """(Re)draw the SVG figures of a run directory from its CSV files."""
    d = Path(directory)
    written = []
    inv = d / "inventory.csv"
    if inv.is_file():
        header, rows = read_csv(inv)
        steps = [int(r[0]) for r in rows]
        series = {f"beta={h}": [float(r[k]) for r in rows] for k, h in enumerate(header) if k > 0}
        meta = _read_meta(d)
        title = f"{meta.get('solver', '').upper()} mean inventory"
        (d / "inventory.svg").write_text(render.line_chart(steps, series, title))
        written.append(d / "inventory.svg")
    paths = d / "paths.csv"
    grid = d / "grid.txt"
    if paths.is_file() and grid.is_file():
        from ..envs.grid import CELL_CHARS, parse_grid

        kinds = [[CELL_CHARS[ch] for ch in row] for row in parse_grid(grid.read_text())]
        _, rows = read_csv(paths)
        by_key: dict = {}
        for beta, seed, _, r, c in rows:
            by_key.setdefault((beta, seed), []).append((int(r), int(c)))
        first_seed = {}
        for (beta, seed), p in by_key.items():
            first_seed.setdefault(beta, p)
        named = {f"beta={b}": p for b, p in first_seed.items()}
        (d / "grid.svg").write_text(render.grid_paths(kinds, named, "most likely paths"))
        written.append(d / "grid.svg")
    return written


def _read_meta(d: Path) -> dict:
    from ..solvers.results import read_key_values

    f = d / "experiment.txt"
    return read_key_values(f) if f.is_file() else {}
