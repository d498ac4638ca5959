"""Experiment specifications read from sectioned ``key = value`` files.

Sections: ``[experiment]`` (what to run), ``[train]`` (policy-gradient
settings), ``[nested]`` (outer search), ``[policy]`` (initial policy) and
``[env]`` (environment overrides). Every key has a default, so a file only
needs the ones it changes.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..envs.execution import ExecutionConfig
from ..envs.grid import GridConfig, GridFormatError, load_grid
from ..losses import KINDS, LossSpec
from ..solvers.nested import NestedConfig
from ..solvers.train import TrainConfig

EXPERIMENTS = ("toy", "execution", "gridworld", "property-suite")
SOLVERS = {
    "toy": ("closed-form", "nested", "ivo", "trvo"),
    "execution": ("ivo", "trvo"),
    "gridworld": ("nested",),
    "property-suite": ("closed-form",),
}
SEED_ENV = "INHOMVOL_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    log_std: float = -0.693
    log_std_floor: float = -7.0
    log_std_ceiling: float = 2.0
    mean_init: float = 0.0


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    solver: str
    loss: str = "quadratic"
    betas: tuple = (1.0,)
    seeds: tuple = (0,)
    output: str = "runs/out"
    train: TrainConfig = field(default_factory=TrainConfig)
    nested: NestedConfig = field(default_factory=NestedConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    env: dict = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.solver not in SOLVERS[self.experiment]:
            raise ConfigError(f"solver {self.solver!r} is not available for {self.experiment!r}; "
                              f"choose from {SOLVERS[self.experiment]}")
        if self.loss not in KINDS or self.loss == "none":
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not self.betas:
            raise ConfigError("beta list must not be empty")
        if not self.seeds:
            raise ConfigError("seed list must not be empty")
        if any(not b > 0 for b in self.betas):
            raise ConfigError("every beta must be positive")

    def loss_spec(self, beta: float) -> LossSpec:
        return LossSpec(self.loss, beta)

    def execution_config(self) -> ExecutionConfig:
        return _build(ExecutionConfig, self.env, "env")

    def grid_config(self) -> GridConfig:
        values = dict(self.env)
        path = values.pop("grid", "default").strip()
        cfg = _build(GridConfig, values, "env")
        if path != "default":
            p = Path(path)
            if not p.is_absolute():
                p = Path(self.base_dir) / p
            try:
                cfg = replace(cfg, grid=load_grid(p))
            except (OSError, GridFormatError) as exc:
                raise ConfigError(f"[env] cannot load grid {str(p)!r}: {exc}") from exc
        return cfg

    def as_record(self) -> dict:
        return {"experiment": self.experiment, "solver": self.solver, "loss": self.loss,
                "betas": ", ".join(format_beta(b) for b in self.betas),
                "seeds": ", ".join(str(s) for s in self.seeds)}


def format_beta(beta: float) -> str:
    """Fixed header format, e.g. ``1.00E-01``."""
    return f"{beta:.2E}"


def _parse_list(text: str, cast) -> tuple:
    items = [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]
    try:
        return tuple(cast(t) for t in items)
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}: {exc}") from exc


def _coerce(value: str, like):
    if isinstance(like, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value.strip()


def _build(cls, values: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    base = cls()
    kwargs = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        try:
            kwargs[key] = _coerce(raw, getattr(base, key)) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"[{section}] bad value for {key!r}: {exc}") from exc
    try:
        return replace(base, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def parse_spec(text: str, seed_override: int | None = None, base_dir: str = ".") -> ExperimentSpec:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (the execution horizon is ``T``)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    allowed = {"experiment", "train", "nested", "policy", "env"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    ex = dict(cp["experiment"])
    for key in ("experiment", "solver"):
        if key not in ex:
            raise ConfigError(f"[experiment] needs {key!r}")
    unknown = set(ex) - {"experiment", "solver", "loss", "betas", "seeds", "output"}
    if unknown:
        raise ConfigError(f"[experiment] unknown keys {sorted(unknown)}")
    seeds = _parse_list(ex.get("seeds", "0"), int)
    if seed_override is not None:
        seeds = tuple(seed_override + k for k in range(len(seeds)))
    env = dict(cp["env"]) if cp.has_section("env") else {}
    spec = ExperimentSpec(
        experiment=ex["experiment"].strip(),
        solver=ex["solver"].strip(),
        loss=ex.get("loss", "quadratic").strip(),
        betas=_parse_list(ex.get("betas", "1.0"), float),
        seeds=seeds,
        output=ex.get("output", f"runs/{ex['experiment'].strip()}").strip(),
        train=_build(TrainConfig, dict(cp["train"]) if cp.has_section("train") else {}, "train"),
        nested=_build(NestedConfig, dict(cp["nested"]) if cp.has_section("nested") else {}, "nested"),
        policy=_build(PolicyConfig, dict(cp["policy"]) if cp.has_section("policy") else {}, "policy"),
        env=env,
        base_dir=str(base_dir),
    )
    # validate environment overrides early
    if spec.experiment == "execution":
        spec.execution_config()
    elif spec.experiment == "gridworld":
        spec.grid_config()
    elif env:
        raise ConfigError(f"[env] is not used by the {spec.experiment!r} experiment")
    return spec


def seed_from_env() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def load_spec(path, seed_override: int | None = None) -> ExperimentSpec:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"no such config file: {p}")
    return parse_spec(p.read_text(), seed_override, str(p.parent))
