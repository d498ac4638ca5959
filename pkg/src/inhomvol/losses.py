"""Penalty functions ell applied to the deviation of a reward from its target."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("none", "quadratic", "absolute", "monotone", "exponential")


@dataclass(frozen=True)
class LossSpec:
    """A convex penalty with ell(0) == 0.

    ``kind`` is one of ``none`` (risk neutral), ``quadratic`` (beta x^2),
    ``absolute`` (beta |x|), ``monotone`` (quadratic switching to affine above
    x = 1/(2 beta), the loss of the monotone hull of quadratic utility) and
    ``exponential`` (x - (1 - exp(-beta x)) / beta, the OCE of exponential
    utility).
    """

    kind: str = "quadratic"
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "none" and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def closed_form_target(self) -> str | None:
        return {"none": "mean", "quadratic": "mean", "absolute": "median"}.get(self.kind)

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("loss evaluated at a non-finite argument")
        b = self.beta
        if self.kind == "none":
            out = np.zeros_like(x)
        elif self.kind == "quadratic":
            out = b * x * x
        elif self.kind == "absolute":
            out = b * np.abs(x)
        elif self.kind == "monotone":
            knot = 0.5 / b
            out = np.where(x <= knot, b * x * x, x - 0.25 / b)
        else:
            u = b * x
            with np.errstate(over="ignore"):
                direct = (u + np.expm1(-u)) / b
            # u + expm1(-u) cancels for small u; use its Taylor series there
            series = u * u * (0.5 - u * (1 / 6 - u * (1 / 24 - u * (1 / 120 - u / 720)))) / b
            out = np.maximum(np.where(np.abs(u) < 1e-2, series, direct), 0.0)
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        b = self.beta
        if self.kind == "none":
            out = np.zeros_like(x)
        elif self.kind == "quadratic":
            out = 2.0 * b * x
        elif self.kind == "absolute":
            out = b * np.sign(x)
        elif self.kind == "monotone":
            out = np.where(x <= 0.5 / b, 2.0 * b * x, 1.0)
        else:
            with np.errstate(over="ignore"):
                out = -np.expm1(-b * x)
        return out if out.ndim else float(out)

    def label(self) -> str:
        return self.kind if self.kind == "none" else f"{self.kind}(beta={self.beta:g})"


def loss_eval(spec: LossSpec, x: float) -> float:
    if not math.isfinite(x):
        raise ValueError("loss evaluated at a non-finite argument")
    return float(spec.evaluate(x))
