"""Noisy eight-direction grid world with a goal cell and obstacle cells.

Grid files hold one row per line using ``.`` (empty), ``x`` (start), ``G``
(goal) and ``R`` (obstacle). Goal and obstacles are terminal. With
probability ``1 - noise_prob`` the chosen direction is executed, otherwise a
direction drawn uniformly from all eight (possibly the chosen one). Moves that
would leave the grid keep the agent in place.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..tabular import TabularMDP

# N, S, E, W, NE, NW, SE, SW as (row, col) offsets
MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1), (-1, 1), (-1, -1), (1, 1), (1, -1))
MOVE_NAMES = ("N", "S", "E", "W", "NE", "NW", "SE", "SW")
CELL_CHARS = {".": "empty", "x": "start", "G": "goal", "R": "obstacle"}


class GridFormatError(ValueError):
    pass


def parse_grid(text: str) -> tuple[str, ...]:
    rows = tuple(line.strip() for line in text.splitlines() if line.strip())
    if not rows:
        raise GridFormatError("empty grid")
    width = len(rows[0])
    for k, row in enumerate(rows):
        if len(row) != width:
            raise GridFormatError(f"row {k} has {len(row)} cells, expected {width}")
        bad = set(row) - set(CELL_CHARS)
        if bad:
            raise GridFormatError(f"row {k}: unknown cell characters {sorted(bad)}")
    flat = "".join(rows)
    if flat.count("x") != 1:
        raise GridFormatError("grid needs exactly one start cell 'x'")
    if flat.count("G") < 1:
        raise GridFormatError("grid needs at least one goal cell 'G'")
    return rows


def load_grid(path) -> tuple[str, ...]:
    return parse_grid(Path(path).read_text())


def default_grid() -> tuple[str, ...]:
    text = resources.files("inhomvol.envs").joinpath("data/default_grid.txt").read_text()
    return parse_grid(text)


@dataclass(frozen=True)
class GridConfig:
    grid: tuple[str, ...] = field(default_factory=default_grid)
    step_reward: float = -1.0
    goal_reward: float = 35.0
    obstacle_reward: float = -35.0
    max_steps: int = 35
    noise_prob: float = 0.08
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "grid", parse_grid("\n".join(self.grid)))
        if not 0.0 <= self.noise_prob < 1.0:
            raise ValueError("noise_prob must lie in [0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


class GridWorld:
    """Grid world backed by an exact :class:`TabularMDP` over cells."""

    def __init__(self, cfg: GridConfig | None = None):
        self.cfg = cfg or GridConfig()
        rows = self.cfg.grid
        self.shape = (len(rows), len(rows[0]))
        self.kinds = np.array([[CELL_CHARS[ch] for ch in row] for row in rows])
        flat = self.kinds.ravel()
        self.start = int(np.flatnonzero(flat == "start")[0])
        self.terminal_cells = (flat == "goal") | (flat == "obstacle")
        self.mdp = self._build_mdp()
        self.max_horizon = self.mdp.max_horizon
        self.action_space = self.mdp.action_space

    @property
    def n_cells(self) -> int:
        return self.shape[0] * self.shape[1]

    def cell(self, index: int) -> tuple[int, int]:
        return divmod(int(index), self.shape[1])

    def move(self, index: int, direction: int) -> int:
        r, c = self.cell(index)
        dr, dc = MOVES[direction]
        r2, c2 = r + dr, c + dc
        if not (0 <= r2 < self.shape[0] and 0 <= c2 < self.shape[1]):
            return int(index)
        return r2 * self.shape[1] + c2

    def landing_reward(self, index: int) -> float:
        kind = self.kinds.ravel()[index]
        if kind == "goal":
            return self.cfg.goal_reward
        if kind == "obstacle":
            return self.cfg.obstacle_reward
        return self.cfg.step_reward

    def _build_mdp(self) -> TabularMDP:
        S, A = self.n_cells, len(MOVES)
        p = self.cfg.noise_prob
        nxt = np.zeros((S, A, A), dtype=int)
        rew = np.zeros((S, A, A))
        prob = np.full((S, A, A), p / A)
        prob[:, np.arange(A), np.arange(A)] += 1.0 - p
        for s in range(S):
            for k in range(A):
                nxt[s, :, k] = self.move(s, k)
                rew[s, :, k] = self.landing_reward(nxt[s, 0, k])
        init = np.zeros(S)
        init[self.start] = 1.0
        return TabularMDP.homogeneous(nxt, prob, rew, self.terminal_cells, init, self.cfg.max_steps)

    def tabular(self) -> TabularMDP:
        return self.mdp

    # EnvModel interface, delegated to the tabular model
    def reset(self, n, rng):
        return self.mdp.reset(n, rng)

    def step(self, states, actions, step, rng):
        return self.mdp.step(states, actions, step, rng)

    def is_terminal(self, states, step):
        return self.mdp.is_terminal(states, step)

    def shortest_path_length(self, source: int | None = None, kind: str = "goal") -> int | None:
        """Fewest moves from ``source`` to a cell of ``kind``, passing only non-terminal cells."""
        source = self.start if source is None else source
        flat = self.kinds.ravel()
        dist = {source: 0}
        queue = deque([source])
        while queue:
            s = queue.popleft()
            for d in range(len(MOVES)):
                t = self.move(s, d)
                if t in dist:
                    continue
                dist[t] = dist[s] + 1
                if flat[t] == kind:
                    return dist[t]
                if not self.terminal_cells[t]:
                    queue.append(t)
        return None


def grid_env(cfg: GridConfig | None = None) -> GridWorld:
    return GridWorld(cfg)


def most_likely_path(env: GridWorld, policy) -> list[tuple[int, int]]:
    """Cells visited when every chosen move is executed, following the modal action."""
    s = env.start
    path = [env.cell(s)]
    for i in range(env.cfg.max_steps):
        a = int(policy.mode(np.array([s]), i)[0])
        s = env.move(s, a)
        path.append(env.cell(s))
        if env.terminal_cells[s]:
            break
    return path
