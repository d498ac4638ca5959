import math

import numpy as np
import pytest

from inhomvol.envs import (ExecutionConfig, GridConfig, GridWorld, execution_env, load_grid,
                           most_likely_path, scaled_execution_env, toy_closed_form, toy_discretized,
                           toy_env)
from inhomvol.envs.execution import N_COL
from inhomvol.envs.grid import GridFormatError, parse_grid
from inhomvol.envs.toy import toy_homog_volatility
from inhomvol.losses import LossSpec
from inhomvol.mdp import DiscountSpec, rollout, rollout_batch
from inhomvol.policies import FixedActionPolicy
from inhomvol.solvers.value_iteration import value_iteration_modified


# toy

def test_toy_zero_action_is_deterministic():
    b = rollout_batch(toy_env(), FixedActionPolicy([0.0, 0.0]), 100, np.random.default_rng(0))
    assert np.all(b.rewards[:, 0] == 0.0) and np.all(b.rewards[:, 1] == 1.0)


def test_toy_unit_action_gives_unit_variance_first_reward():
    n = 100_000
    b = rollout_batch(toy_env(), FixedActionPolicy([1.0, 0.0]), n, np.random.default_rng(1))
    v = b.rewards[:, 0].var(ddof=1)
    # standard error of a Gaussian sample variance
    assert abs(v - 1.0) <= 3 * math.sqrt(2 / (n - 1))


def test_toy_return_is_one_for_every_trajectory():
    rng = np.random.default_rng(2)
    for a0 in rng.normal(scale=3, size=10):
        b = rollout_batch(toy_env(), FixedActionPolicy([a0, -a0]), 500, rng)
        assert np.all(b.rewards.sum(axis=1) == 1.0)


@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
def test_toy_closed_form_is_beta_free(beta):
    opt = toy_closed_form(beta)
    assert (opt.homog_argmin, opt.inhom_argmin) == (0.25, 0.0)


def test_toy_homog_objective_at_quarter():
    assert 1.0 - 1.0 * toy_homog_volatility(0.25) == 0.75


@pytest.mark.parametrize("beta", [0.0, -1.0])
def test_toy_closed_form_rejects_non_positive_beta(beta):
    with pytest.raises(ValueError):
        toy_closed_form(beta)


def test_toy_discretisation_reproduces_quadratic_penalty():
    from inhomvol.exact import exact_report

    mdp, grid = toy_discretized(n_grid=5, low=-1.0, high=1.0)
    for g, a0 in enumerate(grid):
        tables = [np.eye(len(grid))[[g]], np.tile(np.eye(len(grid))[g], (mdp.n_states[1], 1))]
        rep = exact_report(mdp, tables, LossSpec("quadratic", 1.0), DiscountSpec(1.0, 2))
        assert rep.inhom_volatility == pytest.approx(2 * a0 ** 2, abs=1e-12)
        assert rep.homog_volatility == pytest.approx(toy_homog_volatility(a0), abs=1e-12)


# execution

def quiet():
    return execution_env(ExecutionConfig(sigma=0.0))


def test_sell_everything_at_first_step():
    t = rollout(quiet(), FixedActionPolicy([1.0] * 5), np.random.default_rng(0))
    assert t.rewards[0] == -2.5625e6
    assert np.all(t.rewards[1:] == 0.0)


def test_hold_until_forced_liquidation():
    t = rollout(quiet(), FixedActionPolicy([0.0] * 5), np.random.default_rng(0))
    assert np.all(t.rewards[:-1] == 0.0)
    assert t.rewards[-1] == -2.5625e6
    assert t.states[-1, N_COL] == 0.0


def test_even_schedule_by_hand():
    # sell 2e5 shares per step: each trade costs 2e5 * (1/16 + 0.5) and moves the price by -0.05
    env = quiet()
    fracs = [1 / 5, 1 / 4, 1 / 3, 1 / 2, 1.0]
    t = rollout(env, FixedActionPolicy(fracs), np.random.default_rng(0))
    n = 2e5
    remaining = [8e5, 6e5, 4e5, 2e5, 0.0]
    expected = [-n * (1 / 16 + 2.5e-6 * n) - rem * 2.5e-7 * n for rem in remaining]
    assert t.rewards == pytest.approx(expected, rel=1e-12)


def test_rewards_telescope_on_random_actions():
    env = execution_env()
    rng = np.random.default_rng(3)
    for _ in range(5):
        t = rollout(env, FixedActionPolicy(rng.uniform(0, 1, 5)), rng)
        v = env.value(t.states)
        assert t.rewards.sum() == pytest.approx(v[-1] - v[0], rel=1e-12, abs=1e-6)
        assert t.states[-1, N_COL] == 0.0


def test_scaled_env_divides_rewards():
    env = scaled_execution_env(ExecutionConfig(sigma=0.0))
    t = rollout(env, FixedActionPolicy([1.0] * 5), np.random.default_rng(0))
    assert t.rewards[0] == pytest.approx(-2.5625e6 / 5e7, rel=1e-15)
    assert env.solver_beta(1e-6) == pytest.approx(50.0)


@pytest.mark.parametrize("changes", [{"T": 5.5}, {"dt": 2.0}, {"sigma": -1.0}, {"eta": 0.0},
                                     {"min_fraction": 0.5}])
def test_invalid_execution_config_rejected(changes):
    with pytest.raises(ValueError):
        ExecutionConfig(**changes)


# grid

def test_noiseless_step_into_goal():
    env = GridWorld(GridConfig(grid=("xG",), noise_prob=0.0))
    t = rollout(env, FixedActionPolicy([2] * 35, env.action_space), np.random.default_rng(0))
    assert t.rewards.tolist() == [35.0] and t.horizon == 1


def test_noiseless_step_into_boundary_stays_put():
    env = GridWorld(GridConfig(grid=("x.G",), noise_prob=0.0, max_steps=3))
    t = rollout(env, FixedActionPolicy([0, 0, 0], env.action_space), np.random.default_rng(0))
    assert t.rewards.tolist() == [-1.0, -1.0, -1.0]
    assert np.all(t.states == env.start)


def test_noisy_compliance_frequency():
    env = GridWorld()
    s = env.shape[1] * 2 + 3          # interior cell with eight distinct neighbours
    target = env.move(s, 2)
    n = 100_000
    nxt, _ = env.step(np.full(n, s), np.full(n, 2), 0, np.random.default_rng(4))
    freq = np.mean(nxt == target)
    p = 0.92 + 0.08 / 8
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_grid_returns_are_bounded():
    env = GridWorld()
    from inhomvol.policies import TabularSoftmaxPolicy

    b = rollout_batch(env, TabularSoftmaxPolicy.for_mdp(env.tabular()), 3000, np.random.default_rng(5))
    G = b.rewards.sum(axis=1)
    assert G.min() >= -35 - 34 and G.max() <= 35
    assert b.horizons.max() <= 35


@pytest.mark.parametrize("text", ["", "x.\n.", "x.Q\n..G", "..\n.G", "xx\nGG", "x.\n.."])
def test_malformed_grid_rejected(text):
    with pytest.raises(GridFormatError):
        parse_grid(text)


def test_grid_file_round_trip(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("x..\n.RG\n")
    assert load_grid(p) == ("x..", ".RG")


@pytest.mark.parametrize("p", [-0.1, 1.0])
def test_noise_prob_range(p):
    with pytest.raises(ValueError):
        GridConfig(noise_prob=p)


def test_always_east_path():
    env = GridWorld(GridConfig(grid=("x...", "...G")))
    path = most_likely_path(env, FixedActionPolicy([2] * 35, env.action_space))
    # walks to the east wall and then stays there until max_steps
    assert path[:4] == [(0, 0), (0, 1), (0, 2), (0, 3)]
    assert len(path) == 36 and set(path[3:]) == {(0, 3)}


def test_east_path_stops_at_terminal():
    env = GridWorld(GridConfig(grid=("x.R.G",)))
    path = most_likely_path(env, FixedActionPolicy([2] * 35, env.action_space))
    assert path == [(0, 0), (0, 1), (0, 2)]


def test_risk_neutral_path_is_shortest_on_default_grid():
    env = GridWorld()
    vi = value_iteration_modified(env.tabular(), np.zeros(35), LossSpec("none"), DiscountSpec(1.0, 35))
    path = most_likely_path(env, vi.policy)
    assert len(path) - 1 == env.shortest_path_length()
    assert env.kinds[path[-1]] == "goal"


def test_bfs_distances_on_default_grid():
    env = GridWorld()
    assert env.shortest_path_length() == 6
    assert env.shortest_path_length(kind="obstacle") == 1
