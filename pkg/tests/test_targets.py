import numpy as np
import pytest
from hypothesis import given, strategies as st

from inhomvol.losses import KINDS, LossSpec
from inhomvol.mdp import Batch, DiscountSpec, Trajectory
from inhomvol.risk import TargetFitError, fit_target_1d, fit_targets, inhom_penalty, weighted_median

DISC = DiscountSpec(1.0, 10)


def sample(*reward_lists):
    return [Trajectory(np.zeros(len(r) + 1), np.zeros(len(r)), np.asarray(r, float), len(r))
            for r in reward_lists]


def test_quadratic_target_is_sample_mean():
    t = fit_targets(sample([1.0], [3.0]), LossSpec("quadratic", 1.0), DISC)
    assert t.targets.tolist() == [2.0]
    assert t.support_counts.tolist() == [2]


def test_absolute_target_is_sample_median():
    t = fit_targets(sample([0.0], [0.0], [10.0]), LossSpec("absolute", 1.0), DISC)
    assert t.targets.tolist() == [0.0]


def test_even_support_median_averages_middle_pair():
    assert weighted_median([1.0, 2.0, 5.0, 9.0]) == 3.5


def test_exponential_target_matches_grid_scan():
    # brute-force scan of the empirical objective over [-5, 6] at resolution 1e-6
    spec = LossSpec("exponential", 1.0)
    r = np.array([0.0, 1.0])
    t = fit_targets(sample([0.0], [1.0]), spec, DISC).targets[0]
    best, best_t = np.inf, None
    for lo in np.arange(-5.0, 6.0, 0.5):
        grid = lo + 1e-6 * np.arange(500_000)
        vals = spec.evaluate(r[:, None] - grid[None, :]).mean(axis=0)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, best_t = vals[k], grid[k]
    assert abs(t - best_t) <= 1e-6
    # closed form of the exponential OCE target: -log E[exp(-r)]
    assert t == pytest.approx(-np.log(np.mean(np.exp(-r))), abs=1e-10)


@pytest.mark.parametrize("beta", [0.1, 1.0, 3.0])
def test_exponential_target_matches_certainty_equivalent(beta):
    rng = np.random.default_rng(0)
    r = rng.normal(size=200)
    t = fit_target_1d(r, LossSpec("exponential", beta))
    assert t == pytest.approx(-np.log(np.mean(np.exp(-beta * r))) / beta, abs=1e-9)


def test_monotone_stationarity_holds():
    rng = np.random.default_rng(1)
    r = rng.exponential(size=300) - 1.0
    spec = LossSpec("monotone", 2.0)
    t = fit_target_1d(r, spec)
    assert abs(np.mean(spec.derivative(r - t))) <= 1e-9


def test_targets_follow_ragged_horizons():
    t = fit_targets(sample([1.0, 5.0], [3.0]), LossSpec("quadratic", 1.0), DISC)
    assert t.targets.tolist() == [2.0, 5.0]
    assert t.support_counts.tolist() == [2, 1]


def test_single_supporting_episode_gives_zero_penalty():
    s = sample([1.0, 5.0], [3.0])
    spec = LossSpec("quadratic", 1.0)
    t = fit_targets(s, spec, DISC)
    assert t.targets[1] == 5.0
    assert inhom_penalty(s, t, spec, DISC) == pytest.approx(1.0)


def test_zero_support_is_an_error():
    with pytest.raises(TargetFitError):
        fit_target_1d(np.array([]), LossSpec("monotone", 1.0))
    with pytest.raises(TargetFitError):
        fit_target_1d(np.array([1.0, 2.0]), LossSpec("monotone", 1.0), weights=np.zeros(2))
    with pytest.raises(ValueError):
        fit_targets([], LossSpec("quadratic", 1.0), DISC)


def test_weights_equal_duplication():
    spec = LossSpec("monotone", 0.7)
    v = np.array([-1.0, 0.5, 2.0])
    w = np.array([1.0, 2.0, 3.0])
    dup = np.repeat(v, [1, 2, 3])
    assert fit_target_1d(v, spec, w) == pytest.approx(fit_target_1d(dup, spec), abs=1e-12)


@pytest.mark.parametrize("kind", [k for k in KINDS if k != "none"])
@given(values=st.lists(st.floats(-20, 20), min_size=2, max_size=30),
       beta=st.floats(0.05, 2.0), delta=st.sampled_from([1e-2, -1e-2, 1.0, -1.0]))
def test_single_target_perturbation_never_lowers_penalty(kind, values, beta, delta):
    spec = LossSpec(kind, beta)
    v = np.asarray(values)
    t = fit_target_1d(v, spec)
    base = spec.evaluate(v - t).mean()
    assert spec.evaluate(v - t - delta).mean() >= base - 1e-9 * (1 + abs(base))
