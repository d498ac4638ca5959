import numpy as np
import pytest

from inhomvol.policies import (DeterministicTabularPolicy, FixedActionPolicy, GaussianPolicy,
                               TabularSoftmaxPolicy, step_onehot)


def fd_scores(policy, states, actions, step, h=1e-6):
    theta = policy.params
    out = np.zeros((len(states), policy.dim))
    for k in range(policy.dim):
        e = np.zeros_like(theta)
        e[k] = h
        out[:, k] = (policy.log_prob(states, actions, step, theta + e)
                     - policy.log_prob(states, actions, step, theta - e)) / (2 * h)
    return out


def test_softmax_probabilities_normalise():
    rng = np.random.default_rng(0)
    pol = TabularSoftmaxPolicy((3, 2), 4, rng.normal(scale=5, size=20))
    for step, n in ((0, 3), (1, 2)):
        p = pol.probs(np.arange(n), step)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-15) and np.all(p >= 0)


def test_softmax_score_matches_finite_differences():
    rng = np.random.default_rng(1)
    pol = TabularSoftmaxPolicy((3, 2), 3, rng.normal(size=15))
    for step, n in ((0, 3), (1, 2)):
        s = rng.integers(0, n, 20)
        a = rng.integers(0, 3, 20)
        g = pol.grad_log_prob(s, a, step)
        assert np.max(np.abs(g - fd_scores(pol, s, a, step))) <= 1e-5
        coef = rng.normal(size=20)
        assert np.allclose(pol.weighted_score(s, a, step, coef), coef @ g, atol=1e-12)


def test_softmax_parameter_count_checked():
    with pytest.raises(ValueError):
        TabularSoftmaxPolicy((2,), 2, np.zeros(3))


def test_softmax_sampling_frequencies():
    pol = TabularSoftmaxPolicy((1,), 3, np.log([0.2, 0.3, 0.5]))
    a = pol.sample(np.zeros(60_000, dtype=int), 0, np.random.default_rng(2))
    freq = np.bincount(a, minlength=3) / len(a)
    assert np.all(np.abs(freq - [0.2, 0.3, 0.5]) <= 3 * np.sqrt(0.25 / len(a)))


@pytest.mark.parametrize("bounds", [None, (0.0, 1.0), (-0.5, 1.0)])
def test_gaussian_score_matches_finite_differences(bounds):
    rng = np.random.default_rng(3)
    pol = GaussianPolicy(step_onehot(3), log_std=-0.4, bounds=bounds, mean_init=[0.2, -0.7, 1.1])
    states = np.zeros((25, 1))
    for step in range(3):
        a = pol.sample(states, step, rng)
        g = pol.grad_log_prob(states, a, step)
        fd = fd_scores(pol, states, a, step)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.abs(g).max())


def test_bounded_gaussian_stays_in_bounds():
    pol = GaussianPolicy(step_onehot(1), log_std=1.5, bounds=(0.0, 1.0))
    a = pol.sample(np.zeros((5000, 1)), 0, np.random.default_rng(4))
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert pol.mode(np.zeros((1, 1)), 0)[0] == 0.5


def test_gaussian_log_std_is_clipped():
    pol = GaussianPolicy(step_onehot(1), log_std_bounds=(-1.0, 0.5))
    pol.set_params([0.0, -9.0])
    assert pol.params[-1] == -1.0


def test_deterministic_policy_tables():
    pol = DeterministicTabularPolicy([np.array([2, 0])], 3)
    assert pol.probs(np.array([0, 1]), 0).tolist() == [[0, 0, 1], [1, 0, 0]]
    assert pol.sample(np.array([1]), 0, None).tolist() == [0]


def test_fixed_action_repeats_last_value():
    pol = FixedActionPolicy([0.1, 0.2])
    assert pol.mode(np.zeros(2), 5).tolist() == [0.2, 0.2]
