"""Tests for the Hedge policy."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import softmax

from banditfield.exceptions import PolicyError
from banditfield.policy import (
    EtaSchedule,
    PolicyParams,
    eta_schedule,
    hedge_probabilities,
    hedge_profile,
    policy_jacobian,
    random_betas,
    sample_arm,
)


def test_constant_state_gives_uniform():
    probs = hedge_probabilities([0.7, 0.7, 0.7, 0.7], PolicyParams(beta=3.0, eta=0.1))
    np.testing.assert_allclose(probs, 0.25, atol=1e-12)


def test_full_exploration_ignores_state():
    probs = hedge_probabilities([1.0, 0.0, 0.3], PolicyParams(beta=10.0, eta=1.0))
    np.testing.assert_allclose(probs, 1 / 3, atol=1e-12)


def test_two_arm_hand_value():
    probs = hedge_probabilities([1.0, 0.0], PolicyParams(beta=0.5, eta=0.2))
    expected = 0.8 * np.exp(0.5) / (np.exp(0.5) + 1.0) + 0.1
    assert probs[0] == pytest.approx(expected, abs=1e-12)
    assert probs[0] == pytest.approx(0.598, abs=1e-3)


def test_large_beta_does_not_overflow():
    probs = hedge_probabilities([1.0, 0.999, 0.0], PolicyParams(beta=5000.0, eta=0.0))
    assert np.all(np.isfinite(probs))
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_non_finite_state_rejected():
    with pytest.raises(PolicyError, match="non-finite"):
        hedge_probabilities([np.nan, 0.0], PolicyParams(beta=1.0))


def test_subset_length_mismatch():
    with pytest.raises(PolicyError, match="arm subset"):
        hedge_probabilities([0.1, 0.2], PolicyParams(beta=1.0, arm_subset=(0, 2, 3)))


@pytest.mark.parametrize(
    ("beta", "eta"),
    [(0.0, 0.1), (-1.0, 0.1), (1.0, -0.1), (1.0, 1.5)],
)
def test_invalid_params(beta: float, eta: float):
    with pytest.raises(PolicyError):
        PolicyParams(beta=beta, eta=eta)


def test_simplex_and_floor_fuzz():
    rng = np.random.default_rng(0)
    for _ in range(200):
        size = int(rng.integers(2, 8))
        params = PolicyParams(beta=float(rng.uniform(0.1, 50)), eta=float(rng.uniform(0, 1)))
        probs = hedge_probabilities(rng.random(size), params)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(probs >= params.eta / size - 1e-15)


def test_shift_invariance():
    rng = np.random.default_rng(1)
    params = PolicyParams(beta=4.0, eta=0.3)
    state = rng.random(5)
    np.testing.assert_allclose(
        hedge_probabilities(state, params),
        hedge_probabilities(state + 0.37, params),
        atol=1e-12,
    )


def test_profile_matches_rows():
    rng = np.random.default_rng(2)
    states = rng.random((3, 4))
    betas = np.array([0.5, 2.0, 7.0])
    etas = np.array([0.0, 0.2, 1.0])
    profile = hedge_profile(states, betas, etas)
    for i in range(3):
        row = hedge_probabilities(states[i], PolicyParams(beta=betas[i], eta=etas[i]))
        np.testing.assert_allclose(profile[i], row, atol=1e-14)


def test_profile_mask_uses_subset():
    states = np.array([[0.9, 0.2, 0.4], [0.1, 0.5, 0.3]])
    mask = np.array([[True, False, True], [True, True, True]])
    profile = hedge_profile(states, np.array([2.0, 2.0]), np.array([0.2, 0.2]), mask)
    assert profile[0, 1] == 0.0
    params = PolicyParams(beta=2.0, eta=0.2, arm_subset=(0, 2))
    expected = hedge_probabilities([0.9, 0.4], params)
    np.testing.assert_allclose(profile[0, [0, 2]], expected, atol=1e-14)
    np.testing.assert_allclose(profile.sum(axis=1), 1.0, atol=1e-12)


class TestSampleArm:
    def test_point_mass(self):
        rng = np.random.default_rng(3)
        assert {sample_arm([1.0, 0.0, 0.0, 0.0], rng) for _ in range(100)} == {0}

    def test_last_arm_point_mass(self):
        rng = np.random.default_rng(3)
        assert {sample_arm([0.0, 0.0, 1.0], rng) for _ in range(100)} == {2}

    def test_uniform_frequencies(self):
        rng = np.random.default_rng(4)
        draws = 20_000
        counts = np.bincount([sample_arm([0.25] * 4, rng) for _ in range(draws)], minlength=4)
        sigma = np.sqrt(0.25 * 0.75 / draws)
        assert np.all(np.abs(counts / draws - 0.25) < 4 * sigma)

    def test_deterministic(self):
        probs = [0.1, 0.6, 0.3]
        rng_a, rng_b = np.random.default_rng(9), np.random.default_rng(9)
        assert [sample_arm(probs, rng_a) for _ in range(50)] == [
            sample_arm(probs, rng_b) for _ in range(50)
        ]

    def test_maps_to_global_arm(self):
        rng = np.random.default_rng(5)
        assert sample_arm([0.0, 1.0], rng, arm_subset=(2, 5)) == 5

    def test_rejects_broken_simplex(self):
        with pytest.raises(PolicyError, match="simplex"):
            sample_arm([0.5, 0.6], np.random.default_rng(0))


class TestJacobian:
    def test_zero_with_full_exploration(self):
        grad = policy_jacobian([0.2, 0.8, 0.5], PolicyParams(beta=3.0, eta=1.0), arm=1)
        np.testing.assert_allclose(grad, 0.0, atol=1e-15)

    def test_sums_to_zero(self):
        grad = policy_jacobian([0.2, 0.8, 0.5, 0.1], PolicyParams(beta=3.0, eta=0.2), arm=2)
        assert grad.sum() == pytest.approx(0.0, abs=1e-12)

    def test_l1_norm(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            state = rng.random(4)
            params = PolicyParams(beta=float(rng.uniform(0.1, 10)), eta=float(rng.random()))
            arm = int(rng.integers(4))
            w = softmax(params.beta * state)[arm]
            expected = 2 * (1 - params.eta) * params.beta * w * (1 - w)
            grad = policy_jacobian(state, params, arm)
            assert np.abs(grad).sum() == pytest.approx(expected, abs=1e-10)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        step = 1e-6
        for _ in range(100):
            state = rng.random(4)
            params = PolicyParams(beta=2.0, eta=0.2)
            arm = int(rng.integers(4))
            numeric = np.empty(4)
            for l in range(4):  # noqa: E741
                up, down = state.copy(), state.copy()
                up[l] += step
                down[l] -= step
                upper = hedge_probabilities(up, params)[arm]
                lower = hedge_probabilities(down, params)[arm]
                numeric[l] = (upper - lower) / (2 * step)
            np.testing.assert_allclose(policy_jacobian(state, params, arm), numeric, atol=1e-6)


class TestEtaSchedule:
    def test_initial_value(self):
        assert eta_schedule(0, 0.2, 1.0) == pytest.approx(0.2)

    def test_hand_value(self):
        assert eta_schedule(3, 0.2, 1.0) == pytest.approx(0.05)

    def test_vanishes(self):
        assert eta_schedule(10**9, 0.2, 1.0) < 1e-6

    def test_per_agent_values(self):
        schedule = EtaSchedule(eta0=(0.2, 0.4), kappa=0.5)
        np.testing.assert_allclose(schedule.at(3), [0.1, 0.2])

    def test_invalid(self):
        with pytest.raises(PolicyError, match="kappa"):
            EtaSchedule(eta0=0.2, kappa=0.0)
        with pytest.raises(PolicyError, match="eta0"):
            EtaSchedule(eta0=1.2)
        with pytest.raises(PolicyError, match="non-negative"):
            eta_schedule(-1, 0.2, 1.0)


def test_random_betas():
    betas = random_betas(5, 0.5, 2.0, np.random.default_rng(8))
    assert len(betas) == 5
    assert all(0.5 <= b <= 2.0 for b in betas)
    with pytest.raises(PolicyError):
        random_betas(3, 0.0, 1.0, np.random.default_rng(8))
