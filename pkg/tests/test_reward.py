"""Tests for the reward families."""

from __future__ import annotations

import numpy as np
import pytest

from banditfield.exceptions import RewardError
from banditfield.reward import (
    RewardSpec,
    general_reward,
    linear_reward,
    lipschitz_constant,
    require_declared,
    reward_vector,
    sample_arm_thetas,
)


def _half_reward(profile):
    return np.full(np.shape(profile), 0.5)


class TestSampleArmThetas:
    def test_zero_theta(self):
        thetas = sample_arm_thetas(0.0, 4, np.random.default_rng(0))
        np.testing.assert_array_equal(thetas, 0.0)

    def test_interval(self):
        thetas = sample_arm_thetas(0.5, 1000, np.random.default_rng(1))
        assert thetas.min() >= 0.4
        assert thetas.max() <= 0.5

    def test_reproducible(self):
        a = sample_arm_thetas(0.5, 4, np.random.default_rng(2))
        b = sample_arm_thetas(0.5, 4, np.random.default_rng(2))
        np.testing.assert_array_equal(a, b)

    def test_negative_theta(self):
        with pytest.raises(RewardError, match="non-negative"):
            sample_arm_thetas(-0.1, 4, np.random.default_rng(0))


class TestScalarRewards:
    def test_general_values(self):
        assert general_reward(0.0, 0.5) == 1.0
        assert general_reward(1.0, 0.5) == pytest.approx(2 / 3)
        assert general_reward(0.25, 0.45) == pytest.approx(1 / 1.1125)
        assert general_reward(0.25, 0.45) == pytest.approx(0.8989, abs=1e-4)

    def test_linear_values(self):
        assert linear_reward(0.0, 0.7) == 1.0
        assert linear_reward(1.0, 1.0) == 0.0
        assert linear_reward(0.5, 0.9) == pytest.approx(0.55)

    def test_fraction_out_of_range(self):
        with pytest.raises(RewardError, match="outside"):
            general_reward(1.1, 0.5)
        with pytest.raises(RewardError, match="outside"):
            linear_reward(-0.01, 0.5)

    def test_rounding_is_tolerated(self):
        assert linear_reward(1.0 + 1e-12, 1.0) == pytest.approx(0.0)

    def test_linear_theta_range(self):
        with pytest.raises(RewardError, match="theta_j"):
            linear_reward(0.5, 1.5)

    def test_range_and_monotonicity_fuzz(self):
        rng = np.random.default_rng(3)
        f = rng.random(10_000)
        g = rng.random(10_000)
        lo, hi = np.minimum(f, g), np.maximum(f, g)
        theta = rng.random(10_000)
        for reward in (general_reward, linear_reward):
            values_lo, values_hi = reward(lo, theta), reward(hi, theta)
            assert np.all((values_lo >= 0) & (values_lo <= 1))
            assert np.all(values_lo >= values_hi)

    def test_lipschitz_quotient_fuzz(self):
        rng = np.random.default_rng(4)
        theta = 0.8
        spec_thetas = rng.uniform(0.8 * theta, theta, 5000)
        f, g = rng.random(5000), rng.random(5000)
        keep = np.abs(f - g) > 1e-6
        for reward in (general_reward, linear_reward):
            quotient = np.abs(reward(f, spec_thetas) - reward(g, spec_thetas)) / np.abs(f - g)
            assert np.all(quotient[keep] <= theta + 1e-9)


class TestRewardVector:
    def test_linear_zero_theta_is_one(self):
        spec = RewardSpec(kind="linear", theta=0.0, arm_thetas=(0.0, 0.0, 0.0))
        np.testing.assert_allclose(reward_vector(spec, [0.2, 0.3, 0.5]), 1.0)

    def test_general_uniform_profile(self):
        spec = RewardSpec(kind="general", theta=0.5, arm_thetas=(0.5,) * 4)
        np.testing.assert_allclose(reward_vector(spec, [0.25] * 4), 1 / 1.125)

    def test_unsampled_thetas_use_base(self):
        spec = RewardSpec(kind="linear", theta=0.8)
        np.testing.assert_allclose(reward_vector(spec, [1.0, 0.0]), [0.2, 1.0])

    def test_selected_arms(self):
        spec = RewardSpec(kind="linear", theta=1.0, arm_thetas=(1.0, 0.9, 0.8))
        np.testing.assert_allclose(reward_vector(spec, [0.5, 0.5, 0.0], arms=[2, 1]), [1.0, 0.55])

    def test_batched_profiles(self):
        spec = RewardSpec(kind="general", theta=0.5, arm_thetas=(0.5, 0.4))
        profiles = np.array([[1.0, 0.0], [0.5, 0.5]])
        expected = [[1 / 1.5, 1.0], [1 / 1.25, 1 / 1.2]]
        np.testing.assert_allclose(reward_vector(spec, profiles), expected)

    def test_custom_callable(self):
        spec = RewardSpec(kind="custom", custom=_half_reward)
        np.testing.assert_allclose(reward_vector(spec, [0.1, 0.9]), 0.5)

    def test_custom_import_path(self):
        spec = RewardSpec(kind="custom", custom="numpy.ones_like")
        np.testing.assert_allclose(reward_vector(spec, [0.1, 0.9]), 1.0)

    def test_custom_bad_import_path(self):
        spec = RewardSpec(kind="custom", custom="numpy.no_such_reward")
        with pytest.raises(RewardError, match="Failed to import"):
            reward_vector(spec, [0.5, 0.5])

    def test_wrong_theta_count(self):
        spec = RewardSpec(kind="general", theta=0.5, arm_thetas=(0.5, 0.5))
        with pytest.raises(RewardError, match="Expected 3 arm thetas"):
            reward_vector(spec, [0.2, 0.3, 0.5])


class TestRewardSpec:
    def test_unknown_kind(self):
        with pytest.raises(RewardError, match="Unknown reward kind"):
            RewardSpec(kind="quadratic")  # type: ignore[arg-type]

    def test_custom_needs_function(self):
        with pytest.raises(RewardError, match="callable or import path"):
            RewardSpec(kind="custom")

    def test_depends_on(self):
        assert RewardSpec().depends_on == "own-arm-fraction"
        spec = RewardSpec(kind="custom", custom=_half_reward, reads_full_profile=True)
        assert spec.depends_on == "full-profile"

    def test_dict_round_trip(self):
        spec = RewardSpec(kind="linear", theta=1.0, arm_thetas=(0.9, 1.0))
        assert RewardSpec.from_dict(spec.to_dict()) == spec

    def test_from_dict_unknown_key(self):
        with pytest.raises(RewardError, match="Unknown reward_spec keys"):
            RewardSpec.from_dict({"kind": "general", "gamma": 1})

    def test_callable_not_serializable(self):
        with pytest.raises(RewardError, match="import path"):
            RewardSpec(kind="custom", custom=_half_reward).to_dict()


class TestLipschitz:
    @pytest.mark.parametrize(
        ("kind", "theta"),
        [("linear", 1.0), ("general", 0.5), ("general", 0.0)],
    )
    def test_builtin(self, kind, theta):
        assert lipschitz_constant(RewardSpec(kind=kind, theta=theta)) == theta

    def test_custom_needs_declaration(self):
        spec = RewardSpec(kind="custom", custom=_half_reward)
        with pytest.raises(RewardError, match="Lipschitz"):
            lipschitz_constant(spec)

    def test_custom_declared(self):
        spec = RewardSpec(kind="custom", custom=_half_reward, lipschitz=0.0)
        assert lipschitz_constant(spec) == 0.0

    def test_require_declared_range(self):
        spec = RewardSpec(kind="custom", custom=_half_reward, lipschitz=0.0)
        with pytest.raises(RewardError, match="output range"):
            require_declared(spec)
        with pytest.raises(RewardError, match="not within"):
            require_declared(
                RewardSpec(
                    kind="custom", custom=_half_reward, lipschitz=0.0, output_range=(0.0, 2.0)
                )
            )
        require_declared(
            RewardSpec(kind="custom", custom=_half_reward, lipschitz=0.0, output_range=(0.5, 0.5))
        )
