"""Game-core tests: regret identity, state accumulation, validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from squint import (
    PerExpertState,
    SharedVarState,
    accumulate,
    instantaneous_regret,
)
from squint.validation import (
    check_epsilon,
    check_loss_vector,
    check_prior,
    check_weight_vector,
)


class TestInstantaneousRegret:
    def test_constant_losses_give_zero(self):
        p = np.full(3, 1.0 / 3.0)
        for c in (0.0, 0.3, 1.0):
            r = instantaneous_regret(p, np.full(3, c))
            assert np.allclose(r, 0.0, atol=1e-15)

    def test_point_mass(self):
        r = instantaneous_regret([1.0, 0.0], [0.0, 1.0])
        assert r == pytest.approx([0.0, -1.0])

    def test_uniform_two_experts(self):
        r = instantaneous_regret([0.5, 0.5], [0.0, 1.0])
        assert r == pytest.approx([0.5, -0.5])

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            instantaneous_regret([0.5, 0.5], [0.0, 1.0, 0.0])

    @given(
        losses=arrays(np.float64, st.integers(1, 8),
                      elements=st.floats(0.0, 1.0)),
        raw=arrays(np.float64, st.integers(1, 8),
                   elements=st.floats(0.01, 1.0)),
    )
    @settings(max_examples=200, deadline=None)
    def test_identity_and_range(self, losses, raw):
        n = min(losses.shape[0], raw.shape[0])
        losses, raw = losses[:n], raw[:n]
        p = raw / raw.sum()
        r = instantaneous_regret(p, losses)
        assert np.abs(r).max() <= 1.0
        assert abs(float(p @ r)) <= 1e-12 * n


class TestAccumulate:
    def test_per_expert_basic(self):
        state = PerExpertState.zeros(2)
        r = np.array([0.5, -0.5])
        new = accumulate(state, r, r * r)
        assert new.regret == pytest.approx([0.5, -0.5])
        assert new.variance == pytest.approx([0.25, 0.25])
        assert new.t == 1
        # original untouched
        assert state.t == 0 and state.regret == pytest.approx([0.0, 0.0])

    def test_shared_basic(self):
        state = SharedVarState.zeros(2)
        new = accumulate(state, np.array([0.5, -0.5]), 0.25)
        assert new.regret == pytest.approx([0.5, -0.5])
        assert new.variance == pytest.approx(0.25)
        assert new.t == 1

    def test_zero_round_only_advances_clock(self):
        state = PerExpertState.zeros(3)
        new = accumulate(state, np.zeros(3), np.zeros(3))
        assert new.t == 1
        assert new.regret == pytest.approx([0.0, 0.0, 0.0])
        assert new.variance == pytest.approx([0.0, 0.0, 0.0])

    def test_kind_mismatch_raises(self):
        with pytest.raises(TypeError):
            accumulate(PerExpertState.zeros(2), np.zeros(2), 0.25)
        with pytest.raises(TypeError):
            accumulate(SharedVarState.zeros(2), np.zeros(2), np.zeros(2))

    def test_bounds_after_many_rounds(self):
        state = SharedVarState.zeros(2)
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = np.array([0.3, 0.7])
            loss = rng.random(2)
            r = instantaneous_regret(p, loss)
            state = accumulate(state, r, float(p @ (r * r)))
        assert np.abs(state.regret).max() <= state.t
        assert state.variance <= state.t


class TestValidation:
    def test_loss_vector_range(self):
        with pytest.raises(ValueError):
            check_loss_vector([0.5, 1.2])
        with pytest.raises(ValueError):
            check_loss_vector([0.5, -0.1])
        with pytest.raises(ValueError):
            check_loss_vector([np.nan, 0.1])

    def test_weight_vector_simplex(self):
        check_weight_vector([0.5, 0.5])
        with pytest.raises(ValueError):
            check_weight_vector([0.6, 0.5])
        with pytest.raises(ValueError):
            check_weight_vector([-0.1, 1.1])

    def test_prior_strictly_positive(self):
        check_prior([0.9, 0.1])
        with pytest.raises(ValueError):
            check_prior([1.0, 0.0])

    def test_epsilon_range(self):
        assert check_epsilon(0.5, 4) == 0.5
        assert check_epsilon(1.0 / 3.0, 3) == pytest.approx(1.0 / 3.0)
        with pytest.raises(ValueError):
            check_epsilon(0.1, 4)
        with pytest.raises(ValueError):
            check_epsilon(1.0, 4)
