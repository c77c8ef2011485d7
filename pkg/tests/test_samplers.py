import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from noisy_kaczmarz.errors import ContractError, InvariantError
from noisy_kaczmarz.matrix import RowMatrix
from noisy_kaczmarz.samplers import (MEMBERSHIP_RTOL, SamplerKind, compute_mu, greedy_set,
                                     normalized_residuals, relaxed_greedy_state,
                                     sample_greedy, sample_norm_squared, sample_uniform)

UNIT2 = RowMatrix.from_dense(np.eye(2))
UNIT3 = RowMatrix.from_dense(np.eye(3))


class TestComputeMu:
    def test_theta_zero_is_mean(self, rng):
        A = RowMatrix.from_dense(rng.standard_normal((6, 3)))
        r = rng.standard_normal(6)
        assert compute_mu(r, A, 0.0) == float(r @ r) / A.frob_sq

    def test_theta_one_is_max(self, rng):
        A = RowMatrix.from_dense(rng.standard_normal((6, 3)))
        r = rng.standard_normal(6)
        assert compute_mu(r, A, 1.0) == np.max(r * r / A.row_norm_sq)

    def test_hand_value(self):
        assert compute_mu([1.0, 2.0], UNIT2, 0.5) == pytest.approx(3.25, rel=1e-15)

    @pytest.mark.parametrize("theta", [-0.1, 1.5, np.nan])
    def test_theta_out_of_range(self, theta):
        with pytest.raises(ContractError):
            compute_mu([1.0, 2.0], UNIT2, theta)

    def test_residual_shape_checked(self):
        with pytest.raises(ContractError):
            compute_mu([1.0, 2.0, 3.0], UNIT2, 0.5)


class TestGreedySet:
    def test_theta_one_gives_argmax_rows(self):
        r = np.array([3.0, -1.0, -3.0])
        st_ = relaxed_greedy_state(r, UNIT3, 1.0)
        assert st_.candidate_set == [0, 2]

    def test_equal_residuals_give_all_rows(self):
        r = np.array([2.0, -2.0, 2.0])
        for theta in (0.0, 0.3, 1.0):
            assert relaxed_greedy_state(r, UNIT3, theta).candidate_set == [0, 1, 2]

    def test_hand_value(self):
        r = np.array([1.0, 2.0, 3.0])
        mu = compute_mu(r, UNIT3, 0.5)
        assert mu == pytest.approx(0.5 * 9 + 0.5 * 14 / 3, rel=1e-15)
        assert mu == pytest.approx(6.8333333333, abs=1e-9)
        state = greedy_set(r, UNIT3, mu, 0.5)
        assert state.candidate_set == [2]
        np.testing.assert_array_equal(state.restricted_residual, [0.0, 0.0, 3.0])

    def test_empty_set_is_invariant_error(self):
        with pytest.raises(InvariantError):
            greedy_set([1.0, 1.0], UNIT2, 10.0)

    def test_rounding_slack_keeps_argmax(self):
        r = np.array([1.0, 0.5])
        ratio_max = normalized_residuals(r, UNIT2).max()
        state = greedy_set(r, UNIT2, ratio_max * (1 + 0.5 * MEMBERSHIP_RTOL))
        assert state.candidate_set == [0]


class TestSampleGreedy:
    def test_singleton(self, rng):
        state = relaxed_greedy_state(np.array([0.0, 5.0, 1.0]), UNIT3, 1.0)
        assert {sample_greedy(state, rng) for _ in range(50)} == {1}

    def test_squared_residual_law(self):
        # ratios 1:2 -> probabilities 1/5 and 4/5
        state = greedy_set(np.array([1.0, 2.0]), UNIT2, 0.5)
        assert state.candidate_set == [0, 1]
        rng = np.random.default_rng(1)
        draws = np.array([sample_greedy(state, rng) for _ in range(100_000)])
        assert abs(np.mean(draws == 0) - 0.2) <= 0.02
        assert abs(np.mean(draws == 1) - 0.8) <= 0.02

    def test_consumes_one_uniform(self):
        state = relaxed_greedy_state(np.array([1.0, 2.0, 1.5]), UNIT3, 0.0)
        a, b = np.random.default_rng(5), np.random.default_rng(5)
        sample_greedy(state, a)
        b.random()
        assert a.random() == b.random()

    def test_maximal_correction_deterministic(self):
        state = relaxed_greedy_state(np.array([3.0, 1.0, -3.0]), UNIT3, 1.0)
        rng = np.random.default_rng(5)
        before = rng.bit_generator.state
        assert sample_greedy(state, rng, deterministic=True) == 0
        assert rng.bit_generator.state == before

    def test_explicit_uniform(self):
        state = greedy_set(np.array([1.0, 2.0]), UNIT2, 0.5)
        assert sample_greedy(state, u=0.19) == 0
        assert sample_greedy(state, u=0.21) == 1


class TestSampleNormSquared:
    def test_equal_norms_uniform(self):
        A = RowMatrix.from_dense(np.eye(10))
        rng = np.random.default_rng(2)
        draws = np.array([sample_norm_squared(A, rng) for _ in range(100_000)])
        freq = np.bincount(draws, minlength=10) / draws.size
        np.testing.assert_allclose(freq, 0.1, atol=0.01)

    def test_norm_law(self):
        A = RowMatrix.from_dense([[1.0, 0.0], [0.0, np.sqrt(3.0)]])
        rng = np.random.default_rng(3)
        draws = np.array([sample_norm_squared(A, rng) for _ in range(100_000)])
        assert abs(np.mean(draws == 0) - 0.25) <= 0.02

    def test_single_row(self, rng):
        A = RowMatrix.from_dense([[1.0, 2.0]])
        assert {sample_norm_squared(A, rng) for _ in range(20)} == {0}

    def test_zero_matrix(self, rng):
        with pytest.raises(ContractError):
            sample_norm_squared(RowMatrix.from_dense(np.zeros((2, 2)), allow_zero_rows=True), rng)

    def test_uniform_sampler_range(self):
        A = RowMatrix.from_dense(np.eye(4))
        assert sample_uniform(A, u=0.0) == 0
        assert sample_uniform(A, u=np.nextafter(1.0, 0.0)) == 3

    def test_kinds(self):
        assert {k.value for k in SamplerKind} == {"uniform", "norm_squared", "relaxed_greedy",
                                                   "maximal_correction"}


finite = st.floats(-1e6, 1e6, allow_nan=False, width=64)


@st.composite
def systems(draw):
    m = draw(st.integers(1, 10))
    n = draw(st.integers(1, 5))
    D = draw(arrays(np.float64, (m, n), elements=st.floats(-10, 10, width=64)))
    D[np.abs(D).sum(axis=1) == 0, 0] = 1.0
    D[np.abs(D).max(axis=1) < 1e-3, 0] = 1.0
    r = draw(arrays(np.float64, (m,), elements=finite))
    return RowMatrix.from_dense(D), r


class TestProperties:
    @settings(max_examples=100, deadline=None)
    @given(systems(), st.floats(0.0, 1.0))
    def test_mu_at_least_mean(self, sysr, theta):
        A, r = sysr
        assert compute_mu(r, A, theta) >= float(r @ r) / A.frob_sq * (1 - 1e-14)

    @settings(max_examples=100, deadline=None)
    @given(systems())
    def test_mu_monotone_in_theta(self, sysr):
        A, r = sysr
        mus = [compute_mu(r, A, t) for t in np.linspace(0.0, 1.0, 11)]
        scale = max(abs(mus[-1]), 1e-300)
        assert all(b >= a - 1e-14 * scale for a, b in zip(mus, mus[1:]))

    @settings(max_examples=100, deadline=None)
    @given(systems(), st.floats(0.0, 1.0))
    def test_candidate_set_valid(self, sysr, theta):
        A, r = sysr
        if not np.any(r):
            return
        state = relaxed_greedy_state(r, A, theta)
        assert state.candidates.size >= 1
        ratio = r * r / A.row_norm_sq
        assert np.all(ratio[state.candidates] >= state.mu - 1e-12 * state.mu)
        outside = np.setdiff1d(np.arange(A.m), state.candidates)
        assert np.all(state.restricted_residual[outside] == 0.0)
        assert int(np.argmax(ratio)) in state.candidate_set
