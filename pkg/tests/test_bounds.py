import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_kaczmarz.bounds import (BoundReport, compute_gamma, empirical_one_step,
                                   exact_one_step, markov_sigma_bound, multiplicative_report,
                                   one_step_error_sq, perturbation_check, greedy_weight,
                                   greedy_weight_lower, sigma_min_tilde,
                                   smallest_positive_singular_value, theorem1_report,
                                   theorem2_report, total_noise_level, weyl_gap)
from noisy_kaczmarz.errors import ContractError, DomainError
from noisy_kaczmarz.matrix import RowMatrix
from noisy_kaczmarz.noise import (GroundTruth, NoiseSpec, draw_measurement,
                                  generate_gaussian_ground_truth, multiplicative_system)
from noisy_kaczmarz.solvers import kaczmarz_step


def _gamma_oracle(D):
    m = D.shape[0]
    best = 0.0
    for i in range(m):
        total = 0.0
        for j in range(m):
            if j != i:
                total += sum(v * v for v in D[j])
        best = max(best, total)
    return best


def _sigma_tilde_oracle(D):
    best = math.inf
    for size in range(1, D.shape[0] + 1):
        for rows in itertools.combinations(range(D.shape[0]), size):
            sub = D[list(rows)]
            k = np.linalg.matrix_rank(sub)
            if k == 0:
                continue
            best = min(best, np.linalg.svd(sub, compute_uv=False)[k - 1])
    return best


class TestGamma:
    def test_examples(self):
        assert compute_gamma(RowMatrix.from_dense(np.eye(4))) == 3.0
        assert compute_gamma(RowMatrix.from_dense([[1.0, 0.0], [0.0, 2.0]])) == 4.0
        assert compute_gamma(RowMatrix.from_dense([[3.0, 4.0]])) == 0.0

    def test_zero_matrix(self):
        A = RowMatrix.from_dense(np.zeros((2, 2)), allow_zero_rows=True)
        with pytest.raises(ContractError):
            compute_gamma(A)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_matches_loop(self, m, n, seed):
        D = np.random.default_rng(seed).standard_normal((m, n)) + 0.1
        np.testing.assert_allclose(compute_gamma(RowMatrix.from_dense(D)), _gamma_oracle(D),
                                   rtol=1e-12, atol=1e-14)


class TestSigmaMinTilde:
    def test_identity(self):
        assert sigma_min_tilde(RowMatrix.from_dense(np.eye(2))) == (1.0, True)

    def test_diagonal(self):
        v, exact = sigma_min_tilde(RowMatrix.from_dense(np.diag([2.0, 3.0])))
        assert exact and v == pytest.approx(2.0, rel=1e-14)

    def test_rank_deficient_pair(self):
        # rows (1,0), (1,0.1): the full pair has the smallest positive value
        D = np.array([[1.0, 0.0], [1.0, 0.1]])
        v, _ = sigma_min_tilde(RowMatrix.from_dense(D))
        assert v == pytest.approx(np.linalg.svd(D, compute_uv=False)[-1], rel=1e-12)

    def test_parallel_rows_skip_zero_values(self):
        D = np.array([[1.0, 1.0], [2.0, 2.0], [0.0, 1.0]])
        v, _ = sigma_min_tilde(RowMatrix.from_dense(D))
        assert v == pytest.approx(_sigma_tilde_oracle(D), rel=1e-12)
        assert v > 0.1

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_subset_oracle(self, seed):
        D = np.random.default_rng(seed).standard_normal((5, 3))
        v, exact = sigma_min_tilde(RowMatrix.from_dense(D))
        assert exact
        np.testing.assert_allclose(v, _sigma_tilde_oracle(D), rtol=1e-12)

    def test_sparse_input(self):
        D = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.0, 1.0], [0.0, 0.0, 3.0]])
        import scipy.sparse as sp
        v, _ = sigma_min_tilde(RowMatrix.from_scipy(sp.csr_matrix(D)))
        np.testing.assert_allclose(v, _sigma_tilde_oracle(D), rtol=1e-12)

    def test_surrogate_for_large(self):
        D = np.random.default_rng(0).standard_normal((20, 4))
        v, exact = sigma_min_tilde(RowMatrix.from_dense(D), max_rows=12)
        assert not exact
        np.testing.assert_allclose(v, np.linalg.svd(D, compute_uv=False)[-1], rtol=1e-12)

    def test_never_above_full_matrix_value(self):
        for seed in range(5):
            D = np.random.default_rng(seed).standard_normal((6, 3))
            v, _ = sigma_min_tilde(RowMatrix.from_dense(D))
            assert v <= smallest_positive_singular_value(D) * (1 + 1e-12)

    def test_smallest_positive_of_zero(self):
        assert smallest_positive_singular_value(np.zeros((2, 2))) == 0.0


class TestAdditiveReport:
    def _noisy(self, seed=0):
        gt = generate_gaussian_ground_truth(8, 3, seed)
        Ad, bt = draw_measurement(gt, NoiseSpec(sigma_e=0.05, sigma_eps=0.05, seed=seed), 1)
        At = RowMatrix.from_dense(Ad)
        E = Ad - gt.A.to_dense()
        return gt, At, E, bt - gt.b

    def test_zero_noise_zero_horizon(self):
        gt = generate_gaussian_ground_truth(8, 3, 1)
        rep = theorem1_report(gt.A, gt, np.zeros((8, 3)), np.zeros(8), theta=0.5)
        assert rep.horizon == 0.0 and rep.horizon_per_n == 0.0

    def test_values_against_direct_formula(self):
        gt, At, E, eps = self._noisy()
        rep = theorem1_report(At, gt, E, eps, theta=0.7, N=4)
        D = At.to_dense()
        F2 = float((D * D).sum())
        g = _gamma_oracle(D)
        s2 = _sigma_tilde_oracle(D) ** 2
        num = float(np.sum((E @ gt.xhat - eps) ** 2))
        np.testing.assert_allclose(rep.gamma, g, rtol=1e-12)
        np.testing.assert_allclose(rep.contraction_first_step, 1 - s2 / F2, rtol=1e-12)
        np.testing.assert_allclose(rep.contraction_steady,
                                   1 - (0.7 * F2 / g + 0.3) * s2 / F2, rtol=1e-12)
        np.testing.assert_allclose(rep.horizon, num / (math.sqrt(F2) - g / math.sqrt(F2)) ** 2,
                                   rtol=1e-12)
        assert rep.horizon_per_n == pytest.approx(rep.horizon / 4, rel=1e-15)
        assert rep.N == 4 and rep.theta == 0.7

    def test_contraction_ordering(self):
        gt, At, E, eps = self._noisy(2)
        steady = [theorem1_report(At, gt, E, eps, theta=t).contraction_steady
                  for t in (0.0, 0.25, 0.5, 1.0)]
        first = theorem1_report(At, gt, E, eps, theta=0.0).contraction_first_step
        assert steady[0] == pytest.approx(first, rel=1e-15)
        assert all(a > b for a, b in zip(steady, steady[1:]))
        assert all(0.0 <= s < 1.0 for s in steady)

    def test_single_row(self):
        gt = GroundTruth.from_matrix(RowMatrix.from_dense([[1.0, 2.0]]), [1.0, 1.0])
        rep = theorem1_report(gt.A, gt, np.zeros((1, 2)), [0.0], theta=1.0)
        assert rep.gamma == 0.0 and rep.contraction_steady == -math.inf

    def test_report_fields(self):
        gt, At, E, eps = self._noisy()
        rep = theorem1_report(At, gt, E, eps, theta=1.0)
        assert list(rep.as_dict()) == BoundReport.field_names()

    def test_shape_and_theta_checks(self):
        gt, At, E, eps = self._noisy()
        with pytest.raises(ContractError):
            theorem1_report(At, gt, E, eps, theta=1.5)
        with pytest.raises(ContractError):
            theorem1_report(At, gt, E[:, :2], eps, theta=0.5)
        with pytest.raises(ContractError):
            theorem1_report(At, gt, E, eps, theta=0.5, N=0)


class TestUnitRowReport:
    def test_frozen_values(self):
        rep = theorem2_report(m=4, theta=1.0, N=2, sigma_e=0.5, sigma_eps=0.1,
                              xhat_norm_sq=3.0, sigma_tilde_sq_mean=0.4)
        # gamma 3, sqrt(m) - gamma/sqrt(m) = 1/2
        assert rep.gamma == 3.0 and rep.frob_sq == 4.0
        np.testing.assert_allclose(rep.horizon, (0.25 * 3.0 + 0.01) / 0.25, rtol=1e-14)
        np.testing.assert_allclose(rep.horizon_per_n, 1.52, rtol=1e-14)
        np.testing.assert_allclose(rep.contraction_steady, 1 - (4 / 3) * 0.1, rtol=1e-14)
        np.testing.assert_allclose(rep.contraction_first_step, 0.9, rtol=1e-14)
        assert math.isnan(rep.sigma_min)

    def test_horizon_scales_as_one_over_n(self):
        hs = [theorem2_report(50, 0.5, N, 1.0, 0.1, 2.0, 0.1).horizon_per_n
              for N in (1, 10, 100)]
        np.testing.assert_allclose(hs[0] / hs[1], 10, rtol=1e-13)
        np.testing.assert_allclose(hs[1] / hs[2], 10, rtol=1e-13)

    def test_zero_noise(self):
        assert theorem2_report(5, 1.0, 3, 0.0, 0.0, 1.0, 0.2).horizon == 0.0

    def test_needs_two_rows(self):
        with pytest.raises(ContractError):
            theorem2_report(1, 1.0, 1, 0.1, 0.1, 1.0, 0.1)

    def test_rejects_negative_inputs(self):
        with pytest.raises(ContractError):
            theorem2_report(5, 1.0, 1, -0.1, 0.1, 1.0, 0.1)

    def test_total_noise_level(self):
        assert total_noise_level(0.01, 400, 200) == pytest.approx(0.01 * math.sqrt(80000))
        assert total_noise_level(0.5, 4) == 1.0
        with pytest.raises(ContractError):
            total_noise_level(-1.0, 3)


class TestMarkov:
    def test_value(self):
        assert markov_sigma_bound(1.0, 0.5, 2) == 0.125

    def test_noiseless(self):
        assert markov_sigma_bound(2.0, 0.0, 1) == 2.0

    def test_domain(self):
        with pytest.raises(DomainError, match="sigma_min"):
            markov_sigma_bound(1.0, 1.0, 2)
        with pytest.raises(DomainError):
            markov_sigma_bound(1.0, 5.0, 3)

    def test_large_n_limit(self):
        np.testing.assert_allclose(markov_sigma_bound(1.5, 0.3, 10**12), 1.125, rtol=1e-6)

    def test_bad_inputs(self):
        with pytest.raises(ContractError):
            markov_sigma_bound(1.0, 0.1, 0)


class TestMultiplicative:
    def test_column_factor_only_matches_additive(self):
        gt = generate_gaussian_ground_truth(6, 3, 0)
        F = 0.05 * np.random.default_rng(1).standard_normal((3, 3))
        At, pert = multiplicative_system(gt, np.zeros((6, 6)), F)
        eps = 0.01 * np.ones(6)
        mult = multiplicative_report(At, gt, pert, eps, theta=0.5)
        add = theorem1_report(At, gt, gt.A.to_dense() @ F, eps, theta=0.5)
        assert mult.gamma == add.gamma
        np.testing.assert_allclose(mult.horizon, add.horizon, rtol=1e-12)

    def test_numerator_is_perturbation_times_solution(self):
        gt = generate_gaussian_ground_truth(6, 3, 2)
        rng = np.random.default_rng(3)
        E, F = 0.05 * rng.standard_normal((6, 6)), 0.05 * rng.standard_normal((3, 3))
        At, pert = multiplicative_system(gt, E, F)
        eps = rng.standard_normal(6) * 0.01
        rep = multiplicative_report(At, gt, pert, eps, theta=1.0)
        A = gt.A.to_dense()
        dA = E @ A + A @ F + E @ A @ F
        num = float(np.sum((dA @ gt.xhat - eps) ** 2))
        D = At.to_dense()
        F2 = float((D * D).sum())
        g = _gamma_oracle(D)
        np.testing.assert_allclose(rep.horizon, num / (math.sqrt(F2) - g / math.sqrt(F2)) ** 2,
                                   rtol=1e-10)


class TestPerturbation:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 2**32 - 1),
           st.floats(1e-6, 10.0))
    def test_weyl(self, m, n, seed, scale):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((m, n))
        B = A + scale * rng.standard_normal((m, n))
        assert weyl_gap(A, B) >= -1e-12 * (1 + np.linalg.norm(A, 2) + np.linalg.norm(B, 2))

    def test_identical(self):
        A = np.random.default_rng(0).standard_normal((4, 3))
        assert perturbation_check(A, A) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            perturbation_check(np.eye(2), np.eye(3))


class TestGreedyWeight:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 5), st.integers(0, 2**32 - 1),
           st.floats(0.0, 1.0))
    def test_lower_bounds(self, m, n, seed, theta):
        rng = np.random.default_rng(seed)
        A = RowMatrix.from_dense(rng.standard_normal((m, n)) + 0.05)
        r = rng.standard_normal(m)
        assert greedy_weight(r, A, theta) >= greedy_weight_lower(A, theta, True) * (1 - 1e-12)
        # after a projection the previously selected residual entry is zero
        r[int(rng.integers(m))] = 0.0
        if np.any(r):
            assert greedy_weight(r, A, theta) >= greedy_weight_lower(A, theta) * (1 - 1e-12)

    def test_zero_residual(self):
        assert math.isnan(greedy_weight(np.zeros(2), RowMatrix.from_dense(np.eye(2)), 0.5))

    def test_lower_bound_values(self):
        A = RowMatrix.from_dense(np.eye(4))
        assert greedy_weight_lower(A, 1.0) == pytest.approx(1 / 3)
        assert greedy_weight_lower(A, 0.0) == 0.25
        assert greedy_weight_lower(A, 0.5, first_step=True) == 0.25


class TestOneStep:
    def test_one_step_matches_projection(self):
        gt = generate_gaussian_ground_truth(7, 3, 0)
        x = np.random.default_rng(1).standard_normal(3)
        for i in range(7):
            d = kaczmarz_step(x, gt.A, gt.b, i) - gt.xhat
            np.testing.assert_allclose(one_step_error_sq(x, gt.A, gt.b, gt.xhat, i), d @ d,
                                       rtol=1e-12)

    def test_monte_carlo_matches_exact_sum(self):
        gt = generate_gaussian_ground_truth(12, 4, 3)
        Ad, bt = draw_measurement(gt, NoiseSpec(sigma_e=0.1, sigma_eps=0.1, seed=1), 1)
        At = RowMatrix.from_dense(Ad)
        x = np.random.default_rng(2).standard_normal(4)
        for theta in (0.0, 0.5, 1.0):
            exact = exact_one_step(At, bt, x, gt.xhat, theta)
            mean, se = empirical_one_step(At, bt, x, gt.xhat, theta, 20000,
                                          np.random.default_rng(4))
            assert abs(mean - exact) <= 5 * se + 1e-12

    def test_needs_two_samples(self):
        gt = generate_gaussian_ground_truth(3, 2, 0)
        with pytest.raises(ContractError):
            empirical_one_step(gt.A, gt.b, np.ones(2), gt.xhat, 0.5, 1, np.random.default_rng())
