import math

import numpy as np
import pytest

from subnyq.numerics import (
    SingularityError,
    binary_entropy,
    det_floor,
    log_binomial,
    logdet_shifted,
    minimax_limit,
    rect_logdet_limit,
    spectral_decomp,
    whiten,
)


class TestWhiten:
    def test_orthonormal_rows_fixed_point(self, gen):
        q, _ = np.linalg.qr(gen.standard_normal((6, 3)))
        q = q.T  # 3 x 6 with orthonormal rows
        np.testing.assert_allclose(whiten(q), q, atol=1e-12)

    def test_scaled_identity_padded(self):
        q = np.hstack([3.25 * np.eye(3), np.zeros((3, 4))])
        expected = np.hstack([np.eye(3), np.zeros((3, 4))])
        np.testing.assert_allclose(whiten(q), expected, atol=1e-12)

    def test_random_rows_become_orthonormal(self, gen):
        q = gen.standard_normal((2, 5))
        w = whiten(q)
        np.testing.assert_allclose(w @ w.T, np.eye(2), atol=1e-10)

    def test_row_space_preserved(self, gen):
        q = gen.standard_normal((3, 7))
        w = whiten(q)
        # every row of w must be a combination of rows of q
        coeffs, residuals, *_ = np.linalg.lstsq(q.T, w.T, rcond=None)
        np.testing.assert_allclose(q.T @ coeffs, w.T, atol=1e-10)

    def test_idempotent(self, gen):
        for _ in range(5):
            q = gen.standard_normal((4, 9))
            w = whiten(q)
            np.testing.assert_allclose(whiten(w), w, atol=1e-9)

    def test_ill_conditioned_stays_accurate(self):
        # near-parallel rows: condition number ~1e8
        base = np.array([[1.0, 0.0, 0.0, 0.0], [1.0, 1e-4, 0.0, 0.0]])
        w = whiten(base)
        np.testing.assert_allclose(w @ w.T, np.eye(2), atol=1e-10)

    def test_rank_deficient_raises(self):
        with pytest.raises(SingularityError):
            whiten(np.zeros((2, 4)))
        with pytest.raises(SingularityError):
            whiten(np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]]))


class TestLogdetShifted:
    def test_identity(self):
        assert logdet_shifted(np.eye(3), 0.0) == pytest.approx(0.0, abs=1e-14)

    def test_zero_matrix(self):
        assert logdet_shifted(np.zeros((2, 2)), 0.5) == pytest.approx(2 * math.log(0.5))

    def test_diagonal(self):
        val = logdet_shifted(np.diag([1.0, 4.0]), 0.01)
        assert val == pytest.approx(math.log(1.01) + math.log(4.01))

    def test_eps_zero_singular_raises(self):
        with pytest.raises(ValueError):
            logdet_shifted(np.zeros((2, 2)), 0.0)

    def test_monotone_in_eps(self, gen):
        x = gen.standard_normal((5, 5))
        s = x @ x.T
        vals = [logdet_shifted(s, e) for e in (0.0, 1e-3, 0.1, 1.0, 5.0)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_one_over_lambda_min_bound(self, gen):
        for _ in range(10):
            x = gen.standard_normal((4, 7))
            s = x @ x.T  # full rank almost surely
            k = s.shape[0]
            gap = (logdet_shifted(s, 1.0) - logdet_shifted(s, 0.0)) / k
            lam_min = np.linalg.eigvalsh(s)[0]
            assert 0.0 <= gap <= 1.0 / lam_min + 1e-12

    def test_tall_wide_identity(self, gen):
        for _ in range(10):
            m, k = 8, 3
            x = gen.standard_normal((m, k))
            eps = float(gen.uniform(0.05, 2.0))
            lhs = logdet_shifted(x.T @ x, eps)
            rhs = (k - m) * math.log(eps) + logdet_shifted(x @ x.T, eps)
            assert lhs == pytest.approx(rhs, abs=1e-8)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            logdet_shifted(np.array([[1.0, 2.0], [0.0, 1.0]]), 0.1)


class TestDetFloor:
    def test_floor_active(self):
        val = det_floor(np.diag([2.0, 0.001]), 0.01)
        assert val == pytest.approx(math.log(2.0) + math.log(0.01))

    def test_identity_any_eps(self):
        for eps in (0.01, 0.5, 1.0):
            assert det_floor(np.eye(4), eps) == pytest.approx(0.0, abs=1e-14)

    def test_floor_inactive(self):
        assert det_floor(np.diag([3.0, 5.0]), 1.0) == pytest.approx(math.log(15.0))


class TestScalarFunctions:
    def test_binary_entropy_half(self):
        assert binary_entropy(0.5) == pytest.approx(math.log(2.0))

    def test_binary_entropy_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_binary_entropy_quarter(self):
        assert binary_entropy(0.25) == pytest.approx(0.562335, abs=1e-6)

    def test_binary_entropy_domain(self):
        with pytest.raises(ValueError):
            binary_entropy(-0.1)
        with pytest.raises(ValueError):
            binary_entropy(1.1)

    def test_log_binomial_small(self):
        assert log_binomial(4, 2) == pytest.approx(math.log(6.0))
        assert log_binomial(10, 0) == 0.0
        assert log_binomial(10, 10) == 0.0

    def test_log_binomial_matches_exact_big_integers(self):
        # independent oracle: exact big-int binomials
        for n, k in [(60, 30), (64, 13), (120, 40), (200, 3)]:
            assert log_binomial(n, k) == pytest.approx(
                math.log(math.comb(n, k)), rel=1e-12
            )

    def test_entropy_sandwich_up_to_60(self):
        for n in range(2, 61):
            for k in range(1, n):
                val = log_binomial(n, k) / n
                h = binary_entropy(k / n)
                assert h - math.log(n + 1) / n <= val <= h

    def test_rect_logdet_limit_values(self):
        assert rect_logdet_limit(0.5) == pytest.approx(0.5 * math.log(2.0) - 0.5)
        assert rect_logdet_limit(0.5) == pytest.approx(-0.153426, abs=1e-6)
        assert rect_logdet_limit(0.25) == pytest.approx(0.75 * math.log(4.0 / 3.0) - 0.25)
        assert abs(rect_logdet_limit(1e-6)) < 3e-6

    def test_rect_logdet_limit_domain(self):
        with pytest.raises(ValueError):
            rect_logdet_limit(1.0)
        with pytest.raises(ValueError):
            rect_logdet_limit(0.0)

    def test_minimax_limit_landau(self):
        for beta in (0.1, 0.25, 0.5, 0.9):
            assert minimax_limit(beta, beta) == pytest.approx(binary_entropy(beta) / 2)

    def test_minimax_limit_nyquist_is_zero(self):
        for beta in (0.1, 0.25, 0.5):
            assert minimax_limit(1.0, beta) == 0.0

    def test_minimax_limit_value(self):
        expected = 0.5 * (0.562335 - 0.5 * 0.693147)
        assert minimax_limit(0.5, 0.25) == pytest.approx(expected, abs=1e-5)

    def test_minimax_limit_domain(self):
        with pytest.raises(ValueError):
            minimax_limit(0.2, 0.5)


class TestSpectralDecomp:
    def test_reconstruction(self, gen):
        x = gen.standard_normal((6, 6))
        s = x + x.T
        dec = spectral_decomp(s)
        err = np.linalg.norm(dec.reconstruct() - s) / np.linalg.norm(s)
        assert err <= 1e-9
        assert np.all(np.diff(dec.eigenvalues) <= 1e-12)

    def test_eigenvectors_orthogonal(self, gen):
        x = gen.standard_normal((5, 5))
        dec = spectral_decomp(x @ x.T)
        v = dec.eigenvectors
        np.testing.assert_allclose(v @ v.T, np.eye(5), atol=1e-12)
