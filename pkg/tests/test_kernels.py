import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from eivlof.errors import EmptyWindow
from eivlof.kernels import (QUARTIC, BandwidthPlan, convolution_square_integral, kernel_at_zero,
                            kernel_eval, kernel_matrix, kernel_square_integral, nw_regression, nw_smooth,
                            product_kernel_eval, resolve_bandwidths)

from oracles import nw_loop, prod_kernel, quartic

finite = st.floats(-5, 5, allow_nan=False)


class TestKernelEval:
    def test_center(self):
        assert kernel_eval(QUARTIC, 0.0) == 0.9375

    def test_support_boundary(self):
        assert kernel_eval(QUARTIC, 1.0) == 0.0
        assert kernel_eval(QUARTIC, -1.0) == 0.0

    def test_half(self):
        # (15/16)(1 - 0.25)^2
        assert kernel_eval(QUARTIC, 0.5) == 0.52734375

    def test_outside_support(self):
        assert np.all(kernel_eval(QUARTIC, np.array([1.0001, -3.0, 50.0])) == 0.0)

    def test_vectorized_matches_scalar(self):
        u = np.linspace(-1.5, 1.5, 31)
        np.testing.assert_array_equal(kernel_eval(QUARTIC, u), [kernel_eval(QUARTIC, x) for x in u])

    @pytest.mark.invariant
    @given(finite)
    def test_even(self, u):
        assert kernel_eval(QUARTIC, u) == kernel_eval(QUARTIC, -u)

    @pytest.mark.invariant
    @given(finite)
    def test_nonnegative(self, u):
        assert kernel_eval(QUARTIC, u) >= 0.0

    @pytest.mark.invariant
    def test_integrates_to_one(self):
        val, _ = integrate.quad(lambda u: kernel_eval(QUARTIC, u), -1, 1, epsabs=1e-13)
        assert val == pytest.approx(1.0, abs=1e-10)


class TestKernelConstants:
    @pytest.mark.invariant
    def test_square_integral_matches_quadrature(self):
        val, _ = integrate.quad(lambda u: kernel_eval(QUARTIC, u) ** 2, -1, 1, epsabs=1e-13)
        assert kernel_square_integral(QUARTIC) == pytest.approx(val, abs=1e-8)
        assert kernel_square_integral(QUARTIC) == pytest.approx(5 / 7, abs=1e-12)

    def test_square_integral_pure(self):
        assert kernel_square_integral(QUARTIC) == kernel_square_integral(QUARTIC)

    def test_rescaled_square_integral(self):
        # k_h(u) = k(u/h)/h with h = 2 has square integral (5/7)/2
        val, _ = integrate.quad(lambda u: (kernel_eval(QUARTIC, u / 2) / 2) ** 2, -2, 2, epsabs=1e-13)
        assert val == pytest.approx(kernel_square_integral(QUARTIC) / 2, abs=1e-10)

    def test_kernel_at_zero(self):
        assert kernel_at_zero(QUARTIC) == kernel_eval(QUARTIC, 0.0)

    def test_convolution_constant_matches_gauss_legendre(self):
        # the integrands are polynomials on each piece, so fixed-order
        # Gauss-Legendre rules integrate them exactly
        nodes, weights = np.polynomial.legendre.leggauss(30)

        def conv(v):
            lo, hi = -1.0, 1.0 - v
            u = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
            k = 15 / 16 * (1 - u**2) ** 2 * 15 / 16 * (1 - (u + v) ** 2) ** 2
            return 0.5 * (hi - lo) * float(weights @ k)

        v = nodes + 1.0  # map [-1, 1] to [0, 2]
        oracle = 2.0 * float(weights @ np.array([conv(x) ** 2 for x in v]))
        assert convolution_square_integral(QUARTIC) == pytest.approx(oracle, abs=1e-10)


class TestProductKernel:
    def test_scalar_origin(self):
        assert product_kernel_eval(QUARTIC, [0.0], 1.0) == 0.9375

    def test_bivariate_origin(self):
        assert product_kernel_eval(QUARTIC, [0.0, 0.0], 0.5) == pytest.approx(3.515625, rel=1e-15)

    def test_outside_one_coordinate(self):
        assert product_kernel_eval(QUARTIC, [2.0, 0.0], 1.0) == 0.0

    @pytest.mark.parametrize("h", [0.0, -1.0])
    def test_rejects_nonpositive_bandwidth(self, h):
        with pytest.raises(ValueError):
            product_kernel_eval(QUARTIC, [0.1], h)

    def test_rejects_empty_vector(self):
        with pytest.raises(ValueError):
            product_kernel_eval(QUARTIC, np.zeros(0), 1.0)

    @pytest.mark.invariant
    @given(finite, st.floats(0.01, 10))
    def test_univariate_reduction(self, z, h):
        assert product_kernel_eval(QUARTIC, [z], h) == kernel_eval(QUARTIC, z / h) / h

    @pytest.mark.invariant
    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=4), st.floats(0.05, 3))
    def test_matches_loop_oracle(self, z, h):
        assert product_kernel_eval(QUARTIC, z, h) == pytest.approx(prod_kernel(np.array(z), h), rel=1e-12)

    def test_kernel_matrix_entries(self, rng):
        a, b = rng.normal(size=(5, 2)), rng.normal(size=(4, 2))
        K = kernel_matrix(QUARTIC, a, b, 0.9)
        K2 = kernel_matrix(QUARTIC, a, b, 0.9, squared=True)
        for i in range(5):
            for j in range(4):
                d = a[i] - b[j]
                assert K[i, j] == pytest.approx(prod_kernel(d, 0.9), rel=1e-12, abs=1e-15)
                expected = quartic(d[0] / 0.9) ** 2 * quartic(d[1] / 0.9) ** 2 / 0.81
                assert K2[i, j] == pytest.approx(expected, rel=1e-12, abs=1e-15)


class TestNadarayaWatson:
    def test_single_point(self):
        assert nw_regression([0.3], [7.0], 0.1, 0.3) == 7.0

    def test_constant_reproduction(self, rng):
        x = rng.uniform(-1, 1, 30)
        assert nw_regression(x, np.full(30, 5.0), 0.4, 0.1) == pytest.approx(5.0, rel=1e-14)

    def test_three_point_hand_sum(self):
        w_side = 15 / 16 * (1 - 0.16) ** 2  # K(0.1 / 0.25)
        w_mid = 15 / 16
        expected = (w_side * 1 + w_mid * 2 + w_side * 3) / (2 * w_side + w_mid)
        assert nw_regression([-0.1, 0.0, 0.1], [1.0, 2.0, 3.0], 0.25, 0.0) == pytest.approx(expected, rel=1e-14)

    def test_empty_window(self):
        with pytest.raises(EmptyWindow):
            nw_regression([0.0, 0.1], [1.0, 2.0], 0.05, 3.0)

    @pytest.mark.invariant
    @given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-10, 10)), min_size=1, max_size=20),
           st.floats(0.05, 2), st.floats(-1, 1))
    def test_convex_combination_of_window(self, pts, v, q):
        x = np.array([p[0] for p in pts])
        y = np.array([p[1] for p in pts])
        inside = np.abs(x - q) < v
        try:
            val = nw_regression(x, y, v, q)
        except EmptyWindow:
            assert not inside.any()
            return
        assert y[inside].min() - 1e-9 <= val <= y[inside].max() + 1e-9
        assert val == pytest.approx(nw_loop(x, y, v, q), rel=1e-9, abs=1e-9)

    def test_smooth_matches_pointwise(self, rng):
        x, y = rng.normal(size=40), rng.normal(size=40)
        q = np.linspace(-1, 1, 9)
        np.testing.assert_allclose(nw_smooth(x, y, 0.5, q), [nw_regression(x, y, 0.5, t) for t in q], rtol=1e-12)

    def test_smooth_nearest_fallback(self):
        out = nw_smooth([0.0, 1.0], [4.0, 9.0], 0.1, [0.8, 5.0, -3.0])
        np.testing.assert_array_equal(out, [9.0, 9.0, 4.0])

    def test_leave_one_out_excludes_self(self):
        x = np.array([0.0, 0.05, 0.1])
        y = np.array([1.0, 2.0, 3.0])
        out = nw_smooth(x, y, 0.5, x, leave_one_out=True)
        assert out[0] == pytest.approx(nw_regression(x[1:], y[1:], 0.5, 0.0))
        assert out[1] == pytest.approx(nw_regression(x[[0, 2]], y[[0, 2]], 0.5, 0.05))


class TestBandwidths:
    def test_standard_example(self):
        h, v = resolve_bandwidths(BandwidthPlan(1.6, 1.6), 100, 400, 1, 2)
        assert h == pytest.approx(1.6 * 100 ** -0.2, rel=1e-15)
        assert h == pytest.approx(0.6369, abs=1e-4)
        assert v == pytest.approx(1.6 * 200 ** -0.4, rel=1e-15)
        assert v == pytest.approx(0.1917, abs=1e-3)

    def test_zheng_example(self):
        h, v = resolve_bandwidths(BandwidthPlan(3.9, 1.0, "zheng"), 100, 400, 1, 8)
        assert h == pytest.approx(3.9 * 100 ** (-1 / 12), rel=1e-15)
        assert h == pytest.approx(2.6566, abs=1e-3)
        assert v == pytest.approx(3.9 * 200 ** -0.4, rel=1e-15)

    def test_small_lambda_rates(self):
        h, v = resolve_bandwidths(BandwidthPlan(2.0, 1.5, "small_lambda"), 1000, 100, 2, 3)
        assert h == pytest.approx(1.5 * 1000 ** -0.25)
        assert v == pytest.approx(2.0 * 50 ** (-1 / 3))

    def test_full_sample_variant(self):
        _, v = resolve_bandwidths(BandwidthPlan(1.6, 1.2), 100, 400, 1, 2, full_sample=True)
        assert v == pytest.approx(1.2 * 400 ** -0.4)

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            resolve_bandwidths(BandwidthPlan(1, 1), 1, 400, 1, 2)

    @pytest.mark.parametrize("q", [0, 3])
    def test_rejects_q_out_of_range(self, q):
        with pytest.raises(ValueError):
            resolve_bandwidths(BandwidthPlan(), 100, 400, q, 2)

    def test_rejects_nonpositive_constants(self):
        with pytest.raises(ValueError):
            BandwidthPlan(0.0, 1.0)

    @pytest.mark.invariant
    @given(st.integers(2, 5000), st.integers(2, 5000), st.integers(1, 4),
           st.sampled_from(["standard", "small_lambda", "zheng"]))
    def test_positive_and_monotone(self, n, N, q, regime):
        plan = BandwidthPlan(1.3, 0.7, regime)
        h, v = resolve_bandwidths(plan, n, N, q, 4)
        h_n, _ = resolve_bandwidths(plan, n + 1, N, q, 4)
        _, v_N = resolve_bandwidths(plan, n, N + 1, q, 4)
        assert h > 0 and v > 0
        assert h_n < h and v_N < v
        assert math.isfinite(h) and math.isfinite(v)
