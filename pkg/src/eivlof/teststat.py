"""Kernel-weighted U-statistics, their variance estimators and the test.

All double sums run over distinct index pairs. Kernel weights on the
reduced covariates z = B'w use a product of quartic kernels in q_hat
dimensions; the variance estimators use the squared kernel with a single
h^{-q} factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .calibrate import compute_residuals, even_length
from .data import PrimarySample, ValidationSample
from .errors import InsufficientVariance, InvalidConfig
from .estimators import BetaEstimate, LinkFunction, estimate_beta
from .kernels import (QUARTIC, BandwidthPlan, convolution_square_integral, kernel_at_zero,
                      kernel_matrix, kernel_square_integral, resolve_bandwidths)
from .sdr import SdrEstimate, estimate_B

Regime = Literal["tilde", "split_finite_lambda", "split_infinite_lambda", "small_lambda", "zheng"]
RegimeRequest = Literal["auto", "tilde", "split", "small_lambda", "infinite_lambda", "zheng"]

REGIME_REQUESTS = ("auto", "tilde", "split", "small_lambda", "infinite_lambda", "zheng")
_REGIME_NAMES = {
    "tilde": "tilde",
    "split": "split_finite_lambda",
    "infinite_lambda": "split_infinite_lambda",
    "small_lambda": "small_lambda",
    "zheng": "zheng",
}
# ratio N/n below the first bound uses the small-ratio test, above the second the
# large-ratio one
AUTO_LAMBDA_BOUNDS = (1.0, 6.0)
VARIANCE_FLOOR = 1e-14
LITERAL_CRITICAL_VALUE = 1.65


@dataclass(frozen=True)
class TestOutcome:
    raw_statistic: float
    scale_factor: float
    bias_hat: float
    variance_hat: float
    standardized: float
    critical_value: float
    reject: bool
    regime: Regime
    lambda_hat: float
    q_hat: int
    beta_hat: NDArray[np.float64]
    h: float
    v_N: float

    __test__ = False  # keep pytest from collecting this class


def _as_2d(z) -> NDArray[np.float64]:
    z = np.asarray(z, dtype=float)
    return z[:, None] if z.ndim == 1 else z


def _offdiag(K: NDArray[np.float64]) -> NDArray[np.float64]:
    K = K.copy()
    np.fill_diagonal(K, 0.0)
    return K


def v_tilde(e_hat, z_hat, h: float) -> float:
    """[n(n-1)]^{-1} sum_{i != j} e_i K_h(z_i - z_j) e_j."""
    return v_split(e_hat, e_hat, z_hat, h)


def v_split(e1, e2, z_hat, h: float) -> float:
    """[n(n-1)]^{-1} sum_{i != j} e1_i K_h(z_i - z_j) e2_j."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    z = _as_2d(z_hat)
    n = e1.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    K = _offdiag(kernel_matrix(QUARTIC, z, z, h))
    return float(e1 @ K @ e2) / (n * (n - 1))


def tau1_hat(e_hat, z_hat, h: float) -> float:
    """2[n(n-1)]^{-1} sum_{i != j} h^{-q} K^2((z_i - z_j)/h) e_i^2 e_j^2."""
    e2 = np.asarray(e_hat, dtype=float) ** 2
    z = _as_2d(z_hat)
    n = e2.shape[0]
    return 2.0 * float(e2 @ _offdiag(kernel_matrix(QUARTIC, z, z, h, squared=True)) @ e2) / (n * (n - 1))


def variance_plugins_tilde(e_hat, eta_full, z_hat, z_tilde, h: float,
                           q_hat: int) -> tuple[float, float, float, float]:
    """Return (tau1, tau2, tau3, mu) for the full-sample statistic."""
    e2 = np.asarray(e_hat, dtype=float) ** 2
    eta2 = np.asarray(eta_full, dtype=float) ** 2
    z, zt = _as_2d(z_hat), _as_2d(z_tilde)
    n, N = e2.shape[0], eta2.shape[0]
    tau1 = tau1_hat(e_hat, z, h)
    tau2 = float(e2 @ kernel_matrix(QUARTIC, z, zt, h, squared=True) @ eta2) / (n * N)
    tau3 = 2.0 * float(eta2 @ _offdiag(kernel_matrix(QUARTIC, zt, zt, h, squared=True)) @ eta2) / (N * (N - 1))
    mu = kernel_at_zero(QUARTIC) ** q_hat * float(eta2.sum()) / (N * N * h)
    return tau1, tau2, tau3, mu


def variance_plugin_split(e1, e2, eta_first, eta_second, z_hat, z_tilde, h: float, q_hat: int,
                          lambda_hat: float) -> float:
    """Four-term variance estimate for the split-sample statistic.

    ``z_tilde`` holds the reduced validation covariates in row order, first
    half then second half, matching ``eta_first`` and ``eta_second``.
    """
    if lambda_hat <= 0:
        raise ValueError("lambda_hat must be positive")
    a = np.asarray(e1, dtype=float) ** 2
    b = np.asarray(e2, dtype=float) ** 2
    et = np.asarray(eta_first, dtype=float) ** 2
    es = np.asarray(eta_second, dtype=float) ** 2
    z, zt = _as_2d(z_hat), _as_2d(z_tilde)
    n = a.shape[0]
    half = et.shape[0]
    N = 2 * half
    zt_first, zt_second = zt[:half], zt[half:N]

    k_pp = _offdiag(kernel_matrix(QUARTIC, z, z, h, squared=True))
    term1 = 2.0 * float(a @ k_pp @ b) / (n * (n - 1))
    term2 = 4.0 * float(a @ kernel_matrix(QUARTIC, z, zt_second, h, squared=True) @ es) / (lambda_hat * n * N)
    term3 = 4.0 * float(b @ kernel_matrix(QUARTIC, z, zt_first, h, squared=True) @ et) / (lambda_hat * n * N)
    term4 = 16.0 * float(et @ kernel_matrix(QUARTIC, zt_first, zt_second, h, squared=True) @ es) / (
        lambda_hat**2 * N * N)
    return term1 + term2 + term3 + term4


@lru_cache(maxsize=None)
def _conv_constant() -> float:
    return convolution_square_integral(QUARTIC)


def small_lambda_plugins(eta_first, eta_second, z_tilde, v_N: float, beta_hat) -> tuple[float, float]:
    """Bias and variance estimates for the small validation-ratio standardization.

    nu = ||beta|| (v_N N)^{-1} int M^2 * mean(eta^2); the variance is
    2 * (2 ||beta|| C_M J), with C_M the squared-convolution constant of M
    and J a cross-half kernel estimate of int (xi^2)^2 f^2.
    """
    et = np.asarray(eta_first, dtype=float) ** 2
    es = np.asarray(eta_second, dtype=float) ** 2
    zt = _as_2d(z_tilde)
    half = et.shape[0]
    N = 2 * half
    norm = float(np.linalg.norm(beta_hat))
    mean_eta2 = (et.sum() + es.sum()) / N
    nu = norm * kernel_square_integral(QUARTIC) * mean_eta2 / (v_N * N)
    J = float(et @ kernel_matrix(QUARTIC, zt[:half], zt[half:N], v_N) @ es) / (half * half)
    tau_tilde = 2.0 * norm * _conv_constant() * J
    return nu, 2.0 * tau_tilde


def critical_value(alpha: float, convention: str = "normal_quantile") -> float:
    if not 0 < alpha <= 0.5:
        raise InvalidConfig(f"alpha must lie in (0, 0.5], got {alpha}")
    if convention == "normal_quantile":
        return float(stats.norm.isf(alpha))
    if convention == "literal_1_65":
        if not math.isclose(alpha, 0.05):
            raise InvalidConfig("the literal 1.65 critical value is defined for alpha = 0.05 only")
        return LITERAL_CRITICAL_VALUE
    raise InvalidConfig(f"unknown critical-value convention {convention!r}")


def resolve_regime(request: str, lambda_hat: float) -> str:
    """Map a regime request (possibly "auto") to a concrete request name."""
    if request not in REGIME_REQUESTS:
        raise InvalidConfig(f"unknown regime {request!r}")
    if request != "auto":
        return request
    lo, hi = AUTO_LAMBDA_BOUNDS
    if lambda_hat < lo:
        return "small_lambda"
    if lambda_hat <= hi:
        return "split"
    return "infinite_lambda"


@dataclass(frozen=True)
class NullFit:
    """Quantities shared by every regime: the null-model index and the SDR fit."""

    validation: ValidationSample
    beta: BetaEstimate
    sdr: SdrEstimate


def fit_null(primary: PrimarySample, validation: ValidationSample, link: LinkFunction) -> NullFit:
    N = even_length(validation.N)
    if N != validation.N:
        validation = ValidationSample(validation.w_tilde[:N], validation.x_tilde[:N])
    beta = estimate_beta(primary, validation, link)
    sdr = estimate_B(primary, validation)
    return NullFit(validation, beta, sdr)


def run_test(primary: PrimarySample, validation: ValidationSample, link: LinkFunction,
             plan: BandwidthPlan = BandwidthPlan(), alpha: float = 0.05,
             regime_request: str = "auto", convention: str = "normal_quantile",
             fitted: NullFit | None = None) -> TestOutcome:
    """Estimate everything and run the lack-of-fit test in the requested regime.

    Pass ``fitted`` (from :func:`fit_null`) to reuse the index and SDR
    estimates across several regimes on the same data.
    """
    if primary.p != validation.p:
        raise InvalidConfig(f"primary has p={primary.p} but validation has p={validation.p}")
    crit = critical_value(alpha, convention)
    if fitted is None:
        fitted = fit_null(primary, validation, link)
    validation = fitted.validation
    beta_hat = fitted.beta.beta_hat
    sdr = fitted.sdr
    n, N, p = primary.n, validation.N, primary.p
    lambda_hat = N / n
    request = resolve_regime(regime_request, lambda_hat)
    regime = _REGIME_NAMES[request]

    bw_regime = {"small_lambda": "small_lambda", "zheng": "zheng"}.get(request, "standard")
    plan = replace(plan, regime=bw_regime)
    h, v_N = resolve_bandwidths(plan, n, N, sdr.q_hat, p)
    _, v_full = resolve_bandwidths(plan, n, N, sdr.q_hat, p, full_sample=True)
    res = compute_residuals(primary, validation, beta_hat, link, v_N, v_N_full=v_full)

    if request == "zheng":
        z, zt, dim = primary.w, validation.w_tilde, p
    else:
        z, zt, dim = primary.w @ sdr.B_hat, validation.w_tilde @ sdr.B_hat, sdr.q_hat

    bias = 0.0
    if request == "tilde":
        raw = v_tilde(res.e_hat, z, h)
        tau1, tau2, tau3, bias = variance_plugins_tilde(res.e_hat, res.eta_full, z, zt, h, dim)
        variance = tau1 + 2.0 * tau2 / lambda_hat + tau3 / lambda_hat**2
        scale = n * math.sqrt(h)
    else:
        raw = v_split(res.e1, res.e2, z, h)
        if request == "small_lambda":
            _, variance = small_lambda_plugins(res.eta_first, res.eta_second, zt, v_N, beta_hat)
            scale = N * math.sqrt(v_N)
        elif request == "infinite_lambda":
            variance = tau1_hat(res.e_hat, z, h)
            scale = n * math.sqrt(h)
        else:
            variance = variance_plugin_split(res.e1, res.e2, res.eta_first, res.eta_second, z, zt, h,
                                             dim, lambda_hat)
            # the full-covariate smoother needs the classical n h^{p/2} rate
            scale = n * h ** (dim / 2.0) if request == "zheng" else n * math.sqrt(h)

    if not variance > VARIANCE_FLOOR:
        raise InsufficientVariance(f"estimated variance {variance:.3g} is at or below {VARIANCE_FLOOR:g}")
    standardized = scale * (raw - bias) / math.sqrt(variance)
    return TestOutcome(
        raw_statistic=raw, scale_factor=scale, bias_hat=bias, variance_hat=variance,
        standardized=standardized, critical_value=crit, reject=bool(standardized > crit),
        regime=regime, lambda_hat=lambda_hat, q_hat=sdr.q_hat, beta_hat=beta_hat, h=h, v_N=v_N,
    )
