"""Kernel functions, Nadaraya-Watson smoothing and bandwidth rules.

Everything here is a pure function of its arguments. Arrays are accepted
wherever a scalar makes sense and evaluation is vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from .errors import EmptyWindow

_QUARTIC_NORM = 15.0 / 16.0


@dataclass(frozen=True)
class KernelSpec:
    """A compactly supported, symmetric univariate kernel."""

    family: Literal["quartic"] = "quartic"
    support_radius: float = 1.0

    def __post_init__(self):
        if self.family != "quartic":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        if self.support_radius != 1.0:
            raise ValueError("the quartic kernel has support radius 1")


QUARTIC = KernelSpec()


def kernel_eval(spec: KernelSpec, u: ArrayLike) -> NDArray[np.float64] | float:
    """Evaluate K(u) = (15/16)(1 - u^2)^2 on |u| <= 1, zero elsewhere."""
    u = np.asarray(u, dtype=float)
    one_minus = 1.0 - u * u
    out = np.where(np.abs(u) <= spec.support_radius, _QUARTIC_NORM * one_minus * one_minus, 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_square_integral(spec: KernelSpec) -> float:
    """Return the integral of K(u)^2 over the real line.

    For the quartic kernel this is (15/16)^2 * 256/315 = 5/7.
    """
    return 5.0 / 7.0


def kernel_at_zero(spec: KernelSpec) -> float:
    return _QUARTIC_NORM


def convolution_square_integral(spec: KernelSpec) -> float:
    """Integral over v of (integral over u of K(u) K(u + v))^2.

    This is the constant that replaces the integral of K^2 when the
    regression error of a kernel smoother, rather than the response itself,
    drives the variance. Computed by nested adaptive quadrature.
    """
    r = spec.support_radius

    def conv(v: float) -> float:
        lo, hi = max(-r, -r - v), min(r, r - v)
        if lo >= hi:
            return 0.0
        val, _ = integrate.quad(lambda u: kernel_eval(spec, u) * kernel_eval(spec, u + v), lo, hi,
                                epsabs=1e-13, epsrel=1e-12)
        return val

    # conv is even in v and supported on [-2r, 2r]
    val, _ = integrate.quad(lambda v: conv(v) ** 2, 0.0, 2 * r, epsabs=1e-13, epsrel=1e-12)
    return 2.0 * val


def product_kernel_eval(spec: KernelSpec, z: ArrayLike, h: float) -> NDArray[np.float64] | float:
    """Scaled product kernel h^{-d} prod_k K(z_k / h).

    ``z`` has its coordinates along the last axis; leading axes are
    broadcast, so an (m, k, d) array of differences yields an (m, k) array.
    """
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or z.shape[-1] == 0:
        raise ValueError("product kernel needs at least one coordinate")
    d = z.shape[-1]
    vals = np.prod(kernel_eval(spec, z / h), axis=-1) / h**d
    return float(vals) if np.ndim(vals) == 0 else vals


def _as_points(a: ArrayLike) -> NDArray[np.float64]:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def kernel_matrix(spec: KernelSpec, a: ArrayLike, b: ArrayLike, h: float,
                  squared: bool = False) -> NDArray[np.float64]:
    """Pairwise product-kernel weights between the rows of ``a`` and ``b``.

    Returns the (len(a), len(b)) matrix of h^{-d} prod_k K((a_ik - b_jk)/h),
    or of h^{-d} prod_k K^2(...) when ``squared`` is set (the form used by
    the variance estimators, which carry a single h^{-d} factor).
    """
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    a, b = _as_points(a), _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets have different dimensions")
    d = a.shape[1]
    out = np.ones((a.shape[0], b.shape[0]))
    for k in range(d):
        w = kernel_eval(spec, (a[:, k][:, None] - b[:, k][None, :]) / h)
        out *= w * w if squared else w
    return out / h**d


def nw_regression(abscissae: ArrayLike, ordinates: ArrayLike, v: float, query: float,
                  spec: KernelSpec = QUARTIC) -> float:
    """Nadaraya-Watson estimate at a single query point.

    Raises EmptyWindow when no abscissa lies within the kernel support
    around ``query``.
    """
    x = np.asarray(abscissae, dtype=float)
    y = np.asarray(ordinates, dtype=float)
    if x.size == 0 or x.shape != y.shape:
        raise ValueError("abscissae and ordinates must be nonempty and of equal length")
    if v <= 0:
        raise ValueError(f"bandwidth must be positive, got {v}")
    w = kernel_eval(spec, (query - x) / v)
    denom = w.sum()
    if denom <= 0.0:
        raise EmptyWindow(f"no abscissa within {v * spec.support_radius:g} of {query:g}")
    return float(w @ y / denom)


def nw_smooth(abscissae: ArrayLike, ordinates: ArrayLike, v: float, queries: ArrayLike,
              spec: KernelSpec = QUARTIC, leave_one_out: bool = False) -> NDArray[np.float64]:
    """Vectorized Nadaraya-Watson fit with a nearest-neighbour fallback.

    Queries whose kernel window is empty get the ordinate of the nearest
    abscissa. With ``leave_one_out`` the queries must be the abscissae
    themselves and each point's own weight is dropped (its own ordinate is
    also excluded from the fallback).
    """
    x = np.asarray(abscissae, dtype=float)
    y = np.asarray(ordinates, dtype=float)
    q = np.asarray(queries, dtype=float)
    if v <= 0:
        raise ValueError(f"bandwidth must be positive, got {v}")
    diff = q[:, None] - x[None, :]
    w = kernel_eval(spec, diff / v)
    if leave_one_out:
        if q.shape != x.shape:
            raise ValueError("leave-one-out smoothing evaluates at the abscissae")
        np.fill_diagonal(w, 0.0)
    denom = w.sum(axis=1)
    empty = denom <= 0.0
    out = np.empty(q.shape[0])
    out[~empty] = (w[~empty] @ y) / denom[~empty]
    if empty.any():
        dist = np.abs(diff[empty])
        if leave_one_out:
            rows = np.flatnonzero(empty)
            dist[np.arange(rows.size), rows] = np.inf
        if np.all(np.isinf(dist)):
            # single abscissa left out of itself: nothing to fall back on
            out[empty] = np.nan
        else:
            out[empty] = y[np.argmin(dist, axis=1)]
    return out


@dataclass(frozen=True)
class BandwidthPlan:
    """Constants of the bandwidth rules.

    ``c1`` scales the test-statistic bandwidth h and ``c2`` the calibration
    bandwidth v_N, except under the small-ratio rule where the roles are
    swapped. The Zheng rule uses ``c1`` for both.
    """

    c1: float = 1.6
    c2: float = 1.6
    regime: Literal["standard", "small_lambda", "zheng"] = "standard"

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("bandwidth constants must be positive")
        if self.regime not in ("standard", "small_lambda", "zheng"):
            raise ValueError(f"unknown bandwidth regime {self.regime!r}")


def resolve_bandwidths(plan: BandwidthPlan, n: int, N: int, q_hat: int, p: int,
                       full_sample: bool = False) -> tuple[float, float]:
    """Return (h, v_N) for the given sample sizes.

    standard:      h = c1 n^{-1/(4+q)},   v_N = c2 (N/2)^{-2/5}
    small_lambda:  h = c2 n^{-1/(2+q)},   v_N = c1 (N/2)^{-1/3}
    zheng:         h = c1 n^{-1/(4+p)},   v_N = c1 (N/2)^{-2/5}

    ``full_sample`` swaps N/2 for N in the calibration bandwidth, for
    statistics that calibrate on the whole validation sample.
    """
    if n < 2 or N < 2:
        raise ValueError(f"need n >= 2 and N >= 2, got n={n}, N={N}")
    if not 1 <= q_hat <= p:
        raise ValueError(f"q_hat={q_hat} outside [1, {p}]")
    m = N if full_sample else N / 2
    if plan.regime == "standard":
        return plan.c1 * n ** (-1.0 / (4 + q_hat)), plan.c2 * m ** (-0.4)
    if plan.regime == "small_lambda":
        return plan.c2 * n ** (-1.0 / (2 + q_hat)), plan.c1 * m ** (-1.0 / 3.0)
    return plan.c1 * n ** (-1.0 / (4 + p)), plan.c1 * m ** (-0.4)
