"""Structural dimension and base-matrix estimation.

Discretization-expectation estimation built on sliced inverse regression:
the response is replaced by the indicators I(y <= t) over a set of
thresholds t, the (two-slice) SIR matrix is computed for each, and the
matrices are averaged. Covariates observed with error are first replaced
by surrogate predictors, the least-squares prediction of x from w fitted
on the validation sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .data import PrimarySample, ValidationSample
from .errors import DegenerateSpectrum, SingularCovariance

MAX_THRESHOLDS = 500
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class SdrEstimate:
    B_hat: NDArray[np.float64]
    q_hat: int
    eigenvalues: NDArray[np.float64]
    candidate_matrix: NDArray[np.float64]

    @property
    def direction(self) -> NDArray[np.float64]:
        """Leading estimated direction (first column of B_hat)."""
        return self.B_hat[:, 0]


def _check_conditioning(cov: NDArray[np.float64], what: str) -> None:
    cond = np.linalg.cond(cov)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularCovariance(f"{what} is numerically singular (condition number {cond:.3g})")


def surrogate_predictors(primary_w: NDArray[np.float64], validation: ValidationSample) -> NDArray[np.float64]:
    """Map each primary row w_i to Cov(X, W) Sigma_W^{-1} w_i.

    Both moment matrices are sample estimates over the validation rows.
    """
    primary_w = np.atleast_2d(np.asarray(primary_w, dtype=float))
    p = validation.p
    if validation.N < p + 2:
        raise SingularCovariance(f"need at least p + 2 = {p + 2} validation rows, got {validation.N}")
    wc = validation.w_tilde - validation.w_tilde.mean(axis=0)
    xc = validation.x_tilde - validation.x_tilde.mean(axis=0)
    sigma_w = wc.T @ wc / (validation.N - 1)
    cov_xw = xc.T @ wc / (validation.N - 1)
    _check_conditioning(sigma_w, "validation covariance of w")
    gamma = np.linalg.solve(sigma_w, cov_xw.T).T  # Cov(X,W) Sigma_W^{-1}
    return primary_w @ gamma.T


def _inverse_sqrt(cov: NDArray[np.float64]) -> NDArray[np.float64]:
    vals, vecs = np.linalg.eigh(cov)
    return (vecs / np.sqrt(vals)) @ vecs.T


def _thresholds(y: NDArray[np.float64]) -> NDArray[np.float64]:
    if y.shape[0] <= MAX_THRESHOLDS:
        return y
    ys = np.sort(y)
    idx = np.round(np.linspace(0, ys.shape[0] - 1, MAX_THRESHOLDS)).astype(int)
    return ys[idx]


def _standardize(zeta: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim == 1:
        zeta = zeta[:, None]
    n = zeta.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    centered = zeta - zeta.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    _check_conditioning(cov, "covariance of the surrogate predictors")
    root_inv = _inverse_sqrt(cov)
    return centered @ root_inv, root_inv


def dee_candidate_matrix(zeta: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
    """Averaged SIR matrix over indicator responses, in standardized coordinates.

    With zeta* = Sigma_zeta^{-1/2}(zeta - mean) and
    m(t) = n^{-1} sum_i zeta*_i I(y_i <= t), returns the mean of m(t) m(t)^T
    over the thresholds t = y_j.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    zstar, _ = _standardize(zeta)
    n = zstar.shape[0]
    t = _thresholds(y)
    indicators = (y[None, :] <= t[:, None]).astype(float)  # (J, n)
    m = indicators @ zstar / n  # row j is m(t_j)
    lam = m.T @ m / t.shape[0]
    return 0.5 * (lam + lam.T)


def select_q(eigenvalues: NDArray[np.float64], n: int) -> int:
    """BIC-type choice of the structural dimension.

    Maximizes over l = 1..p

        G(l) = (n/2) * S(l) / S(p) - 2 sqrt(n) l(l+1) / (2p),

    where S(l) is the partial sum of log(lambda_i + 1) - lambda_i over the
    l largest eigenvalues. Ties go to the smaller l.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    p = lam.shape[0]
    terms = np.log1p(lam) - lam
    total = terms.sum()
    if total == 0.0:
        raise DegenerateSpectrum("all eigenvalues are zero")
    ell = np.arange(1, p + 1)
    g = (n / 2.0) * np.cumsum(terms) / total - 2.0 * np.sqrt(n) * ell * (ell + 1) / (2.0 * p)
    return int(np.argmax(g)) + 1  # argmax returns the first maximizer


def _fix_signs(B: NDArray[np.float64]) -> NDArray[np.float64]:
    idx = np.argmax(np.abs(B), axis=0)
    signs = np.sign(B[idx, np.arange(B.shape[1])])
    signs[signs == 0] = 1.0
    return B * signs


def estimate_B(primary: PrimarySample, validation: ValidationSample) -> SdrEstimate:
    zeta = surrogate_predictors(primary.w, validation)
    _, root_inv = _standardize(zeta)
    lam = dee_candidate_matrix(zeta, primary.y)
    vals, vecs = np.linalg.eigh(lam)
    order = np.argsort(vals)[::-1]
    vals, vecs = np.clip(vals[order], 0.0, None), vecs[:, order]
    try:
        q_hat = select_q(vals, primary.n)
    except DegenerateSpectrum:
        q_hat = 1
    directions = root_inv @ vecs[:, :q_hat]
    B, _ = np.linalg.qr(directions)
    return SdrEstimate(B_hat=_fix_signs(B), q_hat=q_hat, eigenvalues=vals, candidate_matrix=lam)
