"""Kernel calibration of the null regression and the residual sets.

The calibrated regression r(u) = E[g(beta'X) | beta'W = u] is estimated on
the validation sample by Nadaraya-Watson smoothing of g(beta'x~) against
beta'w~. Split-sample versions use the two halves of the validation rows
separately; an odd trailing row is dropped before halving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .data import PrimarySample, ValidationSample
from .estimators import LinkFunction
from .kernels import QUARTIC, KernelSpec, nw_smooth


@dataclass(frozen=True)
class Calibration:
    """A fitted calibration function, evaluated lazily at arbitrary points."""

    abscissae: NDArray[np.float64]
    ordinates: NDArray[np.float64]
    v: float
    spec: KernelSpec = QUARTIC

    def __call__(self, u) -> NDArray[np.float64]:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return nw_smooth(self.abscissae, self.ordinates, self.v, u, self.spec)

    def leave_one_out(self) -> NDArray[np.float64]:
        """Fitted values at each abscissa with that abscissa's own row excluded."""
        out = nw_smooth(self.abscissae, self.ordinates, self.v, self.abscissae, self.spec,
                        leave_one_out=True)
        if np.isnan(out).any():
            # a lone abscissa has no other rows to learn from; keep its own value
            out = np.where(np.isnan(out), self.ordinates, out)
        return out


@dataclass(frozen=True)
class Residuals:
    e_hat: NDArray[np.float64]
    e1: NDArray[np.float64]
    e2: NDArray[np.float64]
    eta_first: NDArray[np.float64]
    eta_second: NDArray[np.float64]
    eta_full: NDArray[np.float64]


def _index_and_target(validation: ValidationSample, beta_hat, link: LinkFunction):
    beta_hat = np.asarray(beta_hat, dtype=float)
    return validation.w_tilde @ beta_hat, link(validation.x_tilde @ beta_hat)


def even_length(N: int) -> int:
    return N - (N % 2)


def fit_r_full(validation: ValidationSample, beta_hat, link: LinkFunction, v_N: float) -> Calibration:
    if v_N <= 0:
        raise ValueError(f"bandwidth must be positive, got {v_N}")
    u, g = _index_and_target(validation, beta_hat, link)
    return Calibration(u, g, v_N)


def fit_r_split(validation: ValidationSample, beta_hat, link: LinkFunction,
                v_N: float) -> tuple[Calibration, Calibration]:
    """Calibrations on validation rows [0, N/2) and [N/2, N) after dropping an odd last row."""
    if v_N <= 0:
        raise ValueError(f"bandwidth must be positive, got {v_N}")
    u, g = _index_and_target(validation, beta_hat, link)
    half = even_length(validation.N) // 2
    return (Calibration(u[:half], g[:half], v_N),
            Calibration(u[half:2 * half], g[half:2 * half], v_N))


def compute_residuals(primary: PrimarySample, validation: ValidationSample, beta_hat,
                      link: LinkFunction, v_N: float, v_N_full: float | None = None) -> Residuals:
    """All residual sets used by the statistics.

    ``v_N`` is the split-sample calibration bandwidth; ``v_N_full`` (default
    ``v_N``) is used for the full-sample calibration behind ``e_hat`` and
    ``eta_full``. The validation residuals of each half are calibrated by
    the other half, and ``eta_full`` is leave-one-out.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    if v_N_full is None:
        v_N_full = v_N
    u_primary = primary.w @ beta_hat
    u_val, g_val = _index_and_target(validation, beta_hat, link)
    half = even_length(validation.N) // 2

    r_full = fit_r_full(validation, beta_hat, link, v_N_full)
    r1, r2 = fit_r_split(validation, beta_hat, link, v_N)
    return Residuals(
        e_hat=primary.y - r_full(u_primary),
        e1=primary.y - r1(u_primary),
        e2=primary.y - r2(u_primary),
        eta_first=g_val[:half] - r2(u_val[:half]),
        eta_second=g_val[half:2 * half] - r1(u_val[half:2 * half]),
        eta_full=g_val - r_full.leave_one_out(),
    )
