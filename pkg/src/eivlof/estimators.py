"""Projection least-squares estimation of the null-model index.

The validation sample is used to regress g(x~ beta) on a polynomial design
in w~; the fitted coefficients transport g(X beta) to the primary sample,
where beta is chosen to make the transported values match y. Linear links
have a closed form; other links are minimized with multistart Nelder-Mead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import optimize

from .data import PrimarySample, ValidationSample
from .errors import SingularDesign

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LinkFunction:
    id: str
    evaluate: Callable[[NDArray[np.float64]], NDArray[np.float64]] = field(compare=False)
    derivative: Callable[[NDArray[np.float64]], NDArray[np.float64]] = field(compare=False)

    @property
    def is_linear(self) -> bool:
        return self.id == "linear"

    def __call__(self, t):
        return self.evaluate(t)


def _identity(t):
    return np.asarray(t, dtype=float)


def _ones(t):
    return np.ones_like(np.asarray(t, dtype=float))


def _cube(t):
    return np.asarray(t, dtype=float) ** 3


def _cube_deriv(t):
    return 3.0 * np.asarray(t, dtype=float) ** 2


LINEAR = LinkFunction("linear", _identity, _ones)
CUBIC = LinkFunction("cubic", _cube, _cube_deriv)

LINKS = {"linear": LINEAR, "cubic": CUBIC}


def custom_link(evaluate, derivative, name="custom") -> LinkFunction:
    """Wrap a user-supplied g and g'. Always treated as nonlinear."""
    return LinkFunction(name, evaluate, derivative)


@dataclass(frozen=True)
class BetaEstimate:
    beta_hat: NDArray[np.float64]
    objective_value: float
    converged: bool
    iterations: int


def build_design(w_rows: NDArray[np.float64], link: LinkFunction) -> NDArray[np.float64]:
    """Design matrix: w itself for a linear link, else (1, w, w^2) per row."""
    w = np.atleast_2d(np.asarray(w_rows, dtype=float))
    if link.is_linear:
        return w.copy()
    return np.column_stack([np.ones(w.shape[0]), w, w * w])


def _transport_matrix(D: NDArray[np.float64], D_v: NDArray[np.float64]) -> NDArray[np.float64]:
    """Return A = D (D_v^T D_v)^{-1}, so that D (D_v^T D_v)^{-1} D_v^T g = A (D_v^T g)."""
    gram = D_v.T @ D_v
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularDesign(f"validation design is ill-conditioned (condition number {cond:.3g})")
    return np.linalg.solve(gram, D.T).T


def ls_objective(beta, y, D, D_v, x_v, link: LinkFunction) -> float:
    """n^{-1} || y - D (D_v^T D_v)^{-1} D_v^T g(X_v beta) ||^2."""
    A = _transport_matrix(np.asarray(D, float), np.asarray(D_v, float))
    return _objective(np.asarray(beta, float), np.asarray(y, float), A, np.asarray(D_v, float),
                      np.asarray(x_v, float), link)


def _objective(beta, y, A, D_v, x_v, link):
    resid = y - A @ (D_v.T @ link(x_v @ beta))
    return float(resid @ resid) / y.shape[0]


def _linear_closed_form(y, A, D_v, x_v):
    # the transported design for a linear link is A D_v^T X_v
    Z = A @ (D_v.T @ x_v)
    beta, *_ = np.linalg.lstsq(Z, y, rcond=None)
    return beta


def estimate_beta(primary: PrimarySample, validation: ValidationSample, link: LinkFunction,
                  method: str = "auto") -> BetaEstimate:
    """Minimize the projection least-squares criterion over beta.

    ``method`` is "auto" (closed form for linear links, Nelder-Mead
    otherwise), "closed_form" or "nelder_mead".
    """
    y = primary.y
    x_v = validation.x_tilde
    D = build_design(primary.w, link)
    D_v = build_design(validation.w_tilde, link)
    A = _transport_matrix(D, D_v)
    p = primary.p

    if method == "auto":
        method = "closed_form" if link.is_linear else "nelder_mead"
    if method == "closed_form":
        if not link.is_linear:
            raise ValueError("closed form is available only for the linear link")
        beta = _linear_closed_form(y, A, D_v, x_v)
        return BetaEstimate(beta, _objective(beta, y, A, D_v, x_v, link), True, 0)
    if method != "nelder_mead":
        raise ValueError(f"unknown method {method!r}")

    # OLS of y on the transported surrogate covariates is the first start
    ols = _linear_closed_form(y, A, D_v, x_v)
    starts = [ols, np.zeros(p)] + [scale * ols for scale in (0.5, 1.5, 2.0)]

    def f(b):
        return _objective(b, y, A, D_v, x_v, link)

    best = None
    for x0 in starts:
        res = optimize.minimize(f, x0, method="Nelder-Mead",
                                options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 2000 * p,
                                         "maxfev": 4000 * p, "adaptive": p > 4})
        if best is None or res.fun < best.fun:
            best = res
    return BetaEstimate(np.asarray(best.x, dtype=float), float(f(best.x)), bool(best.success), int(best.nit))
