"""Seeded data generators for the simulation models.

Every model draws X ~ N(0, Sigma), W = X + U with U ~ N(0, sigma_u I), and
Y = mu(X) + eps with eps ~ N(0, 1). ``sigma_u`` is the per-coordinate
variance of the measurement error. The validation sample (w~, x~) is drawn
from the same X and U laws, independently of the primary sample.

Randomness comes from counter-based Philox streams. A dataset is identified
by ``(seed, stream)``; inside it the five draws x, u, eps, x~, u~ use fixed
child streams, so datasets can be regenerated in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .data import PrimarySample, ValidationSample
from .errors import NotPositiveDefinite, UnknownModel
from .estimators import CUBIC, LINEAR, LinkFunction

MODEL_IDS = ("H11", "H12", "H13", "H14", "H15", "H16", "H17", "H18", "H19", "local_alt")
_MIN_P = {"H14": 4, "H15": 4, "H17": 3, "H18": 4, "H19": 8}
# constant of the reference bandwidth h = c n^{-1/5} in the local-alternative rate
LOCAL_ALT_C = 1.6


def sigma_matrix(choice: str, p: int) -> NDArray[np.float64]:
    if choice == "identity":
        return np.eye(p)
    if choice == "ar03":
        idx = np.arange(p)
        return 0.3 ** np.abs(idx[:, None] - idx[None, :])
    raise ValueError(f"unknown covariance choice {choice!r}")


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    p: int
    a: float = 0.0
    sigma_choice: str = "identity"
    sigma_u: float = 0.5

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise UnknownModel(f"unknown model {self.model_id!r}; choose from {', '.join(MODEL_IDS)}")
        if self.p < _MIN_P.get(self.model_id, 1):
            raise ValueError(f"{self.model_id} needs p >= {_MIN_P[self.model_id]}")
        if self.sigma_u < 0:
            raise ValueError("sigma_u must be nonnegative")
        sigma_matrix(self.sigma_choice, 1)

    @property
    def link(self) -> LinkFunction:
        return CUBIC if self.model_id in ("H16", "H17", "H18", "H19") else LINEAR

    @property
    def beta(self) -> NDArray[np.float64]:
        """Index vector of the model (beta_1 for the two-index models)."""
        p = self.p
        if self.model_id in ("H14", "H15"):
            b = np.zeros(p)
            b[:2] = 0.5
            return b
        if self.model_id in ("H16", "H17", "H18", "H19"):
            return np.eye(p)[0]
        return np.ones(p) / np.sqrt(p)

    @property
    def beta2(self) -> NDArray[np.float64] | None:
        if self.model_id not in ("H14", "H15"):
            return None
        b = np.zeros(self.p)
        b[2:4] = 0.5
        return b

    @property
    def null_beta(self) -> NDArray[np.float64]:
        """The index of the null model obtained by setting a = 0."""
        return 2.0 * self.beta if self.model_id == "H15" else self.beta

    @property
    def sigma(self) -> NDArray[np.float64]:
        return sigma_matrix(self.sigma_choice, self.p)

    def mean_function(self, x: NDArray[np.float64], n: int | None = None) -> NDArray[np.float64]:
        """mu(x) row-wise. ``n`` sets the sample size in the local-alternative rate."""
        x = np.atleast_2d(x)
        a = self.a
        t = x @ self.beta
        m = self.model_id
        if m == "H11":
            return t + a * t**2
        if m == "H12":
            return t + a * np.exp(-t**2 / 2.0)
        if m == "H13":
            return t + 2.0 * a * np.cos(0.6 * np.pi * t)
        if m == "H14":
            return t + a * (x @ self.beta2) ** 2
        if m == "H15":
            return 2.0 * t + a * (2.0 * (x @ self.beta2)) ** 3
        if m == "H16":
            return t**3 + a * np.abs(t)
        if m == "H17":
            return t**3 + a * x[:, 2] ** 2
        if m == "H18":
            return t**3 + a * (x[:, 1] / 4.0 + x[:, 2] ** 2 + np.cos(np.pi * x[:, 3]))
        if m == "H19":
            return t**3 + a * (x[:, 1] / 2.0 + x[:, 2] ** 2 + np.cos(np.pi * x[:, 3])
                               + x[:, 4] * np.exp(x[:, 5] / 2.0) + x[:, 7] * x[:, 6])
        # local_alt: g(beta'x) + C_n G(beta'x), with G(t) = t^2 and
        # C_n = a n^{-1/2} h^{-1/4}, h = LOCAL_ALT_C n^{-1/5}
        if n is None:
            raise ValueError("local_alt needs the sample size n")
        h = LOCAL_ALT_C * n ** (-0.2)
        c_n = a * n ** (-0.5) * h ** (-0.25)
        return t + c_n * t**2


@dataclass(frozen=True)
class GeneratedData:
    primary: PrimarySample
    validation: ValidationSample
    spec: ModelSpec
    seed: int
    stream: tuple[int, ...] = field(default=())


def mvn_sample(rng: np.random.Generator, mean, cov, size: int | None = None) -> NDArray[np.float64]:
    """Draw from N(mean, cov) via the lower Cholesky factor."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if not np.allclose(cov, cov.T):
        raise NotPositiveDefinite("covariance is not symmetric")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    shape = (mean.shape[0],) if size is None else (size, mean.shape[0])
    z = rng.standard_normal(shape)
    return mean + z @ L.T


def streams(seed: int, stream: Sequence[int] = (), count: int = 5) -> list[np.random.Generator]:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(count)]


def generate(spec: ModelSpec, n: int, N: int, seed: int, stream: Sequence[int] = ()) -> GeneratedData:
    if n < 1 or N < 1:
        raise ValueError("sample sizes must be positive")
    gx, gu, ge, gxt, gut = streams(seed, stream)
    p = spec.p
    sigma = spec.sigma
    zero = np.zeros(p)
    sd_u = np.sqrt(spec.sigma_u)
    x = mvn_sample(gx, zero, sigma, n)
    w = x + sd_u * gu.standard_normal((n, p))
    y = spec.mean_function(x, n=n) + ge.standard_normal(n)
    xt = mvn_sample(gxt, zero, sigma, N)
    wt = xt + sd_u * gut.standard_normal((N, p))
    return GeneratedData(PrimarySample(y, w), ValidationSample(wt, xt), spec, seed, tuple(stream))
