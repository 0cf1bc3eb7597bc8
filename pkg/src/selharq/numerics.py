"""Special functions behind the analytical bounds.

Covers the Gaussian tail Q(x), its two-exponential approximation, the inverse
of Q, and the even-degree chi-square law of a subcarrier norm
``||H||^2 = sum |H_i|^2`` with ``n_r`` complex components of per-dimension
variance ``sigma^2``.  The exponentially weighted integrals of that law
(truncated moment generating functions) reduce to Poisson tails, so
everything here is built on :func:`poisson_tails`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

__all__ = [
    "ChiSquareSpec",
    "MgfScale",
    "q_function",
    "q_inverse",
    "q_approx",
    "poisson_tails",
    "chi2_pdf",
    "chi2_cdf",
    "chi2_sf",
    "chi2_quantile",
    "mgf_scale",
    "truncated_mgf",
]


@dataclass(frozen=True)
class ChiSquareSpec:
    """Law of ``||H||^2`` for ``half_degrees`` complex Gaussian components."""

    half_degrees: int
    component_variance: float = 0.5

    def __post_init__(self):
        if int(self.half_degrees) != self.half_degrees or self.half_degrees < 1:
            raise ValueError(f"half_degrees must be a positive integer, got {self.half_degrees}")
        if not self.component_variance > 0:
            raise ValueError(f"component_variance must be positive, got {self.component_variance}")

    @property
    def mean(self) -> float:
        return 2.0 * self.half_degrees * self.component_variance


@dataclass(frozen=True)
class MgfScale:
    """Scale of the tilted law ``exp(-rate*x) f(x)``.

    The tilted density is proportional to a chi-square density with the same
    degrees of freedom and per-component variance ``rho**2``.
    """

    rho: float
    exponent_rate: float


def q_function(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def q_inverse(p: float) -> float:
    """Solve ``q_function(x) = p`` by bracketed root finding."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse needs 0 < p < 1, got {p}")
    if p == 0.5:
        return 0.0
    # Work on log Q so tiny tail probabilities keep full relative precision.
    target = math.log(p)

    def f(x):
        return float(special.log_ndtr(-x)) - target

    lo, hi = -40.0, 40.0
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def q_approx(x):
    """Two-exponential approximation ``exp(-x^2/2)/12 + exp(-2x^2/3)/4``.

    Only defined for ``x >= 0``.  It dominates Q(x) for x above roughly
    0.666; below that it undershoots (at 0 it gives 1/3 against 1/2).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("q_approx is defined for nonnegative arguments only")
    return np.exp(-0.5 * x * x) / 12.0 + np.exp(-2.0 * x * x / 3.0) / 4.0


def poisson_tails(n: int, t: float) -> tuple[float, float]:
    """Return ``(P(N >= n), P(N < n))`` for ``N ~ Poisson(t)``.

    These are the regularized incomplete gamma functions ``P(n, t)`` and
    ``Q(n, t)``; the second is the survival function of an even-degree
    chi-square at ``tau = 2 sigma^2 t``.  Both are evaluated directly so
    neither tail loses precision to cancellation.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0.0:
        return 0.0, 1.0
    if math.isinf(t):
        return 1.0, 0.0
    return float(special.gammainc(n, t)), float(special.gammaincc(n, t))


def chi2_pdf(spec: ChiSquareSpec, x):
    """Density of ``||H||^2``: gamma with shape ``n_r`` and scale ``2 sigma^2``."""
    x = np.asarray(x, dtype=float)
    n, s2 = spec.half_degrees, spec.component_variance
    xs = np.maximum(x, 0.0)
    with np.errstate(divide="ignore"):
        logf = special.xlogy(n - 1, xs) - xs / (2 * s2) - n * math.log(2 * s2) - math.lgamma(n)
    return np.where(x < 0, 0.0, np.exp(logf))


def chi2_cdf(spec: ChiSquareSpec, tau: float) -> float:
    """``P(||H||^2 <= tau)``."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return poisson_tails(spec.half_degrees, tau / (2 * spec.component_variance))[0]


def chi2_sf(spec: ChiSquareSpec, tau: float) -> float:
    """``P(||H||^2 > tau)``."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return poisson_tails(spec.half_degrees, tau / (2 * spec.component_variance))[1]


def chi2_quantile(spec: ChiSquareSpec, prob: float) -> float:
    """Inverse of :func:`chi2_cdf`."""
    if not 0.0 <= prob < 1.0:
        raise ValueError(f"prob must lie in [0, 1), got {prob}")
    if prob == 0.0:
        return 0.0
    hi = spec.mean
    while chi2_cdf(spec, hi) < prob:
        hi *= 2.0
    return optimize.brentq(lambda t: chi2_cdf(spec, t) - prob, 0.0, hi, xtol=1e-14, rtol=1e-13)


def mgf_scale(spec: ChiSquareSpec, rate: float) -> MgfScale:
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    s2 = spec.component_variance
    return MgfScale(rho=math.sqrt(s2 / (1.0 + 2.0 * rate * s2)), exponent_rate=rate)


def truncated_mgf(spec: ChiSquareSpec, rate: float, tau: float, side: str = "upper") -> float:
    """Integral of ``exp(-rate*x) f(x)`` over ``[tau, inf)`` or ``[0, tau]``.

    Closed form ``(rho/sigma)^(2 n_r)`` times the tail of the tilted law,
    assembled in log space.  ``tau`` may be ``math.inf``.
    """
    if side not in ("upper", "lower"):
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    scale = mgf_scale(spec, rate)
    n, s2 = spec.half_degrees, spec.component_variance
    rho2 = scale.rho ** 2
    log_full = n * math.log(rho2 / s2)
    cdf, sf = poisson_tails(n, tau / (2.0 * rho2))
    tail = sf if side == "upper" else cdf
    if tail == 0.0:
        return 0.0
    return math.exp(log_full + math.log(tail))
