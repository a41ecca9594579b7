"""Closed-form reference laws used as oracles.

Three families of exponential functionals admit explicit formulas and
anchor every validation in the package:

* killed drift (drift c, kill q, no jumps):  k(x) = q (1 - c x)**(q/c - 1)
  on (0, 1/c); its power tilt is a scaled Beta law and its spectrally
  negative dual a scaled reciprocal Beta;
* the gamma-exp family: the functional has the law of beta**(-1) *
  gamma_s**a (a powered gamma variable), with an inverse counterpart for
  the dual;
* the Lamperti-type killed subordinator: moments n! Gamma(beta) /
  Gamma(a n + beta); for beta = 1 the law is that of X**(-a) with X the
  positive a-stable variable, which at a = 1/2 has the explicit density
  exp(-x**2/4)/sqrt(pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import betainc, erf, gammainc, gammaincc, gammaln

from .errors import DomainError


@dataclass(frozen=True)
class ReferenceLaw:
    """A closed-form law: vectorized density/cdf where available, moments
    where the family defines them."""

    name: str
    params: dict = field(default_factory=dict)
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    moment: Optional[Callable[[int], float]] = None
    support: tuple = (0.0, math.inf)


# -- killed drift -------------------------------------------------------------


def killed_drift_density(c: float, q: float, x) -> np.ndarray:
    """q (1 - c x)**(q/c - 1) on (0, 1/c)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= 1.0 / c):
        raise DomainError("the killed-drift density lives on (0, 1/c)")
    return q * (1.0 - c * x) ** (q / c - 1.0)


def killed_drift_law(c: float, q: float) -> ReferenceLaw:
    if c <= 0 or q <= 0:
        raise DomainError("killed drift needs c > 0 and q > 0")

    def density(x):
        return killed_drift_density(c, q, x)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        inside = 1.0 - (1.0 - c * np.clip(x, 0.0, 1.0 / c)) ** (q / c)
        return np.where(x <= 0, 0.0, np.where(x >= 1.0 / c, 1.0, inside))

    def moment(n):
        # E[I^n] = n! / prod (q + c i)
        val = 1.0
        for i in range(1, n + 1):
            val *= i / (q + c * i)
        return val

    return ReferenceLaw(
        "killed_drift", {"c": c, "q": q}, density, cdf, moment, (0.0, 1.0 / c)
    )


def killed_drift_tilted_density(c: float, q: float, rho: float, x) -> np.ndarray:
    """Density of the rho-tilted killed drift: c**(rho+1) * x**rho *
    (1 - c x)**(q/c - 1) / B(rho + 1, q/c); the law of Beta(rho+1, q/c)/c."""
    x = np.asarray(x, dtype=float)
    log_b = gammaln(rho + 1.0) + gammaln(q / c) - gammaln(rho + 1.0 + q / c)
    return (
        c ** (rho + 1.0)
        * x**rho
        * (1.0 - c * x) ** (q / c - 1.0)
        / math.exp(log_b)
    )


def killed_drift_tilted_law(c: float, q: float, rho: float) -> ReferenceLaw:
    def density(x):
        return killed_drift_tilted_density(c, q, rho, x)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return betainc(rho + 1.0, q / c, np.clip(c * x, 0.0, 1.0))

    def moment(n):
        # moments of Beta(rho+1, q/c) scaled by 1/c
        val = c**-n
        for i in range(n):
            val *= (rho + 1.0 + i) / (rho + 1.0 + q / c + i)
        return val

    return ReferenceLaw(
        "killed_drift_tilted",
        {"c": c, "q": q, "rho": rho},
        density,
        cdf,
        moment,
        (0.0, 1.0 / c),
    )


def killed_drift_dual_density(c: float, q: float, rho: float, x) -> np.ndarray:
    """Density of the exponential functional of the spectrally negative dual
    of the tilted killed drift: the law of c / Beta(rho, q/c) on (c, inf)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= c):
        raise DomainError("the dual density lives on (c, inf)")
    log_b = gammaln(rho) + gammaln(q / c) - gammaln(rho + q / c)
    return c**rho * x ** -(rho + q / c) * (x - c) ** (q / c - 1.0) / math.exp(log_b)


# -- powered gamma (gamma-exp family) -----------------------------------------


def powered_gamma_density(a: float, s: float, beta: float, x) -> np.ndarray:
    """beta**(s/a)/(a Gamma(s)) x**((s-a)/a) exp(-(beta x)**(1/a));
    the density of beta**(-1) gamma_s**a."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("powered-gamma density lives on (0, inf)")
    return (
        beta ** (s / a)
        / (a * math.gamma(s))
        * x ** ((s - a) / a)
        * np.exp(-((beta * x) ** (1.0 / a)))
    )


def powered_gamma_law(a: float, s: float, beta: float) -> ReferenceLaw:
    def density(x):
        return powered_gamma_density(a, s, beta, x)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, gammainc(s, (beta * np.maximum(x, 0.0)) ** (1.0 / a)))

    def moment(n):
        return beta**-n * math.exp(gammaln(a * n + s) - gammaln(s))

    return ReferenceLaw("powered_gamma", {"a": a, "s": s, "beta": beta}, density, cdf, moment)


def powered_gamma_dual_density(a: float, s: float, beta: float, x) -> np.ndarray:
    """beta**((s-a)/a)/(a Gamma(s-a)) x**(-s/a) exp(-(beta/x)**(1/a)); for
    a = 1 this is the inverse-gamma(s-1, beta) density."""
    if s <= a:
        raise DomainError("the dual law needs s > a")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("the dual density lives on (0, inf)")
    return (
        beta ** ((s - a) / a)
        / (a * math.gamma(s - a))
        * x ** (-s / a)
        * np.exp(-((beta / x) ** (1.0 / a)))
    )


def powered_gamma_dual_law(a: float, s: float, beta: float) -> ReferenceLaw:
    def density(x):
        return powered_gamma_dual_density(a, s, beta, x)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, gammaincc(s - a, (beta / np.maximum(x, 1e-300)) ** (1.0 / a)))

    return ReferenceLaw("powered_gamma_dual", {"a": a, "s": s, "beta": beta}, density, cdf)


# -- Lamperti-type killed subordinator ----------------------------------------


def lamperti_killed_moment(a: float, beta: float, n: int) -> float:
    """E[I^n] = n! Gamma(beta) / Gamma(a n + beta)."""
    if n < 0:
        raise DomainError("moments are defined for n >= 0")
    return math.factorial(n) * math.exp(gammaln(beta) - gammaln(a * n + beta))


def stable_reciprocal_moment(a: float, n: int) -> float:
    """Moments of X**(-a) for X positive a-stable: n!/Gamma(a n + 1);
    the beta = 1 case of the Lamperti-type family."""
    return math.factorial(n) / math.gamma(a * n + 1.0)


def stable_half_reciprocal_law() -> ReferenceLaw:
    """The a = 1/2, beta = 1 law made explicit: X_{1/2} is the Levy
    distribution with cdf erfc(1/(2 sqrt(t))), so X**(-1/2) has density
    exp(-x**2/4)/sqrt(pi) and cdf erf(x/2)."""

    def density(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-(x**2) / 4.0) / math.sqrt(math.pi)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, erf(x / 2.0))

    return ReferenceLaw(
        "stable_half_reciprocal",
        {"a": 0.5, "beta": 1.0},
        density,
        cdf,
        lambda n: stable_reciprocal_moment(0.5, n),
    )


def lamperti_killed_law(a: float, beta: float) -> ReferenceLaw:
    if a == 0.5 and beta == 1.0:
        return stable_half_reciprocal_law()
    return ReferenceLaw(
        "lamperti_killed_moments",
        {"a": a, "beta": beta},
        moment=lambda n: lamperti_killed_moment(a, beta, n),
    )


# -- duality transform ---------------------------------------------------------


def dual_transform(k, qstar: float):
    """Map a density k of the base functional to the density of the dual's
    functional: k_dual(x) = qstar * k(1/x) / x.

    ``k`` is a vectorized callable or a StepDensity (its step evaluator is
    used, so the result vanishes outside (1/x_max, 1/x_0)).  qstar must be
    1/phi'(0) for the transform to preserve unit mass.
    """
    if qstar <= 0:
        raise DomainError("qstar must be positive")
    base = k.evaluate_many if hasattr(k, "evaluate_many") else k

    def k_dual(x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("the dual density lives on (0, inf)")
        return qstar / x * base(1.0 / x)

    return k_dual
