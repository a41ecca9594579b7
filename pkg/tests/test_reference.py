import math

import numpy as np
import pytest

from expfun.errors import DomainError
from expfun.model import SubordinatorSpec, dual_sn, positive_moments
from expfun.numerics import quad
from expfun.reference import (
    ReferenceLaw,
    dual_transform,
    killed_drift_density,
    killed_drift_dual_density,
    killed_drift_law,
    killed_drift_tilted_density,
    killed_drift_tilted_law,
    lamperti_killed_law,
    lamperti_killed_moment,
    powered_gamma_density,
    powered_gamma_dual_density,
    powered_gamma_dual_law,
    powered_gamma_law,
    stable_half_reciprocal_law,
    stable_reciprocal_moment,
)
from expfun.tails import GammaExpTail

ALL_LAWS = [
    killed_drift_law(1.0, 1.0),
    killed_drift_law(1.0, 2.0),
    killed_drift_tilted_law(1.0, 1.0, 1.0),
    powered_gamma_law(1.0, 1.5, 2.0),
    powered_gamma_law(0.5, 1.0, 1.0),
    powered_gamma_dual_law(1.0, 1.5, 2.0),
    powered_gamma_dual_law(0.5, 1.0, 1.0),
    stable_half_reciprocal_law(),
]


def test_killed_drift_values():
    assert killed_drift_density(1.0, 1.0, 0.3) == pytest.approx(1.0)
    assert killed_drift_density(1.0, 2.0, 0.5) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        killed_drift_density(1.0, 1.0, 1.5)


def test_powered_gamma_values():
    got = powered_gamma_density(1.0, 1.5, 2.0, 1.0)
    assert got == pytest.approx(2.0**2.5 / math.sqrt(math.pi) * math.exp(-2.0), rel=1e-12)
    got = powered_gamma_density(0.5, 1.0, 1.0, 1.0)
    assert got == pytest.approx(2.0 * math.exp(-1.0), rel=1e-12)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.name + str(sorted(l.params.items())))
def test_densities_integrate_to_one(law):
    lo, hi = law.support
    if law.name.endswith("dual"):
        # power tails: integrate in the reciprocal variable, where the
        # integrand decays like the base powered-gamma law
        p = law.params["s"] / law.params["a"] - 2.0
        mass = quad(
            lambda u: law.density(1.0 / u) / u**2,
            0.0,
            np.inf,
            rel_tol=1e-10,
            singularity_p=p if -1 < p < 0 else None,
        )
    else:
        hi = min(hi, 400.0)
        start = lo + 1e-12 if lo == 0 else lo * (1 + 1e-12)
        mass = quad(law.density, start, hi, rel_tol=1e-10)
    assert mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "law",
    [l for l in ALL_LAWS if l.cdf is not None],
    ids=lambda l: l.name + str(sorted(l.params.items())),
)
def test_cdf_matches_density(law):
    lo, hi = law.support
    xs = np.linspace(lo + 0.05 * (min(hi, 10) - lo), min(hi, 10.0) * 0.95, 7)
    for x in xs:
        mass = quad(law.density, lo + 1e-13, float(x), rel_tol=1e-10)
        assert law.cdf(np.array([x]))[0] == pytest.approx(mass, abs=1e-8)


def test_tilted_killed_drift_is_beta():
    # rho=1, c=q=1: the tilted functional is Beta(2, 1), density 2x
    for x in (0.1, 0.4, 0.9):
        assert killed_drift_tilted_density(1.0, 1.0, 1.0, x) == pytest.approx(2.0 * x, rel=1e-12)


def test_powered_gamma_dual_is_inverse_gamma():
    # a=1: inverse-gamma(s-1, beta) density
    s, beta = 1.5, 2.0
    for x in (0.5, 1.0, 3.0):
        expected = beta ** (s - 1) / math.gamma(s - 1) * x ** (-s) * math.exp(-beta / x)
        assert powered_gamma_dual_density(1.0, s, beta, x) == pytest.approx(expected, rel=1e-12)


def test_dual_transform_identity_with_closed_forms():
    # qstar/x * k(1/x) of the powered gamma matches its closed dual
    a, s, beta = 0.5, 1.0, 1.0
    spec = SubordinatorSpec(0.0, 0.0, GammaExpTail(a, s, beta))
    _, qstar = dual_sn(spec)
    kd = dual_transform(lambda x: powered_gamma_density(a, s, beta, x), qstar)
    xs = np.geomspace(0.2, 20.0, 16)
    assert np.allclose(kd(xs), powered_gamma_dual_density(a, s, beta, xs), rtol=1e-10)


def test_dual_transform_of_tilted_killed_drift():
    c, q, rho = 1.0, 1.0, 1.0
    # qstar for the tilted model: phi_rho'(0) = (c rho + q)/rho
    qstar = rho / (c * rho + q)
    kd = dual_transform(lambda x: killed_drift_tilted_density(c, q, rho, x), qstar)
    xs = np.linspace(1.3, 6.0, 8)
    assert np.allclose(kd(xs), killed_drift_dual_density(c, q, rho, xs), rtol=1e-10)


def test_dual_transform_preserves_mass():
    a, s, beta = 1.0, 1.5, 2.0
    spec = SubordinatorSpec(0.0, 0.0, GammaExpTail(a, s, beta))
    _, qstar = dual_sn(spec)
    kd = dual_transform(lambda x: powered_gamma_density(a, s, beta, x), qstar)
    mass = quad(kd, 1e-9, np.inf, rel_tol=1e-9)
    assert mass == pytest.approx(1.0, abs=1e-7)


def test_lamperti_killed_moments():
    assert lamperti_killed_moment(0.5, 1.0, 2) == pytest.approx(2.0, rel=1e-12)
    assert lamperti_killed_moment(0.3, 1.0, 0) == 1.0
    # beta = 1 cross-check: n! Gamma(1)/Gamma(an+1) equals the moments of
    # X**(-a) for X positive a-stable
    for a in (0.25, 0.5, 0.75):
        for n in range(5):
            assert lamperti_killed_moment(a, 1.0, n) == pytest.approx(
                stable_reciprocal_moment(a, n), rel=1e-12
            )


def test_stable_half_reciprocal_law_consistency():
    law = stable_half_reciprocal_law()
    # the closed density must reproduce the moment formula
    for n in range(5):
        got = quad(lambda x: x**n * law.density(x), 0.0, 60.0, rel_tol=1e-10)
        assert got == pytest.approx(law.moment(n), rel=1e-8)
    # and it is the q > 0 law with k(0+) = q = Gamma(1)/Gamma(1/2)
    assert law.density(np.array([1e-9]))[0] == pytest.approx(
        1.0 / math.sqrt(math.pi), rel=1e-6
    )


def test_powered_gamma_moments_match_recursion():
    law = powered_gamma_law(1.0, 1.5, 2.0)
    spec = SubordinatorSpec(0.0, 0.0, GammaExpTail(1.0, 1.5, 2.0))
    ms = positive_moments(spec, 6)
    for n in range(7):
        assert law.moment(n) == pytest.approx(ms.value(n), rel=1e-9)


def test_killed_drift_moments_match_recursion():
    law = killed_drift_law(1.0, 1.0)
    spec_moments = [1.0 / (n + 1) for n in range(5)]
    for n in range(5):
        assert law.moment(n) == pytest.approx(spec_moments[n], rel=1e-12)


def test_lamperti_law_dispatch():
    assert lamperti_killed_law(0.5, 1.0).density is not None
    assert lamperti_killed_law(0.3, 1.2).density is None
    assert lamperti_killed_law(0.3, 1.2).moment(3) == pytest.approx(
        lamperti_killed_moment(0.3, 1.2, 3)
    )
