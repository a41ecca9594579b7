import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import hyp2f1

from expfun.errors import DomainError, SpecFileError
from expfun.numerics import quad
from expfun.tails import (
    CompoundPoissonExpTail,
    GammaExpTail,
    LampertiKilledTail,
    StableTail,
    StretchedExpTail,
    TabulatedTail,
    TiltedTail,
    ZeroTail,
    tail_from_dict,
)

ALL_TAILS = [
    StableTail(0.25),
    GammaExpTail(0.5, 1.0, 1.0),
    GammaExpTail(1.0, 1.5, 2.0),
    CompoundPoissonExpTail(2.0, 0.5),
    LampertiKilledTail(0.5, 1.0),
    StretchedExpTail(0.25, 1),
    StretchedExpTail(0.25, 2),
    TiltedTail(ZeroTail(), 1.0, 1.0),
    TabulatedTail(tuple((z, 2.0 * math.exp(-0.7 * z)) for z in (0.1, 0.5, 1.0, 2.0, 4.0, 8.0))),
]


def test_stable_tail_value():
    assert StableTail(0.25).tail_one(1.0) == pytest.approx(4.0, rel=1e-14)


def test_gamma_exp_tail_value():
    # (1/Gamma(3/2)) * (e^(2z) - 1)^(-1/2) at z = log 2 equals 2/sqrt(3 pi)
    got = GammaExpTail(0.5, 1.0, 1.0).tail_one(math.log(2.0))
    assert got == pytest.approx(2.0 / math.sqrt(3.0 * math.pi), rel=1e-12)


def test_compound_poisson_total_mass_at_origin():
    cp = CompoundPoissonExpTail(2.0, 0.5)
    assert cp.tail_one(1e-12) == pytest.approx(2.0, rel=1e-9)
    assert cp.total_mass() == 2.0


def test_lamperti_killed_closed_form_beta_one():
    # for beta = 1 the defining integral has the antiderivative
    # ((1 - exp(-z/a))**(-a) - 1) / Gamma(1-a)
    lk = LampertiKilledTail(0.5, 1.0)
    for z in (1e-3, 0.05, 0.4, 1.0, 3.0):
        closed = ((1.0 - math.exp(-2.0 * z)) ** -0.5 - 1.0) / math.sqrt(math.pi)
        assert lk.tail_one(z) == pytest.approx(closed, rel=1e-9)


def test_lamperti_killed_general_beta_vs_hypergeometric():
    a, beta = 0.3, 1.4
    lk = LampertiKilledTail(a, beta)
    for z in (0.05, 0.3, 1.0, 2.5):
        w = math.exp(-z / a)
        oracle = (
            a
            / math.gamma(1.0 - a)
            * w**beta
            / beta
            * float(hyp2f1(1.0 + a, beta, beta + 1.0, w))
        )
        assert lk.tail_one(z) == pytest.approx(oracle, rel=1e-8)


def test_lamperti_batch_matches_scalar():
    lk = LampertiKilledTail(0.5, 1.0)
    zs = np.geomspace(1e-4, 9.0, 37)
    batch = lk.tail_many(zs)
    scalar = np.array([lk.tail_one(float(z)) for z in zs])
    assert np.max(np.abs(batch / scalar - 1.0)) < 1e-8


def test_stretched_exp_against_quadrature():
    for n in (1, 2, 3):
        t = StretchedExpTail(0.25, n)
        for z in (0.1, 0.8, 1.6):
            ref = quad(lambda x: x**-0.25 * np.exp(-(x**n)), z, np.inf, rel_tol=1e-12)
            assert t.tail_one(z) == pytest.approx(ref, rel=1e-9)


def test_tabulated_interpolation_and_extrapolation():
    knots = tuple((z, 3.0 * math.exp(-1.3 * z)) for z in (0.2, 0.6, 1.1, 2.0, 3.5))
    t = TabulatedTail(knots)
    for z, v in knots:
        assert t.tail_one(z) == pytest.approx(v, rel=1e-12)
    # log-linear between knots reproduces the exponential exactly
    assert t.tail_one(1.5) == pytest.approx(3.0 * math.exp(-1.3 * 1.5), rel=1e-12)
    # beyond the table the fitted decay extends the last segment
    assert t.fitted_decay() == pytest.approx(1.3, rel=1e-9)
    assert t.tail_one(6.0) == pytest.approx(3.0 * math.exp(-1.3 * 6.0), rel=1e-6)
    # below the table the tail is frozen at the first knot
    assert t.tail_one(0.05) == pytest.approx(knots[0][1], rel=1e-12)


def test_tilted_tail_formula():
    base = GammaExpTail(1.0, 1.5, 2.0)
    t = TiltedTail(base, 0.5, 0.7)
    z = np.array([0.3, 1.0, 2.5])
    expect = np.exp(-0.5 * z) * (base.tail_many(z) + 0.7)
    assert np.allclose(t.tail_many(z), expect, rtol=1e-14)


@pytest.mark.parametrize("t", ALL_TAILS, ids=lambda t: type(t).__name__ + str(ALL_TAILS.index(t) if False else ""))
def test_tail_nonnegative_and_nonincreasing(t):
    zs = np.geomspace(1e-3, 12.0, 60)
    vals = t.tail_many(zs)
    assert np.all(vals >= 0)
    assert np.all(np.diff(vals) <= 1e-12 * np.maximum(vals[:-1], 1.0))


@pytest.mark.parametrize("t", ALL_TAILS[:7], ids=lambda t: type(t).__name__)
def test_tail_integrable_near_zero(t):
    # integral of Pibar over (0, 1) must be finite for a subordinator
    val = quad(t.tail_many, 0.0, 1.0, rel_tol=1e-7, singularity_p=t.kernel_singularity())
    assert np.isfinite(val) and val >= 0


@settings(max_examples=20, deadline=None)
@given(
    a=st.floats(min_value=0.1, max_value=0.9),
    z1=st.floats(min_value=0.01, max_value=5.0),
    dz=st.floats(min_value=0.01, max_value=5.0),
)
def test_stable_monotone_property(a, z1, dz):
    t = StableTail(a)
    assert t.tail_one(z1) >= t.tail_one(z1 + dz)


def test_small_jump_mean_matches_quadrature():
    for t in [StableTail(0.25), CompoundPoissonExpTail(2.0, 0.5), LampertiKilledTail(0.5, 1.0)]:
        eps = 0.05
        # integral of x Pi(dx) over (0, eps] = integral of Pibar over (0, eps] - eps*Pibar(eps)
        head = quad(t.tail_many, 0.0, eps, rel_tol=1e-10, singularity_p=t.kernel_singularity())
        ref = head - eps * t.tail_one(eps)
        assert t.small_jump_mean(eps) == pytest.approx(ref, rel=1e-7)


def test_samplers_invert_the_tail():
    u = np.linspace(0.02, 0.98, 25)
    cases = [
        (StableTail(0.25), 0.01),
        (CompoundPoissonExpTail(2.0, 0.5), 0.0),
        (LampertiKilledTail(0.5, 1.0), 1e-3),
        (StretchedExpTail(0.25, 1), 0.0),
        (GammaExpTail(0.5, 1.0, 1.0), 1e-3),
    ]
    for t, eps in cases:
        base = t.tail_one(eps) if eps > 0 else t.total_mass()
        x = t.sample_restricted(eps, u)
        assert np.all(x >= eps * (1 - 1e-9))
        back = t.tail_many(x) / base
        assert np.max(np.abs(back - u)) < 1e-6


def test_zero_tail_has_no_jumps():
    z = ZeroTail()
    assert z.tail_one(1.0) == 0.0
    assert z.total_mass() == 0.0
    with pytest.raises(DomainError):
        z.tail_one(-1.0)


def test_round_trip_serialization():
    for t in ALL_TAILS + [ZeroTail()]:
        assert tail_from_dict(t.to_dict()) == t


def test_bad_variant_rejected():
    with pytest.raises(SpecFileError):
        tail_from_dict({"variant": "nope"})
    with pytest.raises(SpecFileError):
        tail_from_dict({"variant": "stable", "a": 1.5})
    with pytest.raises(DomainError):
        GammaExpTail(0.5, 0.2, 1.0)
    with pytest.raises(DomainError):
        LampertiKilledTail(0.5, 0.5)
    with pytest.raises(DomainError):
        TabulatedTail(((1.0, 2.0), (2.0, 3.0), (3.0, 1.0)))
