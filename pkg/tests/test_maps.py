import random
from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from circle_renorm.errors import ConfigError, NotADiffeomorphismError
from circle_renorm.maps import (
    ArnoldBiCritical,
    PerturbedArnold,
    RigidRotation,
    TranslatedMap,
    arnold_bicritical,
    compose_jets,
    criticality_estimate,
    iterate_with_jet,
    map_from_spec,
    one_minus_sinc,
    perturbed_family,
    schwarzian,
    schwarzian_audit,
    sin_cos_turns,
)
from circle_renorm.numerics import working_precision

P = 256


def test_arnold_examples():
    f = arnold_bicritical(0, P)
    assert f.critical_points == (0, mpfr("0.5"))
    with working_precision(P):
        assert f.jet(mpfr(0))[1] == 0
        assert abs(f.jet(mpfr(1) / 4)[1] - 2) <= mpfr(2) ** (8 - P)
    g = arnold_bicritical("0.3", P)
    with working_precision(P):
        for x in ("0", "0.13", "0.77"):
            x = mpfr(x)
            assert abs(g.lift(x + 1) - g.lift(x) - 1) <= mpfr(2) ** (4 - P)


def test_perturbed_examples():
    with working_precision(P):
        x = mpfr("0.3719")
        assert perturbed_family("0.3", [], P).lift(x) == arnold_bicritical("0.3", P).lift(x)
        g = perturbed_family("0.3", ["0.01"], P)
        assert g.jet(mpfr(0))[1] == 0
        assert abs(g.jet(mpfr(1) / 2)[1]) <= mpfr(2) ** (8 - P)
    with pytest.raises(NotADiffeomorphismError):
        perturbed_family("0.3", ["0.5"], P)
    with pytest.raises(ConfigError):
        map_from_spec({"family": "perturbed2", "a": "0.3", "coeffs": ["0.5"]})


def test_derivative_nonnegative_and_zero_only_at_critical_points():
    g = perturbed_family("0.1", ["0.01", "0.005"], P)
    with working_precision(P):
        ders = [g.jet(mpfr(i) / 1000)[1] for i in range(1000)]
    assert all(d >= 0 for d in ders)
    assert [i for i, d in enumerate(ders) if d == 0 or d < mpfr(2) ** -60] in ([0], [0, 500])


@pytest.mark.parametrize("f", [arnold_bicritical("0.2", P), perturbed_family("0.2", ["0.01"], P)])
def test_criticality_three(f):
    for k in range(2):
        assert abs(criticality_estimate(f, k) - 3) < 0.05


def test_jet_of_translation_map():
    j = iterate_with_jet(RigidRotation("0.37", precision=P), mpfr("0.1"), 10)
    assert (j.d1, j.d2, j.d3) == (1, 0, 0)


def test_jet_at_critical_point():
    assert iterate_with_jet(arnold_bicritical("0.3", P), 0, 1).d1 == 0


def _fd_derivatives(fun, x, h):
    """Central differences with one Richardson step, orders 1 to 3."""
    def d(h):
        f = [fun(x + k * h) for k in (-2, -1, 0, 1, 2)]
        return ((f[3] - f[1]) / (2 * h), (f[3] - 2 * f[2] + f[1]) / (h * h),
                (f[4] - 2 * f[3] + 2 * f[1] - f[0]) / (2 * h ** 3))
    a, b = d(h), d(h / 2)
    return [(4 * bb - aa) / 3 for aa, bb in zip(a, b)]


def test_jet_against_finite_differences():
    f = arnold_bicritical("0.3", P)
    with working_precision(P):
        x = mpfr("0.2")
        j = iterate_with_jet(f, x, 5)
        orbit = f.orbit(x, 5)
        prod = mpfr(1)
        for y in orbit[:-1]:
            prod *= 1 - gmpy2.cos(4 * gmpy2.const_pi() * y)
        assert abs(j.d1 - prod) <= abs(prod) * mpfr(2) ** (16 - P)
        f5 = lambda t: f.iterate(t, 5)
        h = mpfr(2) ** (-(P // 3))
        d1 = (f5(x + h) - f5(x - h)) / (2 * h)
        # higher orders need a wider step to beat cancellation
        fd = _fd_derivatives(f5, x, mpfr(2) ** -40)
    assert abs(float((d1 - j.d1) / j.d1)) < 1e-40
    for exact, approx in zip((j.d1, j.d2, j.d3), fd):
        assert abs(float((exact - approx) / exact)) < 1e-30


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.01, max_value=0.99), st.integers(min_value=1, max_value=64))
def test_jet_matches_richardson(x0, k):
    f = perturbed_family("0.41", ["0.01"], 320)
    with working_precision(320):
        x = mpfr(x0)
        j = iterate_with_jet(f, x, k)
        h = mpfr(2) ** -64
        fd = _fd_derivatives(lambda t: f.iterate(t, k), x, h)
        # skip points whose orbit grazes a critical point
        if j.d1 < mpfr(2) ** -40:
            return
        scale = max(abs(j.d1), abs(j.d2), abs(j.d3), 1)
        for exact, approx in zip((j.d1, j.d2, j.d3), fd):
            assert abs(exact - approx) / scale < mpfr(2) ** -40


def test_schwarzian_examples():
    assert schwarzian((0, mpfr(3), mpfr(0), mpfr(0))) == 0
    assert schwarzian((0, mpfr(1), mpfr(0), mpfr(2))) == 2
    with pytest.raises(NotADiffeomorphismError):
        schwarzian((0, mpfr(0), mpfr(1), mpfr(1)))


def test_schwarzian_composition_identity():
    f = arnold_bicritical("0.3", P)
    g = perturbed_family("0.6", ["0.01"], P)
    rng = random.Random(7)
    with working_precision(P):
        for _ in range(50):
            x = mpfr(rng.random())
            jg = g.jet(x)
            jf = f.jet(jg[0])
            lhs = schwarzian(compose_jets(jf, jg))
            rhs = schwarzian(jf) * jg[1] ** 2 + schwarzian(jg)
            assert abs(lhs - rhs) <= max(mpfr(1), abs(rhs)) * mpfr(2) ** (16 - P)


def test_schwarzian_audit_and_sign():
    a = schwarzian_audit(arnold_bicritical("0.61", P), samples=40)
    assert a.passed
    assert a.all_negative


@settings(max_examples=50, deadline=None)
@given(st.fractions(min_value=-4, max_value=4))
def test_sin_cos_turns_matches_gmpy2(t):
    with working_precision(200):
        x = mpfr(t.numerator) / t.denominator
        s, c = sin_cos_turns(x)
        two_pi = 2 * gmpy2.const_pi()
        assert abs(s - gmpy2.sin(two_pi * x)) <= mpfr(2) ** -190
        assert abs(c - gmpy2.cos(two_pi * x)) <= mpfr(2) ** -190
        assert s * s + c * c - 1 <= mpfr(2) ** -190


def test_one_minus_sinc_small_argument():
    with working_precision(200):
        h = mpfr(2) ** -80
        # 1 - sin(h)/h = h^2/6 - h^4/120 + ...
        assert abs(one_minus_sinc(h) / (h * h / 6) - 1) < mpfr(2) ** -150


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0, max_value=1), st.floats(min_value=-1e-3, max_value=1e-3))
def test_lift_difference_agrees_with_subtraction(u0, d0):
    for f in (arnold_bicritical("0.3", 256), perturbed_family("0.3", ["0.01", "0.004"], 256)):
        with working_precision(256):
            u, d = mpfr(u0), mpfr(d0)
            anc = f.anchor(u)
            ref_f = f.at_precision(600)
            with working_precision(600):
                ref = ref_f.lift(mpfr(u) + mpfr(d)) - ref_f.lift(mpfr(u))
            got = f.lift_difference(anc, d)
            assert abs(got - ref) <= abs(ref) * mpfr(2) ** -240 + mpfr(2) ** -500
            ders = f.derivatives_at(anc, d)
            ref_j = f.jet(u + d)
            for a, b in zip(ders, ref_j[1:]):
                assert abs(a - b) <= mpfr(2) ** -230 * max(1, abs(b))


def test_translated_map_conjugates():
    f = arnold_bicritical("0.3", P)
    g = TranslatedMap(f, Fraction(1, 2))
    with working_precision(P):
        x = mpfr("0.123")
        half = mpfr(1) / 2
        assert abs(g.lift(x + half) - f.lift(x) - half) <= mpfr(2) ** (4 - P)
        assert g.critical_points == (half, mpfr(1))


def test_map_from_spec_roundtrip():
    f = map_from_spec({"family": "perturbed2", "a": "0.25", "coeffs": ["0.01"]}, P)
    assert isinstance(f, PerturbedArnold)
    g = map_from_spec(f.spec(), P)
    with working_precision(P):
        assert g.lift(mpfr("0.3")) == f.lift(mpfr("0.3"))
    assert isinstance(map_from_spec('{"family": "arnold2", "a": 0.1}'), ArnoldBiCritical)
    with pytest.raises(ConfigError):
        map_from_spec({"family": "logistic"})
    with pytest.raises(ConfigError):
        map_from_spec("{not json")
