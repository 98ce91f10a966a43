from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfdecomp.errors import (
    DivisionByZero,
    FieldMismatch,
    MultipleRootsInBracket,
    NoRootInBracket,
    NotSquareFree,
)
from mfdecomp.exact import as_fraction, count_real_roots, field_make, rational_field

mpmath.mp.dps = 60
PHI = (1 + mpmath.sqrt(5)) / 2
GOLDEN = field_make([-1, -1, 1], (1, 2))
CUBIC = field_make([-1, 1, -2, 1], (1, 2))  # x^3 - 2x^2 + x - 1


def cubic_root():
    return mpmath.findroot(lambda x: x ** 3 - 2 * x ** 2 + x - 1, 1.75)


def mp_value(x, root):
    return sum(mpmath.mpf(c.numerator) / c.denominator * root ** k for k, c in enumerate(x.coeffs))


small = st.fractions(min_value=-50, max_value=50, max_denominator=30)


def test_rational_field_basics():
    Q = rational_field()
    a, b = Q.element(Fraction(1, 3)), Q.element(Fraction(-2, 7))
    assert a + b == Fraction(1, 21)
    assert a * b == Fraction(-2, 21)
    assert (a / b) == Fraction(-7, 6)
    assert a.sign() == 1 and b.sign() == -1
    assert a.exact_str() == "1/3"


def test_as_fraction_rejects_floats():
    assert as_fraction("3/4") == Fraction(3, 4)
    assert as_fraction(2) == Fraction(2)
    with pytest.raises((TypeError, ValueError)):
        as_fraction(0.5)


def test_golden_theta_identities():
    t = GOLDEN.theta
    assert t * t == t + 1
    lam = t.inverse()
    assert lam == t - 1
    assert lam * lam + lam == 1
    assert abs(float(t) - float(PHI)) < 1e-15


def test_field_make_errors():
    with pytest.raises(NotSquareFree):
        field_make([1, -2, 1], (0, 2))
    with pytest.raises(NoRootInBracket):
        field_make([-2, 0, 1], (2, 3))
    with pytest.raises(MultipleRootsInBracket):
        field_make([-2, 0, 1], (-2, 2))


def test_reducible_minpoly_replaced_by_factor():
    # (x^2 - x - 1)(x - 3) with the golden root isolated
    F = field_make([3, 2, -4, 1], (1, 2))
    assert F.degree == 2
    assert F.theta * F.theta == F.theta + 1


def test_division_by_zero():
    with pytest.raises(DivisionByZero):
        GOLDEN.zero.inverse()


def test_field_mismatch():
    with pytest.raises(FieldMismatch):
        GOLDEN.theta + CUBIC.theta


@pytest.mark.parametrize("n", [5, 20, 40, 80, 120])
def test_sign_near_cancellation(n):
    # F_n phi - F_{n+1} = -(-1/phi)^n, of size phi^-n
    f = [0, 1]
    while len(f) < n + 2:
        f.append(f[-1] + f[-2])
    x = GOLDEN.theta * f[n] - f[n + 1]
    assert x.sign() == (-1 if n % 2 == 0 else 1)
    v, eps = x.to_float(53)
    assert abs(mpmath.mpf(v) - mp_value(x, PHI)) <= eps


@settings(max_examples=150, deadline=None)
@given(a=small, b=small)
def test_sign_matches_high_precision(a, b):
    x = GOLDEN.from_coeffs([a, b])
    expected = mpmath.sign(mp_value(x, PHI))
    assert x.sign() == int(expected)


@settings(max_examples=100, deadline=None)
@given(a=st.lists(small, min_size=3, max_size=3), b=st.lists(small, min_size=3, max_size=3))
def test_cubic_arithmetic_against_mpmath(a, b):
    r = cubic_root()
    x, y = CUBIC.from_coeffs(a), CUBIC.from_coeffs(b)
    for z, expected in ((x + y, mp_value(x, r) + mp_value(y, r)),
                        (x * y, mp_value(x, r) * mp_value(y, r)),
                        (x - y, mp_value(x, r) - mp_value(y, r))):
        assert abs(mp_value(z, r) - expected) < mpmath.mpf(10) ** -40 * (1 + abs(expected))
    if not x.is_zero():
        assert x * x.inverse() == CUBIC.one
    assert (x < y) == (mp_value(x, r) < mp_value(y, r))


@settings(max_examples=60, deadline=None)
@given(a=st.lists(small, min_size=3, max_size=3), bits=st.integers(min_value=1, max_value=53))
def test_to_float_error_bound(a, bits):
    r = cubic_root()
    x = CUBIC.from_coeffs(a)
    v, eps = x.to_float(bits)
    assert abs(mpmath.mpf(v) - mp_value(x, r)) <= mpmath.mpf(eps)
    assert eps <= 2.0 ** -bits * max(1.0, abs(v))


def test_to_float_precision_limits():
    with pytest.raises(ValueError):
        GOLDEN.theta.to_float(0)
    with pytest.raises(ValueError):
        GOLDEN.theta.to_float(54)


def test_count_real_roots_against_numpy():
    rng = np.random.default_rng(7)
    for _ in range(30):
        roots = sorted(rng.choice(np.arange(-9, 10), size=4, replace=False) / 2)
        p = np.poly(roots)[::-1]  # low-to-high
        cs = [Fraction(int(round(c * 16)), 16) for c in p]
        lo, hi = Fraction(-3), Fraction(7, 3)
        expected = sum(1 for x in roots if lo < x <= hi)
        assert count_real_roots(cs, lo, hi) == expected


def test_spec_round_trip_fields_compare_equal():
    F = field_make([-1, -1, 1], (1, 2))
    G = field_make([int(c) for c in F.to_dict()["minpoly"]], tuple(Fraction(c) for c in F.to_dict()["bracket"]))
    assert F == G
    assert F.theta + G.one == G.theta + 1
