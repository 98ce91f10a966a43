"""Exact arithmetic in a real number field Q(theta).

A field is given by a monic square-free polynomial together with a rational
bracket isolating one real root theta.  Elements are coefficient vectors of
polynomials in theta reduced modulo the minimal polynomial, so equality is
structural and signs are decided by interval refinement of theta.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    DivisionByZero,
    FieldMismatch,
    MultipleRootsInBracket,
    NoRootInBracket,
    NotSquareFree,
)

Rational = Fraction


def as_fraction(x) -> Fraction:
    """Parse an int, Fraction or ``"p/q"`` string into a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot read {x!r} as an exact rational")


# ---------------------------------------------------------------------------
# dense polynomials over Q, coefficients low-to-high

def _trim(p: list) -> list:
    while p and p[-1] == 0:
        p.pop()
    return p


def _poly_sub(a, b):
    n = max(len(a), len(b))
    out = [Fraction(0)] * n
    for i, c in enumerate(a):
        out[i] += c
    for i, c in enumerate(b):
        out[i] -= c
    return _trim(out)


def _poly_mul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _trim(out)


def _poly_divmod(a, b):
    a = list(a)
    if not b:
        raise DivisionByZero("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    lead = b[-1]
    while len(a) >= len(b) and a:
        shift = len(a) - len(b)
        c = a[-1] / lead
        q[shift] = c
        for i, bc in enumerate(b):
            a[shift + i] -= c * bc
        a.pop()
        _trim(a)
    return _trim(q), a


def _poly_gcd(a, b):
    a, b = _trim(list(a)), _trim(list(b))
    while b:
        _, r = _poly_divmod(a, b)
        a, b = b, r
    if a:
        lead = a[-1]
        a = [c / lead for c in a]
    return a


def _poly_deriv(p):
    return _trim([i * c for i, c in enumerate(p)][1:])


def _poly_eval(p, x):
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _sturm_chain(p):
    chain = [list(p), _poly_deriv(p)]
    while chain[-1]:
        _, r = _poly_divmod(chain[-2], chain[-1])
        chain.append([-c for c in r])
    chain.pop()
    return chain


def _sign_variations(chain, x):
    signs = []
    for q in chain:
        v = _poly_eval(q, x)
        if v:
            signs.append(v > 0)
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def count_real_roots(p: Sequence[Fraction], lo: Fraction, hi: Fraction) -> int:
    """Number of distinct real roots of ``p`` in the half-open interval (lo, hi]."""
    chain = _sturm_chain(_trim(list(p)))
    return _sign_variations(chain, lo) - _sign_variations(chain, hi)


def _rational_factor_with_root(p, lo, hi):
    """Irreducible factor of ``p`` over Q having the isolated root in (lo, hi)."""
    if len(p) <= 2:
        return p
    import sympy

    x = sympy.Symbol("x")
    expr = sum(sympy.Rational(c.numerator, c.denominator) * x ** i for i, c in enumerate(p))
    _, factors = sympy.Poly(expr, x, domain="QQ").factor_list()
    for fac, _mult in factors:
        coeffs = [Fraction(int(c.p), int(c.q)) for c in reversed(fac.all_coeffs())]
        lead = coeffs[-1]
        coeffs = [c / lead for c in coeffs]
        if len(coeffs) > 1 and count_real_roots(coeffs, lo, hi) == 1:
            return coeffs
    raise NoRootInBracket("no rational factor has a root in the bracket")


# ---------------------------------------------------------------------------

class NumberField:
    """Q(theta) for a real root theta isolated by a rational bracket.

    Use :func:`field_make` to construct a validated instance.  The bracket is
    refined in place as sign queries demand; refinement only ever shrinks it.
    """

    def __init__(self, minpoly: Sequence[Fraction], bracket: tuple[Fraction, Fraction]):
        self.minpoly = tuple(minpoly)
        self.degree = len(self.minpoly) - 1
        self.initial_bracket = (bracket[0], bracket[1])
        self._lo, self._hi = bracket
        self._neg_at_lo = _poly_eval(self.minpoly, self._lo) < 0
        d = self.degree
        # x^k mod minpoly for k = d .. 2d-2
        self._reduce_table = []
        cur = [-c for c in self.minpoly[:-1]]
        for _ in range(max(d - 1, 0)):
            self._reduce_table.append(cur)
            nxt = [Fraction(0)] + cur[:-1]
            top = cur[-1]
            nxt = [n - top * c for n, c in zip(nxt, self.minpoly[:-1])]
            cur = nxt
        self.refine(80)
        mid = (self._lo + self._hi) / 2
        self.theta_float = float(mid)
        self._theta_pows = [self.theta_float ** k for k in range(d)]
        self._abs_pows = [abs(t) for t in self._theta_pows]
        self.zero = AlgebraicReal(self, (Fraction(0),) * d)
        self.one = self.element(1)
        self.theta = self.from_coeffs([0, 1]) if d > 1 else self.element(self.minpoly[0] * -1)

    # -- construction helpers
    def element(self, x) -> "AlgebraicReal":
        if isinstance(x, AlgebraicReal):
            if x.field is not self and x.field != self:
                raise FieldMismatch("element belongs to a different field")
            return x
        c = as_fraction(x)
        return AlgebraicReal(self, (c,) + (Fraction(0),) * (self.degree - 1))

    def from_coeffs(self, coeffs: Iterable) -> "AlgebraicReal":
        """Element sum c_k theta^k for arbitrary-length coefficient input."""
        cs = [as_fraction(c) for c in coeffs]
        return AlgebraicReal(self, self._reduce(cs))

    def _reduce(self, cs: list) -> tuple:
        d = self.degree
        if d == 1:
            t = self.theta_value_rational()
            acc = Fraction(0)
            for c in reversed(cs):
                acc = acc * t + c
            return (acc,)
        cs = list(cs)
        # reduce high powers one at a time, top-down
        p = self.minpoly
        while len(cs) > d:
            top = cs.pop()
            if top:
                k = len(cs) - d
                for i in range(d):
                    cs[k + i] -= top * p[i]
        cs.extend([Fraction(0)] * (d - len(cs)))
        return tuple(cs)

    def theta_value_rational(self) -> Fraction:
        return -self.minpoly[0]

    # -- comparison of fields
    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, NumberField):
            return NotImplemented
        return (
            self.minpoly == other.minpoly
            and max(self._lo, other._lo) <= min(self._hi, other._hi)
        )

    def __hash__(self):
        return hash(self.minpoly)

    def __repr__(self):
        return f"NumberField(minpoly={[str(c) for c in self.minpoly]}, theta~{self.theta_float!r})"

    # -- refinement of theta
    @property
    def bracket(self) -> tuple[Fraction, Fraction]:
        return self._lo, self._hi

    def refine(self, bits: int) -> None:
        """Halve the isolating bracket ``bits`` times."""
        lo, hi = self._lo, self._hi
        for _ in range(bits):
            mid = (lo + hi) / 2
            v = _poly_eval(self.minpoly, mid)
            if v == 0:
                lo = hi = mid
                break
            if (v < 0) == self._neg_at_lo:
                lo = mid
            else:
                hi = mid
        self._lo, self._hi = lo, hi

    def to_dict(self) -> dict:
        return {
            "minpoly": [str(c) for c in self.minpoly],
            "bracket": [str(c) for c in self.initial_bracket],
            "theta": repr(self.theta_float),
        }


def field_make(minpoly: Sequence, bracket: Sequence) -> NumberField:
    """Validate ``minpoly`` (low-to-high coefficients) and an isolating bracket.

    The polynomial is normalized to be monic, checked to be square-free and to
    have exactly one root in the bracket.  It is then replaced by its
    irreducible rational factor carrying that root, so that the zero element
    is exactly the zero coefficient vector.
    """
    p = _trim([as_fraction(c) for c in minpoly])
    if len(p) < 2:
        raise ValueError("minimal polynomial must be nonconstant")
    lead = p[-1]
    p = [c / lead for c in p]
    lo, hi = (as_fraction(b) for b in bracket)
    if not lo < hi:
        raise NoRootInBracket("bracket must satisfy lo < hi")
    if len(_poly_gcd(p, _poly_deriv(p))) > 1:
        raise NotSquareFree("polynomial shares a factor with its derivative")
    n = count_real_roots(p, lo, hi)
    if n > 1:
        raise MultipleRootsInBracket(f"Sturm count over the bracket is {n}")
    if n == 0:
        raise NoRootInBracket("Sturm count over the bracket is 0")
    if _poly_eval(p, lo) == 0 or _poly_eval(p, hi) == 0:
        raise NoRootInBracket("the root sits on a bracket endpoint; widen or shift the bracket")
    p = _rational_factor_with_root(p, lo, hi)
    return NumberField(p, (lo, hi))


def rational_field() -> NumberField:
    """The degree-one field Q, realised as Q(theta) with theta = 0."""
    return field_make([0, 1], (-1, 1))


# ---------------------------------------------------------------------------

def _ext_inverse(a: list, p: tuple) -> list:
    """u with u*a = 1 mod p (p irreducible, a nonzero mod p)."""
    r0, r1 = list(p), _trim(list(a))
    s0, s1 = [], [Fraction(1)]
    while len(r1) > 1:
        q, r = _poly_divmod(r0, r1)
        r0, r1 = r1, r
        s0, s1 = s1, _poly_sub(s0, _poly_mul(q, s1))
    if not r1:
        raise DivisionByZero("element is not invertible")
    c = r1[0]
    return [x / c for x in s1]


class AlgebraicReal:
    """Immutable element of a :class:`NumberField`."""

    __slots__ = ("field", "coeffs", "_hash")

    def __init__(self, field: NumberField, coeffs: tuple):
        self.field = field
        self.coeffs = coeffs
        self._hash = None

    # -- coercion
    def _coerce(self, other) -> "AlgebraicReal":
        if isinstance(other, AlgebraicReal):
            if other.field is not self.field and other.field != self.field:
                raise FieldMismatch("operands live in different number fields")
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.field.element(other)
        raise TypeError(f"unsupported operand {type(other).__name__}")

    # -- arithmetic
    def __add__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return AlgebraicReal(self.field, tuple(x + y for x, y in zip(self.coeffs, o.coeffs)))

    __radd__ = __add__

    def __sub__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return AlgebraicReal(self.field, tuple(x - y for x, y in zip(self.coeffs, o.coeffs)))

    def __rsub__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return o - self

    def __neg__(self):
        return AlgebraicReal(self.field, tuple(-x for x in self.coeffs))

    def __pos__(self):
        return self

    def __mul__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        f = self.field
        d = f.degree
        a, b = self.coeffs, o.coeffs
        if d == 1:
            return AlgebraicReal(f, (a[0] * b[0],))
        prod = [Fraction(0)] * (2 * d - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    if y:
                        prod[i + j] += x * y
        out = prod[:d]
        for k in range(d, 2 * d - 1):
            c = prod[k]
            if c:
                row = f._reduce_table[k - d]
                for i in range(d):
                    out[i] += c * row[i]
        return AlgebraicReal(f, tuple(out))

    __rmul__ = __mul__

    def inverse(self) -> "AlgebraicReal":
        if self.is_zero():
            raise DivisionByZero("division by the zero element")
        f = self.field
        if f.degree == 1:
            return AlgebraicReal(f, (1 / self.coeffs[0],))
        u = _ext_inverse(list(self.coeffs), f.minpoly)
        return f.from_coeffs(u)

    def __truediv__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result, base = self.field.one, self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # -- predicates
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def __bool__(self):
        return not self.is_zero()

    def sign(self) -> int:
        """Exact sign: symbolic zero test, float filter, then interval refinement."""
        cs = self.coeffs
        if not any(cs):
            return 0
        f = self.field
        if f.degree == 1 or not any(cs[1:]):
            return 1 if cs[0] > 0 else -1
        # float filter with a generous a-priori error bound
        try:
            vals = [float(c) for c in cs]
        except OverflowError:
            vals = None
        if vals is not None:
            s = 0.0
            mag = 0.0
            for v, t, at in zip(vals, f._theta_pows, f._abs_pows):
                s += v * t
                mag += abs(v) * at
            if 1e-250 < mag < 1e250 and abs(s) > 1e-11 * mag:
                return 1 if s > 0 else -1
        while True:
            lo, hi = _interval_eval(cs, *f.bracket)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            f.refine(32)

    def __eq__(self, other):
        if isinstance(other, AlgebraicReal):
            return (other.field is self.field or other.field == self.field) and self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.coeffs[0] == other and not any(self.coeffs[1:])
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            if not any(self.coeffs[1:]):
                self._hash = hash(self.coeffs[0])
            else:
                self._hash = hash(self.coeffs)
        return self._hash

    def _cmp(self, other) -> int:
        return (self - other).sign()

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    # -- conversion
    def to_float(self, precision: int = 53) -> tuple[float, float]:
        """Return ``(v, eps)`` with ``|v - self| <= eps <= 2**-precision * max(1, |v|)``."""
        if precision < 1:
            raise ValueError("precision must be at least 1 bit")
        if precision > 53:
            raise ValueError("a double carries at most 53 bits")
        cs = self.coeffs
        if not any(cs):
            return 0.0, 0.0
        f = self.field
        if f.degree == 1 or not any(cs[1:]):
            exact = cs[0]
            v = float(exact)
            err = abs(Fraction(v) - exact)
            return v, _round_up(err)
        target = Fraction(1, 2 ** (precision + 2))
        while True:
            lo, hi = _interval_eval(cs, *f.bracket)
            scale = max(Fraction(1), abs(lo), abs(hi))
            if hi - lo <= target * scale:
                mid = (lo + hi) / 2
                v = float(mid)
                err = max(abs(Fraction(v) - lo), abs(Fraction(v) - hi))
                eps = _round_up(err)
                if eps <= 2.0 ** -precision * max(1.0, abs(v)):
                    return v, eps
            f.refine(16)

    def __float__(self):
        return self.to_float(53)[0]

    def log(self) -> float:
        """Natural logarithm of a positive element, safe for tiny rationals."""
        if self.sign() <= 0:
            raise ValueError("log of a nonpositive element")
        if self.is_rational():
            c = self.coeffs[0]
            return math.log(c.numerator) - math.log(c.denominator)
        return math.log(float(self))

    def exact_str(self) -> str:
        """Exact text form: a rational, or ``[c0, c1, ...]`` coefficients in theta."""
        if self.is_rational():
            return str(self.coeffs[0])
        return "[" + ", ".join(str(c) for c in self.coeffs) + "]"

    def __repr__(self):
        if self.is_rational():
            return f"AlgebraicReal({self.coeffs[0]})"
        return f"AlgebraicReal({self.exact_str()} ~ {float(self):.12g})"

    __str__ = exact_str


def _round_up(err: Fraction) -> float:
    e = float(err)
    if Fraction(e) < err:
        e = math.nextafter(e, math.inf)
    return e


def _interval_eval(cs, lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    """Enclosure of sum cs[k] x^k over x in [lo, hi] by interval Horner."""
    a = b = cs[-1]
    for c in reversed(cs[:-1]):
        p1, p2, p3, p4 = a * lo, a * hi, b * lo, b * hi
        a = min(p1, p2, p3, p4) + c
        b = max(p1, p2, p3, p4) + c
    return a, b
