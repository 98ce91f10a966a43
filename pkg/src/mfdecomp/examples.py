"""Registry of the example families shipped with the CLI."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import ConstraintViolation, UnknownExample
from .exact import as_fraction, field_make, rational_field
from .ifs import WIFS, Similarity

PISOT_POLYNOMIALS = {
    # low-to-high coefficients
    "x3-2x2+x-1": [-1, 1, -2, 1],
    "x4-x3-2x2+1": [1, 0, -2, -1, 1],
    "x4-2x3+x-1": [-1, 1, 0, -2, 1],
}


def _probs(probs, n):
    if probs is None or probs == "uniform":
        return [Fraction(1, n)] * n
    return [as_fraction(p) for p in probs]


def cantor_overlap(probs=None) -> WIFS:
    """x/3, x/3 + 2/9, x/3 + 2/3."""
    F = rational_field()
    e = F.element
    maps = [Similarity(e(Fraction(1, 3)), e(b)) for b in (0, Fraction(2, 9), Fraction(2, 3))]
    return WIFS(F, maps, _probs(probs, 3))


def testud(ell=3, P=(0, 1, 2), N=(1,), probs=None) -> WIFS:
    """Digits i in P give x/l + i/l, digits i in N give -x/l + (i+1)/l.

    Maps are ordered as (i, +1) for i in P then (i, -1) for i in N.  ``probs``
    is a list in that order or a dict keyed by ``"i,+1"`` / ``"i,-1"``.
    """
    ell = int(ell)
    P = sorted({int(i) for i in P})
    N = sorted({int(i) for i in N})
    if ell < 2:
        raise ConstraintViolation("ell must be at least 2")
    if any(not 0 <= i < ell for i in P + N):
        raise ConstraintViolation("digits must lie in 0..ell-1")
    if not {0, ell - 1} <= set(P) | set(N):
        raise ConstraintViolation("{0, ell-1} must be contained in P or N")
    F = rational_field()
    e = F.element
    inv = Fraction(1, ell)
    maps, keys = [], []
    for i in P:
        maps.append(Similarity(e(inv), e(i * inv)))
        keys.append(f"{i},+1")
    for i in N:
        maps.append(Similarity(e(-inv), e((i + 1) * inv)))
        keys.append(f"{i},-1")
    if isinstance(probs, dict):
        try:
            ps = [as_fraction(probs[k]) for k in keys]
        except KeyError as exc:
            raise ConstraintViolation(f"missing probability for digit {exc}") from None
    else:
        ps = _probs(probs, len(maps))
    if len(ps) != len(maps):
        raise ConstraintViolation(f"expected {len(maps)} probabilities, got {len(ps)}")
    return WIFS(F, maps, ps)


def _bernoulli(field, lam, p1) -> WIFS:
    p1 = as_fraction(p1)
    if not 0 < p1 < 1:
        raise ConstraintViolation("p1 must lie in (0, 1)")
    maps = [Similarity(lam, field.zero), Similarity(lam, 1 - lam)]
    return WIFS(field, maps, [p1, 1 - p1])


def bernoulli_pisot_simple(k=2, p1=Fraction(1, 2)) -> WIFS:
    """Bernoulli convolution with ratio 1/r, r the root of x^k - x^(k-1) - ... - 1."""
    k = int(k)
    if k < 2:
        raise ConstraintViolation("k must be at least 2")
    F = field_make([-1] * k + [1], (1, 2))
    return _bernoulli(F, F.theta.inverse(), p1)


def bernoulli_pisot_poly(which="x3-2x2+x-1", p1=Fraction(1, 2)) -> WIFS:
    """Bernoulli convolution with ratio 1/r for one of three listed Pisot roots."""
    if isinstance(which, int) or (isinstance(which, str) and which.isdigit()):
        which = list(PISOT_POLYNOMIALS)[int(which) - 1]
    try:
        poly = PISOT_POLYNOMIALS[which.replace(" ", "").replace("^", "")]
    except KeyError:
        raise ConstraintViolation(f"unknown polynomial {which!r}") from None
    F = field_make(poly, (1, 2))
    return _bernoulli(F, F.theta.inverse(), p1)


def lau_wang(k=1, lam1=Fraction(1, 3), lam2=Fraction(1, 3), probs=None, check=True) -> WIFS:
    """Non-equicontractive family S_0 .. S_{k+1} with ratios between lam1 and lam2."""
    k = int(k)
    lam1, lam2 = as_fraction(lam1), as_fraction(lam2)
    if k < 1:
        raise ConstraintViolation("k must be at least 1")
    if not (0 < lam1 < 1 and 0 < lam2 < 1):
        raise ConstraintViolation("ratios must lie in (0, 1)")
    F = rational_field()
    e = F.element
    beta = [lam1 * (lam2 / lam1) ** j for j in range(k + 1)]
    maps = [Similarity(e(lam1), e(0))]
    for i in range(1, k + 1):
        off = sum((beta[j - 1] * (1 - beta[j]) for j in range(1, i + 1)), Fraction(0))
        maps.append(Similarity(e(beta[i]), e(off)))
    maps.append(Similarity(e(lam2), e(1 - lam2)))
    sk1 = maps[k].a + maps[k].b
    if check and sk1 + lam2 > 1:
        raise ConstraintViolation(f"S_k(1) + lam2 = {sk1.exact_str()} + {lam2} exceeds 1")
    return WIFS(F, maps, _probs(probs, k + 2))


@dataclass(frozen=True)
class ExampleDescriptor:
    name: str
    params: dict  # parameter name -> default
    builder: Callable


REGISTRY = {
    d.name: d
    for d in [
        ExampleDescriptor("cantor-overlap", {"probs": None}, cantor_overlap),
        ExampleDescriptor("testud", {"ell": 3, "P": [0, 1, 2], "N": [1], "probs": None}, testud),
        ExampleDescriptor("bernoulli-pisot-simple", {"k": 2, "p1": "1/2"}, bernoulli_pisot_simple),
        ExampleDescriptor("bernoulli-pisot-poly", {"which": "x3-2x2+x-1", "p1": "1/2"}, bernoulli_pisot_poly),
        ExampleDescriptor("lau-wang", {"k": 1, "lam1": "1/3", "lam2": "1/3", "probs": None}, lau_wang),
    ]
}


def build_example(name: str, params: dict | None = None) -> WIFS:
    try:
        desc = REGISTRY[name]
    except KeyError:
        raise UnknownExample(f"unknown example {name!r}; known: {sorted(REGISTRY)}") from None
    params = dict(params or {})
    unknown = set(params) - set(desc.params)
    if unknown:
        raise ConstraintViolation(f"unknown parameters for {name}: {sorted(unknown)}")
    kwargs = {**desc.params, **params}
    return desc.builder(**kwargs)
