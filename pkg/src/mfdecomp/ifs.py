"""Weighted iterated function systems of similarities on the line."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Sequence

from .errors import IndexOutOfRange, InvalidSystem, SingletonAttractor
from .exact import AlgebraicReal, NumberField, as_fraction

Word = tuple  # tuple of 0-based letter indices


@total_ordering
@dataclass(frozen=True)
class Similarity:
    """The affine map x -> a*x + b, ordered lexicographically by (a, b)."""

    a: AlgebraicReal
    b: AlgebraicReal

    def __post_init__(self):
        if self.a.is_zero():
            raise InvalidSystem("similarity slope must be nonzero")

    @classmethod
    def identity(cls, field: NumberField) -> "Similarity":
        return cls(field.one, field.zero)

    @classmethod
    def affine_onto(cls, lo: AlgebraicReal, hi: AlgebraicReal) -> "Similarity":
        """T_J(x) = diam(J) x + left(J) mapping [0,1] onto J = [lo, hi]."""
        return cls(hi - lo, lo)

    def __call__(self, x):
        return self.a * x + self.b

    def compose(self, other: "Similarity") -> "Similarity":
        """self o other."""
        return Similarity(self.a * other.a, self.a * other.b + self.b)

    def inverse(self) -> "Similarity":
        inv = self.a.inverse()
        return Similarity(inv, -self.b * inv)

    def image_of_unit(self) -> tuple[AlgebraicReal, AlgebraicReal]:
        """Endpoints of self([0,1]) in increasing order."""
        u, v = self.b, self.a + self.b
        return (u, v) if self.a.sign() > 0 else (v, u)

    def __lt__(self, other: "Similarity") -> bool:
        s = (self.a - other.a).sign()
        if s:
            return s < 0
        return (self.b - other.b).sign() < 0

    def exact_str(self) -> str:
        return f"{self.a.exact_str()}*x + {self.b.exact_str()}"

    def float_str(self) -> str:
        return f"{float(self.a):.6g}x{float(self.b):+.6g}"


@dataclass(frozen=True)
class WIFS:
    """Contracting similarities with positive rational weights summing to one."""

    field: NumberField
    maps: tuple
    probs: tuple

    def __post_init__(self):
        maps = tuple(self.maps)
        probs = tuple(as_fraction(p) for p in self.probs)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "probs", probs)
        if not maps:
            raise InvalidSystem("an IFS needs at least one map")
        if len(maps) != len(probs):
            raise InvalidSystem("one probability per map is required")
        for i, s in enumerate(maps):
            if abs(s.a) >= 1:
                raise InvalidSystem(f"map {i} is not a contraction")
        if any(p <= 0 for p in probs):
            raise InvalidSystem("probabilities must be positive")
        if sum(probs) != 1:
            raise InvalidSystem(f"probabilities sum to {sum(probs)}, not 1")
        fixed = {s.b / (1 - s.a) for s in maps}
        if len(fixed) < 2:
            raise SingletonAttractor("all maps share a fixed point")

    def __len__(self):
        return len(self.maps)

    @property
    def ratios(self) -> tuple:
        return tuple(s.a for s in self.maps)

    @property
    def max_ratio_float(self) -> float:
        return max(abs(float(s.a)) for s in self.maps)

    def is_hull_normalized(self) -> bool:
        lo = min(s.image_of_unit()[0] for s in self.maps)
        hi = max(s.image_of_unit()[1] for s in self.maps)
        return lo == 0 and hi == 1


def normalize_hull(wifs: WIFS) -> WIFS:
    """Conjugate ``wifs`` by the affine map sending the attractor hull onto [0,1].

    The hull [u, v] is the fixed point of the hull-update map; each endpoint
    is attained by some map at some endpoint, so we try every assignment,
    solve the resulting 2x2 linear system and keep the one that validates.
    """
    F = wifs.field
    maps = wifs.maps
    n = len(maps)
    candidates = []
    for i, j in itertools.product(range(n), repeat=2):
        # u = S_i(u) if r_i > 0 else S_i(v);  v = S_j(v) if r_j > 0 else S_j(u)
        ri, di = maps[i].a, maps[i].b
        rj, dj = maps[j].a, maps[j].b
        # rows: [cu, cv] . [u, v] = rhs
        if ri.sign() > 0:
            row1 = (1 - ri, F.zero, di)
        else:
            row1 = (F.one, -ri, di)
        if rj.sign() > 0:
            row2 = (F.zero, 1 - rj, dj)
        else:
            row2 = (-rj, F.one, dj)
        det = row1[0] * row2[1] - row1[1] * row2[0]
        if det.is_zero():
            continue
        u = (row1[2] * row2[1] - row1[1] * row2[2]) / det
        v = (row1[0] * row2[2] - row1[2] * row2[0]) / det
        candidates.append((u, v))
    for u, v in candidates:
        if not u < v:
            continue
        lo = min(min(s(u), s(v)) for s in maps)
        hi = max(max(s(u), s(v)) for s in maps)
        if lo == u and hi == v:
            break
    else:
        raise SingletonAttractor("no nondegenerate hull found")
    if u == 0 and v == 1:
        return wifs
    phi = Similarity.affine_onto(u, v)  # [0,1] -> [u,v]
    phi_inv = phi.inverse()
    new_maps = tuple(phi_inv.compose(s).compose(phi) for s in maps)
    return WIFS(F, new_maps, wifs.probs)


def word_map(wifs: WIFS, w: Sequence[int]):
    """Return ``(S_w, p_w, r_w)`` for the word ``w`` (0-based letters)."""
    F = wifs.field
    s = Similarity.identity(F)
    p = Fraction(1)
    n = len(wifs)
    for letter in w:
        if not 0 <= letter < n:
            raise IndexOutOfRange(f"letter {letter} outside 0..{n - 1}")
        s = s.compose(wifs.maps[letter])
        p *= wifs.probs[letter]
    return s, p, s.a


# far above the rounding accumulated by composing contractions in floating point
_FLOAT_SLACK = 1e-9


def measure_oracle(wifs: WIFS, interval, depth: int) -> tuple[Fraction, Fraction]:
    """Brute-force bracket of mu(interval) from the images of [0,1] at ``depth``.

    ``lower`` sums p_s over words of length ``depth`` whose image lies inside
    the closed interval, ``upper`` over those whose image meets it.  Whole
    subtrees are settled as soon as an image is inside or disjoint, which
    gives the same sums as full enumeration.  Images are tracked in floating
    point and composed exactly only when a comparison is too close to call.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    F = wifs.field
    lo_i, hi_i = F.element(interval[0]), F.element(interval[1])
    lo_f, hi_f = float(lo_i), float(hi_i)
    fmaps = [(float(m.a), float(m.b)) for m in wifs.maps]

    def exact(node):
        chain = []
        while node[4] is None:
            chain.append(node)
            node = node[5]
        s = node[4]
        for nd in reversed(chain):
            s = s.compose(wifs.maps[nd[6]])
            nd[4] = s
        return s

    def below(node, v, t_f, t_e):
        # image endpoint v (0 = left, 1 = right) is < target
        a, b = node[0], node[1]
        left = (a > 0) == (v == 0)
        x = b if left else a + b
        if x < t_f - _FLOAT_SLACK:
            return True
        if x > t_f + _FLOAT_SLACK:
            return False
        s = exact(node)
        return (s.b if left else s.a + s.b) < t_e

    def above(node, v, t_f, t_e):
        a, b = node[0], node[1]
        left = (a > 0) == (v == 0)
        x = b if left else a + b
        if x > t_f + _FLOAT_SLACK:
            return True
        if x < t_f - _FLOAT_SLACK:
            return False
        s = exact(node)
        return (s.b if left else s.a + s.b) > t_e


    # a word's weight depends only on how often each letter occurs, so sums
    # are collected per letter count and multiplied out once at the end
    inside = {}
    meets = {}
    n = len(fmaps)
    # node: [a, b, letter counts, depth, exact similarity or None, parent, letter]
    stack = [[1.0, 0.0, (0,) * n, 0, Similarity.identity(F), None, None]]
    while stack:
        node = stack.pop()
        if below(node, 1, lo_f, lo_i) or above(node, 0, hi_f, hi_i):
            continue
        key = node[2]
        if not below(node, 0, lo_f, lo_i) and not above(node, 1, hi_f, hi_i):
            inside[key] = inside.get(key, 0) + 1
            meets[key] = meets.get(key, 0) + 1
            continue
        d = node[3]
        if d == depth:
            meets[key] = meets.get(key, 0) + 1
            continue
        a, b = node[0], node[1]
        for i, (ma, mb) in enumerate(fmaps):
            stack.append([a * ma, a * mb + b, key[:i] + (key[i] + 1,) + key[i + 1:], d + 1, None, node, i])

    powers = {}

    def total(counts):
        out = Fraction(0)
        for key, c in counts.items():
            w = Fraction(c)
            for i, e in enumerate(key):
                if e:
                    if (i, e) not in powers:
                        powers[i, e] = wifs.probs[i] ** e
                    w *= powers[i, e]
            out += w
        return out

    return total(inside), total(meets)
