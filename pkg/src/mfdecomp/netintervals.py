"""Subdivision of net intervals under an iteration rule.

All work is done in the normalized coordinates of the parent interval: a net
interval with neighbour set v behaves like [0,1] with neighbours v, and its
children only depend on v.  :func:`children` maps results back to absolute
coordinates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import NeighbourInvariantError, RuleViolation, UndecidedGap
from .exact import AlgebraicReal
from .ifs import WIFS, Similarity, word_map


class IterationRule(enum.Enum):
    UNIFORM = "uniform"
    WEIGHTED = "weighted"

    @classmethod
    def parse(cls, value) -> "IterationRule":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class Tri(enum.Enum):
    YES = "yes"
    NO = "no"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class NeighbourSet:
    """Sorted, duplicate-free tuple of normalized neighbour similarities."""

    neighbours: tuple

    def __post_init__(self):
        nb = tuple(self.neighbours)
        object.__setattr__(self, "neighbours", nb)
        for f, g in zip(nb, nb[1:]):
            if not f < g:
                raise NeighbourInvariantError("neighbours must be strictly increasing")
        for f in nb:
            if abs(f.a) < 1:
                raise NeighbourInvariantError(f"neighbour {f.exact_str()} has |slope| < 1")

    @classmethod
    def root(cls, field) -> "NeighbourSet":
        return cls((Similarity.identity(field),))

    def __len__(self):
        return len(self.neighbours)

    def __iter__(self):
        return iter(self.neighbours)

    def __getitem__(self, i):
        return self.neighbours[i]

    def signature(self) -> str:
        return "{" + ", ".join(f.exact_str() for f in self.neighbours) + "}"

    def short_label(self) -> str:
        return "{" + ", ".join(f.float_str() for f in self.neighbours) + "}"


@dataclass(frozen=True)
class NetInterval:
    lo: AlgebraicReal
    hi: AlgebraicReal
    level: int
    nbset: NeighbourSet
    parent_edge: Optional[int] = None

    @property
    def diam(self) -> AlgebraicReal:
        return self.hi - self.lo

    def normalizer(self) -> Similarity:
        return Similarity.affine_onto(self.lo, self.hi)


@dataclass
class Child:
    """One child produced by subdivision.

    ``lo``/``hi`` are in the parent's normalized coordinates, so ``lo`` is the
    position index and ``hi - lo`` the weight.  ``raw[i][j]`` sums p_w over
    the lift words of parent neighbour i onto child neighbour j.
    """

    lo: AlgebraicReal
    hi: AlgebraicReal
    nbset: NeighbourSet
    lift: dict
    raw: tuple

    @property
    def position(self) -> AlgebraicReal:
        return self.lo

    @property
    def weight(self) -> AlgebraicReal:
        return self.hi - self.lo


@dataclass
class Subdivision:
    points: list
    candidates: list
    children: list
    collapses: int = 0
    trace: list = field(default_factory=list)


def rule_expand(rule: IterationRule, v: NeighbourSet, wifs: WIFS) -> list:
    """Word sets C_i, one per neighbour, as a list of tuples of words."""
    rule = IterationRule.parse(rule)
    letters = tuple((i,) for i in range(len(wifs)))
    if rule is IterationRule.UNIFORM:
        return [letters for _ in v]
    slopes = [abs(f.a) for f in v]
    top = max(slopes)
    return [letters if s == top else ((),) for s in slopes]


def default_depth_cap(wifs: WIFS, width: float, max_slope: float = 1.0) -> int:
    """Three times the word length after which images are narrower than ``width``."""
    r = wifs.max_ratio_float
    if width <= 0:
        return 3
    n0 = math.ceil(math.log(width / max(max_slope, 1e-300)) / math.log(r))
    return max(3, 3 * max(n0, 1))


def intersects_attractor(
    wifs: WIFS,
    open_interval,
    depth_cap: Optional[int] = None,
    generators: Optional[Sequence[Similarity]] = None,
) -> Tri:
    """Decide whether the open interval meets the union of g(K) over ``generators``.

    YES when some image endpoint g(S_w(z)), z in {0,1}, lies strictly inside.
    Images disjoint from the interval are dropped; images straddling it are
    refined.  NO when every branch dies out, UNDECIDED when a straddling image
    survives to ``depth_cap``.  ``generators`` defaults to the identity, i.e.
    the attractor K itself.
    """
    F = wifs.field
    lo, hi = F.element(open_interval[0]), F.element(open_interval[1])
    if generators is None:
        generators = [Similarity.identity(F)]
    if depth_cap is None:
        width = float(hi - lo)
        slope = max(abs(float(g.a)) for g in generators)
        depth_cap = default_depth_cap(wifs, width, slope)
    frontier = list(dict.fromkeys(generators))
    seen = set(frontier)
    undecided = False
    depth = 0
    while frontier:
        nxt = []
        for g in frontier:
            x, y = g.image_of_unit()
            if y <= lo or x >= hi:
                continue
            if lo < x < hi or lo < y < hi:
                return Tri.YES
            if depth >= depth_cap:
                undecided = True
                continue
            for m in wifs.maps:
                h = g.compose(m)
                if h not in seen:
                    seen.add(h)
                    nxt.append(h)
        frontier = nxt
        depth += 1
    return Tri.UNDECIDED if undecided else Tri.NO


def _one_step(wifs: WIFS, v: NeighbourSet, rule, depth_cap):
    F = wifs.field
    zero, one = F.zero, F.one
    words = rule_expand(rule, v, wifs)
    gens = []  # (i, word, g, p)
    for i, (f, Ci) in enumerate(zip(v, words)):
        if not Ci:
            raise RuleViolation(f"empty word set for neighbour {i}")
        for w in Ci:
            s, p, _ = word_map(wifs, w)
            gens.append((i, w, f.compose(s), p))
    pts = {zero, one}
    for _, _, g, _ in gens:
        for z in g.image_of_unit():
            if zero <= z <= one:
                pts.add(z)
    Y = sorted(pts)
    index = {y: k for k, y in enumerate(Y)}
    ncand = len(Y) - 1
    covering = [[] for _ in range(ncand)]
    for gi, (_, _, g, _) in enumerate(gens):
        x, y = g.image_of_unit()
        if y <= zero or x >= one:
            continue
        start = index[x] if x >= zero else 0
        end = index[y] if y <= one else ncand
        for k in range(start, end):
            covering[k].append(gi)
    kids = []
    candidates = []
    for k in range(ncand):
        a, b = Y[k], Y[k + 1]
        members = []
        pending = False
        # one shared depth cap per candidate
        width = float(b - a)
        for gi in covering[k]:
            g = gens[gi][2]
            cap = depth_cap or default_depth_cap(wifs, width, abs(float(g.a)))
            res = intersects_attractor(wifs, (a, b), cap, [g])
            if res is Tri.YES:
                members.append(gi)
            elif res is Tri.UNDECIDED:
                pending = True
        if pending:
            raise UndecidedGap(
                f"could not decide K-intersection of ({float(a):.12g}, {float(b):.12g})",
                interval=(a, b),
                depth_cap=depth_cap,
            )
        candidates.append((a, b, bool(members)))
        if not members:
            continue
        T_inv = Similarity.affine_onto(a, b).inverse()
        normed = {gi: T_inv.compose(gens[gi][2]) for gi in members}
        nb = NeighbourSet(tuple(sorted(set(normed.values()))))
        col = {f: j for j, f in enumerate(nb)}
        raw = [[Fraction(0)] * len(nb) for _ in v]
        lift = {}
        for gi in members:
            i, w, _, p = gens[gi]
            j = col[normed[gi]]
            raw[i][j] += p
            lift.setdefault((i, j), []).append(w)
        kids.append(Child(a, b, nb, {key: tuple(ws) for key, ws in lift.items()},
                          tuple(tuple(r) for r in raw)))
    return Y, candidates, kids


def _matmul(A, B):
    return tuple(
        tuple(sum((A[i][k] * B[k][j] for k in range(len(B))), Fraction(0)) for j in range(len(B[0])))
        for i in range(len(A))
    )


def subdivide(
    wifs: WIFS,
    v: NeighbourSet,
    rule=IterationRule.UNIFORM,
    depth_cap: Optional[int] = None,
    max_collapses: int = 64,
) -> Subdivision:
    """Children of a net interval with neighbour set ``v`` in normalized coordinates.

    When the only child is the whole interval, the interval is subdivided
    again from the child's neighbour set, composing lift words and raw
    matrices, until it splits.
    """
    d = len(v)
    acc_raw = tuple(tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d))
    acc_lift = {(i, i): ((),) for i in range(d)}
    cur = v
    trace = []
    for n_collapse in range(max_collapses + 1):
        Y, cands, kids = _one_step(wifs, cur, rule, depth_cap)
        trace.append({"neighbours": cur, "points": Y, "candidates": cands})
        if len(kids) == 1 and kids[0].lo == 0 and kids[0].hi == 1:
            k = kids[0]
            acc_lift = _compose_lifts(acc_lift, k.lift)
            acc_raw = _matmul(acc_raw, k.raw)
            cur = k.nbset
            continue
        if n_collapse:
            for k in kids:
                k.lift = _compose_lifts(acc_lift, k.lift)
                k.raw = _matmul(acc_raw, k.raw)
        return Subdivision(Y, cands, kids, n_collapse, trace)
    raise RuleViolation("subdivision keeps reproducing the parent interval")


def _compose_lifts(first: dict, second: dict) -> dict:
    out = {}
    for (i, k), ws1 in first.items():
        for (k2, j), ws2 in second.items():
            if k2 == k:
                out.setdefault((i, j), []).extend(w1 + w2 for w1 in ws1 for w2 in ws2)
    return {key: tuple(ws) for key, ws in out.items()}


def children(delta: NetInterval, wifs: WIFS, rule=IterationRule.UNIFORM, depth_cap=None):
    """Children of ``delta`` as ``(NetInterval, position, weight, lift, raw)`` tuples."""
    sub = subdivide(wifs, delta.nbset, rule, depth_cap)
    T = delta.normalizer()
    out = []
    for k in sub.children:
        iv = NetInterval(T(k.lo), T(k.hi), delta.level + 1, k.nbset)
        out.append((iv, k.position, k.weight, k.lift, k.raw))
    return out


def root_interval(wifs: WIFS) -> NetInterval:
    F = wifs.field
    return NetInterval(F.zero, F.one, 0, NeighbourSet.root(F))


def check_prefix_condition(wifs: WIFS, v: NeighbourSet, word_cap: int = 4) -> None:
    """Raise if some f1 o S_w equals another neighbour f2 with 1 <= |w| <= word_cap."""
    tol = 1e-9
    for f1 in v:
        for f2 in v:
            if f1 == f2:
                continue
            h = f1.inverse().compose(f2)
            target = abs(float(h.a))
            if target >= 1:
                continue
            stack = [(Similarity.identity(wifs.field), 1.0, 0)]
            while stack:
                s, r, n = stack.pop()
                if n and abs(r - target) <= tol * target and s == h:
                    raise NeighbourInvariantError(
                        f"neighbour {f2.exact_str()} is {f1.exact_str()} composed with a word"
                    )
                if n >= word_cap:
                    continue
                for m in wifs.maps:
                    r2 = r * abs(float(m.a))
                    if r2 >= target * (1 - tol):
                        stack.append((s.compose(m), r2, n + 1))


def subdivision_trace_json(sub: Subdivision) -> list:
    """Diagnostic dump of a subdivision: exact endpoints plus float approximations."""
    def num(x):
        return {"exact": x.exact_str(), "float": float(f"{float(x):.12g}")}

    steps = []
    for step in sub.trace:
        steps.append({
            "neighbours": [f.exact_str() for f in step["neighbours"]],
            "points": [num(y) for y in step["points"]],
            "candidates": [
                {"lo": num(a), "hi": num(b), "meets_attractor": keep}
                for a, b, keep in step["candidates"]
            ],
        })
    return steps
