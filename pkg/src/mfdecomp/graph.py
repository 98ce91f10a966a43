"""Transition graph: closure over neighbour sets, masses and path measures."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import FncNotDetected, NonUniqueMass, NotRooted, SingularMassSystem
from .exact import AlgebraicReal
from .ifs import WIFS, Similarity
from .netintervals import (
    IterationRule,
    NeighbourSet,
    check_prefix_condition,
    subdivide,
)

DEFAULT_VERTEX_CAP = 10_000


@dataclass
class Edge:
    index: int
    source: int
    target: int
    label: AlgebraicReal  # position index of the child inside its parent
    weight: AlgebraicReal
    raw: tuple  # d(source) x d(target) rationals
    lift: dict
    matrix: Optional[tuple] = None  # normalized, filled by solve_masses
    log_weight: float = 0.0

    @property
    def raw_norm(self) -> Fraction:
        return sum((sum(row, Fraction(0)) for row in self.raw), Fraction(0))


@dataclass
class MassVector:
    """Neighbour masses m_f = mu(f^{-1}(0,1)) keyed by similarity."""

    by_similarity: dict

    def of(self, f: Similarity) -> Fraction:
        return self.by_similarity[f]

    def for_vertex(self, v: NeighbourSet) -> tuple:
        return tuple(self.by_similarity[f] for f in v)


@dataclass
class TransitionGraph:
    wifs: WIFS
    rule: IterationRule
    vertices: list
    edges: list
    out_edges: list
    masses: Optional[MassVector] = None
    root: int = 0
    index: dict = field(default_factory=dict)

    def dim(self, v: int) -> int:
        return len(self.vertices[v])

    def successors(self, v: int) -> list:
        return [self.edges[e] for e in self.out_edges[v]]

    def __len__(self):
        return len(self.vertices)


def build_graph(
    wifs: WIFS,
    rule=IterationRule.UNIFORM,
    vertex_cap: int = DEFAULT_VERTEX_CAP,
    depth_cap: Optional[int] = None,
    solve: bool = True,
    prefix_word_cap: int = 3,
) -> TransitionGraph:
    """Breadth-first closure of the transition graph from the root [0,1].

    Each neighbour set is expanded once; vertices are interned by the exact
    neighbour tuple.  Raises FncNotDetected when more than ``vertex_cap``
    vertices appear.
    """
    rule = IterationRule.parse(rule)
    root = NeighbourSet.root(wifs.field)
    vertices = [root]
    index = {root: 0}
    out_edges = [[]]
    edges = []
    queue = deque([0])
    while queue:
        v = queue.popleft()
        sub = subdivide(wifs, vertices[v], rule, depth_cap)
        for child in sub.children:
            w = index.get(child.nbset)
            if w is None:
                if len(vertices) >= vertex_cap:
                    raise FncNotDetected(
                        f"more than {vertex_cap} neighbour sets; frontier holds {len(queue) + 1}",
                        frontier_size=len(queue) + 1,
                        vertex_count=len(vertices),
                    )
                check_prefix_condition(wifs, child.nbset, prefix_word_cap)
                w = len(vertices)
                vertices.append(child.nbset)
                index[child.nbset] = w
                out_edges.append([])
                queue.append(w)
            e = Edge(
                index=len(edges),
                source=v,
                target=w,
                label=child.position,
                weight=child.weight,
                raw=child.raw,
                lift=child.lift,
                log_weight=child.weight.log(),
            )
            edges.append(e)
            out_edges[v].append(e.index)
    g = TransitionGraph(wifs, rule, vertices, edges, out_edges, index=index)
    if solve:
        solve_masses(g)
    return g


# ---------------------------------------------------------------------------
# neighbour masses

def _rref_solve(rows: list, ncols: int):
    """Exact Gauss-Jordan on augmented rows; returns (solution, rank, consistent)."""
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pr = rows[r]
        inv = 1 / pr[c]
        pr = [x * inv for x in pr]
        rows[r] = pr
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                ri = rows[i]
                rows[i] = [a - f * b for a, b in zip(ri, pr)]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    consistent = all(row[ncols] == 0 for row in rows[r:])
    sol = [Fraction(0)] * ncols
    for i, c in enumerate(pivots):
        sol[c] = rows[i][ncols]
    return sol, len(pivots), consistent


def solve_masses(g: TransitionGraph) -> MassVector:
    """Solve m_f = sum over children of raw-weighted child masses, with m_id = 1.

    Unknowns are keyed by similarity, so a map occurring as a neighbour of
    several vertices carries one mass.  The solve is exact over Q; normalized
    matrices T(e)_ij = raw_ij * m_{g_j} / m_{f_i} are filled afterwards.
    """
    sims = []
    col = {}
    for v in g.vertices:
        for f in v:
            if f not in col:
                col[f] = len(sims)
                sims.append(f)
    n = len(sims)
    rows = []
    for vi, v in enumerate(g.vertices):
        for i, f in enumerate(v):
            row = [Fraction(0)] * (n + 1)
            row[col[f]] += 1
            for e in g.successors(vi):
                tgt = g.vertices[e.target]
                for j, gj in enumerate(tgt):
                    c = e.raw[i][j]
                    if c:
                        row[col[gj]] -= c
            rows.append(row)
    pin = [Fraction(0)] * (n + 1)
    pin[col[g.vertices[g.root][0]]] = Fraction(1)
    pin[n] = Fraction(1)
    rows.append(pin)
    sol, rank, consistent = _rref_solve(rows, n)
    if not consistent:
        raise SingularMassSystem("mass equations are inconsistent")
    if rank < n:
        raise NonUniqueMass(f"mass solution space has dimension {n - rank}", nullity=n - rank)
    if any(m <= 0 for m in sol):
        raise SingularMassSystem("mass system has no strictly positive solution")
    masses = MassVector({f: sol[col[f]] for f in sims})
    for e in g.edges:
        ms = masses.for_vertex(g.vertices[e.source])
        mt = masses.for_vertex(g.vertices[e.target])
        e.matrix = tuple(
            tuple(e.raw[i][j] * mt[j] / ms[i] for j in range(len(mt))) for i in range(len(ms))
        )
    g.masses = masses
    return masses


# ---------------------------------------------------------------------------
# paths

@dataclass(frozen=True)
class PathRef:
    edges: tuple
    weight: AlgebraicReal
    vector: tuple  # row vector T(eta), length d(end vertex)
    end: int

    @property
    def measure(self) -> Fraction:
        return sum(self.vector, Fraction(0))

    def __len__(self):
        return len(self.edges)


def _check_path(g: TransitionGraph, edges: Sequence[int], start: int):
    cur = start
    for k in edges:
        e = g.edges[k]
        if e.source != cur:
            raise ValueError(f"edge {k} does not start at vertex {cur}")
        cur = e.target
    return cur


def _vec_mat(x, M):
    return tuple(sum((x[i] * M[i][j] for i in range(len(x))), Fraction(0)) for j in range(len(M[0])))


def make_path(g: TransitionGraph, edges: Sequence[int], start: Optional[int] = None,
              initial: Optional[tuple] = None) -> PathRef:
    """Build a path, caching W and the row vector of normalized matrices.

    Rooted by default; ``start``/``initial`` allow paths from another vertex
    with a given starting row vector.
    """
    if g.masses is None:
        solve_masses(g)
    start = g.root if start is None else start
    end = _check_path(g, edges, start)
    x = initial if initial is not None else (Fraction(1),) * (1 if start == g.root else g.dim(start))
    w = g.wifs.field.one
    for k in edges:
        e = g.edges[k]
        x = _vec_mat(x, e.matrix)
        w = w * e.weight
    return PathRef(tuple(edges), w, x, end)


def extend_path(g: TransitionGraph, p: PathRef, k: int) -> PathRef:
    e = g.edges[k]
    if e.source != p.end:
        raise ValueError("edge does not continue the path")
    return PathRef(p.edges + (k,), p.weight * e.weight, _vec_mat(p.vector, e.matrix), e.target)


def path_measure(g: TransitionGraph, path) -> Fraction:
    """mu of the net interval coded by a rooted path, as the sum of T(path)."""
    edges = path.edges if isinstance(path, PathRef) else tuple(path)
    if edges and g.edges[edges[0]].source != g.root:
        raise NotRooted("path does not start at the root")
    if isinstance(path, PathRef):
        return path.measure
    return make_path(g, edges).measure


def realize_path(g: TransitionGraph, edges: Sequence[int], interval=None):
    """Absolute endpoints of the net interval reached along ``edges``."""
    F = g.wifs.field
    lo, hi = (F.zero, F.one) if interval is None else interval
    for k in edges:
        e = g.edges[k]
        d = hi - lo
        lo = lo + d * e.label
        hi = lo + d * e.weight
    return lo, hi


def rooted_paths(g: TransitionGraph, depth: int):
    """All rooted paths of length 1..depth, as PathRef, breadth-first."""
    level = [make_path(g, ())]
    for _ in range(depth):
        nxt = []
        for p in level:
            for k in g.out_edges[p.end]:
                nxt.append(extend_path(g, p, k))
        yield from nxt
        level = nxt


# ---------------------------------------------------------------------------
# export

def _fmt(x: float) -> str:
    return f"{x:.12g}"


def vertex_name(v: int) -> str:
    return "root" if v == 0 else f"v{v}"


def export_dot(g: TransitionGraph) -> str:
    lines = ["digraph transition_graph {", "  rankdir=TB;"]
    for i, v in enumerate(g.vertices):
        label = f"{vertex_name(i)}\\n{v.short_label()}"
        lines.append(f'  {vertex_name(i)} [label="{label}"];')
    for e in g.edges:
        lab = f"q={_fmt(float(e.label))} W={_fmt(float(e.weight))} |T~|={_fmt(float(e.raw_norm))}"
        lines.append(f'  {vertex_name(e.source)} -> {vertex_name(e.target)} [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _num(x) -> dict:
    return {"exact": x.exact_str() if isinstance(x, AlgebraicReal) else str(x), "float": _fmt(float(x))}


def graph_to_dict(g: TransitionGraph) -> dict:
    out = {
        "field": g.wifs.field.to_dict(),
        "rule": g.rule.value,
        "vertices": [
            {
                "id": i,
                "name": vertex_name(i),
                "neighbours": [f.exact_str() for f in v],
                "masses": [str(m) for m in g.masses.for_vertex(v)] if g.masses else None,
            }
            for i, v in enumerate(g.vertices)
        ],
        "edges": [
            {
                "id": e.index,
                "source": e.source,
                "target": e.target,
                "label": _num(e.label),
                "weight": _num(e.weight),
                "raw_matrix": [[str(c) for c in row] for row in e.raw],
                "matrix": [[str(c) for c in row] for row in e.matrix] if e.matrix else None,
            }
            for e in g.edges
        ],
    }
    return out


def graph_to_json(g: TransitionGraph) -> str:
    return json.dumps(graph_to_dict(g), indent=2, sort_keys=True) + "\n"
