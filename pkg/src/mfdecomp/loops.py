"""Loop classes of the transition graph and the hypotheses checked on them."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .graph import TransitionGraph, realize_path

PROVEN = "proven"
UNKNOWN = "unknown"
NOT_DEGENERATE = "no"


def strongly_connected_components(n: int, succ: Sequence[Sequence[int]]) -> list:
    """Tarjan's algorithm, iterative; components come out sinks first."""
    index = [None] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    comps = []
    counter = 0
    for start in range(n):
        if index[start] is not None:
            continue
        work = [(start, 0)]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack[start] = True
        while work:
            v, i = work[-1]
            if i < len(succ[v]):
                work[-1] = (v, i + 1)
                w = succ[v][i]
                if index[w] is None:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    comps.append(sorted(comp))
    return comps


@dataclass
class LoopClassReport:
    id: int
    vertices: tuple
    edges: tuple
    essential: bool
    simple: bool
    irreducible: str = UNKNOWN
    irreducible_witness: str = ""
    degenerate: str = UNKNOWN
    degeneracy_witness: str = ""
    interior_path: Optional[tuple] = None
    scalar: bool = False  # every vertex has a single neighbour

    def contains(self, v: int) -> bool:
        return v in self.vertices

    def to_dict(self, g: TransitionGraph) -> dict:
        return {
            "id": self.id,
            "vertices": list(self.vertices),
            "edges": list(self.edges),
            "essential": self.essential,
            "simple": self.simple,
            "irreducible": self.irreducible,
            "irreducible_witness": self.irreducible_witness,
            "degenerate": self.degenerate,
            "degeneracy_witness": self.degeneracy_witness,
            "interior_path": None if self.interior_path is None else _labels(g, self.interior_path),
            "neighbour_set_sizes": [g.dim(v) for v in self.vertices],
        }


def _labels(g, edges):
    return [{"edge": k, "label": g.edges[k].label.exact_str()} for k in edges]


def loop_classes(g: TransitionGraph) -> list:
    """Loop classes in topological order (a path can only go from lower to higher id)."""
    n = len(g.vertices)
    succ = [[g.edges[k].target for k in g.out_edges[v]] for v in range(n)]
    comps = strongly_connected_components(n, succ)
    comps.reverse()  # Tarjan emits sinks first
    out = []
    for comp in comps:
        cs = set(comp)
        internal = tuple(
            k for v in comp for k in g.out_edges[v] if g.edges[k].target in cs
        )
        if not internal:
            continue
        leaves = any(g.edges[k].target not in cs for v in comp for k in g.out_edges[v])
        simple = all(
            sum(1 for k in g.out_edges[v] if g.edges[k].target in cs) == 1 for v in comp
        )
        scalar = all(g.dim(v) == 1 for v in comp)
        lc = LoopClassReport(len(out), tuple(comp), tuple(sorted(internal)), not leaves, simple, scalar=scalar)
        out.append(lc)
    return out


def class_of_vertex(classes) -> dict:
    return {v: lc.id for lc in classes for v in lc.vertices}


def _support_strongly_connected(nodes, arcs) -> bool:
    index = {x: i for i, x in enumerate(nodes)}
    succ = [[] for _ in nodes]
    for a, b in arcs:
        succ[index[a]].append(index[b])
    return len(strongly_connected_components(len(nodes), succ)) == 1


def check_irreducible(g: TransitionGraph, lc: LoopClassReport) -> str:
    """Proven when essential, or when the block matrix of the class is irreducible."""
    if lc.essential:
        lc.irreducible, lc.irreducible_witness = PROVEN, "essential class"
        return PROVEN
    nodes = [(v, i) for v in lc.vertices for i in range(g.dim(v))]
    arcs = []
    for k in lc.edges:
        e = g.edges[k]
        for i, row in enumerate(e.raw):
            for j, c in enumerate(row):
                if c > 0:
                    arcs.append(((e.source, i), (e.target, j)))
    if _support_strongly_connected(nodes, arcs):
        lc.irreducible, lc.irreducible_witness = PROVEN, "irreducible block matrix"
        return PROVEN
    lc.irreducible, lc.irreducible_witness = UNKNOWN, "block matrix support not strongly connected"
    return UNKNOWN


def _raw_product(g, edges):
    M = None
    for k in edges:
        R = g.edges[k].raw
        if M is None:
            M = [list(r) for r in R]
        else:
            M = [
                [sum((M[i][t] * R[t][j] for t in range(len(R))), Fraction(0)) for j in range(len(R[0]))]
                for i in range(len(M))
            ]
    return M


def _matrix_irreducible(M) -> bool:
    n = len(M)
    if n != len(M[0]):
        return False
    arcs = [(i, j) for i in range(n) for j in range(n) if M[i][j] > 0]
    return _support_strongly_connected(list(range(n)), arcs)


@dataclass
class DecomposabilityReport:
    status: str
    witness: str
    initial_paths: list
    transition_paths: list
    order: list
    failing_paths: list = field(default_factory=list)
    conditions: list = field(default_factory=list)

    def to_dict(self, g: TransitionGraph) -> dict:
        return {
            "status": self.status,
            "witness": self.witness,
            "conditions": list(self.conditions),
            "topological_order": self.order,
            "initial_paths": [list(p) for p in self.initial_paths],
            "transition_paths": [list(p) for p in self.transition_paths],
            "failing_paths": [list(p) for p in self.failing_paths],
        }


def _paths_to_loops(g, start_edges, cls, max_paths=100_000):
    """Extend each start edge through non-loop vertices until a loop vertex is hit."""
    out = []
    stack = [(k,) for k in reversed(start_edges)]
    while stack:
        p = stack.pop()
        v = g.edges[p[-1]].target
        if v in cls:
            out.append(p)
            if len(out) > max_paths:
                raise RuntimeError("too many transition paths to enumerate")
            continue
        for k in reversed(g.out_edges[v]):
            stack.append(p + (k,))
    return out


def initial_paths(g: TransitionGraph, classes) -> list:
    cls = class_of_vertex(classes)
    if g.root in cls:
        return [()]
    return _paths_to_loops(g, g.out_edges[g.root], cls)


def transition_paths(g: TransitionGraph, classes) -> list:
    cls = class_of_vertex(classes)
    starts = []
    for lc in classes:
        for v in lc.vertices:
            for k in g.out_edges[v]:
                if cls.get(g.edges[k].target) != lc.id:
                    starts.append(k)
    return _paths_to_loops(g, starts, cls)


def check_decomposable(g: TransitionGraph, classes) -> DecomposabilityReport:
    """Sufficient conditions for decomposability.

    Every condition is evaluated and the satisfied ones are listed in
    ``conditions``: "a" positive transition matrices, "b" size-one
    neighbour sets in non-essential classes, "c" simple non-essential
    classes with an irreducible cycle matrix.
    """
    init = initial_paths(g, classes)
    trans = transition_paths(g, classes)
    order = [lc.id for lc in classes]
    report = DecomposabilityReport(UNKNOWN, "", init, trans, order)
    if not trans:
        report.status, report.witness = PROVEN, "no transition paths"
        report.conditions = ["vacuous"]
        return report
    nonpos = [p for p in trans if any(c <= 0 for row in _raw_product(g, p) for c in row)]
    conds = []
    if not nonpos:
        conds.append("a")
    nonessential = [lc for lc in classes if not lc.essential]
    if all(g.dim(v) == 1 for lc in nonessential for v in lc.vertices):
        # a one-row matrix with a positive entry in every column is positive
        assert all(g.dim(g.edges[p[0]].source) == 1 for p in trans)
        assert not nonpos
        conds.append("b")
    if all(lc.simple for lc in nonessential) and all(
        _matrix_irreducible(_raw_product(g, simple_cycle(g, lc, lc.vertices[0])))
        for lc in nonessential
    ):
        conds.append("c")
    report.conditions = conds
    if conds:
        report.status = PROVEN
        report.witness = "; ".join(_CONDITION_TEXT[c] for c in conds)
    else:
        report.failing_paths = nonpos
    return report


_CONDITION_TEXT = {
    "a": "(a) strictly positive transition matrices",
    "b": "(b) size-one neighbour sets in non-essential classes",
    "c": "(c) simple classes with irreducible cycle matrices",
}


def simple_cycle(g: TransitionGraph, lc: LoopClassReport, v: int) -> tuple:
    """The unique cycle of a simple class starting and ending at ``v``."""
    cs = set(lc.vertices)
    path = []
    cur = v
    while True:
        k = next(k for k in g.out_edges[cur] if g.edges[k].target in cs)
        path.append(k)
        cur = g.edges[k].target
        if cur == v:
            return tuple(path)


@dataclass
class DecomposedPath:
    pieces: list  # (kind, class id or None, edges); kind in initial/loop/transition
    components: list  # per class in topological order, possibly empty

    def concat(self) -> tuple:
        return tuple(k for _, _, es in self.pieces for k in es)


def decompose_path(g: TransitionGraph, classes, edges: Sequence[int]) -> DecomposedPath:
    """Split a rooted path into initial, in-class and transition pieces."""
    cls = class_of_vertex(classes)
    pieces = []
    kind, cid, buf = "initial", None, []
    for k in edges:
        e = g.edges[k]
        cs, ct = cls.get(e.source), cls.get(e.target)
        inside = cs is not None and cs == ct
        if inside:
            if kind != "loop" or cid != cs:
                pieces.append((kind, cid, tuple(buf)))
                kind, cid, buf = "loop", cs, []
        elif kind == "loop":
            pieces.append((kind, cid, tuple(buf)))
            kind, cid, buf = "transition", None, []
        buf.append(k)
    pieces.append((kind, cid, tuple(buf)))
    comps = [()] * len(classes)
    for kd, c, es in pieces:
        if kd == "loop":
            comps[c] = es
    return DecomposedPath(pieces, comps)


def _edge_flags(e):
    """(moves off the left endpoint, stays off the right endpoint)."""
    return e.label.sign() > 0, (e.label + e.weight) != 1


def find_interior_path(g: TransitionGraph, lc: LoopClassReport, cap: Optional[int] = None):
    """Shortest cycle in the class whose realized interval is strictly nested.

    A chain ends strictly inside its first interval exactly when one edge
    leaves the left endpoint and one edge leaves the right endpoint, so the
    search runs over (vertex, flags) states.
    """
    cap = 2 * len(lc.vertices) if cap is None else cap
    cs = set(lc.vertices)
    best = None
    for v in lc.vertices:
        start = (v, False, False)
        parent = {start: None}
        q = deque([(start, 0)])
        found = None
        while q and found is None:
            state, depth = q.popleft()
            if depth >= cap:
                continue
            u, fl, fr = state
            for k in g.out_edges[u]:
                e = g.edges[k]
                if e.target not in cs:
                    continue
                a, b = _edge_flags(e)
                nxt = (e.target, fl or a, fr or b)
                if nxt in parent:
                    continue
                parent[nxt] = (state, k)
                if nxt == (v, True, True):
                    found = nxt
                    break
                q.append((nxt, depth + 1))
        if found is not None:
            path = []
            s = found
            while parent[s] is not None:
                s, k = parent[s]
                path.append(k)
            path = tuple(reversed(path))
            if best is None or len(path) < len(best):
                best = path
    return best


def is_interior_path(g: TransitionGraph, edges: Sequence[int]) -> bool:
    """True when the realized interval of ``edges`` sits strictly inside the first one."""
    left = right = False
    for k in edges:
        a, b = _edge_flags(g.edges[k])
        left, right = left or a, right or b
    return left and right


def interior_cycles(g: TransitionGraph, lc: LoopClassReport, max_len: int = 4,
                    max_cycles: int = 20_000) -> list:
    """Primitive interior cycles of length at most ``max_len``, one per rotation class."""
    cs = set(lc.vertices)
    order = {v: i for i, v in enumerate(lc.vertices)}
    found = []
    seen = set()
    for v0 in lc.vertices:
        stack = [(v0, ())]
        while stack and len(found) < max_cycles:
            v, path = stack.pop()
            for k in g.out_edges[v]:
                w = g.edges[k].target
                if w not in cs or order[w] < order[v0]:
                    continue
                cyc = path + (k,)
                if w == v0 and is_interior_path(g, cyc):
                    n = len(cyc)
                    canon = min(cyc[i:] + cyc[:i] for i in range(n))
                    primitive = all(cyc != cyc[d:] + cyc[:d] for d in range(1, n) if n % d == 0)
                    if primitive and canon not in seen:
                        seen.add(canon)
                        found.append(cyc)
                if len(cyc) < max_len:
                    stack.append((w, cyc))
    return found


def shortest_rooted_path(g: TransitionGraph, targets) -> tuple:
    """Shortest rooted edge sequence ending in one of ``targets`` (BFS, lowest edges first)."""
    targets = set(targets)
    if g.root in targets:
        return ()
    parent = {g.root: None}
    q = deque([g.root])
    while q:
        u = q.popleft()
        for k in g.out_edges[u]:
            w = g.edges[k].target
            if w in parent:
                continue
            parent[w] = (u, k)
            if w in targets:
                path = []
                while parent[w] is not None:
                    w, kk = parent[w]
                    path.append(kk)
                return tuple(reversed(path))
            q.append(w)
    raise ValueError("targets unreachable from the root")


def classify_degeneracy(g: TransitionGraph, lc: LoopClassReport) -> str:
    lc.interior_path = find_interior_path(g, lc)
    if not lc.simple:
        lc.degenerate, lc.degeneracy_witness = NOT_DEGENERATE, "non-simple class"
        return lc.degenerate
    if lc.interior_path is not None:
        lc.degenerate, lc.degeneracy_witness = NOT_DEGENERATE, "interior cycle"
        return lc.degenerate
    zeta = shortest_rooted_path(g, lc.vertices)
    end = g.edges[zeta[-1]].target if zeta else g.root
    cyc = simple_cycle(g, lc, end)
    lo, hi = realize_path(g, zeta)
    if all(g.edges[k].label == 0 for k in cyc) and lo == 0:
        lc.degenerate, lc.degeneracy_witness = NOT_DEGENERATE, "codes the hull endpoint 0"
    elif all(g.edges[k].label + g.edges[k].weight == 1 for k in cyc) and hi == 1:
        lc.degenerate, lc.degeneracy_witness = NOT_DEGENERATE, "codes the hull endpoint 1"
    else:
        lc.degenerate, lc.degeneracy_witness = UNKNOWN, "no interior witness"
    return lc.degenerate


def analyse_classes(g: TransitionGraph):
    """Loop classes with irreducibility and degeneracy filled, plus decomposability."""
    classes = loop_classes(g)
    for lc in classes:
        check_irreducible(g, lc)
        classify_degeneracy(g, lc)
    return classes, check_decomposable(g, classes)
