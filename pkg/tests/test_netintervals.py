import json
from fractions import Fraction

import pytest

from mfdecomp.errors import NeighbourInvariantError, UndecidedGap
from mfdecomp.examples import bernoulli_pisot_simple, cantor_overlap, lau_wang
from mfdecomp.exact import rational_field
from mfdecomp.graph import build_graph
from mfdecomp.ifs import Similarity
from mfdecomp.netintervals import (
    IterationRule,
    NeighbourSet,
    Tri,
    children,
    intersects_attractor,
    root_interval,
    rule_expand,
    subdivide,
    subdivision_trace_json,
)

Q = rational_field()


def test_cantor_overlap_root_subdivision():
    w = cantor_overlap()
    sub = subdivide(w, NeighbourSet.root(Q))
    assert [y.exact_str() for y in sub.points] == ["0", "2/9", "1/3", "5/9", "2/3", "1"]
    spans = [(k.lo.exact_str(), k.hi.exact_str()) for k in sub.children]
    assert spans == [("0", "2/9"), ("2/9", "1/3"), ("1/3", "5/9"), ("2/3", "1")]
    overlap = sub.children[1].nbset
    assert [(f.a, f.b) for f in overlap] == [(3, -2), (3, 0)]
    # (5/9, 2/3) is a gap of K
    assert [c[2] for c in sub.candidates] == [True, True, True, False, True]


def test_children_in_absolute_coordinates():
    w = cantor_overlap()
    kids = children(root_interval(w), w)
    second = kids[1][0]
    assert (second.lo, second.hi, second.level) == (Fraction(2, 9), Fraction(1, 3), 1)
    # grandchildren of [2/9, 1/3] stay inside it
    for iv, *_ in children(second, w):
        assert second.lo <= iv.lo < iv.hi <= second.hi


def test_raw_matrix_of_overlap_child():
    w = cantor_overlap()
    k = subdivide(w, NeighbourSet.root(Q)).children[1]
    # both S_0 and S_1 reach [2/9, 1/3] from the root neighbour, each with weight 1/3
    assert k.raw == ((Fraction(1, 3), Fraction(1, 3)),)
    assert set(k.lift) == {(0, 0), (0, 1)}


def test_intersects_attractor():
    w = cantor_overlap()
    assert intersects_attractor(w, (Fraction(5, 9), Fraction(2, 3))) is Tri.NO
    assert intersects_attractor(w, (Fraction(0), Fraction(1, 9))) is Tri.YES
    assert intersects_attractor(w, (Fraction(1, 2), Fraction(7, 12))) is Tri.YES


def test_undecided_gap_is_raised():
    w = bernoulli_pisot_simple(2)
    with pytest.raises(UndecidedGap) as info:
        build_graph(w, depth_cap=1)
    lo, hi = info.value.interval
    assert lo < hi


def test_neighbour_set_invariants():
    e = Q.element
    with pytest.raises(NeighbourInvariantError):
        NeighbourSet((Similarity(e(3), e(0)), Similarity(e(2), e(0))))
    with pytest.raises(NeighbourInvariantError):
        NeighbourSet((Similarity(e(Fraction(1, 2)), e(0)),))


def test_weighted_rule_expands_only_the_largest_neighbours():
    w = lau_wang(1, Fraction(1, 3), Fraction(1, 4))
    e = Q.element
    v = NeighbourSet((Similarity(e(3), e(0)), Similarity(e(4), e(-1))))
    words = rule_expand(IterationRule.WEIGHTED, v, w)
    assert words[0] == ((),)
    assert words[1] == tuple((i,) for i in range(len(w)))
    assert rule_expand("uniform", v, w)[0] == words[1]


def test_collapse_composes_raw_matrices():
    w = lau_wang(1, Fraction(1, 3), Fraction(1, 4))
    g = build_graph(w, "weighted")
    found = False
    for v in g.vertices:
        sub = subdivide(g.wifs, v, "weighted")
        if sub.collapses:
            found = True
            assert len(sub.trace) == sub.collapses + 1
            spans = [(k.lo, k.hi) for k in sub.children]
            assert len(spans) > 1
            for (a, b), (c, d) in zip(spans, spans[1:]):
                assert a < b <= c < d
            for k in sub.children:
                assert len(k.raw) == len(v) and all(len(r) == len(k.nbset) for r in k.raw)
    assert found


def test_subdivision_trace_is_json_serializable():
    w = cantor_overlap()
    trace = subdivision_trace_json(subdivide(w, NeighbourSet.root(Q)))
    text = json.dumps(trace, sort_keys=True)
    assert "2/9" in text
