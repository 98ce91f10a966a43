import json
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from mfdecomp.errors import FncNotDetected, NotRooted
from mfdecomp.examples import bernoulli_pisot_simple, cantor_overlap
from mfdecomp.graph import (
    _rref_solve,
    build_graph,
    export_dot,
    extend_path,
    graph_to_json,
    make_path,
    path_measure,
    realize_path,
    rooted_paths,
)
from mfdecomp.ifs import measure_oracle
from mfdecomp.netintervals import children, root_interval


def test_golden_graph_shape(golden):
    g, classes, _ = golden
    assert len(g.vertices) == 5
    assert [g.dim(v) for v in range(5)] == [1, 1, 2, 1, 1]
    # each vertex has children whose spans tile the attractor part of [0, 1]
    for v in range(5):
        spans = sorted((g.edges[k].label, g.edges[k].label + g.edges[k].weight) for k in g.out_edges[v])
        assert spans[0][0] == 0 and spans[-1][1] == 1


def test_masses_are_positive_and_pinned(golden):
    g = golden[0]
    root = g.vertices[g.root][0]
    assert g.masses.of(root) == 1
    assert all(m > 0 for m in g.masses.by_similarity.values())


@pytest.mark.parametrize("fixture", ["golden", "cantor", "testud_graph"])
def test_children_sum_to_parent(fixture, request):
    g = request.getfixturevalue(fixture)[0]
    for p in rooted_paths(g, 6):
        kids = [extend_path(g, p, k).measure for k in g.out_edges[p.end]]
        assert sum(kids) == p.measure


@pytest.mark.parametrize("fixture", ["golden", "cantor"])
def test_level_measures_sum_to_one(fixture, request):
    g = request.getfixturevalue(fixture)[0]
    by_len = {}
    for p in rooted_paths(g, 7):
        by_len[len(p)] = by_len.get(len(p), Fraction(0)) + p.measure
    assert set(by_len.values()) == {Fraction(1)}


def test_path_measure_within_oracle_bracket(cantor):
    g = cantor[0]
    for p in rooted_paths(g, 4):
        lo, hi = realize_path(g, p.edges)
        a, b = measure_oracle(g.wifs, (lo, hi), 9)
        assert a <= p.measure <= b


def test_realize_path_matches_children(cantor):
    g = cantor[0]
    w = g.wifs
    kids = children(root_interval(w), w)
    for (iv, *_), k in zip(kids, g.out_edges[g.root]):
        assert realize_path(g, (k,)) == (iv.lo, iv.hi)


def test_path_errors(golden):
    g = golden[0]
    k = g.out_edges[2][0]
    with pytest.raises(ValueError):
        make_path(g, (k,))
    with pytest.raises(NotRooted):
        path_measure(g, (k,))


def test_vertex_cap():
    with pytest.raises(FncNotDetected) as info:
        build_graph(bernoulli_pisot_simple(2), vertex_cap=3)
    assert info.value.vertex_count == 3


def test_exports_are_deterministic():
    a = build_graph(cantor_overlap())
    b = build_graph(cantor_overlap())
    assert export_dot(a) == export_dot(b)
    assert graph_to_json(a) == graph_to_json(b)
    d = json.loads(graph_to_json(a))
    assert d["vertices"][0]["masses"] == ["1"]
    assert export_dot(a).startswith("digraph transition_graph {")


rational = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=5).flatmap(
    lambda n: st.lists(st.lists(rational, min_size=n + 1, max_size=n + 1), min_size=1, max_size=n + 2)
    .map(lambda rows: (n, rows))))
def test_rref_against_sympy(data):
    n, rows = data
    sol, rank, consistent = _rref_solve(rows, n)
    M = sympy.Matrix([[sympy.Rational(c.numerator, c.denominator) for c in r] for r in rows])
    A = M[:, :n]
    assert rank == A.rank()
    assert consistent == (M.rank() == A.rank())
    if consistent:
        x = sympy.Matrix([sympy.Rational(c.numerator, c.denominator) for c in sol])
        assert A * x == M[:, n]
