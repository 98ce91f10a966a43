import itertools
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mfdecomp.errors import IndexOutOfRange, InvalidSystem, SingletonAttractor
from mfdecomp.examples import bernoulli_pisot_simple, cantor_overlap
from mfdecomp.exact import field_make, rational_field
from mfdecomp.ifs import WIFS, Similarity, measure_oracle, normalize_hull, word_map

Q = rational_field()
e = Q.element


def sim(a, b):
    return Similarity(e(Fraction(a)), e(Fraction(b)))


def test_order_is_lexicographic_on_slope_then_offset():
    maps = [sim("1/3", "2/3"), sim("-1/3", 1), sim("1/3", 0), sim("1/2", 0)]
    ordered = sorted(maps)
    assert [(str(m.a), str(m.b)) for m in ordered] == [("-1/3", "1"), ("1/3", "0"), ("1/3", "2/3"), ("1/2", "0")]


def test_compose_inverse_and_image():
    f, g = sim("1/3", "2/9"), sim(-2, 1)
    fg = f.compose(g)
    assert fg(e(Fraction(1, 2))) == f(g(e(Fraction(1, 2))))
    ident = f.compose(f.inverse())
    assert ident.a == 1 and ident.b == 0
    assert g.image_of_unit() == (e(-1), e(1))


def test_zero_slope_rejected():
    with pytest.raises(InvalidSystem):
        sim(0, 1)


@pytest.mark.parametrize("maps,probs,exc", [
    ([("1", "0"), ("1/2", "1/2")], ["1/2", "1/2"], InvalidSystem),
    ([("-1", "1"), ("1/2", "0")], ["1/2", "1/2"], InvalidSystem),
    ([("1/2", "0"), ("1/2", "1/2")], ["1/2", "1/3"], InvalidSystem),
    ([("1/2", "0"), ("1/2", "1/2")], ["1", "0"], InvalidSystem),
    ([("1/2", "0"), ("1/3", "0")], ["1/2", "1/2"], SingletonAttractor),
])
def test_wifs_validation(maps, probs, exc):
    with pytest.raises(exc):
        WIFS(Q, [sim(a, b) for a, b in maps], [Fraction(p) for p in probs])


def test_word_map_composes_left_to_right():
    w = WIFS(Q, [sim("1/3", 0), sim("1/3", "2/3")], [Fraction(1, 4), Fraction(3, 4)])
    s, p, r = word_map(w, (1, 0))
    # S_1(S_0(x)) = (x/3)/3 + 2/3
    assert s.a == Fraction(1, 9) and s.b == Fraction(2, 3)
    assert p == Fraction(3, 16) and r == Fraction(1, 9)
    with pytest.raises(IndexOutOfRange):
        word_map(w, (2,))


def test_normalize_hull_rescales():
    w = WIFS(Q, [sim("1/2", 0), sim("1/2", 1)], [Fraction(1, 2)] * 2)
    n = normalize_hull(w)
    assert n.is_hull_normalized()
    assert [(m.a, m.b) for m in n.maps] == [(e(Fraction(1, 2)), e(0)), (e(Fraction(1, 2)), e(Fraction(1, 2)))]


def test_normalize_hull_with_reflections():
    # hull of {-x/3 + 1, x/3 + 2} is [3/4, 3], found from the 2x2 endpoint system
    w = WIFS(Q, [sim("-1/3", 1), sim("1/3", 2)], [Fraction(1, 2)] * 2)
    n = normalize_hull(w)
    assert n.is_hull_normalized()


def test_normalize_hull_in_golden_field():
    F = field_make([-1, -1, 1], (1, 2))
    lam = F.theta - 1
    w = WIFS(F, [Similarity(lam, F.zero), Similarity(lam, F.one)], [Fraction(1, 2)] * 2)
    n = normalize_hull(w)
    assert n.is_hull_normalized()
    assert n.maps[1].b == 1 - lam


def _float_hull(w, depth=7):
    pts = []
    level = [(1.0, 0.0)]
    for _ in range(depth):
        level = [(a * float(m.a), a * float(m.b) + b) for a, b in level for m in w.maps]
    for a, b in level:
        pts += [b, a + b]
    return min(pts), max(pts)


contraction = st.fractions(min_value=Fraction(-3, 4), max_value=Fraction(3, 4), max_denominator=12)
offset = st.fractions(min_value=-2, max_value=2, max_denominator=12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(contraction, offset), min_size=2, max_size=4))
def test_normalize_hull_property(pairs):
    assume(all(a != 0 for a, _ in pairs))
    try:
        w = WIFS(Q, [sim(a, b) for a, b in pairs], [Fraction(1, len(pairs))] * len(pairs))
    except SingletonAttractor:
        return
    n = normalize_hull(w)
    assert n.is_hull_normalized()
    lo, hi = _float_hull(n)
    assert -1e-9 <= lo <= 0.75 ** 7 + 1e-9
    assert 1 - 0.75 ** 7 - 1e-9 <= hi <= 1 + 1e-9


def test_measure_oracle_lebesgue():
    w = WIFS(Q, [sim("1/2", 0), sim("1/2", "1/2")], [Fraction(1, 2)] * 2)
    # the neighbours [0, 1/4] and [3/4, 1] touch the closed interval, so they count for upper
    assert measure_oracle(w, (Fraction(1, 4), Fraction(3, 4)), 2) == (Fraction(1, 2), Fraction(1))
    lo, hi = measure_oracle(w, (Fraction(1, 3), Fraction(1, 2)), 10)
    assert lo <= Fraction(1, 6) <= hi and hi - lo <= Fraction(2, 2 ** 10)


@settings(max_examples=25, deadline=None)
@given(a=st.fractions(min_value=0, max_value=1, max_denominator=20),
       b=st.fractions(min_value=0, max_value=1, max_denominator=20))
def test_measure_oracle_brackets_nest(a, b):
    lo_i, hi_i = min(a, b), max(a, b)
    w = WIFS(Q, [sim("1/3", 0), sim("1/3", "2/9"), sim("1/3", "2/3")], [Fraction(1, 3)] * 3)
    prev = (Fraction(0), Fraction(1))
    for d in range(0, 6):
        cur = measure_oracle(w, (lo_i, hi_i), d)
        assert prev[0] <= cur[0] <= cur[1] <= prev[1]
        prev = cur


def _enumerated_bracket(w, interval, depth):
    lo, hi = (w.field.element(x) for x in interval)
    lower = upper = Fraction(0)
    for word in itertools.product(range(len(w)), repeat=depth):
        s, p, _ = word_map(w, word)
        x, y = s.image_of_unit()
        if y < lo or x > hi:
            continue
        upper += p
        if lo <= x and y <= hi:
            lower += p
    return lower, upper


@pytest.mark.parametrize("system", ["cantor", "golden", "reflected"])
def test_measure_oracle_matches_full_enumeration(system):
    Q = rational_field()
    if system == "cantor":
        w = cantor_overlap()
        cuts = [Fraction(0), Fraction(2, 9), Fraction(1, 3), Fraction(5, 9), Fraction(7, 27), Fraction(1)]
    elif system == "reflected":
        w = WIFS(Q, [Similarity(Q.element(Fraction(-1, 3)), Q.element(Fraction(1, 3))),
                     Similarity(Q.element(Fraction(1, 2)), Q.element(Fraction(1, 2)))],
                 [Fraction(1, 4), Fraction(3, 4)])
        cuts = [Fraction(0), Fraction(1, 9), Fraction(1, 3), Fraction(1, 2), Fraction(3, 4), Fraction(1)]
    else:
        w = bernoulli_pisot_simple(2, Fraction(1, 3))
        lam = w.maps[0].a
        cuts = [w.field.zero, lam * lam, 1 - lam, lam, w.field.one]
    for a, b in itertools.combinations(cuts, 2):
        a, b = min(a, b), max(a, b)
        assert measure_oracle(w, (a, b), 6) == _enumerated_bracket(w, (a, b), 6)
