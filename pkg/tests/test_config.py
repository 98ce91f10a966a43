import json
from fractions import Fraction

import pytest

from mfdecomp.config import (
    config_from_dict,
    config_to_json,
    example,
    parse_config,
)
from mfdecomp.errors import ConstraintViolation, ParseError, UnknownExample, ValidationError
from mfdecomp.examples import REGISTRY, build_example, cantor_overlap, lau_wang
from mfdecomp import examples
from mfdecomp.netintervals import IterationRule

MINIMAL = {"field": "rational", "maps": [["1/2", "0"], ["1/2", "1/2"]], "probs": "uniform"}
GOLDEN = {
    "field": {"minpoly": [-1, -1, 1], "bracket": [1, 2]},
    # lambda = theta - 1 as coefficients [c0, c1]
    "maps": [{"a": [-1, 1], "b": 0}, {"a": [-1, 1], "b": [2, -1]}],
    "probs": ["1/2", "1/2"],
}


def test_minimal_config():
    cfg = parse_config(json.dumps(MINIMAL))
    w = cfg.wifs()
    assert len(w) == 2 and w.probs == (Fraction(1, 2), Fraction(1, 2))
    assert cfg.iteration_rule is IterationRule.UNIFORM


def test_golden_config():
    cfg = parse_config(json.dumps(GOLDEN))
    w = cfg.wifs()
    lam = w.maps[0].a
    assert lam * lam + lam == 1
    assert w.maps[1].b == 1 - lam
    assert w.is_hull_normalized()


@pytest.mark.parametrize("patch,path", [
    ({"probs": ["1/2", "1/3"]}, "probs"),
    ({"probs": ["1/2"]}, "probs"),
    ({"maps": [["1/2", "0"], [0.5, "1/2"]]}, "maps[1].a"),
    ({"maps": [["3/2", "0"], ["1/2", "1/2"]]}, "maps[0].a"),
    ({"q_grid": [0, 1]}, "q_grid"),
    ({"caps": {"vertex": -3}}, "caps.vertex"),
    ({"iteration_rule": "spiral"}, "iteration_rule"),
    ({"outputs": ["pdf"]}, "outputs[0]"),
    ({"field": {"minpoly": [-1, -1, 1], "bracket": [2, 3]}}, "field"),
])
def test_validation_paths(patch, path):
    with pytest.raises(ValidationError) as info:
        config_from_dict({**MINIMAL, **patch})
    assert info.value.path == path


def test_unknown_top_level_key():
    with pytest.raises(ValidationError):
        config_from_dict({**MINIMAL, "colour": "red"})


def test_parse_error_location():
    with pytest.raises(ParseError) as info:
        parse_config('{"field": "rational",\n  "maps": [}')
    assert "line 2" in str(info.value)
    with pytest.raises(ParseError):
        parse_config(b"\xff\xfe")


def test_q_grid_object_form():
    cfg = config_from_dict({**MINIMAL, "q_grid": {"min": -2, "max": 2, "num": 5}})
    assert list(cfg.q_grid) == [-40.0, -2.0, -1.0, 0.0, 1.0, 2.0, 40.0]


def test_round_trip_is_stable():
    for name in sorted(REGISTRY):
        cfg = example(name, {})
        text = config_to_json(cfg)
        again = config_to_json(parse_config(text))
        assert text == again
        assert parse_config(text).wifs().maps == cfg.wifs().maps


def test_example_reference_in_config():
    cfg = config_from_dict({"example": {"name": "testud", "params": {"N": [1]}}, "caps": {"path": 1000}})
    assert len(cfg.wifs()) == 4 and cfg.path_cap == 1000


def test_example_families():
    w = cantor_overlap()
    assert [(m.a, m.b) for m in w.maps] == [(Fraction(1, 3), 0), (Fraction(1, 3), Fraction(2, 9)),
                                             (Fraction(1, 3), Fraction(2, 3))]
    t = examples.testud(3, [0, 1, 2], [1])
    assert len(t) == 4 and t.maps[3].a == Fraction(-1, 3) and t.maps[3].b == Fraction(2, 3)
    # k = 1 Lau-Wang maps coincide with the cantor-overlap system
    assert lau_wang(1).maps == w.maps
    with pytest.raises(ConstraintViolation):
        examples.testud(3, [1], [1])
    with pytest.raises(ConstraintViolation):
        lau_wang(2)
    with pytest.raises(UnknownExample):
        build_example("sierpinski")
    with pytest.raises(ConstraintViolation):
        example("testud", {"colour": 1})
