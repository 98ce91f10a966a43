"""JSON analysis configurations: parsing, validation and serialization.

A config names a number field, the maps and weights of the system and the
knobs of the pipeline.  Field elements are written as a rational (``3``,
``"1/3"``) or as a list of rational coefficients in the field generator,
lowest power first (``[-1, 1]`` is theta - 1).  Alternatively a config may
reference a shipped example by name::

    {"example": {"name": "testud", "params": {"ell": 3}}, "outputs": ["verdict-json"]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (
    ConstraintViolation,
    MfError,
    ParseError,
    UnknownExample,
    ValidationError,
)
from .examples import build_example
from .exact import AlgebraicReal, NumberField, as_fraction, field_make, rational_field
from .graph import DEFAULT_VERTEX_CAP
from .ifs import WIFS, Similarity
from .netintervals import IterationRule
from .spectra import DEFAULT_PATH_CAP, default_q_grid

OUTPUTS = ("dot", "graph-json", "spectra-csv", "verdict-json", "subdivision-trace")
DEFAULT_OUTPUTS = ("spectra-csv", "verdict-json")
_TOP_KEYS = {"field", "maps", "probs", "iteration_rule", "caps", "q_grid", "t_schedule",
             "outputs", "example", "name", "normalize_hull"}


@dataclass
class AnalysisConfig:
    field: NumberField
    maps: list
    probs: list
    iteration_rule: IterationRule = IterationRule.UNIFORM
    vertex_cap: int = DEFAULT_VERTEX_CAP
    depth_cap: Optional[int] = None
    path_cap: int = DEFAULT_PATH_CAP
    q_grid: np.ndarray = field(default_factory=default_q_grid)
    max_thresholds: int = 200
    outputs: tuple = DEFAULT_OUTPUTS
    name: str = ""
    source: Optional[dict] = None  # example name/params when generated from the registry
    normalize_hull: bool = True

    def wifs(self) -> WIFS:
        return WIFS(self.field, tuple(self.maps), tuple(self.probs))

    def to_dict(self) -> dict:
        return config_to_dict(self)


# ---------------------------------------------------------------------------
# element and field parsing

def _rational(x, path: str) -> Fraction:
    if isinstance(x, float):
        raise ValidationError("floats are not exact; write a rational as \"p/q\"", path)
    try:
        return as_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ValidationError(f"expected a rational, got {x!r}", path) from None


def parse_element(F: NumberField, x, path: str) -> AlgebraicReal:
    if isinstance(x, list):
        if not x:
            raise ValidationError("empty coefficient list", path)
        return F.from_coeffs([_rational(c, f"{path}[{i}]") for i, c in enumerate(x)])
    return F.element(_rational(x, path))


def element_to_json(x: AlgebraicReal):
    if x.is_rational():
        return str(x.coeffs[0])
    return [str(c) for c in x.coeffs]


def parse_field(value, path: str = "field") -> NumberField:
    if value is None or value == "rational":
        return rational_field()
    if not isinstance(value, dict):
        raise ValidationError("expected \"rational\" or an object with minpoly and bracket", path)
    for key in ("minpoly", "bracket"):
        if key not in value:
            raise ValidationError(f"missing {key}", path)
    mp = value["minpoly"]
    br = value["bracket"]
    if not isinstance(mp, list) or len(mp) < 2:
        raise ValidationError("minpoly must list at least two coefficients", f"{path}.minpoly")
    if not isinstance(br, list) or len(br) != 2:
        raise ValidationError("bracket must be [lo, hi]", f"{path}.bracket")
    coeffs = [_rational(c, f"{path}.minpoly[{i}]") for i, c in enumerate(mp)]
    lo, hi = (_rational(c, f"{path}.bracket[{i}]") for i, c in enumerate(br))
    try:
        return field_make(coeffs, (lo, hi))
    except (MfError, ValueError) as exc:
        raise ValidationError(str(exc), path) from None


def field_to_json(F: NumberField):
    if F.degree == 1 and F.minpoly == (Fraction(0), Fraction(1)):
        return "rational"
    return {"minpoly": [str(c) for c in F.minpoly],
            "bracket": [str(c) for c in F.initial_bracket]}


# ---------------------------------------------------------------------------
# grids and caps

def _positive_int(x, path: str, allow_none: bool = False):
    if x is None and allow_none:
        return None
    if isinstance(x, bool) or not isinstance(x, int) or x <= 0:
        raise ValidationError(f"expected a positive integer, got {x!r}", path)
    return x


def parse_q_grid(value, path: str = "q_grid") -> np.ndarray:
    """Explicit list of values, or {"min", "max", "num", "extra"}."""
    if value is None:
        return default_q_grid()
    if isinstance(value, list):
        vals = []
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                raise ValidationError(f"expected a number, got {v!r}", f"{path}[{i}]")
            vals.append(float(Fraction(v)) if isinstance(v, str) else float(v))
    elif isinstance(value, dict):
        unknown = set(value) - {"min", "max", "num", "extra"}
        if unknown:
            raise ValidationError(f"unknown keys {sorted(unknown)}", path)
        lo, hi = value.get("min", -10), value.get("max", 10)
        num = _positive_int(value.get("num", 81), f"{path}.num")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (lo, hi)):
            raise ValidationError("min and max must be numbers", path)
        if not lo < hi:
            raise ValidationError("min must be below max", path)
        extra = value.get("extra", [-40, 40])
        if not isinstance(extra, list):
            raise ValidationError("extra must be a list", f"{path}.extra")
        vals = list(np.linspace(lo, hi, num)) + [float(v) for v in extra]
    else:
        raise ValidationError("expected a list or an object", path)
    q = np.unique(np.asarray(vals, float))
    if len(q) < 3:
        raise ValidationError("need at least three distinct q values", path)
    if not np.all(np.isfinite(q)):
        raise ValidationError("q values must be finite", path)
    return q


def _q_grid_to_json(q: np.ndarray):
    return [float(f"{v:.12g}") for v in q]


# ---------------------------------------------------------------------------
# the config itself

def _parse_maps(F, maps, path="maps") -> list:
    if not isinstance(maps, list) or not maps:
        raise ValidationError("expected a nonempty list of maps", path)
    out = []
    for i, m in enumerate(maps):
        p = f"{path}[{i}]"
        if isinstance(m, list) and len(m) == 2:
            a, b = m
        elif isinstance(m, dict) and set(m) <= {"a", "b"} and "a" in m:
            a, b = m["a"], m.get("b", 0)
        else:
            raise ValidationError("a map is {\"a\": ..., \"b\": ...} or [a, b]", p)
        ea = parse_element(F, a, f"{p}.a")
        eb = parse_element(F, b, f"{p}.b")
        if ea.is_zero():
            raise ValidationError("slope must be nonzero", f"{p}.a")
        if not abs(ea) < 1:
            raise ValidationError("map is not a contraction", f"{p}.a")
        out.append(Similarity(ea, eb))
    return out


def _parse_probs(probs, n: int, path="probs") -> list:
    if probs is None or probs == "uniform":
        return [Fraction(1, n)] * n
    if not isinstance(probs, list):
        raise ValidationError("expected a list of rationals or \"uniform\"", path)
    if len(probs) != n:
        raise ValidationError(f"expected {n} probabilities, got {len(probs)}", path)
    ps = [_rational(p, f"{path}[{i}]") for i, p in enumerate(probs)]
    for i, p in enumerate(ps):
        if p <= 0:
            raise ValidationError("probabilities must be positive", f"{path}[{i}]")
    if sum(ps) != 1:
        raise ValidationError(f"probabilities sum to {sum(ps)}, not 1", path)
    return ps


def _parse_outputs(value, path="outputs") -> tuple:
    if value is None:
        return DEFAULT_OUTPUTS
    if value == "all":
        return OUTPUTS
    if not isinstance(value, list):
        raise ValidationError("expected a list of output names", path)
    for i, o in enumerate(value):
        if o not in OUTPUTS:
            raise ValidationError(f"unknown output {o!r}; known: {list(OUTPUTS)}", f"{path}[{i}]")
    return tuple(o for o in OUTPUTS if o in value)


def config_from_dict(d: dict) -> AnalysisConfig:
    if not isinstance(d, dict):
        raise ValidationError("top level must be an object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}")
    source = None
    if "example" in d:
        ex = d["example"]
        if not isinstance(ex, dict) or "name" not in ex:
            raise ValidationError("expected {\"name\": ..., \"params\": {...}}", "example")
        if any(k in d for k in ("field", "maps", "probs")):
            raise ValidationError("give either an example or field/maps/probs", "example")
        params = ex.get("params", {})
        if not isinstance(params, dict):
            raise ValidationError("params must be an object", "example.params")
        try:
            w = build_example(ex["name"], params)
        except UnknownExample as exc:
            raise ValidationError(str(exc), "example.name") from None
        except (ConstraintViolation, MfError, TypeError, ValueError) as exc:
            raise ValidationError(str(exc), "example.params") from None
        F, maps, probs = w.field, list(w.maps), list(w.probs)
        source = {"example": ex["name"], "params": params}
    else:
        if "maps" not in d:
            raise ValidationError("missing maps")
        F = parse_field(d.get("field"))
        maps = _parse_maps(F, d["maps"])
        probs = _parse_probs(d.get("probs"), len(maps))
    rule = d.get("iteration_rule", "uniform")
    try:
        rule = IterationRule.parse(rule)
    except ValueError:
        raise ValidationError(f"unknown rule {rule!r}", "iteration_rule") from None
    caps = d.get("caps", {})
    if not isinstance(caps, dict):
        raise ValidationError("expected an object", "caps")
    unknown = set(caps) - {"vertex", "depth", "path"}
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", "caps")
    ts = d.get("t_schedule", {})
    if not isinstance(ts, dict) or set(ts) - {"max_thresholds"}:
        raise ValidationError("expected {\"max_thresholds\": n}", "t_schedule")
    normalize = d.get("normalize_hull", True)
    if not isinstance(normalize, bool):
        raise ValidationError("expected true or false", "normalize_hull")
    cfg = AnalysisConfig(
        field=F,
        maps=maps,
        probs=probs,
        iteration_rule=rule,
        vertex_cap=_positive_int(caps.get("vertex", DEFAULT_VERTEX_CAP), "caps.vertex"),
        depth_cap=_positive_int(caps.get("depth"), "caps.depth", allow_none=True),
        path_cap=_positive_int(caps.get("path", DEFAULT_PATH_CAP), "caps.path"),
        q_grid=parse_q_grid(d.get("q_grid")),
        max_thresholds=_positive_int(ts.get("max_thresholds", 200), "t_schedule.max_thresholds"),
        outputs=_parse_outputs(d.get("outputs")),
        name=str(d.get("name", source["example"] if source else "")),
        source=source,
        normalize_hull=normalize,
    )
    try:
        cfg.wifs()
    except MfError as exc:
        raise ValidationError(str(exc), "maps") from None
    return cfg


def parse_config(text) -> AnalysisConfig:
    """Parse and validate JSON text; errors carry the offending field path."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(d)


def config_to_dict(cfg: AnalysisConfig) -> dict:
    d = {
        "field": field_to_json(cfg.field),
        "maps": [{"a": element_to_json(m.a), "b": element_to_json(m.b)} for m in cfg.maps],
        "probs": [str(p) for p in cfg.probs],
        "iteration_rule": cfg.iteration_rule.value,
        "caps": {"vertex": cfg.vertex_cap, "depth": cfg.depth_cap, "path": cfg.path_cap},
        "q_grid": _q_grid_to_json(cfg.q_grid),
        "t_schedule": {"max_thresholds": cfg.max_thresholds},
        "outputs": list(cfg.outputs),
        "normalize_hull": cfg.normalize_hull,
    }
    if cfg.name:
        d["name"] = cfg.name
    return d


def config_to_json(cfg: AnalysisConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def config_from_wifs(w: WIFS, name: str = "", source: Optional[dict] = None, **kwargs) -> AnalysisConfig:
    return AnalysisConfig(field=w.field, maps=list(w.maps), probs=list(w.probs), name=name,
                          source=source, **kwargs)


def example(name: str, params: Optional[dict] = None, **kwargs) -> AnalysisConfig:
    """Config for a shipped example family."""
    params = dict(params or {})
    w = build_example(name, params)
    return config_from_wifs(w, name=name, source={"example": name, "params": params}, **kwargs)
