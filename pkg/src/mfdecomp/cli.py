"""Command line front end and the end-to-end analysis pipeline."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .config import (
    OUTPUTS,
    AnalysisConfig,
    config_from_dict,
    config_to_dict,
    config_to_json,
    example,
    parse_config,
)
from .errors import FncNotDetected, MfError, UndecidedGap
from .examples import REGISTRY
from .exact import AlgebraicReal
from .graph import export_dot, graph_to_dict, graph_to_json
from .ifs import normalize_hull
from .loops import NOT_DEGENERATE, PROVEN, analyse_classes
from .netintervals import subdivide, subdivision_trace_json
from .spectra import (
    MOMENT_SLOPE,
    alpha_range,
    conjugates_csv,
    formalism_verdict,
    loop_lq_spectrum,
    spectra_csv,
    _fmt,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FNC = 2
EXIT_UNDECIDED = 3
EXIT_ADVISORY = 4

FILE_NAMES = {
    "dot": "graph.dot",
    "graph-json": "graph.json",
    "spectra-csv": "spectra.csv",
    "verdict-json": "verdict.json",
    "subdivision-trace": "subdivision_trace.json",
}


@dataclass
class RunResult:
    exit_code: int
    verdict: dict
    artifacts: dict = field(default_factory=dict)  # file name -> text
    graph: object = None
    classes: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)

    def write(self, outdir: str) -> list:
        os.makedirs(outdir, exist_ok=True)
        paths = []
        for name in sorted(self.artifacts):
            path = os.path.join(outdir, name)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(self.artifacts[name])
            paths.append(path)
        return paths


def _error_dict(exc: BaseException) -> dict:
    d = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("frontier_size", "vertex_count", "depth_cap", "count", "nullity", "path"):
        if hasattr(exc, attr):
            d[attr] = getattr(exc, attr)
    if isinstance(exc, UndecidedGap) and exc.interval is not None:
        d["interval"] = [x.exact_str() if isinstance(x, AlgebraicReal) else str(x) for x in exc.interval]
    return d


def _hypotheses(classes, decomp) -> list:
    out = []
    for lc in classes:
        out.append({"class": lc.id, "hypothesis": "irreducible", "status": lc.irreducible,
                    "certified_by": lc.irreducible_witness})
        out.append({"class": lc.id, "hypothesis": "not degenerate",
                    "status": PROVEN if lc.degenerate == NOT_DEGENERATE else lc.degenerate,
                    "certified_by": lc.degeneracy_witness})
    out.append({"class": None, "hypothesis": "decomposable", "status": decomp.status,
                "certified_by": decomp.witness})
    return out


def _curve_summary(c) -> dict:
    d = {
        "method": c.method,
        "concavity_defect": _fmt(c.concavity_defect()),
        "max_error": _fmt(float(c.error.max())) if c.error is not None else None,
    }
    try:
        r = alpha_range(c)
        d["alpha_range"] = r.to_dict()
    except MfError as exc:
        d["alpha_range"] = {"error": _error_dict(exc)}
    if c.method == MOMENT_SLOPE:
        d["thresholds"] = c.extras.get("thresholds")
        d["paths"] = c.extras.get("paths")
        d["truncated"] = bool(c.extras.get("truncated"))
    return d


def run(cfg: AnalysisConfig, outputs=None, threads: Optional[int] = None) -> RunResult:
    """Graph, loop classes, hypothesis checks, spectra and verdict for one config.

    Exit codes: 0 success, 2 finite neighbour condition not detected, 3
    undecided attractor intersection, 4 curves emitted while some hypothesis
    is unknown, 1 any other failure.  Errors are recorded in the verdict.
    """
    outputs = tuple(cfg.outputs if outputs is None else outputs)
    report = {"config": config_to_dict(cfg), "source": cfg.source, "status": "ok", "errors": [],
              "notes": []}
    res = RunResult(EXIT_OK, report)

    def finish(code):
        res.exit_code = code
        report["exit_code"] = code
        if "verdict-json" in outputs:
            res.artifacts[FILE_NAMES["verdict-json"]] = json.dumps(report, indent=2, sort_keys=True) + "\n"
        return res

    try:
        w = cfg.wifs()
        if cfg.normalize_hull and not w.is_hull_normalized():
            w = normalize_hull(w)
            report["notes"].append("maps conjugated so the attractor hull is [0, 1]")
        g = _build(w, cfg)
    except FncNotDetected as exc:
        report["status"] = "error"
        report["errors"].append(_error_dict(exc))
        return finish(EXIT_FNC)
    except UndecidedGap as exc:
        report["status"] = "error"
        report["errors"].append(_error_dict(exc))
        return finish(EXIT_UNDECIDED)
    except MfError as exc:
        report["status"] = "error"
        report["errors"].append(_error_dict(exc))
        return finish(EXIT_ERROR)
    res.graph = g
    report["graph"] = {"vertices": len(g.vertices), "edges": len(g.edges), "field": g.wifs.field.to_dict()}
    if "dot" in outputs:
        res.artifacts[FILE_NAMES["dot"]] = export_dot(g)
    if "graph-json" in outputs:
        res.artifacts[FILE_NAMES["graph-json"]] = graph_to_json(g)
    if "subdivision-trace" in outputs:
        trace = [{"vertex": i, "steps": subdivision_trace_json(subdivide(g.wifs, v, g.rule, cfg.depth_cap))}
                 for i, v in enumerate(g.vertices)]
        res.artifacts[FILE_NAMES["subdivision-trace"]] = json.dumps(trace, indent=2, sort_keys=True) + "\n"

    classes, decomp = analyse_classes(g)
    res.classes = classes
    report["loop_classes"] = [lc.to_dict(g) for lc in classes]
    report["decomposability"] = decomp.to_dict(g)
    report["hypotheses"] = _hypotheses(classes, decomp)
    unknown = [h for h in report["hypotheses"] if h["status"] != PROVEN]

    curves = {}
    try:
        for lc in classes:
            curves[lc.id] = loop_lq_spectrum(g, lc, cfg.q_grid, path_cap=cfg.path_cap,
                                             threads=threads, max_thresholds=cfg.max_thresholds)
    except MfError as exc:
        report["status"] = "error"
        report["errors"].append(_error_dict(exc))
        return finish(EXIT_ERROR)
    res.curves = curves
    for entry in report["loop_classes"]:
        entry["spectrum"] = _curve_summary(curves[entry["id"]])
    try:
        verdict, assembled, conj = formalism_verdict(curves, classes, decomp.status == PROVEN)
    except MfError as exc:
        report["status"] = "error"
        report["errors"].append(_error_dict(exc))
        return finish(EXIT_ERROR)
    report["tau_mu"] = {
        "crossings": [c.to_dict() for c in assembled.crossings],
        "certified_for_all_q": bool(assembled.certified.all()),
    }
    report["formalism"] = verdict.to_dict()
    if "spectra-csv" in outputs:
        res.artifacts[FILE_NAMES["spectra-csv"]] = spectra_csv(cfg.q_grid, curves, assembled)
        res.artifacts["conjugates.csv"] = conjugates_csv(verdict, conj)
    if unknown:
        report["status"] = "advisory"
        return finish(EXIT_ADVISORY)
    return finish(EXIT_OK)


def _build(w, cfg):
    from .graph import build_graph

    return build_graph(w, cfg.iteration_rule, vertex_cap=cfg.vertex_cap, depth_cap=cfg.depth_cap)


# ---------------------------------------------------------------------------
# argument handling

def _read_config(path: str) -> AnalysisConfig:
    if path == "-":
        return parse_config(sys.stdin.read())
    with open(path, "rb") as fh:
        return parse_config(fh.read())


def _parse_param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        val = json.loads(v)
    except json.JSONDecodeError:
        val = v
    return k.strip(), val


def _outputs_arg(text: str) -> tuple:
    if text == "all":
        return OUTPUTS
    names = [t.strip() for t in text.split(",") if t.strip()]
    for n in names:
        if n not in OUTPUTS:
            raise argparse.ArgumentTypeError(f"unknown output {n!r}; known: {', '.join(OUTPUTS)}")
    return tuple(names)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfdecomp",
                                description="Transition graphs, loop-class spectra and the "
                                            "multifractal formalism for overlapping self-similar measures.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run the full pipeline on a JSON config")
    a.add_argument("config", help="config file, or - for stdin")
    a.add_argument("--out", help="directory for the output files")
    a.add_argument("--outputs", type=_outputs_arg, help="comma separated subset of: " + ", ".join(OUTPUTS))

    e = sub.add_parser("example", help="generate (and by default analyse) a shipped example")
    e.add_argument("name", nargs="?", help="one of: " + ", ".join(sorted(REGISTRY)))
    e.add_argument("--param", action="append", type=_parse_param, default=[], metavar="K=V",
                   help="family parameter; values are read as JSON when possible")
    e.add_argument("--out", help="directory for config.json and the output files")
    e.add_argument("--outputs", type=_outputs_arg)
    e.add_argument("--config-only", action="store_true", help="only emit the generated config")
    e.add_argument("--list", action="store_true", help="list the example families and their parameters")

    gph = sub.add_parser("graph", help="print the transition graph")
    gph.add_argument("config")
    fmt = gph.add_mutually_exclusive_group()
    fmt.add_argument("--dot", action="store_true", help="Graphviz DOT (default)")
    fmt.add_argument("--json", action="store_true", help="JSON with exact entries")

    s = sub.add_parser("spectrum", help="print tau curves")
    s.add_argument("config")
    sf = s.add_mutually_exclusive_group()
    sf.add_argument("--csv", action="store_true", help="tau per class and their minimum (default)")
    sf.add_argument("--conjugates", action="store_true", help="conjugates, f_mu and tau_mu*")
    return p


def _summary_line(res: RunResult) -> str:
    v = res.verdict
    if v.get("status") == "error":
        err = v["errors"][-1]
        return f"error ({err['type']}): {err['message']}"
    f = v["formalism"]
    words = ["formalism HOLDS" if f["formalism_holds"] else "formalism FAILS"]
    if f["failing_alpha_intervals"]:
        words.append("on alpha in " + ", ".join(f"[{a}, {b}]" for a, b in f["failing_alpha_intervals"]))
    if f["isolated_points"]:
        words.append("isolated points " + ", ".join(f["isolated_points"]))
    if not f["certified"]:
        words.append("(advisory)")
    return f"{v['graph']['vertices']} vertices, {len(v['loop_classes'])} loop classes; " + " ".join(words)


def _emit(res: RunResult, out: Optional[str]) -> None:
    """Write the artifacts to ``out``, or print the verdict JSON to stdout."""
    if out:
        for path in res.write(out):
            print(path)
        print(_summary_line(res))
        return
    if "verdict.json" in res.artifacts:
        sys.stdout.write(res.artifacts["verdict.json"])
    print(_summary_line(res), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            cfg = _read_config(args.config)
            res = run(cfg, args.outputs)
            _emit(res, args.out)
            return res.exit_code
        if args.command == "example":
            if args.list or not args.name:
                for name in sorted(REGISTRY):
                    params = ", ".join(f"{k}={json.dumps(v)}" for k, v in REGISTRY[name].params.items())
                    print(f"{name}: {params}")
                return EXIT_OK
            cfg = example(args.name, dict(args.param))
            if args.outputs:
                cfg.outputs = args.outputs
            text = config_to_json(cfg)
            if args.config_only:
                if args.out:
                    os.makedirs(args.out, exist_ok=True)
                    path = os.path.join(args.out, "config.json")
                    with open(path, "w", encoding="utf-8", newline="\n") as fh:
                        fh.write(text)
                    print(path)
                else:
                    sys.stdout.write(text)
                return EXIT_OK
            res = run(cfg)
            if args.out:
                res.artifacts["config.json"] = text
            _emit(res, args.out)
            return res.exit_code
        if args.command == "graph":
            cfg = _read_config(args.config)
            w = cfg.wifs()
            if cfg.normalize_hull and not w.is_hull_normalized():
                w = normalize_hull(w)
            g = _build(w, cfg)
            sys.stdout.write(graph_to_json(g) if args.json else export_dot(g))
            return EXIT_OK
        if args.command == "spectrum":
            cfg = _read_config(args.config)
            res = run(cfg, outputs=("spectra-csv",))
            if res.verdict["status"] == "error":
                print(_summary_line(res), file=sys.stderr)
                return res.exit_code
            key = "conjugates.csv" if args.conjugates else "spectra.csv"
            sys.stdout.write(res.artifacts[key])
            return res.exit_code
    except FncNotDetected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FNC
    except UndecidedGap as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    except MfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
