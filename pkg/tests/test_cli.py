import json
import os

import pytest

import mfdecomp.loops
from mfdecomp.cli import EXIT_ADVISORY, EXIT_ERROR, EXIT_FNC, EXIT_OK, EXIT_UNDECIDED, main, run
from mfdecomp.config import config_from_dict, example

SMALL = {"caps": {"path": 20000}, "t_schedule": {"max_thresholds": 40}}


def _write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def _cantor_dict(**extra):
    return {"example": {"name": "cantor-overlap"}, **SMALL, **extra}


def test_example_list(capsys):
    assert main(["example", "--list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "cantor-overlap" in out and "testud" in out


def test_config_only_round_trips(tmp_path, capsys):
    assert main(["example", "testud", "--param", "ell=3", "--config-only"]) == EXIT_OK
    text = capsys.readouterr().out
    cfg = config_from_dict(json.loads(text))
    assert len(cfg.wifs()) == 4


def test_analyze_writes_requested_files(tmp_path, capsys):
    cfg = _write(tmp_path, _cantor_dict())
    out = tmp_path / "out"
    code = main(["analyze", cfg, "--out", str(out), "--outputs", "dot,graph-json,spectra-csv,verdict-json"])
    assert code == EXIT_OK
    names = set(os.listdir(out))
    assert {"graph.dot", "graph.json", "spectra.csv", "conjugates.csv", "verdict.json"} <= names
    v = json.loads((out / "verdict.json").read_text())
    assert v["exit_code"] == 0 and v["formalism"]["formalism_holds"]
    assert "formalism HOLDS" in capsys.readouterr().out


def test_analyze_without_out_prints_verdict(tmp_path, capsys):
    cfg = _write(tmp_path, _cantor_dict())
    assert main(["analyze", cfg]) == EXIT_OK
    captured = capsys.readouterr()
    assert json.loads(captured.out)["status"] == "ok"
    assert "loop classes" in captured.err


def test_graph_and_spectrum_commands(tmp_path, capsys):
    cfg = _write(tmp_path, _cantor_dict())
    assert main(["graph", cfg, "--dot"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("digraph")
    assert main(["graph", cfg, "--json"]) == EXIT_OK
    assert len(json.loads(capsys.readouterr().out)["vertices"]) == 4
    assert main(["spectrum", cfg, "--csv"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("q,")
    assert main(["spectrum", cfg, "--conjugates"]) == EXIT_OK
    assert capsys.readouterr().out.count("\n") > 10


def test_outputs_are_deterministic(tmp_path):
    cfg = _write(tmp_path, _cantor_dict(outputs="all"))
    for d in ("a", "b"):
        assert main(["analyze", cfg, "--out", str(tmp_path / d)]) == EXIT_OK
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_exit_code_for_vertex_cap(tmp_path):
    cfg = _write(tmp_path, {"example": {"name": "bernoulli-pisot-simple"}, "caps": {"vertex": 2}})
    assert main(["analyze", cfg, "--out", str(tmp_path / "o")]) == EXIT_FNC
    v = json.loads((tmp_path / "o" / "verdict.json").read_text())
    assert v["errors"][0]["type"] == "FncNotDetected"


def test_exit_code_for_undecided_gap(tmp_path):
    cfg = _write(tmp_path, {"example": {"name": "bernoulli-pisot-simple"}, "caps": {"depth": 1}})
    assert main(["analyze", cfg, "--out", str(tmp_path / "o")]) == EXIT_UNDECIDED
    v = json.loads((tmp_path / "o" / "verdict.json").read_text())
    lo, hi = v["errors"][0]["interval"]
    assert lo != hi


@pytest.mark.parametrize("text", [
    '{"field": "rational", "maps": [[0.5, 0], ["1/2", "1/2"]], "probs": "uniform"}',
    '{"field": "rational", "maps": [["1/2", 0], ["1/2", "1/2"]], "probs": ["1/2", "1/3"]}',
    '{"field": "rational", ',
])
def test_exit_code_for_bad_config(tmp_path, capsys, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert main(["analyze", str(p)]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.json")]) == EXIT_ERROR


def test_advisory_when_a_hypothesis_is_unknown(monkeypatch):
    def unknown(g, lc):
        lc.irreducible, lc.irreducible_witness = mfdecomp.loops.UNKNOWN, "forced"
        return lc.irreducible

    monkeypatch.setattr(mfdecomp.loops, "check_irreducible", unknown)
    res = run(config_from_dict(_cantor_dict()))
    assert res.exit_code == EXIT_ADVISORY
    assert res.verdict["status"] == "advisory"
    assert "spectra.csv" in res.artifacts


def test_cantor_overlap_holds():
    res = run(config_from_dict(_cantor_dict()))
    assert res.exit_code == EXIT_OK
    f = res.verdict["formalism"]
    assert f["formalism_holds"] and not f["failing_alpha_intervals"]
    assert len(res.verdict["loop_classes"]) == 1


@pytest.mark.parametrize("p,holds", [("1/2", True), ("1/3", False)])
def test_golden_mean_verdicts(p, holds):
    cfg = example("bernoulli-pisot-simple", {"k": 2, "p1": p})
    cfg.path_cap = 200_000
    res = run(cfg)
    f = res.verdict["formalism"]
    assert f["formalism_holds"] is holds
    assert bool(f["isolated_points"]) is not holds
