import csv
import io
import json
from fractions import Fraction

import jsonschema
import pytest
from hypothesis import given, strategies as st

from hyperreg import cli
from hyperreg.io import (Report, RunManifest, hypergraph_digest, hypergraph_from_dict,
                         hypergraph_to_dict, load_hypergraph, load_points, render_report,
                         report_schema, save_hypergraph, to_jsonable)
from hyperreg.model import ValidationError, build_hypergraph, random_hypergraph


def small_dict():
    return {"r": 2, "k": 2, "parts": [2, 2],
            "colors": {"0": ["v"], "1": ["v"], "0,1": ["red", "blue"]},
            "coloring": {"0": [0, 0], "1": [0, 0], "0,1": [0, 1, 1, 0]}}


def run_cli(argv):
    buf = io.StringIO()
    code = cli.run(argv, stdout=buf)
    return code, buf.getvalue()


# -- hypergraph files ----------------------------------------------------------

@given(st.integers(1, 3), st.integers(0, 10 ** 6))
def test_save_load_roundtrip(tmp_path_factory, r, seed):
    G = random_hypergraph(r, r, [2] * r, [2] * r, seed)
    path = tmp_path_factory.mktemp("g") / "g.json"
    save_hypergraph(G, path)
    H = load_hypergraph(path)
    assert H == G and hypergraph_digest(H) == hypergraph_digest(G)
    first = path.read_bytes()
    save_hypergraph(H, path)
    assert path.read_bytes() == first


def test_missing_entry_names_index_set_and_tuple():
    d = small_dict()
    d["coloring"]["0,1"] = [0, 1, 1]
    with pytest.raises(ValidationError, match=r"\(0, 1\).*\(1, 1\)"):
        hypergraph_from_dict(d)


def test_k_above_r_rejected():
    d = small_dict()
    d["k"] = 3
    with pytest.raises(ValidationError, match="k exceeds r"):
        hypergraph_from_dict(d)


def test_json_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "r": 2,\n  "k": }\n')
    with pytest.raises(ValidationError, match="line 3"):
        load_hypergraph(p)


def test_schema_error_names_field(tmp_path):
    d = small_dict()
    d["parts"] = [2, "x"]
    with pytest.raises(ValidationError, match="parts/1"):
        hypergraph_from_dict(d)


def test_names_survive_roundtrip():
    G = hypergraph_from_dict(small_dict())
    assert hypergraph_to_dict(G)["colors"]["0,1"] == ["red", "blue"]


def test_load_points_formats(tmp_path):
    a = tmp_path / "a.json"
    a.write_text("[1, 4, 5]")
    b = tmp_path / "b.txt"
    b.write_text("# comment\n1, 2\n3 4\n")
    assert load_points(a) == [(1,), (4,), (5,)]
    assert load_points(b) == [(1, 2), (3, 4)]
    b.write_text("1 x\n")
    with pytest.raises(ValidationError, match="line 1"):
        load_points(b)


# -- reports ------------------------------------------------------------------

def test_fraction_rendering():
    assert to_jsonable(Fraction(1, 4)) == "1/4"
    assert to_jsonable({(0, 1): Fraction(2)}) == {"0,1": "2"}


def test_csv_quotes_awkward_names():
    rows = [{"color": 'a,"b"', "density": Fraction(1, 3)}, {"color": "plain", "density": 1}]
    text = render_report(Report(RunManifest("x", {}), rows), "csv")
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert parsed[0] == {"color": 'a,"b"', "density": "1/3"}
    assert parsed[1]["color"] == "plain"


def test_json_report_matches_schema_and_is_stable():
    rep = Report(RunManifest("x", {"argv": []}, {"s": 1}), [{"v": Fraction(1, 2)}], {"n": 1})
    a, b = render_report(rep, "json"), render_report(rep, "json")
    assert a == b
    jsonschema.validate(json.loads(a), report_schema())
    bad = json.loads(a)
    bad["extra"] = 1
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, report_schema())


# -- command line -------------------------------------------------------------

@pytest.fixture
def graph_file(tmp_path):
    p = tmp_path / "g.json"
    assert cli.main(["gen", "--r", "2", "--k", "2", "--b", "1,2", "--parts", "3,3",
                     "--seed", "4", "--graph-out", str(p), "--out", str(tmp_path / "gen.json")]) == 0
    return p


def test_gen_is_deterministic(tmp_path):
    argv = ["gen", "--r", "2", "--k", "2", "--b", "1,2", "--parts", "3,3", "--seed", "4"]
    _, a = run_cli(argv)
    _, b = run_cli(argv)
    assert a == b
    jsonschema.validate(json.loads(a), report_schema())


def test_exit_code_invalid_input(tmp_path, capsys):
    p = tmp_path / "bad.json"
    d = small_dict()
    d["coloring"]["0,1"] = [0, 1]
    p.write_text(json.dumps(d))
    assert cli.main(["density", str(p)]) == 1
    assert "uncolored" in capsys.readouterr().err
    assert cli.main(["density", str(tmp_path / "missing.json")]) == 1


def test_exit_code_refused(capsys):
    code = cli.main(["schedule", "--k", "2", "--b", "1,2", "--eps", "1/2", "--r", "2",
                     "--upto", "3", "--max-bits", "4096"])
    assert code == 2
    assert "refused" in capsys.readouterr().err


def test_exit_code_budget(graph_file):
    assert cli.main(["reg-bound", str(graph_file), "--budget", "3"]) == 2


def test_exit_code_assertion(graph_file, monkeypatch):
    import hyperreg.regularity as reg
    monkeypatch.setattr(reg.MemberCheck, "ok", property(lambda self: False))
    assert cli.main(["reg-bound", str(graph_file)]) == 3


@pytest.mark.parametrize("argv", [
    ["regularize", "{g}", "--sizes", "1", "--seed", "3"],
    ["density", "{g}"],
    ["reg-bound", "{g}", "--seed", "5"],
    ["find-corner", "--N", "8", "--k", "1", "--density", "0.7", "--seed", "2", "--count"],
    ["find-config", "--N", "10", "--pattern", "0,0;1,0;0,1", "--density", "0.8", "--seed", "1"],
    ["find-ap", "--N", "30", "--density", "0.8", "--seed", "9"],
    ["schedule", "--k", "2", "--b", "2,2", "--eps", "1/2", "--r", "2", "--upto", "1"],
])
def test_replay_is_byte_identical(argv, graph_file, tmp_path):
    argv = [a.format(g=graph_file) for a in argv]
    man = tmp_path / "m.json"
    first = tmp_path / "first.json"
    assert cli.main(argv + ["--out", str(first), "--manifest", str(man)]) == 0
    second = tmp_path / "second.json"
    assert cli.main(["replay", str(man), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    # a report file works as a manifest as well
    third = tmp_path / "third.json"
    assert cli.main(["replay", str(first), "--out", str(third)]) == 0
    assert third.read_bytes() == first.read_bytes()


def test_csv_output(graph_file):
    code, text = run_cli(["density", str(graph_file), "--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert rows and set(rows[0]) >= {"index", "density", "defined"}


def test_figures_written(graph_file, tmp_path):
    figs = tmp_path / "figs"
    assert cli.main(["density", str(graph_file), "--figures", str(figs), "--out",
                     str(tmp_path / "r.json")]) == 0
    assert cli.main(["find-ap", "--N", "20", "--density", "0.9", "--figures", str(figs),
                     "--out", str(tmp_path / "r2.json")]) == 0
    names = sorted(p.name for p in figs.iterdir())
    assert names == ["configuration.svg", "densities.svg"]
    assert all(p.read_text().lstrip().startswith("<?xml") for p in figs.iterdir())


def test_manifest_records_digest(graph_file, tmp_path):
    code, text = run_cli(["density", str(graph_file)])
    man = json.loads(text)["manifest"]
    assert man["command"] == "density" and len(man["digests"]["input"]) == 64
    assert "--out" not in man["params"]["argv"]
