import csv
import io
import json
import logging

import pytest

from capsac import cli
from capsac.model import load_instance, makespan, solution_from_dict

from conftest import t4_doc
from test_enumdecomp import band_doc


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def t4_path(tmp_path):
    return write(tmp_path / "t4.json", t4_doc())


def test_solve_vns_writes_solution(tmp_path, t4_path, capsys):
    out = tmp_path / "sol.json"
    code = cli.main(["solve", t4_path, "--time-limit-s", "1", "--out", str(out)])
    assert code == cli.EXIT_FEASIBLE
    assert capsys.readouterr().out.strip() == "makespan 20.00"
    sol = solution_from_dict(json.loads(out.read_text()))
    inst = load_instance(t4_path)
    assert makespan(inst, sol.regions, sol.assignment) == sol.makespan == 20.0


def test_solve_decomp_prints_intervals(t4_path, capsys):
    assert cli.main(["solve", t4_path, "--method", "decomp"]) == 0
    assert capsys.readouterr().out.splitlines() == [
        "final interval [1,4]",
        "incumbent found in interval [2,2]",
        "makespan 20.00",
    ]


def test_n1_warning_only_when_requested(t4_path, caplog):
    with caplog.at_level(logging.WARNING, logger="capsac"):
        cli.main(["solve", t4_path, "--time-limit-s", "0.5", "--neighborhoods", "n1,n2"])
    assert "n1 inactive at sigma=1" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="capsac"):
        cli.main(["solve", t4_path, "--time-limit-s", "0.5"])
    assert "n1 inactive" not in caplog.text


def test_infeasible_exit_code(tmp_path, capsys):
    path = write(tmp_path / "band.json", band_doc())
    assert cli.main(["solve", path, "--method", "decomp", "--t-hat", "14"]) == cli.EXIT_INFEASIBLE
    assert capsys.readouterr().out.splitlines()[-1] == "infeasible"
    assert cli.main(["oracle", path, "--t-hat", "14"]) == cli.EXIT_INFEASIBLE
    assert cli.main(["oracle", path, "--t-hat", "17"]) == 0
    assert "optimum 30.00" in capsys.readouterr().out


def test_error_exit_codes(tmp_path, capsys):
    assert cli.main(["solve", str(tmp_path / "missing.json")]) == cli.EXIT_ERROR
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["solve", str(bad)]) == cli.EXIT_ERROR
    with pytest.raises(SystemExit) as e:
        cli.main(["solve", str(bad), "--time-limit-s", "0"])
    assert e.value.code == cli.EXIT_ERROR
    with pytest.raises(SystemExit) as e:
        cli.main(["solve", str(bad), "--no-such-flag"])
    assert e.value.code == cli.EXIT_ERROR


def test_gen_is_deterministic(tmp_path, capsys):
    args = ["gen", "--photos", "12", "--drones", "5", "--capable-pct", "70", "--seed", "3"]
    cli.main(args)
    first = capsys.readouterr().out
    cli.main(args)
    assert capsys.readouterr().out == first
    doc = json.loads(first)
    assert doc["name"] == "u-P12D5%D̄70"
    assert sum(d["capable"] for d in doc["drones"]) == 3
    assert len(doc["photos"]) == 12
    out = tmp_path / "g.json"
    cli.main(args + ["--grid", "2x6", "--out", str(out)])
    inst = load_instance(str(out))
    assert (inst.n_rows, inst.n_cols, inst.m) == (2, 6, 3)


def test_bench_rows(tmp_path, t4_path, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"entries": [{"instance": "t4.json", "sigmas": [1, 2],
                                                 "methods": ["vns", "decomp"],
                                                 "reference": {"1": 20.0, "2": 40.0}}]}))
    args = ["bench", str(manifest), "--runs", "2", "--time-limit-s", "1", "--no-timing"]
    assert cli.main(args) == 0
    text = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [(r["method"], r["sigma"], r["best_tmax_s"], r["deviation_pct"]) for r in rows] == [
        ("vns", "1", "20.00", "0.0000"), ("decomp", "1", "20.00", "0.0000"),
        ("vns", "2", "40.00", "0.0000"), ("decomp", "2", "40.00", "0.0000"),
    ]
    assert all(r["avg_time_s"] == "" for r in rows)
    cli.main(args)
    assert capsys.readouterr().out == text


def test_bench_empty_manifest(tmp_path, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"entries": []}))
    assert cli.main(["bench", str(manifest)]) == 0
    assert capsys.readouterr().out == ",".join(cli.RUN_HEADER) + "\n"


def test_bench_bad_manifest(tmp_path, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text("[]")
    assert cli.main(["bench", str(manifest)]) == cli.EXIT_ERROR
    assert "manifest parse failure" in capsys.readouterr().err


def test_export_writes_lp_and_catalog(tmp_path, t4_path, capsys):
    lp, cat = tmp_path / "m.lp", tmp_path / "c.csv"
    assert cli.main(["export", t4_path, "--interval", "2,2", "--out", str(lp), "--catalog-csv", str(cat)]) == 0
    text = lp.read_text()
    assert text.startswith("\\") and text.rstrip().endswith("End")
    assert "c6:" in text and "o_" in text
    assert len(cat.read_text().splitlines()) == 10
