import csv
import json
from pathlib import Path

import numpy as np
import pytest

from archopt import casestudies
from archopt.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, main
from archopt.model import load, save, to_dict
from archopt.moea import Evaluator, SearchConfig
from archopt.refactoring import sequence_from_text


SMALL = str(casestudies.path("small"))


def write_config(tmp_path, **overrides):
    config = {
        "model": SMALL,
        "algorithm": "nsga2",
        "seed": 5,
        "population": 8,
        "max_evaluations": 60,
        "output_dir": str(tmp_path / "out"),
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


# -- validate -----------------------------------------------------------------


def test_validate_ok():
    assert main(["validate", SMALL]) == EXIT_OK


def test_validate_reports_violations(tmp_path, capsys):
    doc = to_dict(load(Path(SMALL).read_text()))
    doc["deployment"]["web"] = "n9"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", str(bad)]) == EXIT_DOMAIN
    out = capsys.readouterr().out
    assert "n9" in out


def test_validate_missing_file_distinct_exit():
    assert main(["validate", "/nonexistent/model.json"]) == EXIT_USAGE


# -- eval ---------------------------------------------------------------------


def test_eval_without_sequence(capsys):
    assert main(["eval", SMALL]) == EXIT_OK
    out = capsys.readouterr().out
    assert "perfQ:       0.000000" in out
    assert "distance:    0.000000" in out


def test_eval_with_sequence_json(tmp_path, capsys):
    seq_path = tmp_path / "seq.json"
    seq_path.write_text(json.dumps([{"kind": "redeploy", "component": "catalog", "target": "spare"}]))
    assert main(["eval", SMALL, str(seq_path), "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["perfQ"] > 0.0
    # same code path as the evaluator
    evaluator = Evaluator(load(Path(SMALL).read_text()), SearchConfig(max_evaluations=0))
    ind = evaluator.evaluate(sequence_from_text("redeploy(catalog->spare)"))
    assert report["perfQ"] == ind.metrics.perfq
    assert report["reliability"] == ind.metrics.reliability


def test_eval_bundled_sample_sequence(capsys):
    seq_path = str(casestudies.sample_sequence_path())
    assert main(["eval", "casestudy:small", seq_path, "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["perfQ"] > 0.0
    assert report["distance"] > 0.0
    evaluator = Evaluator(load(Path(SMALL).read_text()), SearchConfig(max_evaluations=0))
    from archopt.refactoring import sequence_from_records

    ind = evaluator.evaluate(sequence_from_records(json.loads(Path(seq_path).read_text())))
    assert report["perfQ"] == ind.metrics.perfq
    assert report["reliability"] == ind.metrics.reliability
    assert report["pas"] == ind.metrics.pas
    assert report["distance"] == ind.metrics.distance


def test_eval_infeasible_sequence_reports_index(tmp_path, capsys):
    seq_path = tmp_path / "seq.json"
    seq_path.write_text(
        json.dumps(
            [
                {"kind": "redeploy", "component": "catalog", "target": "spare"},
                {"kind": "redeploy", "component": "catalog", "target": "spare"},
            ]
        )
    )
    assert main(["eval", SMALL, str(seq_path)]) == EXIT_DOMAIN
    err = capsys.readouterr().err
    assert "action 1" in err


# -- optimize -----------------------------------------------------------------


def test_optimize_writes_front_files(tmp_path):
    config = write_config(tmp_path)
    assert main(["optimize", "--config", str(config)]) == EXIT_OK
    out_dir = tmp_path / "out"
    front_csv = (out_dir / "front.csv").read_text()
    rows = list(csv.DictReader(front_csv.splitlines()))
    assert rows
    front_json = json.loads((out_dir / "front.json").read_text())
    assert front_json["metadata"]["seed"] == 5
    assert len(front_json["solutions"]) == len(rows)


def test_optimize_deterministic_csv(tmp_path):
    config_a = write_config(tmp_path, output_dir=str(tmp_path / "a"))
    main(["optimize", "--config", str(config_a)])
    config_b = write_config(tmp_path, output_dir=str(tmp_path / "b"))
    main(["optimize", "--config", str(config_b)])
    assert (tmp_path / "a" / "front.csv").read_bytes() == (tmp_path / "b" / "front.csv").read_bytes()


def test_front_csv_rows_reevaluate_to_stored_objectives(tmp_path):
    config = write_config(tmp_path)
    main(["optimize", "--config", str(config)])
    rows = list(csv.DictReader((tmp_path / "out" / "front.csv").read_text().splitlines()))
    arch = load(Path(SMALL).read_text())
    evaluator = Evaluator(arch, SearchConfig(max_evaluations=0))
    for row in rows:
        ind = evaluator.evaluate(sequence_from_text(row["actions"]))
        assert abs(ind.metrics.perfq - float(row["perfQ"])) <= 1e-9
        assert abs(ind.metrics.reliability - float(row["reliability"])) <= 1e-9
        assert ind.metrics.pas == int(row["pas"])
        assert abs(ind.metrics.distance - float(row["distance"])) <= 1e-9


def test_optimize_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("ARCHOPT_SEED", "99")
    config = write_config(tmp_path)
    main(["optimize", "--config", str(config)])
    meta = json.loads((tmp_path / "out" / "front.json").read_text())["metadata"]
    assert meta["seed"] == 99


def test_optimize_rejects_bad_config(tmp_path):
    config = write_config(tmp_path, max_evaluations=None)
    assert main(["optimize", "--config", str(config)]) == EXIT_DOMAIN


def test_optimize_missing_config_usage_error():
    assert main(["optimize", "--config", "/nonexistent/config.json"]) == EXIT_USAGE


# -- compare ------------------------------------------------------------------


def test_compare_grid_and_gnuplot(tmp_path, capsys):
    config = write_config(
        tmp_path,
        algorithms=["nsga2", "pesa2"],
        budgets_evaluations=[20, 40],
        seeds=[1, 2],
        population=8,
        max_evaluations=None,
    )
    assert main(["compare", "--config", str(config), "--gnuplot"]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "out" / "compare.csv").read_text().splitlines()))
    # 2 algorithms x 2 budgets x 2 seeds x {with, without}
    assert len(rows) == 16
    assert {r["pas_objective"] for r in rows} == {"with", "without"}
    for row in rows:
        assert float(row["hypervolume"]) >= 0.0
    summary = list(csv.DictReader((tmp_path / "out" / "summary.csv").read_text().splitlines()))
    assert len(summary) == 8
    assert (tmp_path / "out" / "compare.dat").exists()
    # longer budget never decreases median evaluations
    by_cell = {(r["algorithm"], r["pas_objective"], r["budget"]): float(r["median_evaluations"]) for r in summary}
    for alg in ("nsga2", "pesa2"):
        for mode in ("with", "without"):
            assert by_cell[(alg, mode, "40ev")] >= by_cell[(alg, mode, "20ev")]
