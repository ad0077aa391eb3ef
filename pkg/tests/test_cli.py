"""End-to-end tests for the command-line interface."""

import json
import math
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from plusdc.cli import main
from plusdc.io import file_digest, load_schema, read_comparisons_csv
from plusdc.model import Params, make_dataset, ranking_log_prob
from plusdc.randgraph import nurhm6_edge_count

FIXTURES = Path(__file__).parent / "fixtures"


def run_cli(*argv: str) -> int:
    return main(list(argv))


def write_csv(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# fit


def test_fit_bradley_terry_params(tmp_path):
    out = tmp_path / "params.json"
    rc = run_cli("fit", "--data", str(FIXTURES / "bradley_terry.csv"), "--out", str(out))
    assert rc == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, load_schema("params"))
    expected = math.log(2.0) / 2.0
    assert payload["u"] == pytest.approx([expected, -expected], abs=1e-5)
    assert payload["v"] == []
    assert payload["meta"]["converged"] is True
    assert payload["meta"]["existence"] == "exists"
    assert "aic_norm" in payload["meta"] and "bic_norm" in payload["meta"]


def test_fit_writes_manifest_with_input_digest(tmp_path):
    out = tmp_path / "params.json"
    data = FIXTURES / "bradley_terry.csv"
    run_cli("fit", "--data", str(data), "--out", str(out))
    manifest = json.loads((tmp_path / "params.manifest.json").read_text())
    jsonschema.validate(manifest, load_schema("manifest"))
    assert manifest["command"] == "fit"
    assert manifest["inputs"][str(data)] == file_digest(data)
    assert "--data" in manifest["argv"]


def test_fit_trace_is_nondecreasing(tmp_path):
    out = tmp_path / "params.json"
    trace = tmp_path / "trace.csv"
    run_cli(
        "fit", "--data", str(FIXTURES / "bradley_terry.csv"),
        "--out", str(out), "--trace", str(trace),
    )
    lines = trace.read_text().splitlines()
    assert lines[0] == "outer,loglik,loglik_norm,gain"
    logliks = [float(line.split(",")[1]) for line in lines[1:]]
    assert len(logliks) == json.loads(out.read_text())["meta"]["n_outer"] + 1
    assert all(b >= a - 1e-12 for a, b in zip(logliks, logliks[1:]))


def test_fit_single_comparison_exits_2(tmp_path):
    rc = run_cli(
        "fit", "--data", str(FIXTURES / "single_comparison.csv"),
        "--out", str(tmp_path / "p.json"),
    )
    assert rc == 2


def test_fit_single_comparison_lp_mode_exits_2(tmp_path):
    rc = run_cli(
        "fit", "--data", str(FIXTURES / "single_comparison.csv"),
        "--existence", "lp", "--out", str(tmp_path / "p.json"),
    )
    assert rc == 2


def test_fit_budget_exhausted_exits_3(tmp_path):
    rc = run_cli(
        "fit", "--data", str(FIXTURES / "bradley_terry.csv"),
        "--max-outer", "1", "--existence", "off",
        "--out", str(tmp_path / "p.json"),
    )
    assert rc == 3


def test_fit_duplicate_rank_exits_64(tmp_path, capsys):
    bad = write_csv(
        tmp_path / "bad.csv",
        "comparison_id,rank,object_id\n1,1,1\n1,1,2\n",
    )
    rc = run_cli("fit", "--data", str(bad), "--out", str(tmp_path / "p.json"))
    assert rc == 64
    err = capsys.readouterr().err
    assert "row 3" in err and "rank" in err


def test_fit_missing_file_exits_64(tmp_path):
    rc = run_cli(
        "fit", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "p.json")
    )
    assert rc == 64


# ---------------------------------------------------------------------------
# check


def test_check_toy_fixture_report(tmp_path, capsys):
    rc = run_cli("check", "--data", str(FIXTURES / "toy_identifiability.csv"))
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, load_schema("check_report"))
    assert report["identifiable"] is True
    assert report["rank"] == 5 and report["required_rank"] == 5
    assert report["curl_pass"] is True
    assert report["curl"]["triangles"] == [[1, 2, 4], [1, 3, 4]]
    assert report["curl"]["det"] == pytest.approx(35.0, abs=1e-9)
    assert report["connected"] is True


def test_check_static_covariates_not_identifiable(tmp_path, capsys):
    static = write_csv(
        tmp_path / "static.csv",
        "comparison_id,rank,object_id,x1\n"
        "1,1,1,0.5\n1,2,2,-0.2\n"
        "2,1,3,0.9\n2,2,2,-0.2\n"
        "3,1,1,0.5\n3,2,3,0.9\n",
    )
    rc = run_cli("check", "--data", str(static))
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["identifiable"] is False
    assert report["rank"] < report["required_rank"]


def test_check_disconnected_fixture(tmp_path, capsys):
    split = write_csv(
        tmp_path / "split.csv",
        "comparison_id,rank,object_id,x1\n"
        "1,1,1,0.3\n1,2,2,-0.1\n"
        "2,1,4,0.8\n2,2,3,0.2\n"
        "3,2,1,-0.5\n3,1,2,0.4\n",
    )
    rc = run_cli("check", "--data", str(split))
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["connected"] is False
    assert report["identifiable"] is False


def test_check_saves_report_and_manifest(tmp_path, capsys):
    out = tmp_path / "report.json"
    rc = run_cli(
        "check", "--data", str(FIXTURES / "toy_identifiability.csv"), "--out", str(out)
    )
    assert rc == 0
    saved = json.loads(out.read_text())
    assert saved == json.loads(capsys.readouterr().out)
    manifest = json.loads((tmp_path / "report.manifest.json").read_text())
    jsonschema.validate(manifest, load_schema("manifest"))


def test_check_bad_lam_exits_64(tmp_path):
    rc = run_cli(
        "check", "--data", str(FIXTURES / "toy_identifiability.csv"), "--lam", "1.5"
    )
    assert rc == 64


# ---------------------------------------------------------------------------
# predict


def test_predict_equal_utilities(tmp_path):
    params = tmp_path / "eq.json"
    params.write_text(json.dumps({"u": [0.0, 0.0], "v": []}))
    out = tmp_path / "probs.csv"
    rc = run_cli(
        "predict", "--params", str(params),
        "--data", str(FIXTURES / "bradley_terry.csv"), "--out", str(out),
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "comparison_id,object_id,p_top1"
    probs = [float(line.split(",")[2]) for line in lines[1:]]
    assert probs == pytest.approx([0.5] * 6, abs=1e-12)


def test_predict_home_field(tmp_path):
    params = tmp_path / "home.json"
    params.write_text(json.dumps({"u": [0.0, 0.0], "v": [1.0]}))
    data = write_csv(
        tmp_path / "match.csv",
        "comparison_id,rank,object_id,x1\n1,,1,1.0\n1,,2,0.0\n",
    )
    out = tmp_path / "probs.csv"
    rc = run_cli("predict", "--params", str(params), "--data", str(data), "--out", str(out))
    assert rc == 0
    rows = out.read_text().splitlines()[1:]
    p_home = float(rows[0].split(",")[2])
    p_away = float(rows[1].split(",")[2])
    expected = math.e / (1.0 + math.e)
    assert p_home == pytest.approx(expected, abs=1e-9)
    assert p_away == pytest.approx(1.0 - expected, abs=1e-9)


def test_predict_top1_sums_to_one(tmp_path):
    rng = np.random.default_rng(7)
    params = tmp_path / "p.json"
    params.write_text(
        json.dumps({"u": list(rng.normal(size=4)), "v": list(rng.normal(size=2))})
    )
    header = "comparison_id,rank,object_id,x1,x2\n"
    rows = "".join(
        f"1,,{j},{rng.normal():.6f},{rng.normal():.6f}\n" for j in (1, 2, 3, 4)
    )
    data = write_csv(tmp_path / "m4.csv", header + rows)
    out = tmp_path / "probs.csv"
    assert run_cli("predict", "--params", str(params), "--data", str(data), "--out", str(out)) == 0
    probs = [float(line.split(",")[2]) for line in out.read_text().splitlines()[1:]]
    assert len(probs) == 4
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)


def test_predict_unknown_object_exits_64(tmp_path, capsys):
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"u": [0.0, 0.0], "v": []}))
    data = write_csv(
        tmp_path / "wide.csv",
        "comparison_id,rank,object_id\n1,1,1\n1,2,3\n",
    )
    rc = run_cli("predict", "--params", str(params), "--data", str(data), "--out", str(tmp_path / "o.csv"))
    assert rc == 64
    assert "unknown object id 3" in capsys.readouterr().err


def test_predict_dimension_mismatch_exits_64(tmp_path, capsys):
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"u": [0.0, 0.0], "v": [1.0, 2.0]}))
    rc = run_cli(
        "predict", "--params", str(params),
        "--data", str(FIXTURES / "bradley_terry.csv"), "--out", str(tmp_path / "o.csv"),
    )
    assert rc == 64
    assert "dimension" in capsys.readouterr().err


def test_predict_ranking_needs_outcomes(tmp_path, capsys):
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"u": [0.0, 0.0], "v": [1.0]}))
    data = write_csv(
        tmp_path / "blank.csv",
        "comparison_id,rank,object_id,x1\n1,,1,1.0\n1,,2,0.0\n",
    )
    rc = run_cli(
        "predict", "--params", str(params), "--data", str(data),
        "--ranking", "--out", str(tmp_path / "o.csv"),
    )
    assert rc == 64
    assert "outcome" in capsys.readouterr().err


def test_predict_ranking_prob_matches_library(tmp_path):
    params_path = tmp_path / "p.json"
    u = [0.4, -0.4]
    params_path.write_text(json.dumps({"u": u, "v": []}))
    out = tmp_path / "probs.csv"
    rc = run_cli(
        "predict", "--params", str(params_path),
        "--data", str(FIXTURES / "bradley_terry.csv"),
        "--ranking", "--out", str(out),
    )
    assert rc == 0
    dataset = read_comparisons_csv(FIXTURES / "bradley_terry.csv")
    params = Params(u=np.array(u), v=np.zeros(0))
    lines = out.read_text().splitlines()
    assert lines[0].endswith(",ranking_prob")
    for line in lines[1:]:
        cid, _, _, rank_p = line.split(",")
        comp = dataset.comparisons[int(cid) - 1]
        expected = math.exp(ranking_log_prob(params, comp, comp.outcome))
        assert float(rank_p) == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# graph-stats / simulate-graph / simulate-data


def test_graph_stats_report(tmp_path, capsys):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "14", "--seed", "3",
            "--out", str(graph_csv))
    capsys.readouterr()
    rc = run_cli("graph-stats", "--graph", str(graph_csv), "--lam", "0.6")
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, load_schema("graph_stats"))
    assert report["n"] == 14
    assert report["n_edges"] == nurhm6_edge_count(14)
    assert sum(report["size_counts"].values()) == report["n_edges"]
    assert isinstance(report["connected"], bool)


def test_simulate_graph_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "20", "--seed", "11", "--out", str(a))
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "20", "--seed", "11", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads((tmp_path / "a.meta.json").read_text())
    jsonschema.validate(meta, load_schema("graph_meta"))
    assert meta["seed"] == 11
    assert meta["n_edges"] == nurhm6_edge_count(20)


def test_simulate_graph_env_seed_fallback(tmp_path, monkeypatch):
    flagged = tmp_path / "flagged.csv"
    run_cli("simulate-graph", "--design", "hsbm2", "--n", "24", "--seed", "9", "--out", str(flagged))
    monkeypatch.setenv("PLUSDC_SEED", "9")
    env_based = tmp_path / "env.csv"
    run_cli("simulate-graph", "--design", "hsbm2", "--n", "24", "--out", str(env_based))
    assert flagged.read_bytes() == env_based.read_bytes()
    assert json.loads((tmp_path / "env.meta.json").read_text())["seed"] == 9


def test_simulate_data_roundtrip(tmp_path):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "12", "--seed", "2", "--out", str(graph_csv))
    data_csv = tmp_path / "data.csv"
    rc = run_cli("simulate-data", "--graph", str(graph_csv), "--d", "2", "--seed", "5",
                 "--out", str(data_csv))
    assert rc == 0
    dataset = read_comparisons_csv(data_csv)
    assert dataset.d == 2
    assert dataset.n_comparisons == nurhm6_edge_count(12)
    assert all(c.outcome is not None for c in dataset.comparisons)
    again = tmp_path / "again.csv"
    run_cli("simulate-data", "--graph", str(graph_csv), "--d", "2", "--seed", "5",
            "--out", str(again))
    assert data_csv.read_bytes() == again.read_bytes()


def test_simulate_data_with_truth_params(tmp_path):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "12", "--seed", "2", "--out", str(graph_csv))
    truth = tmp_path / "truth.json"
    rng = np.random.default_rng(0)
    u = rng.uniform(-0.5, 0.5, size=12)
    truth.write_text(json.dumps({"u": list(u - u.mean()), "v": [1.0, -0.5]}))
    data_csv = tmp_path / "data.csv"
    rc = run_cli("simulate-data", "--graph", str(graph_csv), "--params", str(truth),
                 "--seed", "5", "--out", str(data_csv))
    assert rc == 0
    manifest = json.loads((tmp_path / "data.manifest.json").read_text())
    assert set(manifest["inputs"]) == {str(graph_csv), str(truth)}
    assert manifest["seeds"] == {"seed": 5}


def test_simulate_data_needs_d_or_params(tmp_path, capsys):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "12", "--seed", "2", "--out", str(graph_csv))
    rc = run_cli("simulate-data", "--graph", str(graph_csv), "--out", str(tmp_path / "d.csv"))
    assert rc == 64
    assert "--params or --d" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# experiment / cv / select


def test_experiment_consistency_outputs(tmp_path):
    out_dir = tmp_path / "study"
    rc = run_cli(
        "experiment", "consistency", "--n", "30,40", "--reps", "2", "--v-star", "1",
        "--seed", "5", "--out", str(out_dir),
    )
    assert rc == 0
    summary = json.loads((out_dir / "consistency.json").read_text())
    jsonschema.validate(summary, load_schema("consistency_summary"))
    assert [entry["n"] for entry in summary["per_n"]] == [30, 40]
    rows = (out_dir / "consistency.csv").read_text().splitlines()
    assert rows[0] == "design,n,rep,n_comparisons,status,err_u_inf,err_v_inf"
    assert len(rows) == 1 + 2 * 2
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["seeds"] == {"seed": 5}


def test_cv_outputs(tmp_path):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "15", "--seed", "1", "--out", str(graph_csv))
    data_csv = tmp_path / "data.csv"
    run_cli("simulate-data", "--graph", str(graph_csv), "--d", "1", "--seed", "3", "--out", str(data_csv))
    out_dir = tmp_path / "cv"
    rc = run_cli("cv", "--data", str(data_csv), "--k", "3", "--modes", "top1,full",
                 "--seed", "2", "--out", str(out_dir))
    assert rc == 0
    summary = json.loads((out_dir / "cv.json").read_text())
    jsonschema.validate(summary, load_schema("cv_summary"))
    assert summary["k"] == 3 and summary["modes"] == ["top1", "full"]
    rows = (out_dir / "cv.csv").read_text().splitlines()
    assert rows[0] == "fold,mode,n_test,n_cold,status,mean_nll"
    assert len(rows) == 1 + 3 * 2


def test_cv_rejects_bad_mode(tmp_path, capsys):
    rc = run_cli("cv", "--data", str(FIXTURES / "bradley_terry.csv"), "--k", "2",
                 "--modes", "top2", "--out", str(tmp_path / "cv"))
    assert rc == 64
    assert "mode" in capsys.readouterr().err


def test_select_explicit_subsets(tmp_path):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "15", "--seed", "1", "--out", str(graph_csv))
    data_csv = tmp_path / "data.csv"
    run_cli("simulate-data", "--graph", str(graph_csv), "--d", "2", "--seed", "3", "--out", str(data_csv))
    out_dir = tmp_path / "sel"
    rc = run_cli("select", "--data", str(data_csv), "--subsets", "none;2", "--out", str(out_dir))
    assert rc == 0
    payload = json.loads((out_dir / "selection.json").read_text())
    jsonschema.validate(payload, load_schema("selection"))
    assert sorted(tuple(m["subset"]) for m in payload["models"]) == [(), (2,)]
    header = (out_dir / "selection.csv").read_text().splitlines()[0]
    assert header == "rank,subset,status,loglik_norm,aic_norm,bic_norm,n_params"


def test_select_all_subsets(tmp_path):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "15", "--seed", "1", "--out", str(graph_csv))
    data_csv = tmp_path / "data.csv"
    run_cli("simulate-data", "--graph", str(graph_csv), "--d", "2", "--seed", "3", "--out", str(data_csv))
    out_dir = tmp_path / "sel"
    rc = run_cli("select", "--data", str(data_csv), "--subsets", "all", "--out", str(out_dir))
    assert rc == 0
    payload = json.loads((out_dir / "selection.json").read_text())
    assert sorted(tuple(m["subset"]) for m in payload["models"]) == [(), (1,), (1, 2), (2,)]


# ---------------------------------------------------------------------------
# global behavior


def test_unknown_command_exits_64(capsys):
    assert run_cli("bogus") == 64
    assert "invalid choice" in capsys.readouterr().err


def test_threads_flag_accepted(tmp_path, capsys):
    graph_csv = tmp_path / "graph.csv"
    run_cli("simulate-graph", "--design", "nurhm6", "--n", "12", "--seed", "2", "--out", str(graph_csv))
    capsys.readouterr()
    rc = run_cli("--threads", "1", "graph-stats", "--graph", str(graph_csv))
    assert rc == 0


def test_console_script_exit_codes(tmp_path):
    version = subprocess.run(
        ["plusdc", "--version"], capture_output=True, text=True
    )
    assert version.returncode == 0
    assert version.stdout.startswith("plusdc ")
    nonexistent = subprocess.run(
        [
            "plusdc", "fit",
            "--data", str(FIXTURES / "single_comparison.csv"),
            "--out", str(tmp_path / "p.json"),
        ],
        capture_output=True, text=True,
    )
    assert nonexistent.returncode == 2
