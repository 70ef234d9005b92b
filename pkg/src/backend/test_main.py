import json

import pandas as pd
import pytest

import main as cli
import property_checks
from errors import ConfigError
from objective import _report, ratio_order

FAST = ["--iters", "3", "--clusters", "3", "--em-max-iter", "5", "--budget", "25"]


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in ("PU_SELECT_SEED", "PU_SELECT_ITERS", "PU_SELECT_OUT"):
        monkeypatch.delenv(key, raising=False)


@pytest.fixture
def synth_csv(tmp_path):
    path = tmp_path / "synth.csv"
    assert cli.main(["synth", str(path), "--seed", "3"]) == 0
    return path


def test_synth_writes_features_label_and_sidecar(synth_csv, tmp_path):
    frame = pd.read_csv(synth_csv)
    assert frame.shape == (4500, 51)
    assert frame.columns[-1] == "label"

    truth = json.loads((tmp_path / "synth.truth.json").read_text(encoding="utf-8"))
    assert len(truth["relevant_features"]) == 25
    assert len(truth["feature_names"]) == 50

    again = tmp_path / "again.csv"
    assert cli.main(["synth", str(again), "--seed", "3"]) == 0
    assert again.read_bytes() == synth_csv.read_bytes()


def test_synth_outlier_mode(tmp_path):
    path = tmp_path / "outlier.csv"
    assert cli.main(["synth", str(path), "--outlier", "--labeled-rate", "0.1"]) == 0
    truth = json.loads((tmp_path / "outlier.truth.json").read_text(encoding="utf-8"))
    assert len(truth["positive_rows"]) == 500


def test_select_then_eval(synth_csv, tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["select", str(synth_csv), "--out", str(out), "--seed", "1", *FAST]) == 0

    selected = (out / "selected_features.txt").read_text(encoding="utf-8").splitlines()
    assert len(selected) == 25
    payload = json.loads((out / "run_result.json").read_text(encoding="utf-8"))
    assert payload["job_config"]["seed"] == 1
    assert payload["config"]["iterations"] == 3
    assert (out / "objective_report.json").is_file()

    capsys.readouterr()
    assert cli.main(["eval", str(out / "selected_features.txt"), str(synth_csv)]) == 0
    value = float(capsys.readouterr().out.strip())
    assert 0.0 <= value <= 1.0


def test_select_repeats_byte_for_byte(synth_csv, tmp_path):
    for name in ("a", "b"):
        assert cli.main(["select", str(synth_csv), "--out", str(tmp_path / name), *FAST]) == 0
    for artifact in ("theta_trace.csv", "selected_features.txt"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_select_with_mi_objective(synth_csv, tmp_path):
    out = tmp_path / "mi"
    assert cli.main(["select", str(synth_csv), "--out", str(out), "--objective", "fscpu-mi", *FAST]) == 0
    payload = json.loads((out / "run_result.json").read_text(encoding="utf-8"))
    assert payload["best_report"]["mi"] is not None


def test_check_passes(capsys):
    assert cli.main(["check", "--trials", "50"]) == 0
    assert "✅ All 6 checks passed" in capsys.readouterr().out


def test_check_fails_on_a_broken_objective(monkeypatch, capsys):
    def first_cluster_only(clustering):
        sizes = [int(m) for m in clustering.sizes]
        labeled = [int(a) for a in clustering.labeled_counts]
        return _report(ratio_order(sizes, labeled)[:1], sizes, labeled, sum(labeled))

    monkeypatch.setattr(property_checks, "objective_value", first_cluster_only)
    assert cli.main(["check", "--trials", "50"]) == 1
    assert "❌" in capsys.readouterr().out


def test_exit_codes(tmp_path, pu_csv):
    assert cli.main(["select", str(tmp_path / "absent.csv")]) == 3
    assert cli.main(["select", str(pu_csv), "--budget", "0"]) == 2
    assert cli.main(["select", str(pu_csv), "--frobnicate"]) == 2

    bad_label = tmp_path / "bad.csv"
    bad_label.write_text("x1,label\n0.5,2\n0.1,0\n", encoding="utf-8")
    assert cli.main(["select", str(bad_label)]) == 3

    config_file = tmp_path / "job.json"
    config_file.write_text(json.dumps({"iterations": 5}), encoding="utf-8")
    assert cli.main(["select", str(pu_csv), "--config", str(config_file)]) == 2


def test_eval_without_ground_truth(tmp_path, pu_csv):
    selected = tmp_path / "selected_features.txt"
    selected.write_text("x1\n", encoding="utf-8")
    assert cli.main(["eval", str(selected), str(pu_csv)]) == 3


def test_unknown_condition_index(tmp_path):
    assert cli.main(["table", "--conditions", "12", "--out", str(tmp_path)]) == 2


@pytest.mark.slow
def test_table_smoke_run(tmp_path):
    args = ["table", "--smoke", "--conditions", "4", "--seeds", "2", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    frame = pd.read_csv(next(tmp_path.glob("*.csv")), index_col=0)
    assert list(frame.columns) == ["{✓,10%,8,1}"]


@pytest.mark.parametrize(
    "name, content",
    [
        ("costs.json", "{not json"),
        ("costs.json", '[1, 2]'),
        ("costs.json", '{"x1": "cheap", "x2": 1}'),
        ("costs.json", '{"x1": 1}'),
        ("costs.txt", "1\nfree\n"),
        ("costs.txt", ""),
        ("costs.txt", "1\n0\n"),
    ],
)
def test_bad_costs_files(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        cli.load_costs(str(path), ["x1", "x2"])
    assert excinfo.value.code == "invalid_costs"


def test_costs_files(tmp_path):
    as_json = tmp_path / "costs.json"
    as_json.write_text('{"x2": 3, "x1": 1.5}', encoding="utf-8")
    as_lines = tmp_path / "costs.txt"
    as_lines.write_text("1.5\n3\n", encoding="utf-8")

    assert cli.load_costs(str(as_json), ["x1", "x2"]).tolist() == [1.5, 3.0]
    assert cli.load_costs(str(as_lines), ["x1", "x2"]).tolist() == [1.5, 3.0]


def test_malformed_costs_exit_as_config_error(tmp_path, pu_csv):
    costs = tmp_path / "costs.json"
    costs.write_text("{not json", encoding="utf-8")
    assert cli.main(["select", str(pu_csv), "--costs", str(costs), "--out", str(tmp_path / "run")]) == 2


def test_dataset_statistics_are_logged(tmp_path, capsys):
    assert cli.main(["synth", str(tmp_path / "stats.csv")]) == 0
    err = capsys.readouterr().err
    assert "Dataset statistics" in err
    assert "'n_rows': 4500" in err
