import json
import time

import numpy as np
import pandas as pd
import pytest

from clustering import EMConfig
from errors import DataError
from evaluation import (
    RESULT_TABLE_CONDITIONS,
    ExperimentResult,
    fsr,
    prepare_dataset,
    results_frame,
    run_condition,
    write_results,
)
from optimizer import RunConfig
from synthetic_data import SyntheticSpec

RELEVANT = np.r_[np.ones(25, dtype=int), np.zeros(25, dtype=int)]
QUICK = RunConfig(iterations=3, n_clusters=3, em=EMConfig(max_iter=5))


@pytest.mark.parametrize(
    "selected, expected",
    [(range(25), 1.0), (range(25, 50), 0.0), (list(range(20)) + list(range(30, 35)), 0.8)],
)
def test_fsr_examples(selected, expected):
    assert fsr(selected, RELEVANT) == expected


def test_fsr_needs_ground_truth():
    with pytest.raises(DataError):
        fsr([0, 1], None)
    with pytest.raises(DataError):
        fsr([0, 1], np.zeros(4))


def test_random_selection_baseline_is_one_half():
    rng = np.random.default_rng(99)
    values = [fsr(rng.choice(50, size=25, replace=False), RELEVANT) for _ in range(1000)]
    # hypergeometric std of one draw is about 0.071
    assert abs(np.mean(values) - 0.5) < 3 * 0.0714 / np.sqrt(1000)


def test_conditions_follow_the_result_table_columns():
    labels = [spec.label() for spec in RESULT_TABLE_CONDITIONS]
    assert labels == [
        "{✓,40%,8,1}", "{✓,40%,8,2}", "{✓,40%,1,1}", "{✓,40%,1,2}",
        "{✓,10%,8,1}", "{✓,10%,8,2}", "{✓,10%,1,1}", "{✓,10%,1,2}",
        "{×,40%}", "{×,10%}",
    ]


def test_prepare_dataset_normalizes_full_data():
    data = prepare_dataset(SyntheticSpec(seed=1), subsample_rows=500)
    assert data.n_rows == 500
    np.testing.assert_allclose(data.X.min(axis=0), 0.0)
    np.testing.assert_allclose(data.X.max(axis=0), 1.0)


def test_single_seed_reports_zero_std():
    result = run_condition(SyntheticSpec(True, 0.1, 8, 1), 1, QUICK, budget=25, subsample_rows=300)
    assert result.seeds == [0]
    assert result.std == 0.0
    assert 0.0 <= result.mean <= 1.0
    assert len(result.selected[0]) == 25


def test_run_condition_is_reproducible():
    a = run_condition(SyntheticSpec(False, 0.4), 2, QUICK, subsample_rows=300)
    b = run_condition(SyntheticSpec(False, 0.4), 2, QUICK, subsample_rows=300)
    assert a.fsr_values == b.fsr_values
    assert a.selected == b.selected


def test_summary_statistics():
    result = ExperimentResult(SyntheticSpec(), [0, 1, 2], [0.8, 0.9, 1.0], [1.0, 1.0, 1.0])
    assert result.mean == pytest.approx(0.9, abs=1e-12)
    assert result.std == pytest.approx(np.sqrt(2 / 300), abs=1e-12)
    assert result.summary() == "0.90±0.08"


def test_results_are_written_as_csv_and_json(tmp_path):
    results = [
        ExperimentResult(SyntheticSpec(True, 0.4, 8, 1), [0, 1], [1.0, 0.8], [2.0, 2.5]),
        ExperimentResult(SyntheticSpec(False, 0.1), [0, 1], [0.5, 0.5], [2.0, 2.0]),
    ]
    csv_path, json_path = write_results(results, tmp_path / "table")

    frame = pd.read_csv(csv_path, index_col=0)
    assert list(frame.columns) == ["{✓,40%,8,1}", "{×,10%}"]
    assert frame.loc["FSR", "{✓,40%,8,1}"] == "0.90±0.10"
    assert frame.loc["no. negative cluster", "{×,10%}"] == "-"

    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert payload[1]["condition"] == "{×,10%}"
    assert payload[0]["fsr"] == [1.0, 0.8]
    assert results_frame(results).shape == (7, 2)


@pytest.mark.slow
def test_smoke_table_run():
    config = RunConfig(iterations=500, em=EMConfig(max_iter=25))
    started = time.perf_counter()
    result = run_condition(SyntheticSpec(True, 0.1, 8, 1), 5, config, subsample_rows=1500)
    elapsed = time.perf_counter() - started

    assert result.mean >= 0.70
    # a smoke condition must finish within five minutes on one core
    assert elapsed < 300


@pytest.mark.slow
@pytest.mark.parametrize(
    "spec, low, high",
    [
        (SyntheticSpec(True, 0.1, 8, 1), 0.78, 1.0),
        (SyntheticSpec(True, 0.4, 8, 1), 0.80, 1.0),
        (SyntheticSpec(False, 0.1), 0.0, 0.70),
    ],
)
def test_table_reproduction(spec, low, high):
    result = run_condition(spec, 5, RunConfig(), n_jobs=-1)
    assert low <= result.mean <= high
