import json

import numpy as np
import pytest
from sklearn.preprocessing import MinMaxScaler

from data_processor import (
    Dataset,
    PUDataProcessor,
    apply_minmax,
    fit_minmax,
    sidecar_path,
    subsample,
)
from errors import DataError
from synthetic_data import SyntheticSpec, generate


def _dataset(column):
    return Dataset(X=np.array(column, dtype=float).reshape(-1, 1), s=np.array([1, 0, 0]))


def _error_code(path, **kwargs):
    with pytest.raises(DataError) as excinfo:
        PUDataProcessor().load_csv(path, **kwargs)
    return excinfo.value.code


def test_load_csv_maps_label_column(tmp_path):
    path = tmp_path / "three.csv"
    path.write_text("f1,label,f2\n0.5,1,3\n1.5,0,4\n2.5,0,5\n", encoding="utf-8")

    data = PUDataProcessor().load_csv(path)

    assert data.n_labeled == 1
    assert data.n_unlabeled == 2
    assert data.feature_names == ["f1", "f2"]
    np.testing.assert_array_equal(data.X, [[0.5, 3], [1.5, 4], [2.5, 5]])
    assert data.relevant_truth is None


def test_load_csv_custom_label_column(tmp_path):
    path = tmp_path / "custom.csv"
    path.write_text("a,b,is_pos\n1,2,0\n3,4,1\n", encoding="utf-8")
    data = PUDataProcessor().load_csv(path, label_column="is_pos")
    np.testing.assert_array_equal(data.s, [0, 1])


@pytest.mark.parametrize(
    "content, code",
    [
        ("x,label\n1,2\n2,0\n", "invalid_label"),
        ("x,label\n1,abc\n2,0\n", "invalid_label"),
        ("x,label\n1,1\nfoo,0\n", "non_numeric"),
        ("x,label\n1,1\n,0\n", "non_finite"),
        ("x,label\n", "empty"),
        ("x,label\n1,1\n2,1\n", "single_class"),
        ("x,label\n1,0\n2,0\n", "single_class"),
        ("x,y\n1,0\n2,1\n", "missing_label_column"),
        ("", "empty"),
    ],
)
def test_load_csv_error_codes(tmp_path, content, code):
    path = tmp_path / "bad.csv"
    path.write_text(content, encoding="utf-8")
    assert _error_code(path) == code


def test_invalid_label_message(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("x,label\n1,2\n2,0\n", encoding="utf-8")
    with pytest.raises(DataError, match="invalid PU label"):
        PUDataProcessor().load_csv(path)


def test_missing_file(tmp_path):
    assert _error_code(tmp_path / "nope.csv") == "missing_file"


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(X=np.array([[np.inf], [1.0]]), s=np.array([1, 0]))
    with pytest.raises(DataError):
        Dataset(X=np.ones((2, 1)), s=np.array([1, 0, 0]))
    with pytest.raises(DataError):
        Dataset(X=np.ones((2, 2)), s=np.array([1, 0]), relevant_truth=np.array([0, 0]))


def test_dataset_is_read_only():
    data = _dataset([1, 2, 3])
    with pytest.raises(ValueError):
        data.X[0, 0] = 10.0


@pytest.mark.parametrize(
    "column, expected",
    [
        ([2, 4, 6], [0.0, 0.5, 1.0]),
        ([5, 5, 5], [0.0, 0.0, 0.0]),
        ([-10, 0, 10], [0.0, 0.5, 1.0]),
    ],
)
def test_minmax_examples(column, expected):
    data = _dataset(column)
    scaled = apply_minmax(data, fit_minmax(data))
    np.testing.assert_allclose(scaled.X[:, 0], expected)


def test_minmax_does_not_clip_held_out_values():
    params = fit_minmax(_dataset([0, 5, 10]))
    held_out = apply_minmax(_dataset([-5, 5, 20]), params)
    np.testing.assert_allclose(held_out.X[:, 0], [-0.5, 0.5, 2.0])


def test_minmax_params_come_from_a_fitted_scaler():
    data = Dataset(X=np.array([[1.0, 7.0], [3.0, 7.0], [5.0, 7.0]]), s=np.array([1, 0, 0]))
    params = fit_minmax(data)

    assert isinstance(params.scaler, MinMaxScaler)
    np.testing.assert_array_equal(params.data_min, [1.0, 7.0])
    np.testing.assert_array_equal(params.data_max, [5.0, 7.0])
    np.testing.assert_allclose(apply_minmax(data, params).X, [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])

    with pytest.raises(DataError):
        apply_minmax(_dataset([1, 2, 3]), params)


def test_write_then_load_round_trip(tmp_path):
    data = generate(SyntheticSpec(seed=3))
    path = tmp_path / "synthetic.csv"
    processor = PUDataProcessor()

    processor.write_csv(data, path)
    loaded = processor.load_csv(path)

    np.testing.assert_array_equal(loaded.X, data.X)
    np.testing.assert_array_equal(loaded.s, data.s)
    np.testing.assert_array_equal(loaded.relevant_truth, data.relevant_truth)
    np.testing.assert_array_equal(loaded.y_truth, data.y_truth)
    assert loaded.feature_names == data.feature_names


def test_sidecar_layout(tmp_path):
    data = generate(SyntheticSpec(seed=1))
    path = tmp_path / "bench.csv"
    PUDataProcessor().write_csv(data, path)

    assert sidecar_path(path) == tmp_path / "bench.truth.json"
    truth = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    assert len(truth["relevant_features"]) == 25
    assert len(truth["positive_rows"]) == 500
    assert truth["label_column"] == "label"
    # ground truth never leaks into the feature file
    header = path.read_text(encoding="utf-8").splitlines()[0].split(",")
    assert len(header) == 51
    assert header[-1] == "label"


def test_sidecar_absent_gives_no_truth(tmp_path, pu_csv):
    assert not sidecar_path(pu_csv).exists()
    assert PUDataProcessor().load_csv(pu_csv).relevant_truth is None


def test_subsample_keeps_both_classes():
    data = generate(SyntheticSpec(labeled_rate=0.1, seed=2))
    small = subsample(data, 300, seed=0)

    assert small.n_rows == 300
    assert 0 < small.n_labeled < 300
    assert np.all(small.y_truth[small.s == 1] == 1)
    np.testing.assert_array_equal(small.relevant_truth, data.relevant_truth)


def test_clean_for_json_handles_numpy_and_nan():
    cleaned = PUDataProcessor().clean_for_json({"a": np.float64(np.nan), "b": np.arange(2), 3: (np.int64(4),)})
    assert cleaned == {"a": None, "b": [0, 1], "3": [4]}


def test_calculate_statistics(pu_csv):
    stats = PUDataProcessor().calculate_statistics(PUDataProcessor().load_csv(pu_csv))
    assert stats["n_rows"] == 4
    assert stats["n_labeled"] == 2
    assert stats["labeled_fraction"] == 0.5
    assert stats["has_ground_truth"] is False
