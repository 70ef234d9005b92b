import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from sklearn.preprocessing import MinMaxScaler

from errors import DataError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_LABEL_COLUMN = "label"
SIDECAR_SUFFIX = ".truth.json"


def _frozen(values: Optional[np.ndarray], dtype) -> Optional[np.ndarray]:
    if values is None:
        return None
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """
    PU dataset: feature matrix X (n x D), PU indicator s (1 = labeled positive,
    0 = unlabeled) and, for synthetic data, the ground truth used by FSR.
    """

    X: np.ndarray
    s: np.ndarray
    feature_names: Optional[List[str]] = None
    relevant_truth: Optional[np.ndarray] = None
    y_truth: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        X = _frozen(self.X, np.float64)
        if X.ndim != 2:
            raise DataError(f"X must be a 2-D matrix, got shape {X.shape}", "length_mismatch")
        n, d = X.shape
        if n < 1:
            raise DataError("dataset has zero rows", "empty")
        if d < 1:
            raise DataError("dataset has zero feature columns", "empty")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite values", "non_finite")

        s = _frozen(self.s, np.int8)
        if s.shape != (n,):
            raise DataError(f"s has length {s.size}, expected {n}", "length_mismatch")
        if not np.isin(s, (0, 1)).all():
            raise DataError("invalid PU label: s must contain only 0 and 1", "invalid_label")
        if s.sum() == 0 or s.sum() == n:
            raise DataError(
                "dataset needs at least one labeled and one unlabeled row", "single_class"
            )

        if self.feature_names is not None and len(self.feature_names) != d:
            raise DataError(
                f"{len(self.feature_names)} feature names for {d} columns", "length_mismatch"
            )
        relevant = _frozen(self.relevant_truth, np.int8)
        if relevant is not None:
            if relevant.shape != (d,):
                raise DataError("relevant_truth length differs from D", "length_mismatch")
            if relevant.sum() < 1:
                raise DataError("relevant_truth marks no relevant feature", "no_ground_truth")
        y_truth = _frozen(self.y_truth, np.int8)
        if y_truth is not None and y_truth.shape != (n,):
            raise DataError("y_truth length differs from n", "length_mismatch")

        object.__setattr__(self, "X", X)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "relevant_truth", relevant)
        object.__setattr__(self, "y_truth", y_truth)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", [str(name) for name in self.feature_names])

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_labeled(self) -> int:
        return int(self.s.sum())

    @property
    def n_unlabeled(self) -> int:
        return self.n_rows - self.n_labeled

    def names(self) -> List[str]:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"feature_{j:02d}" for j in range(self.n_features)]

    def with_X(self, X: np.ndarray) -> "Dataset":
        """Copy of this dataset with a replaced feature matrix (same shape)."""
        return Dataset(
            X=X,
            s=self.s,
            feature_names=self.feature_names,
            relevant_truth=self.relevant_truth,
            y_truth=self.y_truth,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature min and max learned from training data, held by a fitted MinMaxScaler."""

    scaler: MinMaxScaler

    @property
    def data_min(self) -> np.ndarray:
        return self.scaler.data_min_

    @property
    def data_max(self) -> np.ndarray:
        return self.scaler.data_max_


def fit_minmax(data: Dataset) -> NormalizationParams:
    return NormalizationParams(scaler=MinMaxScaler(clip=False).fit(data.X))


def apply_minmax(data: Dataset, params: NormalizationParams) -> Dataset:
    """
    Map every column to (x - min) / (max - min). Constant columns map to 0 and
    held-out values are not clipped, so they may leave [0, 1].
    """
    if params.data_min.shape != (data.n_features,):
        raise DataError("normalization params do not match the feature count", "length_mismatch")
    return data.with_X(params.scaler.transform(data.X))


def subsample(data: Dataset, n_rows: int, seed: int) -> Dataset:
    """Uniform row subsample without replacement that keeps L >= 1 and U >= 1."""
    if n_rows >= data.n_rows:
        return data
    rng = np.random.default_rng(seed)
    for _ in range(100):
        rows = np.sort(rng.choice(data.n_rows, size=n_rows, replace=False))
        labeled = int(data.s[rows].sum())
        if 0 < labeled < n_rows:
            break
    else:
        raise DataError(f"could not draw {n_rows} rows with both labeled and unlabeled data", "single_class")
    return Dataset(
        X=data.X[rows],
        s=data.s[rows],
        feature_names=data.feature_names,
        relevant_truth=data.relevant_truth,
        y_truth=None if data.y_truth is None else data.y_truth[rows],
        metadata={**data.metadata, "subsampled_rows": int(n_rows)},
    )


def sidecar_path(csv_path: PathLike) -> Path:
    path = Path(csv_path)
    return path.with_name(path.stem + SIDECAR_SUFFIX)


class PUDataProcessor:
    """
    Read and write PU datasets as CSV, with ground truth kept in a JSON sidecar
    next to the feature file.
    """

    float_format = "%.17g"

    def clean_for_json(self, obj):
        """
        Clean data for JSON serialization by handling NaN, inf, and numpy scalars
        """
        if isinstance(obj, dict):
            return {str(k): self.clean_for_json(v) for k, v in obj.items()}
        elif isinstance(obj, (list, tuple)):
            return [self.clean_for_json(v) for v in obj]
        elif isinstance(obj, np.ndarray):
            return [self.clean_for_json(x) for x in obj.tolist()]
        elif isinstance(obj, (np.integer, np.floating, np.bool_)):
            return self.clean_for_json(obj.item())
        elif isinstance(obj, float):
            if np.isnan(obj) or np.isinf(obj):
                return None
            return obj
        return obj

    def load_csv(self, path: PathLike, label_column: str = DEFAULT_LABEL_COLUMN) -> Dataset:
        """
        Load a feature CSV: the label column becomes s, every other column (in file
        order) becomes a feature. A ground-truth sidecar is picked up when present.
        """
        path = Path(path)
        if not path.is_file():
            raise DataError(f"file not found: {path}", "missing_file")

        try:
            df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
        except pd.errors.EmptyDataError:
            raise DataError(f"{path} is empty", "empty")
        except (UnicodeDecodeError, pd.errors.ParserError) as e:
            raise DataError(f"could not parse {path}: {e}", "non_numeric")

        if label_column not in df.columns:
            raise DataError(f"label column '{label_column}' not found in {path}", "missing_label_column")
        if len(df) == 0:
            raise DataError(f"{path} has zero rows", "empty")

        labels = pd.to_numeric(df[label_column], errors="coerce")
        if labels.isna().any() or not labels.isin([0, 1]).all():
            bad = df[label_column][~labels.isin([0, 1])].iloc[0]
            raise DataError(f"invalid PU label {bad!r} in column '{label_column}'", "invalid_label")

        features = df.drop(columns=[label_column])
        if features.shape[1] == 0:
            raise DataError(f"{path} has no feature columns", "empty")
        for col in features.columns:
            if not pd.api.types.is_numeric_dtype(features[col]):
                converted = pd.to_numeric(features[col], errors="coerce")
                bad_rows = converted.isna() & features[col].notna()
                if bad_rows.any():
                    cell = features[col][bad_rows].iloc[0]
                    raise DataError(f"non-numeric value {cell!r} in column '{col}'", "non_numeric")
                features[col] = converted
        X = features.to_numpy(dtype=np.float64)
        if not np.all(np.isfinite(X)):
            raise DataError(f"{path} contains empty or non-finite cells", "non_finite")

        s = labels.to_numpy(dtype=np.int8)
        if s.sum() == 0 or s.sum() == len(s):
            state = "all-unlabeled" if s.sum() == 0 else "all-labeled"
            raise DataError(f"{path} is {state}; need both labeled and unlabeled rows", "single_class")

        feature_names = [str(c) for c in features.columns]
        relevant_truth, y_truth, metadata = self._read_sidecar(path, feature_names, len(df))
        data = Dataset(
            X=X,
            s=s,
            feature_names=feature_names,
            relevant_truth=relevant_truth,
            y_truth=y_truth,
            metadata={**metadata, "source": str(path), "label_column": label_column},
        )
        logger.info(f"📁 Loaded {path.name}: n={data.n_rows}, D={data.n_features}, L={data.n_labeled}")
        return data

    def _read_sidecar(self, csv_path: Path, feature_names: List[str], n_rows: int):
        truth_file = sidecar_path(csv_path)
        if not truth_file.exists():
            return None, None, {}
        try:
            with open(truth_file, "r", encoding="utf-8") as f:
                truth = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Ignoring unreadable ground-truth file {truth_file}: {e}")
            return None, None, {}

        relevant_names = set(truth.get("relevant_features", []))
        unknown = relevant_names.difference(feature_names)
        if unknown:
            raise DataError(f"ground truth names unknown columns: {sorted(unknown)}", "no_ground_truth")
        relevant_truth = np.array([1 if name in relevant_names else 0 for name in feature_names], dtype=np.int8)

        y_truth = None
        if "positive_rows" in truth:
            y_truth = np.zeros(n_rows, dtype=np.int8)
            y_truth[np.asarray(truth["positive_rows"], dtype=np.int64)] = 1
        metadata = {k: v for k, v in truth.items() if k not in ("relevant_features", "positive_rows")}
        return relevant_truth, y_truth, metadata

    def write_csv(self, data: Dataset, path: PathLike, label_column: str = DEFAULT_LABEL_COLUMN) -> None:
        """
        Write features plus the label column; ground truth, when present, goes to the
        sidecar and never into the feature CSV.
        """
        path = Path(path)
        names = data.names()
        if label_column in names:
            raise DataError(f"label column '{label_column}' clashes with a feature name", "invalid_label")
        df = pd.DataFrame(data.X, columns=names)
        df[label_column] = data.s.astype(np.int64)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            df.to_csv(path, index=False, float_format=self.float_format, encoding="utf-8")
            if data.relevant_truth is not None:
                truth = {
                    **{k: v for k, v in data.metadata.items() if k != "source"},
                    "feature_names": names,
                    "relevant_features": [n for n, r in zip(names, data.relevant_truth) if r],
                    "label_column": label_column,
                }
                if data.y_truth is not None:
                    truth["positive_rows"] = np.flatnonzero(data.y_truth).tolist()
                with open(sidecar_path(path), "w", encoding="utf-8") as f:
                    json.dump(self.clean_for_json(truth), f, indent=2)
        except OSError as e:
            raise DataError(f"could not write {path}: {e}", "io_error")
        logger.info(f"Wrote {path} ({data.n_rows} rows, {data.n_features + 1} columns)")

    def calculate_statistics(self, data: Dataset) -> Dict[str, Any]:
        """Basic shape and label statistics for logs and artifacts."""
        return {
            "n_rows": data.n_rows,
            "n_features": data.n_features,
            "n_labeled": data.n_labeled,
            "n_unlabeled": data.n_unlabeled,
            "labeled_fraction": data.n_labeled / data.n_rows,
            "has_ground_truth": data.relevant_truth is not None,
        }
