"""
Synthetic PU benchmarks: a clustered dataset where positives form their own
Gaussian clusters, and an outlier dataset where positives are the rows with the
largest norms of a single Gaussian.

Both generators draw from one PCG64 generator (numpy.random.default_rng) seeded
once per call, so equal seeds give bit-identical datasets.
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from data_processor import Dataset
from errors import ConfigError

logger = logging.getLogger(__name__)

N_NEGATIVE_ROWS = 4000
N_POSITIVE_ROWS = 500
N_RELEVANT = 25
N_UNIFORM_IRRELEVANT = 20
N_NOISY_COPIES = 5
N_FEATURES = N_RELEVANT + N_UNIFORM_IRRELEVANT + N_NOISY_COPIES

CLUSTER_MEAN_RANGE = (-5.0, 5.0)
CLUSTER_VARIANCE = 10.0
OUTLIER_VARIANCE = 25.0
IRRELEVANT_RANGE = (-10.0, 10.0)
NOISE_VARIANCE = 1.0


@dataclass(frozen=True)
class SyntheticSpec:
    cluster_assumption: bool = True
    labeled_rate: float = 0.4
    n_negative_clusters: int = 8
    n_positive_clusters: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.labeled_rate <= 1.0):
            raise ConfigError(f"labeled_rate must be in (0, 1], got {self.labeled_rate}", "invalid_spec")
        if n_labeled_rows(self.labeled_rate) < 1:
            raise ConfigError(f"labeled_rate {self.labeled_rate} labels no positive row", "invalid_spec")
        if self.cluster_assumption:
            if self.n_negative_clusters < 1 or self.n_positive_clusters < 1:
                raise ConfigError("cluster counts must be >= 1", "invalid_spec")
            if self.n_negative_clusters > N_NEGATIVE_ROWS or self.n_positive_clusters > N_POSITIVE_ROWS:
                raise ConfigError("more clusters than rows", "invalid_spec")

    def label(self) -> str:
        """Short condition label, e.g. '{✓,40%,8,1}' or '{×,10%}'."""
        rate = f"{round(self.labeled_rate * 100)}%"
        if self.cluster_assumption:
            return f"{{✓,{rate},{self.n_negative_clusters},{self.n_positive_clusters}}}"
        return f"{{×,{rate}}}"

    def to_dict(self):
        return asdict(self)


def n_labeled_rows(labeled_rate: float, n_positive: int = N_POSITIVE_ROWS) -> int:
    # the epsilon keeps 0.1 * 500 from flooring to 49
    return int(math.floor(labeled_rate * n_positive + 1e-9))


def _gaussian_blocks(rng: np.random.Generator, n_rows: int, n_clusters: int) -> np.ndarray:
    """Rows split as equally as possible across isotropic Gaussians with uniform means."""
    blocks = []
    for size in (len(part) for part in np.array_split(np.arange(n_rows), n_clusters)):
        mean = rng.uniform(*CLUSTER_MEAN_RANGE, size=N_RELEVANT)
        blocks.append(rng.normal(loc=mean, scale=math.sqrt(CLUSTER_VARIANCE), size=(size, N_RELEVANT)))
    return np.vstack(blocks)


def _irrelevant_block(rng: np.random.Generator, n_rows: int) -> np.ndarray:
    uniform = rng.uniform(*IRRELEVANT_RANGE, size=(n_rows, N_UNIFORM_IRRELEVANT))
    sources = rng.choice(N_UNIFORM_IRRELEVANT, size=N_NOISY_COPIES, replace=False)
    noisy = uniform[:, sources] + rng.normal(0.0, math.sqrt(NOISE_VARIANCE), size=(n_rows, N_NOISY_COPIES))
    return np.hstack([uniform, noisy])


def _assemble(
    rng: np.random.Generator,
    relevant: np.ndarray,
    y_truth: np.ndarray,
    labeled_rate: float,
    metadata: dict,
) -> Dataset:
    n_rows = relevant.shape[0]
    X = np.hstack([relevant, _irrelevant_block(rng, n_rows)])
    relevant_truth = np.r_[np.ones(N_RELEVANT, dtype=np.int8), np.zeros(N_FEATURES - N_RELEVANT, dtype=np.int8)]

    # shuffle rows and columns so that neither position leaks the ground truth
    row_order = rng.permutation(n_rows)
    col_order = rng.permutation(N_FEATURES)
    X = X[row_order][:, col_order]
    y_truth = y_truth[row_order]
    relevant_truth = relevant_truth[col_order]

    s = np.zeros(n_rows, dtype=np.int8)
    positives = np.flatnonzero(y_truth)
    s[rng.choice(positives, size=n_labeled_rows(labeled_rate, positives.size), replace=False)] = 1

    return Dataset(
        X=X,
        s=s,
        feature_names=[f"feature_{j:02d}" for j in range(N_FEATURES)],
        relevant_truth=relevant_truth,
        y_truth=y_truth,
        metadata=metadata,
    )


def generate_clustered(spec: SyntheticSpec) -> Dataset:
    """4000 negatives and 500 positives, each drawn from its own set of Gaussians."""
    if not spec.cluster_assumption:
        raise ConfigError("generate_clustered needs cluster_assumption=True", "invalid_spec")
    rng = np.random.default_rng(spec.seed)
    negatives = _gaussian_blocks(rng, N_NEGATIVE_ROWS, spec.n_negative_clusters)
    positives = _gaussian_blocks(rng, N_POSITIVE_ROWS, spec.n_positive_clusters)
    y_truth = np.r_[np.zeros(N_NEGATIVE_ROWS, dtype=np.int8), np.ones(N_POSITIVE_ROWS, dtype=np.int8)]
    data = _assemble(rng, np.vstack([negatives, positives]), y_truth, spec.labeled_rate, spec.to_dict())
    logger.debug(f"Generated clustered dataset {spec.label()} with L={data.n_labeled}")
    return data


def generate_outlier(labeled_rate: float, seed: int) -> Dataset:
    """One Gaussian of 4500 rows; the 500 rows with the largest norms are the positives."""
    spec = SyntheticSpec(cluster_assumption=False, labeled_rate=labeled_rate, seed=seed)
    rng = np.random.default_rng(seed)
    n_rows = N_NEGATIVE_ROWS + N_POSITIVE_ROWS
    relevant = rng.normal(0.0, math.sqrt(OUTLIER_VARIANCE), size=(n_rows, N_RELEVANT))
    norms = np.linalg.norm(relevant, axis=1)
    y_truth = np.zeros(n_rows, dtype=np.int8)
    y_truth[np.argsort(-norms, kind="stable")[:N_POSITIVE_ROWS]] = 1
    metadata = {
        "cluster_assumption": False,
        "labeled_rate": labeled_rate,
        "n_negative_clusters": None,
        "n_positive_clusters": None,
        "seed": seed,
    }
    data = _assemble(rng, relevant, y_truth, labeled_rate, metadata)
    logger.debug(f"Generated outlier dataset {spec.label()} with L={data.n_labeled}")
    return data


def generate(spec: SyntheticSpec) -> Dataset:
    """Dispatch on spec.cluster_assumption."""
    if spec.cluster_assumption:
        return generate_clustered(spec)
    return generate_outlier(spec.labeled_rate, spec.seed)
