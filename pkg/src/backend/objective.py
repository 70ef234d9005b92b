"""
Cluster-assumption objective for PU feature selection.

For a clustering C_1..C_K of all rows and the labeled set L, the score of a
cluster subset S is

    recall * precision = |L ∩ ∪S|² / (|L| · |∪S|)

and f is its maximum over non-empty S. Sorting clusters by labeled ratio makes
the optimum a prefix of that order, so objective_value only scans K prefixes.
All comparisons are done on integers; the float is produced once at the end.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import mutual_info_score

from clustering import Clustering, EMConfig, count_labeled, fit_predict
from data_processor import Dataset
from errors import ObjectiveError

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_CLUSTERS = 20
MI_BINS = 10


@dataclass
class ObjectiveReport:
    f_value: float
    chosen_subset: Tuple[int, ...]
    per_cluster_ratio: List[float]
    recall: float
    precision: float
    labeled_in_subset: int = 0
    subset_size: int = 0
    n_labeled: int = 0
    mi_value: Optional[float] = None
    combined_value: Optional[float] = None

    @property
    def f_fraction(self) -> Fraction:
        """Exact value |L ∩ ∪S|² / (|L| · |∪S|)."""
        return Fraction(self.labeled_in_subset ** 2, self.n_labeled * self.subset_size)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "f": self.f_value,
            "recall": self.recall,
            "precision": self.precision,
            "chosen_clusters": list(self.chosen_subset),
            "ratios": list(self.per_cluster_ratio),
            "mi": self.mi_value,
            "combined": self.combined_value,
        }


@dataclass
class ScoreLog:
    """Raw f and MI scores seen during one optimization run. Append-only."""

    f_scores: List[float] = field(default_factory=list)
    mi_scores: List[float] = field(default_factory=list)

    def append(self, f: float, mi: float) -> None:
        self.f_scores.append(float(f))
        self.mi_scores.append(float(mi))

    def __len__(self):
        return len(self.f_scores)


def _counts(clustering: Clustering) -> Tuple[List[int], List[int], int]:
    if clustering.labeled_counts is None:
        raise ObjectiveError("clustering has no labeled counts; call count_labeled first", "no_labeled_data")
    sizes = [int(v) for v in clustering.sizes]
    labeled = [int(v) for v in clustering.labeled_counts]
    n_labeled = sum(labeled)
    if n_labeled < 1:
        raise ObjectiveError("no labeled data in the clustering", "no_labeled_data")
    return sizes, labeled, n_labeled


def _better(a_new: int, m_new: int, a_best: int, m_best: int) -> int:
    """Sign of a_new²/m_new - a_best²/m_best, computed on integers."""
    lhs = a_new * a_new * m_best
    rhs = a_best * a_best * m_new
    return (lhs > rhs) - (lhs < rhs)


def _report(subset: Sequence[int], sizes: List[int], labeled: List[int], n_labeled: int) -> ObjectiveReport:
    a = sum(labeled[k] for k in subset)
    m = sum(sizes[k] for k in subset)
    return ObjectiveReport(
        f_value=(a * a) / (n_labeled * m),
        chosen_subset=tuple(sorted(int(k) for k in subset)),
        per_cluster_ratio=[lab / size for lab, size in zip(labeled, sizes)],
        recall=a / n_labeled,
        precision=a / m,
        labeled_in_subset=a,
        subset_size=m,
        n_labeled=n_labeled,
    )


def ratio_order(sizes: Sequence[int], labeled: Sequence[int]) -> List[int]:
    """Cluster ids sorted by (ratio desc, size desc, id asc)."""
    return sorted(range(len(sizes)), key=lambda k: (-Fraction(labeled[k], sizes[k]), -sizes[k], k))


def objective_value(clustering: Clustering) -> ObjectiveReport:
    """
    Best cluster subset by scanning every prefix of the ratio order. Ties between
    prefixes go to the larger prefix.
    """
    sizes, labeled, n_labeled = _counts(clustering)
    order = ratio_order(sizes, labeled)

    a = m = 0
    best_len, best_a, best_m = 0, 0, 1
    for i, k in enumerate(order, start=1):
        a += labeled[k]
        m += sizes[k]
        if best_len == 0 or _better(a, m, best_a, best_m) >= 0:
            best_len, best_a, best_m = i, a, m
    return _report(order[:best_len], sizes, labeled, n_labeled)


def objective_value_early_stop(clustering: Clustering) -> ObjectiveReport:
    """Prefix scan that stops at the first prefix whose value drops."""
    sizes, labeled, n_labeled = _counts(clustering)
    order = ratio_order(sizes, labeled)

    best_len, best_a, best_m = 1, labeled[order[0]], sizes[order[0]]
    for i in range(2, len(order) + 1):
        a = best_a + labeled[order[i - 1]]
        m = best_m + sizes[order[i - 1]]
        if _better(a, m, best_a, best_m) < 0:
            break
        best_len, best_a, best_m = i, a, m
    return _report(order[:best_len], sizes, labeled, n_labeled)


def brute_force_best_subset(clustering: Clustering) -> ObjectiveReport:
    """Exhaustive search over all non-empty subsets; ties go to the largest subset."""
    if clustering.n_clusters > BRUTE_FORCE_MAX_CLUSTERS:
        raise ObjectiveError(
            f"brute force refuses K={clustering.n_clusters} > {BRUTE_FORCE_MAX_CLUSTERS}", "too_many_clusters"
        )
    sizes, labeled, n_labeled = _counts(clustering)

    best: Optional[Tuple[int, ...]] = None
    best_a, best_m = 0, 1
    for r in range(1, len(sizes) + 1):
        for subset in itertools.combinations(range(len(sizes)), r):
            a = sum(labeled[k] for k in subset)
            m = sum(sizes[k] for k in subset)
            # r only grows, so >= keeps the largest subset among equal values
            if best is None or _better(a, m, best_a, best_m) >= 0:
                best, best_a, best_m = subset, a, m
    return _report(best, sizes, labeled, n_labeled)


def _check_mask(data: Dataset, mask: Sequence[int]) -> np.ndarray:
    bits = np.asarray(mask).astype(bool)
    if bits.shape != (data.n_features,):
        raise ObjectiveError(f"mask has length {bits.size}, dataset has {data.n_features} features", "empty_mask")
    if not bits.any():
        raise ObjectiveError("feature mask selects no feature", "empty_mask")
    return bits


def evaluate_mask(
    data: Dataset,
    mask: Sequence[int],
    n_clusters: int = 10,
    seed: int = 0,
    em_config: Optional[EMConfig] = None,
    objective: Callable[[Clustering], ObjectiveReport] = objective_value,
) -> ObjectiveReport:
    """Mask the columns, cluster, count labels per cluster and score."""
    bits = _check_mask(data, mask)
    clustering = fit_predict(data.X[:, bits], n_clusters, seed, em_config)
    return objective(count_labeled(clustering, data.s))


def feature_bins(x: np.ndarray, n_bins: int = MI_BINS) -> np.ndarray:
    """
    Equal-frequency bin codes. Features with at most n_bins distinct values keep
    one bin per value; otherwise quantile edges are used with duplicates merged.
    """
    values, codes = np.unique(x, return_inverse=True)
    if values.size <= n_bins:
        return codes.ravel()
    return np.asarray(pd.qcut(x, q=n_bins, labels=False, duplicates="drop"), dtype=np.int64)


def mi_score(data: Dataset, mask: Sequence[int], n_bins: int = MI_BINS) -> float:
    """Mean over selected features of the binned mutual information (nats) with s."""
    bits = _check_mask(data, mask)
    scores = [mutual_info_score(data.s, feature_bins(data.X[:, j], n_bins)) for j in np.flatnonzero(bits)]
    return float(max(np.mean(scores), 0.0))


def _scale(values: List[float]) -> float:
    if len(values) < 2:
        return 1.0
    std = float(np.std(values))
    return std if std > 0 else 1.0


def combined_score(f: float, mi: float, log: ScoreLog) -> float:
    """f / Std[f log] + mi / Std[mi log], population std, divisor 1 when degenerate."""
    return f / _scale(log.f_scores) + mi / _scale(log.mi_scores)
