"""
Clustering backends used by the objective: a diagonal-covariance Gaussian
mixture fitted by EM (default) and k-means.

Both are pure functions of (X, seed). The EM steps are written as matrix
products over the n x K responsibilities, with squared distances expanded as
sum(mu² / var) - 2 x·(mu / var) + x²·(1 / var).
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Type

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import KMeans, kmeans_plusplus

from errors import ClusteringError, ConfigError, DataError

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-7
COLLAPSED_WEIGHT = 1e-6


@dataclass
class EMConfig:
    n_components: int = 10
    max_iter: int = 100
    tol: float = 1e-4
    var_floor: float = 1e-6
    backend: str = "gmm"
    check_monotone: bool = False

    def __post_init__(self):
        if self.n_components < 1:
            raise ConfigError("n_components must be >= 1", "invalid_em_config")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1", "invalid_em_config")
        if self.var_floor <= 0:
            raise ConfigError("var_floor must be positive", "invalid_em_config")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown clustering backend '{self.backend}'", "invalid_em_config")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Clustering:
    """
    Partition of n rows into K non-empty clusters. labeled_counts is None until
    count_labeled has been applied.
    """

    assignment: np.ndarray
    n_clusters: int
    sizes: np.ndarray
    labeled_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.sizes.sum() != self.assignment.size:
            raise DataError("cluster sizes do not sum to n", "length_mismatch")
        if np.any(self.sizes < 1):
            raise DataError("clusters must be non-empty", "length_mismatch")
        if self.labeled_counts is not None:
            if np.any(self.labeled_counts < 0) or np.any(self.labeled_counts > self.sizes):
                raise DataError("labeled counts must lie in [0, size]", "length_mismatch")

    @classmethod
    def from_assignment(cls, assignment: Sequence[int]) -> "Clustering":
        """Renumber cluster ids to 0..K'-1, dropping ids that have no rows."""
        _, relabeled = np.unique(np.asarray(assignment), return_inverse=True)
        relabeled = relabeled.astype(np.int64).ravel()
        sizes = np.bincount(relabeled)
        return cls(assignment=relabeled, n_clusters=int(sizes.size), sizes=sizes)

    @classmethod
    def from_counts(cls, sizes: Sequence[int], labeled_counts: Sequence[int]) -> "Clustering":
        """Build a clustering directly from per-cluster sizes and labeled counts."""
        sizes = np.asarray(sizes, dtype=np.int64)
        labeled_counts = np.asarray(labeled_counts, dtype=np.int64)
        if sizes.shape != labeled_counts.shape:
            raise DataError("sizes and labeled_counts differ in length", "length_mismatch")
        assignment = np.repeat(np.arange(sizes.size), sizes)
        return cls(assignment=assignment, n_clusters=int(sizes.size), sizes=sizes, labeled_counts=labeled_counts)

    @property
    def n_labeled(self) -> int:
        if self.labeled_counts is None:
            raise DataError("labeled counts have not been computed", "length_mismatch")
        return int(self.labeled_counts.sum())


@dataclass
class GmmParams:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray


def count_labeled(clustering: Clustering, s: np.ndarray) -> Clustering:
    """Per-cluster count of labeled rows; the assignment is left untouched."""
    s = np.asarray(s)
    if s.shape != clustering.assignment.shape:
        raise DataError(
            f"PU indicator has length {s.size}, clustering covers {clustering.assignment.size} rows",
            "length_mismatch",
        )
    labeled = np.bincount(clustering.assignment, weights=s.astype(np.float64), minlength=clustering.n_clusters)
    return Clustering(
        assignment=clustering.assignment,
        n_clusters=clustering.n_clusters,
        sizes=clustering.sizes,
        labeled_counts=np.rint(labeled).astype(np.int64),
    )


class GaussianMixture:
    """
    Gaussian mixture with diagonal covariances fitted by EM.

    Initialization is a single k-means++ seeding. Variances are clipped from below
    at var_floor, which keeps every M-step a constrained maximizer and the
    log-likelihood non-decreasing. A component whose weight collapses is reseeded
    at the row the mixture explains worst.
    """

    def __init__(self, n_components: int = 10, max_iter: int = 100, tol: float = 1e-4,
                 var_floor: float = 1e-6, check_monotone: bool = False):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.var_floor = var_floor
        self.check_monotone = check_monotone

        self.params_: Optional[GmmParams] = None
        self.log_likelihoods_: List[float] = []
        self.reseeded_at_: List[int] = []
        self.converged_ = False
        self.n_iter_ = 0

    def _initialize(self, X: np.ndarray, seed: int, n_components: int) -> GmmParams:
        means, _ = kmeans_plusplus(X, n_clusters=n_components, random_state=seed)
        variances = np.maximum(np.tile(X.var(axis=0), (n_components, 1)), self.var_floor)
        weights = np.full(n_components, 1.0 / n_components)
        return GmmParams(weights=weights, means=means, variances=variances)

    @staticmethod
    def _weighted_log_prob(X: np.ndarray, params: GmmParams) -> np.ndarray:
        # ||x - mu||² / var expanded into matrix products, n x K
        precisions = 1.0 / params.variances
        mahalanobis = (
            np.sum(params.means ** 2 * precisions, axis=1)[None, :]
            - 2.0 * X @ (params.means * precisions).T
            + (X * X) @ precisions.T
        )
        log_det = np.log(params.variances).sum(axis=1)
        n_features = X.shape[1]
        with np.errstate(divide="ignore"):
            log_weights = np.log(params.weights)
        return -0.5 * (n_features * np.log(2 * np.pi) + log_det[None, :] + mahalanobis) + log_weights[None, :]

    def _e_step(self, X: np.ndarray, params: GmmParams):
        weighted = self._weighted_log_prob(X, params)
        row_ll = logsumexp(weighted, axis=1)
        responsibilities = np.exp(weighted - row_ll[:, None])
        return responsibilities, row_ll

    def _m_step(self, X: np.ndarray, responsibilities: np.ndarray) -> GmmParams:
        n_k = responsibilities.sum(axis=0)
        safe_n_k = np.where(n_k > 0, n_k, 1.0)
        means = (responsibilities.T @ X) / safe_n_k[:, None]
        second_moment = (responsibilities.T @ (X * X)) / safe_n_k[:, None]
        variances = np.maximum(second_moment - means ** 2, self.var_floor)
        return GmmParams(weights=n_k / X.shape[0], means=means, variances=variances)

    def _reseed_collapsed(self, X: np.ndarray, params: GmmParams, row_ll: np.ndarray) -> bool:
        collapsed = np.flatnonzero(params.weights < COLLAPSED_WEIGHT)
        if collapsed.size == 0:
            return False
        worst_rows = np.argsort(row_ll, kind="stable")
        base_variance = np.maximum(X.var(axis=0), self.var_floor)
        for component, row in zip(collapsed, worst_rows):
            params.means[component] = X[row]
            params.variances[component] = base_variance
            params.weights[component] = 1.0 / params.weights.size
        params.weights /= params.weights.sum()
        logger.debug(f"Reseeded {collapsed.size} collapsed GMM component(s)")
        return True

    def fit(self, X: np.ndarray, seed: int) -> "GaussianMixture":
        X = np.asarray(X, dtype=np.float64)
        n_components = min(self.n_components, X.shape[0])
        params = self._initialize(X, seed, n_components)

        self.log_likelihoods_ = []
        self.reseeded_at_ = []
        self.converged_ = False
        reseeded_last_step = True
        for iteration in range(self.max_iter):
            responsibilities, row_ll = self._e_step(X, params)
            mean_ll = float(row_ll.mean())

            if self.log_likelihoods_ and not reseeded_last_step:
                previous = self.log_likelihoods_[-1]
                if self.check_monotone and mean_ll < previous - MONOTONE_SLACK:
                    raise ClusteringError(
                        f"EM log-likelihood decreased from {previous} to {mean_ll} at iteration {iteration}",
                        "non_monotone_likelihood",
                    )
                self.log_likelihoods_.append(mean_ll)
                if mean_ll - previous < self.tol:
                    self.converged_ = True
                    break
            else:
                self.log_likelihoods_.append(mean_ll)

            params = self._m_step(X, responsibilities)
            reseeded_last_step = self._reseed_collapsed(X, params, row_ll)
            if reseeded_last_step:
                self.reseeded_at_.append(iteration)

        self.params_ = params
        self.n_iter_ = len(self.log_likelihoods_)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.params_ is None:
            raise ClusteringError("model is not fitted", "not_fitted")
        responsibilities, _ = self._e_step(np.asarray(X, dtype=np.float64), self.params_)
        return responsibilities

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


class ClusteringBackend(ABC):
    """Maps a masked data matrix to one cluster id per row."""

    def __init__(self, config: EMConfig):
        self.config = config

    @abstractmethod
    def assign(self, X: np.ndarray, n_clusters: int, seed: int) -> np.ndarray:
        ...


class GmmBackend(ClusteringBackend):
    def assign(self, X, n_clusters, seed):
        model = GaussianMixture(
            n_components=n_clusters,
            max_iter=self.config.max_iter,
            tol=self.config.tol,
            var_floor=self.config.var_floor,
            check_monotone=self.config.check_monotone,
        ).fit(X, seed)
        return model.predict(X)


class KMeansBackend(ClusteringBackend):
    def assign(self, X, n_clusters, seed):
        model = KMeans(
            n_clusters=min(n_clusters, X.shape[0]),
            init="k-means++",
            n_init=1,
            max_iter=self.config.max_iter,
            tol=self.config.tol,
            random_state=seed,
        )
        return model.fit_predict(X)


BACKENDS: Dict[str, Type[ClusteringBackend]] = {
    "gmm": GmmBackend,
    "kmeans": KMeansBackend,
}


def get_backend(config: EMConfig) -> ClusteringBackend:
    return BACKENDS[config.backend](config)


def fit_predict(X_masked: np.ndarray, n_clusters: int, seed: int, config: Optional[EMConfig] = None) -> Clustering:
    """
    Cluster the masked rows into at most min(n_clusters, n) non-empty groups.
    Empty components are dropped and the remaining ids renumbered.
    """
    config = config or EMConfig()
    X_masked = np.asarray(X_masked, dtype=np.float64)
    if X_masked.ndim != 2 or X_masked.shape[0] < 1 or X_masked.shape[1] < 1:
        raise DataError(f"cannot cluster a matrix of shape {X_masked.shape}", "empty")
    if n_clusters < 1:
        raise ConfigError("number of clusters must be >= 1", "invalid_em_config")

    assignment = get_backend(config).assign(X_masked, min(n_clusters, X_masked.shape[0]), seed)
    clustering = Clustering.from_assignment(assignment)
    if clustering.n_clusters < min(n_clusters, X_masked.shape[0]):
        logger.debug(f"Dropped {min(n_clusters, X_masked.shape[0]) - clustering.n_clusters} empty cluster(s)")
    return clustering
