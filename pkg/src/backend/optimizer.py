"""
Binary feature-mask optimizer: a compact-GA / IGO loop over independent
Bernoulli parameters theta, with a theta-biased repair operator that projects
every sampled mask onto the feasible and maximal set under a cost budget.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from clustering import EMConfig
from data_processor import Dataset
from errors import ConfigError, ObjectiveError
from objective import ObjectiveReport, ScoreLog, combined_score, evaluate_mask, mi_score

logger = logging.getLogger(__name__)

OBJECTIVE_MODES = ("fscpu", "fscpu_mi")
CONVERGED_LOW = 0.1
CONVERGED_HIGH = 0.9

# (mask bits, evaluation seed) -> score
MaskObjective = Callable[[np.ndarray, int], float]


@dataclass
class FeatureMask:
    bits: np.ndarray
    costs: np.ndarray
    budget: float

    @property
    def total_cost(self) -> float:
        return float(self.costs[self.bits == 1].sum())

    @property
    def slack(self) -> float:
        return self.budget - self.total_cost

    def is_feasible(self) -> bool:
        return self.total_cost <= self.budget

    def is_maximal(self) -> bool:
        unselected = self.costs[self.bits == 0]
        return unselected.size == 0 or bool(unselected.min() > self.slack)

    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def copy(self) -> "FeatureMask":
        return FeatureMask(bits=self.bits.copy(), costs=self.costs, budget=self.budget)


@dataclass
class ThetaVector:
    theta: np.ndarray
    epsilon: float
    eta: float

    def clip(self) -> "ThetaVector":
        return ThetaVector(np.clip(self.theta, self.epsilon, 1.0 - self.epsilon), self.epsilon, self.eta)

    def in_bounds(self) -> bool:
        return bool(np.all((self.theta >= self.epsilon) & (self.theta <= 1.0 - self.epsilon)))

    @property
    def d(self) -> int:
        return self.theta.size


@dataclass
class RunConfig:
    iterations: int = 3000
    n_clusters: int = 10
    seed: int = 0
    objective_mode: str = "fscpu"
    trace_every: int = 10
    eta: Optional[float] = None
    epsilon: Optional[float] = None
    debug_checks: bool = False
    em: EMConfig = field(default_factory=EMConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iteration count must be >= 1, got {self.iterations}", "invalid_run_config")
        if self.objective_mode not in OBJECTIVE_MODES:
            raise ConfigError(f"unknown objective mode '{self.objective_mode}'", "invalid_run_config")
        if self.trace_every < 1:
            raise ConfigError("trace_every must be >= 1", "invalid_run_config")
        if self.n_clusters < 1:
            raise ConfigError("cluster count must be >= 1", "invalid_run_config")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunResult:
    final_theta: np.ndarray
    selected_features: List[int]
    theta_trace: List[Tuple[int, np.ndarray]]
    best_mask: np.ndarray
    best_score: float
    convergence_fraction: float
    n_evaluations: int
    wall_clock_seconds: float
    config: Dict[str, Any]
    score_log_length: int = 0
    best_report: Optional[ObjectiveReport] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "selected_features": [int(j) for j in self.selected_features],
            "final_theta": self.final_theta.tolist(),
            "best_f": self.best_score,
            "best_mask": [int(b) for b in self.best_mask],
            "best_report": None if self.best_report is None else self.best_report.to_dict(),
            "convergence_fraction": self.convergence_fraction,
            "n_evaluations": self.n_evaluations,
            "score_log_length": self.score_log_length,
            "config": self.config,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def unit_costs(d: int) -> np.ndarray:
    return np.ones(d, dtype=np.float64)


def _check_budget(costs: np.ndarray, budget: float) -> None:
    if costs.size == 0:
        raise ConfigError("no features to select from", "invalid_budget")
    if np.any(costs <= 0):
        raise ConfigError("feature costs must be positive", "invalid_budget")
    if budget < costs.min():
        raise ConfigError(f"budget {budget} is below the cheapest feature cost {costs.min()}", "invalid_budget")


def init_theta(
    costs: Sequence[float],
    budget: float,
    d: Optional[int] = None,
    epsilon: Optional[float] = None,
    eta: Optional[float] = None,
) -> ThetaVector:
    """theta_l = budget / sum(costs) for every feature, clipped; eps = 1/d, eta = 1/(2d)."""
    costs = np.asarray(costs, dtype=np.float64)
    d = costs.size if d is None else d
    if costs.size != d:
        raise ConfigError(f"{costs.size} costs for {d} features", "invalid_budget")
    _check_budget(costs, budget)
    epsilon = 1.0 / d if epsilon is None else epsilon
    eta = 1.0 / (2 * d) if eta is None else eta
    return ThetaVector(np.full(d, budget / costs.sum()), epsilon, eta).clip()


def sample_mask(theta: ThetaVector, rng: np.random.Generator,
                costs: Optional[np.ndarray] = None, budget: Optional[float] = None) -> FeatureMask:
    """Independent Bernoulli(theta_l) bits."""
    costs = unit_costs(theta.d) if costs is None else np.asarray(costs, dtype=np.float64)
    budget = float(costs.sum()) if budget is None else budget
    bits = (rng.random(theta.d) < theta.theta).astype(np.int8)
    return FeatureMask(bits=bits, costs=costs, budget=budget)


def repair(mask: FeatureMask, theta: ThetaVector, rng: np.random.Generator) -> FeatureMask:
    """
    Phase 1 drops selected bits with probability proportional to (1 - theta) until
    the mask fits the budget. Phase 2 adds affordable unselected bits with
    probability proportional to theta until nothing more fits.
    """
    _check_budget(mask.costs, mask.budget)
    repaired = mask.copy()
    bits, costs = repaired.bits, repaired.costs

    total = float(costs[bits == 1].sum())
    while total > mask.budget:
        weights = bits * (1.0 - theta.theta)
        drop = rng.choice(bits.size, p=weights / weights.sum())
        bits[drop] = 0
        total = float(costs[bits == 1].sum())

    slack = mask.budget - float(costs[bits == 1].sum())
    while True:
        candidates = (bits == 0) & (costs <= slack)
        if not candidates.any():
            break
        weights = candidates * theta.theta
        add = rng.choice(bits.size, p=weights / weights.sum())
        bits[add] = 1
        slack = mask.budget - float(costs[bits == 1].sum())
    return repaired


def update_theta(theta: ThetaVector, mask_a: FeatureMask, mask_b: FeatureMask, f_a: float, f_b: float) -> ThetaVector:
    """theta += eta * sign(f_a - f_b) * (m_a - m_b), then clip. Ties leave theta unchanged."""
    if not (np.isfinite(f_a) and np.isfinite(f_b)):
        raise ObjectiveError(f"non-finite candidate scores ({f_a}, {f_b})", "non_finite_score")
    direction = np.sign(f_a - f_b)
    step = theta.eta * direction * (mask_a.bits.astype(np.float64) - mask_b.bits.astype(np.float64))
    return ThetaVector(theta.theta + step, theta.epsilon, theta.eta).clip()


def top_theta_selection(theta: ThetaVector, costs: np.ndarray, budget: float) -> List[int]:
    """Features by theta descending (index ascending on ties), taken greedily while they fit."""
    order = np.lexsort((np.arange(theta.d), -theta.theta))
    selected, spent = [], 0.0
    for j in order:
        if spent + costs[j] <= budget:
            selected.append(int(j))
            spent += costs[j]
    return sorted(selected)


def convergence_fraction(theta: ThetaVector) -> float:
    """Share of parameters outside [0.1, 0.9]."""
    t = theta.theta
    return float(np.mean((t < CONVERGED_LOW) | (t > CONVERGED_HIGH)))


def candidate_seed(run_seed: int, iteration: int, candidate: int) -> int:
    """Evaluation seed derived from (run seed, iteration, candidate index)."""
    return int(np.random.SeedSequence([run_seed, iteration, candidate]).generate_state(1)[0])


class FeatureSelectionOptimizer:
    """
    Runs the sample -> repair -> evaluate -> update loop for a dataset, or for any
    mask objective passed in (used for surrogate problems with a known optimum).
    """

    def __init__(self, config: RunConfig, costs: Sequence[float], budget: float,
                 mask_objective: Optional[MaskObjective] = None):
        self.config = config
        self.costs = np.asarray(costs, dtype=np.float64)
        self.budget = float(budget)
        _check_budget(self.costs, self.budget)
        self.mask_objective = mask_objective
        self.score_log = ScoreLog()
        self.n_evaluations = 0

    def _evaluate(self, data: Optional[Dataset], mask: FeatureMask, seed: int) -> Tuple[float, Optional[ObjectiveReport]]:
        self.n_evaluations += 1
        if self.mask_objective is not None:
            return float(self.mask_objective(mask.bits, seed)), None

        report = evaluate_mask(data, mask.bits, self.config.n_clusters, seed, self.config.em)
        if self.config.objective_mode == "fscpu_mi":
            report.mi_value = mi_score(data, mask.bits)
        return report.f_value, report

    def _score_pair(self, data: Optional[Dataset], t: int, *masks: FeatureMask) -> List[Tuple[float, Optional[ObjectiveReport]]]:
        """
        Raw scores of both candidates of iteration t. In fscpu_mi mode both raw
        pairs enter the score log first, then each candidate is combined against
        the same log.
        """
        scored = [self._evaluate(data, mask, candidate_seed(self.config.seed, t, c)) for c, mask in enumerate(masks)]
        if self.mask_objective is not None or self.config.objective_mode != "fscpu_mi":
            return scored

        for _, report in scored:
            self.score_log.append(report.f_value, report.mi_value)
        for _, report in scored:
            report.combined_value = combined_score(report.f_value, report.mi_value, self.score_log)
        return [(report.combined_value, report) for _, report in scored]

    def _debug_check(self, theta: ThetaVector, *masks: FeatureMask) -> None:
        for mask in masks:
            if not (mask.is_feasible() and mask.is_maximal()):
                raise ObjectiveError(f"repaired mask violates the budget contract: {mask.selected()}", "repair_contract")
        if not theta.in_bounds():
            raise ObjectiveError("theta left [eps, 1 - eps]", "theta_bounds")

    def run(self, data: Optional[Dataset] = None) -> RunResult:
        cfg = self.config
        d = self.costs.size
        if data is not None and data.n_features != d:
            raise ConfigError(f"{d} costs for a dataset with {data.n_features} features", "invalid_budget")
        if data is None and self.mask_objective is None:
            raise ConfigError("either a dataset or a mask objective is required", "invalid_run_config")

        started = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
        theta = init_theta(self.costs, self.budget, d, cfg.epsilon, cfg.eta)
        trace = [(0, theta.theta.copy())]
        best_score, best_mask, best_report = -np.inf, None, None

        logger.info(f"Starting {cfg.objective_mode} run: d={d}, budget={self.budget}, T={cfg.iterations}, seed={cfg.seed}")
        for t in range(1, cfg.iterations + 1):
            mask_a = repair(sample_mask(theta, rng, self.costs, self.budget), theta, rng)
            mask_b = repair(sample_mask(theta, rng, self.costs, self.budget), theta, rng)
            (f_a, report_a), (f_b, report_b) = self._score_pair(data, t, mask_a, mask_b)

            for score, mask, report in ((f_a, mask_a, report_a), (f_b, mask_b, report_b)):
                if score > best_score:
                    best_score, best_mask, best_report = score, mask.bits.copy(), report

            theta = update_theta(theta, mask_a, mask_b, f_a, f_b)
            if cfg.debug_checks:
                self._debug_check(theta, mask_a, mask_b)
            if t % cfg.trace_every == 0:
                trace.append((t, theta.theta.copy()))
            if t % 100 == 0:
                logger.debug(f"iter {t}: f_a={f_a:.4f} f_b={f_b:.4f} best={best_score:.4f} "
                             f"converged={convergence_fraction(theta):.2f}")
        if trace[-1][0] != cfg.iterations:
            trace.append((cfg.iterations, theta.theta.copy()))

        selected = top_theta_selection(theta, self.costs, self.budget)
        result = RunResult(
            final_theta=theta.theta.copy(),
            selected_features=selected,
            theta_trace=trace,
            best_mask=best_mask,
            best_score=float(best_score),
            convergence_fraction=convergence_fraction(theta),
            n_evaluations=self.n_evaluations,
            wall_clock_seconds=time.perf_counter() - started,
            config=cfg.to_dict(),
            score_log_length=len(self.score_log),
            best_report=best_report,
        )
        logger.info(f"Finished run in {result.wall_clock_seconds:.1f}s: {len(selected)} features selected, "
                    f"best score {result.best_score:.4f}, converged fraction {result.convergence_fraction:.2f}")
        return result


def run(data: Dataset, config: RunConfig, costs: Optional[Sequence[float]] = None,
        budget: Optional[float] = None) -> RunResult:
    """Optimize a feature mask for data; unit costs and budget = D/2 by default."""
    costs = unit_costs(data.n_features) if costs is None else costs
    budget = float(max(1, data.n_features // 2)) if budget is None else budget
    return FeatureSelectionOptimizer(config, costs, budget).run(data)
