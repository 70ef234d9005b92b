"""
Property suite behind the `check` command.

Runs seeded sweeps over random cluster-count instances and random repair
problems, comparing the prefix-scan objective against exhaustive search and
confirming the ordering, MCAR and scaling properties of the optimum.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from clustering import Clustering
from objective import brute_force_best_subset, objective_value, objective_value_early_stop
from optimizer import FeatureMask, ThetaVector, repair

logger = logging.getLogger(__name__)

MAX_CLUSTERS = 12
MAX_CLUSTER_SIZE = 50
MCAR_RATES = (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2))
SCALE_FACTORS = (2, 3, 5)
MAX_REPAIR_FEATURES = 30


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    failures: int = 0
    detail: str = ""

    def line(self) -> str:
        mark = "✅" if self.passed else "❌"
        text = f"{mark} {self.name}: {self.trials - self.failures}/{self.trials} passed"
        return f"{text} ({self.detail})" if self.detail else text


def random_counts(rng: np.random.Generator, max_labeled_divisor: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    K uniform in 2..12, sizes in 1..50, labeled counts in 0..size // divisor with
    at least one labeled row overall.
    """
    while True:
        k = int(rng.integers(2, MAX_CLUSTERS + 1))
        sizes = rng.integers(1, MAX_CLUSTER_SIZE + 1, size=k)
        labeled = rng.integers(0, sizes // max_labeled_divisor + 1)
        if labeled.sum() >= 1:
            return sizes, labeled


def random_clustering(rng: np.random.Generator, max_labeled_divisor: int = 1) -> Clustering:
    return Clustering.from_counts(*random_counts(rng, max_labeled_divisor))


def _inside_outside_ratios(clustering: Clustering, subset) -> Tuple[Fraction, Optional[Fraction]]:
    ratios = [Fraction(int(a), int(m)) for a, m in zip(clustering.labeled_counts, clustering.sizes)]
    inside = min(ratios[k] for k in subset)
    outside = [ratios[k] for k in range(clustering.n_clusters) if k not in subset]
    return inside, (max(outside) if outside else None)


def check_oracle_equivalence(instances: List[Clustering]) -> CheckResult:
    failures, first = 0, ""
    for i, clustering in enumerate(instances):
        fast = objective_value(clustering)
        exact = brute_force_best_subset(clustering)
        if fast.f_fraction != exact.f_fraction or fast.chosen_subset != exact.chosen_subset:
            failures += 1
            first = first or (f"instance {i}: scan {fast.chosen_subset}={fast.f_fraction}, "
                              f"exhaustive {exact.chosen_subset}={exact.f_fraction}")
    return CheckResult("oracle equivalence", failures == 0, len(instances), failures, first)


def check_ratio_ordering(instances: List[Clustering]) -> CheckResult:
    """Every chosen cluster has a strictly higher labeled ratio than every other one."""
    failures, checked, first = 0, 0, ""
    for i, clustering in enumerate(instances):
        subset = objective_value(clustering).chosen_subset
        inside, outside = _inside_outside_ratios(clustering, subset)
        if outside is None:
            continue
        checked += 1
        if not inside > outside:
            failures += 1
            first = first or f"instance {i}: min inside {inside} <= max outside {outside}"
    return CheckResult("ratio ordering", failures == 0, checked, failures, first)


def check_early_stop_bound(instances: List[Clustering]) -> CheckResult:
    failures, disagreements = 0, 0
    for clustering in instances:
        full = objective_value(clustering).f_fraction
        early = objective_value_early_stop(clustering).f_fraction
        if early > full:
            failures += 1
        elif early < full:
            disagreements += 1
    return CheckResult("early stop never beats full scan", failures == 0, len(instances), failures,
                       f"early stop fell short on {disagreements}")


def mcar_instance(rng: np.random.Generator) -> Tuple[Clustering, int, Fraction]:
    """
    Positive clusters 0..k_pos-1 all have labeled ratio beta; the rest have none.
    Positive sizes are multiples of beta's denominator so beta * size is integral.
    """
    beta = MCAR_RATES[int(rng.integers(len(MCAR_RATES)))]
    k = int(rng.integers(2, MAX_CLUSTERS + 1))
    k_pos = int(rng.integers(1, k + 1))
    step = beta.denominator
    pos_sizes = step * rng.integers(1, MAX_CLUSTER_SIZE // step + 1, size=k_pos)
    neg_sizes = rng.integers(1, MAX_CLUSTER_SIZE + 1, size=k - k_pos)
    sizes = np.concatenate([pos_sizes, neg_sizes])
    labeled = np.concatenate([pos_sizes * beta.numerator // step, np.zeros(k - k_pos, dtype=np.int64)])
    return Clustering.from_counts(sizes, labeled), k_pos, beta


def check_mcar(trials: int, rng: np.random.Generator) -> CheckResult:
    failures, first = 0, ""
    for i in range(trials):
        clustering, k_pos, beta = mcar_instance(rng)
        report = objective_value(clustering)
        if report.chosen_subset != tuple(range(k_pos)) or report.f_fraction != beta:
            failures += 1
            first = first or f"instance {i}: chose {report.chosen_subset}, expected 0..{k_pos - 1}"
    return CheckResult("MCAR positive clusters", failures == 0, trials, failures, first)


def check_scale_invariance(trials: int, rng: np.random.Generator) -> CheckResult:
    """Scaling every labeled count by an integer keeps the argmax and scales f exactly."""
    failures, first = 0, ""
    for i in range(trials):
        factor = SCALE_FACTORS[int(rng.integers(len(SCALE_FACTORS)))]
        sizes, labeled = random_counts(rng, max_labeled_divisor=max(SCALE_FACTORS))
        base = objective_value(Clustering.from_counts(sizes, labeled))
        scaled = objective_value(Clustering.from_counts(sizes, labeled * factor))
        if scaled.chosen_subset != base.chosen_subset or scaled.f_fraction != base.f_fraction * factor:
            failures += 1
            first = first or f"instance {i}: factor {factor} moved {base.chosen_subset} to {scaled.chosen_subset}"
    return CheckResult("labeled-count scaling", failures == 0, trials, failures, first)


def repair_problem(rng: np.random.Generator) -> Tuple[FeatureMask, ThetaVector, bool]:
    """Random (mask, costs, budget, theta); half of the problems use unit costs."""
    d = int(rng.integers(2, MAX_REPAIR_FEATURES + 1))
    unit = bool(rng.integers(2))
    # integer costs keep the budget arithmetic exact
    costs = np.ones(d) if unit else rng.integers(1, 10, size=d).astype(np.float64)
    budget = float(rng.integers(int(costs.min()), int(costs.sum()) + 1))
    epsilon = 1.0 / d
    theta = ThetaVector(rng.uniform(epsilon, 1.0 - epsilon, size=d), epsilon, 1.0 / (2 * d))
    bits = rng.integers(0, 2, size=d).astype(np.int8)
    return FeatureMask(bits=bits, costs=costs, budget=budget), theta, unit


def check_repair_contract(trials: int, rng: np.random.Generator) -> CheckResult:
    failures, first = 0, ""
    for i in range(trials):
        mask, theta, unit = repair_problem(rng)
        repaired = repair(mask, theta, rng)
        ok = repaired.is_feasible() and repaired.is_maximal()
        if unit:
            ok = ok and int(repaired.bits.sum()) == int(mask.budget)
        if not ok:
            failures += 1
            first = first or f"problem {i}: cost {repaired.total_cost} of budget {mask.budget}"
    return CheckResult("repair contract", failures == 0, trials, failures, first)


def run_property_suite(trials: int = 1000, seed: int = 0) -> List[CheckResult]:
    """
    `trials` random clusterings for the oracle sweeps, trials // 5 constructed
    instances for the MCAR and scaling checks, and 10 * trials repair problems.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    instances = [random_clustering(rng) for _ in range(trials)]
    small = max(1, trials // 5)
    results = [
        check_oracle_equivalence(instances),
        check_ratio_ordering(instances),
        check_early_stop_bound(instances),
        check_mcar(small, rng),
        check_scale_invariance(small, rng),
        check_repair_contract(10 * trials, rng),
    ]
    for r in results:
        logger.info(r.line())
    return results
