import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from data_processor import Dataset, PUDataProcessor, apply_minmax, fit_minmax, subsample
from errors import DataError
from optimizer import RunConfig, run, unit_costs
from synthetic_data import SyntheticSpec, generate

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 25

# column order of the synthetic results table
RESULT_TABLE_CONDITIONS: Tuple[SyntheticSpec, ...] = (
    SyntheticSpec(True, 0.4, 8, 1),
    SyntheticSpec(True, 0.4, 8, 2),
    SyntheticSpec(True, 0.4, 1, 1),
    SyntheticSpec(True, 0.4, 1, 2),
    SyntheticSpec(True, 0.1, 8, 1),
    SyntheticSpec(True, 0.1, 8, 2),
    SyntheticSpec(True, 0.1, 1, 1),
    SyntheticSpec(True, 0.1, 1, 2),
    SyntheticSpec(False, 0.4),
    SyntheticSpec(False, 0.1),
)


def fsr(selected: Iterable[int], relevant_truth: Optional[Sequence[int]]) -> float:
    """Feature selection recall: share of relevant features that were selected."""
    if relevant_truth is None:
        raise DataError("no ground truth available for FSR", "no_ground_truth")
    relevant = set(np.flatnonzero(np.asarray(relevant_truth)).tolist())
    if not relevant:
        raise DataError("ground truth marks no relevant feature", "no_ground_truth")
    return len(relevant.intersection(int(j) for j in selected)) / len(relevant)


@dataclass
class ExperimentResult:
    condition: SyntheticSpec
    seeds: List[int]
    fsr_values: List[float]
    runtimes: List[float]
    selected: List[List[int]] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fsr_values))

    @property
    def std(self) -> float:
        # population std, so a single seed reports 0
        return float(np.std(self.fsr_values))

    def summary(self) -> str:
        return f"{self.mean:.2f}±{self.std:.2f}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "condition": self.condition.label(),
            "spec": {k: v for k, v in self.condition.to_dict().items() if k != "seed"},
            "seeds": self.seeds,
            "fsr": self.fsr_values,
            "mean": self.mean,
            "std": self.std,
            "runtimes": self.runtimes,
            "selected": self.selected,
            "config": self.config,
        }


def prepare_dataset(spec: SyntheticSpec, subsample_rows: Optional[int] = None) -> Dataset:
    """Generate, optionally subsample, and min-max normalize on the full dataset."""
    data = generate(spec)
    if subsample_rows is not None:
        data = subsample(data, subsample_rows, spec.seed)
    return apply_minmax(data, fit_minmax(data))


def _run_seed(spec: SyntheticSpec, seed: int, config: RunConfig, budget: float,
              subsample_rows: Optional[int]) -> Tuple[float, float, List[int]]:
    started = time.perf_counter()
    data = prepare_dataset(replace(spec, seed=seed), subsample_rows)
    result = run(data, replace(config, seed=seed), unit_costs(data.n_features), budget)
    score = fsr(result.selected_features, data.relevant_truth)
    elapsed = time.perf_counter() - started
    logger.info(f"{spec.label()} seed {seed}: FSR={score:.2f} ({elapsed:.1f}s)")
    return score, elapsed, result.selected_features


def run_condition(
    spec: SyntheticSpec,
    n_seeds: int,
    config: RunConfig,
    budget: float = DEFAULT_BUDGET,
    subsample_rows: Optional[int] = None,
    n_jobs: int = 1,
) -> ExperimentResult:
    """
    For seeds 0..n_seeds-1: generate, normalize, optimize, score FSR. Seeds may run
    in parallel; results are always collected in seed order.
    """
    seeds = list(range(n_seeds))
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_run_seed)(spec, seed, config, budget, subsample_rows) for seed in seeds
    )
    return ExperimentResult(
        condition=spec,
        seeds=seeds,
        fsr_values=[o[0] for o in outcomes],
        runtimes=[o[1] for o in outcomes],
        selected=[o[2] for o in outcomes],
        config={**config.to_dict(), "budget": budget, "subsample_rows": subsample_rows},
    )


def run_table(
    conditions: Sequence[SyntheticSpec] = RESULT_TABLE_CONDITIONS,
    n_seeds: int = 5,
    config: Optional[RunConfig] = None,
    budget: float = DEFAULT_BUDGET,
    subsample_rows: Optional[int] = None,
    n_jobs: int = 1,
) -> List[ExperimentResult]:
    config = config or RunConfig()
    return [run_condition(spec, n_seeds, config, budget, subsample_rows, n_jobs) for spec in conditions]


def results_frame(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    """One column per condition, rows laid out like the synthetic results table."""
    columns = {}
    for r in results:
        spec = r.condition
        columns[r.condition.label()] = {
            "cluster assumption": "✓" if spec.cluster_assumption else "×",
            "labeled rate": f"{round(spec.labeled_rate * 100)}%",
            "no. negative cluster": spec.n_negative_clusters if spec.cluster_assumption else "-",
            "no. positive cluster": spec.n_positive_clusters if spec.cluster_assumption else "-",
            "FSR mean": round(r.mean, 4),
            "FSR std": round(r.std, 4),
            "FSR": r.summary(),
        }
    return pd.DataFrame(columns)


def write_results(results: Sequence[ExperimentResult], out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results_table.csv"
    json_path = out_dir / "results_table.json"
    results_frame(results).to_csv(csv_path, encoding="utf-8")
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(PUDataProcessor().clean_for_json([r.to_dict() for r in results]), f, indent=2)
    logger.info(f"Wrote {csv_path} and {json_path}")
    return csv_path, json_path
