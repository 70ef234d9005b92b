#!/usr/bin/env python3
"""
PU Feature Selection
====================

Command-line entry point for cluster-assumption feature selection on
positive-unlabeled data.

Usage:
    python main.py select data.csv --budget 25 --out results
    python main.py synth data.csv --cluster-assumption --labeled-rate 0.4 --neg 8 --pos 1
    python main.py eval results/selected_features.txt data.truth.json
    python main.py check --trials 1000
    python main.py table --smoke --seeds 5 --jobs 4

Exit codes:
    0 success, 1 internal/objective failure, 2 configuration error, 3 data error

Requirements:
    - Python 3.8+
    - All dependencies from requirements.txt
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

# Add backend directory to Python path
current_dir = Path(__file__).parent
backend_dir = current_dir / "backend"

sys.path.insert(0, str(backend_dir))

from artifact_store import ArtifactStore, read_selected_features  # noqa: E402
from data_processor import PUDataProcessor, apply_minmax, fit_minmax, sidecar_path  # noqa: E402
from errors import ConfigError, DataError, PUSelectError  # noqa: E402
from evaluation import DEFAULT_BUDGET, RESULT_TABLE_CONDITIONS, fsr, results_frame, run_table, write_results  # noqa: E402
from job_config import JobConfig, load_job_config  # noqa: E402
from objective import evaluate_mask, mi_score  # noqa: E402
from optimizer import FeatureSelectionOptimizer, unit_costs  # noqa: E402
from property_checks import run_property_suite  # noqa: E402
from synthetic_data import generate  # noqa: E402

logger = logging.getLogger("pu_select")

SMOKE_PRESET = {"iters": 500, "max_iter": 25, "subsample": 1500}

# argument dests that are not JobConfig keys
PATH_ARGS = ("command", "config", "data", "output", "selected", "truth", "conditions", "smoke")


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps unset flags out of the namespace so lower-precedence sources apply
    shared = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    shared.add_argument("--seed", type=int, help="random seed (default 0)")
    shared.add_argument("--out", help="output directory (default results)")
    shared.add_argument("--config", default=None, help="JSON config file")
    shared.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(
        prog="pu-select",
        description="Feature selection for positive-unlabeled data under the cluster assumption",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    select = sub.add_parser("select", parents=[shared], argument_default=argparse.SUPPRESS,
                            help="optimize a feature mask for a PU dataset")
    select.add_argument("data", help="CSV with feature columns and a 0/1 label column")
    select.add_argument("--label-col", dest="label_col")
    select.add_argument("--budget", type=float, help="cost budget (default D/2 with unit costs)")
    select.add_argument("--costs", help="'unit', a JSON {feature: cost} file, or one cost per line")
    select.add_argument("--objective", choices=["fscpu", "fscpu-mi"])
    select.add_argument("--iters", type=int, help="optimizer iterations (default 3000)")
    select.add_argument("--clusters", type=int, help="clusters per evaluation (default 10)")
    select.add_argument("--backend", choices=["gmm", "kmeans"])
    select.add_argument("--trace-every", dest="trace_every", type=int)
    select.add_argument("--em-max-iter", dest="max_iter", type=int)
    select.add_argument("--debug-checks", dest="debug_checks", action="store_true")

    synth = sub.add_parser("synth", parents=[shared], argument_default=argparse.SUPPRESS,
                           help="write a synthetic PU benchmark CSV and its ground truth")
    synth.add_argument("output", help="CSV path; ground truth goes next to it as <stem>.truth.json")
    mode = synth.add_mutually_exclusive_group()
    mode.add_argument("--cluster-assumption", dest="cluster_assumption", action="store_true")
    mode.add_argument("--outlier", dest="cluster_assumption", action="store_false")
    synth.add_argument("--labeled-rate", dest="labeled_rate", type=float)
    synth.add_argument("--neg", type=int, help="negative clusters")
    synth.add_argument("--pos", type=int, help="positive clusters")
    synth.add_argument("--label-col", dest="label_col")

    evaluate = sub.add_parser("eval", parents=[shared], argument_default=argparse.SUPPRESS,
                              help="print the feature selection recall of a selection")
    evaluate.add_argument("selected", help="selected_features.txt")
    evaluate.add_argument("truth", help="ground-truth sidecar (or the CSV it belongs to)")

    check = sub.add_parser("check", parents=[shared], argument_default=argparse.SUPPRESS,
                           help="run the objective and repair property suite")
    check.add_argument("--trials", type=int, help="random clusterings in the oracle sweep (default 1000)")

    table = sub.add_parser("table", parents=[shared], argument_default=argparse.SUPPRESS,
                           help="reproduce the synthetic results table")
    table.add_argument("--seeds", dest="n_seeds", type=int, help="seeds per condition (default 5)")
    table.add_argument("--jobs", type=int, help="parallel seeds (default 1, -1 for all cores)")
    table.add_argument("--conditions", help="comma-separated condition indices, e.g. 0,4,8")
    table.add_argument("--smoke", action="store_true", help="T=500, EM max_iter=25, 1500 rows")
    table.add_argument("--iters", type=int)
    table.add_argument("--clusters", type=int)
    table.add_argument("--backend", choices=["gmm", "kmeans"])
    table.add_argument("--budget", type=float)
    table.add_argument("--subsample", type=int)
    table.add_argument("--em-max-iter", dest="max_iter", type=int)
    return parser


def setup_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def load_costs(spec: str, feature_names: List[str]) -> np.ndarray:
    """'unit', a JSON mapping feature name -> cost, or a file with one cost per line."""
    if spec == "unit":
        return unit_costs(len(feature_names))
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"costs file not found: {path}", "missing_config")

    if path.suffix.lower() == ".json":
        try:
            with open(path, "r", encoding="utf-8") as f:
                mapping = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"costs file {path} is not valid JSON: {e}", "invalid_costs")
        if not isinstance(mapping, dict):
            raise ConfigError(f"costs file {path} must map feature names to costs", "invalid_costs")
        missing = [name for name in feature_names if name not in mapping]
        if missing:
            raise ConfigError(f"costs file has no entry for {missing}", "invalid_costs")
        try:
            costs = np.array([float(mapping[name]) for name in feature_names], dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"non-numeric cost in {path}: {e}", "invalid_costs")
    else:
        try:
            values = pd.read_csv(path, header=None).iloc[:, 0]
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise ConfigError(f"could not read costs from {path}: {e}", "invalid_costs")
        costs = pd.to_numeric(values, errors="coerce").to_numpy(dtype=np.float64)
        if costs.size != len(feature_names):
            raise ConfigError(f"{costs.size} costs for {len(feature_names)} features", "invalid_costs")

    if not np.all(np.isfinite(costs)) or np.any(costs <= 0):
        raise ConfigError("feature costs must be positive numbers", "invalid_costs")
    return costs


def cmd_select(args: argparse.Namespace, cfg: JobConfig) -> int:
    processor = PUDataProcessor()
    data = processor.load_csv(args.data, cfg.label_col)
    logger.info(f"📊 Dataset statistics: {processor.calculate_statistics(data)}")
    data = apply_minmax(data, fit_minmax(data))

    costs = load_costs(cfg.costs, data.names())
    if cfg.budget is not None:
        budget = cfg.budget
    elif cfg.costs == "unit":
        budget = float(max(1, data.n_features // 2))
    else:
        budget = float(costs.sum() / 2)

    run_config = cfg.run_config()
    result = FeatureSelectionOptimizer(run_config, costs, budget).run(data)

    # report of the final selection, evaluated with the run seed
    mask = np.zeros(data.n_features, dtype=np.int8)
    mask[result.selected_features] = 1
    report = evaluate_mask(data, mask, cfg.clusters, cfg.seed, run_config.em)
    if run_config.objective_mode == "fscpu_mi":
        report.mi_value = mi_score(data, mask)

    store = ArtifactStore(cfg.out)
    store.save_run(result, data.names(), cfg.to_dict(), cfg.config_digest(), report)

    names = [data.names()[j] for j in result.selected_features]
    print(f"✅ Selected {len(names)} of {data.n_features} features (budget {budget:g}): {', '.join(names)}")
    print(f"📁 Artifacts written to {store.out_dir}")
    return 0


def cmd_synth(args: argparse.Namespace, cfg: JobConfig) -> int:
    spec = cfg.synthetic_spec()
    data = generate(spec)
    processor = PUDataProcessor()
    processor.write_csv(data, args.output, cfg.label_col)
    logger.info(f"📊 Dataset statistics: {processor.calculate_statistics(data)}")
    print(f"✅ Wrote {spec.label()} dataset to {args.output} "
          f"({data.n_rows} rows, {data.n_features} features, {data.n_labeled} labeled)")
    print(f"📁 Ground truth: {sidecar_path(args.output)}")
    return 0


def _load_truth(path: Path) -> Dict[str, Any]:
    if path.suffix.lower() == ".csv":
        path = sidecar_path(path)
    if not path.is_file():
        raise DataError(f"ground-truth file not found: {path}", "no_ground_truth")
    try:
        with open(path, "r", encoding="utf-8") as f:
            truth = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"ground-truth file {path} is not valid JSON: {e}", "no_ground_truth")
    if "feature_names" not in truth or "relevant_features" not in truth:
        raise DataError(f"{path} lacks feature_names or relevant_features", "no_ground_truth")
    return truth


def cmd_eval(args: argparse.Namespace, cfg: JobConfig) -> int:
    selected_names = read_selected_features(args.selected)
    truth = _load_truth(Path(args.truth))
    feature_names = truth["feature_names"]
    unknown = sorted(set(selected_names).difference(feature_names))
    if unknown:
        raise DataError(f"selected features not in the dataset: {unknown}", "length_mismatch")

    relevant = set(truth["relevant_features"])
    relevant_truth = [1 if name in relevant else 0 for name in feature_names]
    selected = [feature_names.index(name) for name in selected_names]
    # stdout carries only the number
    print(fsr(selected, relevant_truth))
    return 0


def cmd_check(args: argparse.Namespace, cfg: JobConfig) -> int:
    results = run_property_suite(cfg.trials, cfg.seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"❌ {len(failed)} check(s) failed: {', '.join(failed)}")
        return 1
    print(f"✅ All {len(results)} checks passed")
    return 0


def _parse_conditions(text: Optional[str]):
    if not text:
        return RESULT_TABLE_CONDITIONS
    try:
        indices = [int(part) for part in text.split(",") if part.strip()]
        return tuple(RESULT_TABLE_CONDITIONS[i] for i in indices)
    except (ValueError, IndexError):
        raise ConfigError(
            f"conditions must be indices in 0..{len(RESULT_TABLE_CONDITIONS) - 1}, got '{text}'", "invalid_value"
        )


def cmd_table(args: argparse.Namespace, cfg: JobConfig) -> int:
    conditions = _parse_conditions(getattr(args, "conditions", None))
    budget = cfg.budget if cfg.budget is not None else DEFAULT_BUDGET
    results = run_table(conditions, cfg.n_seeds, cfg.run_config(), budget, cfg.subsample, cfg.jobs)

    csv_path, json_path = write_results(results, cfg.out)
    ArtifactStore(cfg.out).record(cfg.config_digest(), "table", {"csv": csv_path, "json": json_path})
    print(results_frame(results).to_string())
    print(f"📁 Results written to {csv_path} and {json_path}")
    return 0


COMMANDS = {
    "select": cmd_select,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "check": cmd_check,
    "table": cmd_table,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, resolve the job config and run one subcommand. Returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags and 0 on --help
        return int(e.code or 0)

    cli_values = {k: v for k, v in vars(args).items() if k not in PATH_ARGS}
    if getattr(args, "smoke", False):
        for key, value in SMOKE_PRESET.items():
            cli_values.setdefault(key, value)

    try:
        cfg = load_job_config(cli_values, getattr(args, "config", None))
        setup_logging(cfg.log_level)
        logger.debug(f"Job config {cfg.config_digest()[:8]}: {cfg.to_dict()}")
        return COMMANDS[args.command](args, cfg)
    except PUSelectError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure in '{args.command}': {e}")
        print(f"❌ Internal error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
