import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from data_processor import PUDataProcessor
from errors import DataError
from objective import ObjectiveReport
from optimizer import RunResult


@dataclass
class ArtifactEntry:
    """One run recorded in the artifact index"""
    digest: str
    command: str
    created: str
    files: List[str]
    selected_features: List[str]


class ArtifactStore:
    """Writes run artifacts into an output directory and keeps an index of runs"""

    RUN_RESULT = "run_result.json"
    THETA_TRACE = "theta_trace.csv"
    SELECTED_FEATURES = "selected_features.txt"
    OBJECTIVE_REPORT = "objective_report.json"
    INDEX = "artifacts_index.json"

    def __init__(self, out_dir: Union[str, Path] = "results"):
        self.out_dir = Path(out_dir)
        self.index_file = self.out_dir / self.INDEX
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as e:
            raise DataError(f"cannot create output directory {self.out_dir}: {e}", "io_error")

        self.processor = PUDataProcessor()
        self.logger = logging.getLogger(__name__)
        self.index: Dict[str, Dict] = self._load_index()

    def _load_index(self) -> Dict[str, Dict]:
        """Load the artifact index from disk"""
        if self.index_file.exists():
            try:
                with open(self.index_file, "r", encoding="utf-8") as f:
                    return json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                self.logger.warning(f"Failed to load artifact index: {e}")
        return {}

    def _save_index(self):
        self._write_json(self.index_file, self.index)

    def _write_json(self, path: Path, payload: Any):
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self.processor.clean_for_json(payload), f, indent=2)
        except OSError as e:
            raise DataError(f"could not write {path}: {e}", "io_error")

    def theta_trace_frame(self, result: RunResult) -> pd.DataFrame:
        d = result.final_theta.size
        rows = [[t, *theta.tolist()] for t, theta in result.theta_trace]
        return pd.DataFrame(rows, columns=["iteration"] + [f"theta_{j}" for j in range(d)])

    def save_run(self, result: RunResult, feature_names: List[str], job_config: Dict[str, Any], digest: str,
                 report: Optional[ObjectiveReport] = None) -> Dict[str, Path]:
        """
        Write run_result.json, theta_trace.csv, selected_features.txt and, when a
        report is given, objective_report.json. Only wall_clock_seconds differs
        between two runs with the same config.
        """
        paths = {
            "run_result": self.out_dir / self.RUN_RESULT,
            "theta_trace": self.out_dir / self.THETA_TRACE,
            "selected_features": self.out_dir / self.SELECTED_FEATURES,
        }
        selected_names = [feature_names[j] for j in result.selected_features]

        self._write_json(paths["run_result"], {**result.to_dict(), "selected_names": selected_names, "job_config": job_config})
        try:
            self.theta_trace_frame(result).to_csv(
                paths["theta_trace"], index=False, float_format=self.processor.float_format, encoding="utf-8"
            )
            with open(paths["selected_features"], "w", encoding="utf-8") as f:
                f.writelines(f"{name}\n" for name in selected_names)
        except OSError as e:
            raise DataError(f"could not write run artifacts to {self.out_dir}: {e}", "io_error")

        if report is not None:
            paths["objective_report"] = self.out_dir / self.OBJECTIVE_REPORT
            self._write_json(paths["objective_report"], report.to_dict())

        self.record(digest, "select", paths, selected_names)
        self.logger.info(f"💾 Saved run {digest[:8]} to {self.out_dir} ({len(selected_names)} features selected)")
        return paths

    def record(self, digest: str, command: str, paths: Dict[str, Path], selected_features: Optional[List[str]] = None):
        entry = ArtifactEntry(
            digest=digest,
            command=command,
            created=datetime.now().isoformat(timespec="seconds"),
            files=sorted(p.name for p in paths.values()),
            selected_features=selected_features or [],
        )
        self.index[digest] = entry.__dict__
        self._save_index()


def read_selected_features(path: Union[str, Path]) -> List[str]:
    """Feature names from a selected_features.txt file, one per line."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}", "missing_file")
    with open(path, "r", encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]
