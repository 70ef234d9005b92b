"""
Job configuration for the command line.

Precedence: CLI flags > JSON config file (--config) > environment variables
(PU_SELECT_<KEY>, a .env file is honored) > built-in defaults.
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import load_dotenv

from clustering import EMConfig
from errors import ConfigError
from optimizer import RunConfig
from synthetic_data import SyntheticSpec

logger = logging.getLogger(__name__)

ENV_PREFIX = "PU_SELECT_"


@dataclass
class JobConfig:
    seed: int = 0
    out: str = "results"
    log_level: str = "INFO"

    # select
    label_col: str = "label"
    budget: Optional[float] = None
    costs: str = "unit"
    objective: str = "fscpu"
    iters: int = 3000
    clusters: int = 10
    backend: str = "gmm"
    trace_every: int = 10
    max_iter: int = 100
    tol: float = 1e-4
    var_floor: float = 1e-6
    debug_checks: bool = False

    # synth
    cluster_assumption: bool = True
    labeled_rate: float = 0.4
    neg: int = 8
    pos: int = 1

    # check / table
    trials: int = 1000
    n_seeds: int = 5
    jobs: int = 1
    subsample: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_digest(self) -> str:
        """md5 of the canonical JSON form; names a run in the artifact index."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.md5(canonical.encode("utf-8")).hexdigest()

    def em_config(self) -> EMConfig:
        return EMConfig(
            n_components=self.clusters,
            max_iter=self.max_iter,
            tol=self.tol,
            var_floor=self.var_floor,
            backend=self.backend,
        )

    def run_config(self) -> RunConfig:
        return RunConfig(
            iterations=self.iters,
            n_clusters=self.clusters,
            seed=self.seed,
            objective_mode=self.objective.replace("-", "_"),
            trace_every=self.trace_every,
            debug_checks=self.debug_checks,
            em=self.em_config(),
        )

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            cluster_assumption=self.cluster_assumption,
            labeled_rate=self.labeled_rate,
            n_negative_clusters=self.neg,
            n_positive_clusters=self.pos,
            seed=self.seed,
        )


_OPTIONAL_TYPES = {"budget": float, "subsample": int}


def _coerce(name: str, value: Any) -> Any:
    default = JobConfig.__dataclass_fields__[name].default
    kind = _OPTIONAL_TYPES.get(name, type(default))
    if value is None:
        return None
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            if str(value).strip().lower() in ("1", "true", "yes", "on"):
                return True
            if str(value).strip().lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r} for '{name}'", "invalid_value")


def _from_environment() -> Dict[str, Any]:
    load_dotenv()
    values = {}
    for f in fields(JobConfig):
        raw = os.getenv(ENV_PREFIX + f.name.upper())
        if raw is not None and raw != "":
            values[f.name] = _coerce(f.name, raw)
    return values


def _from_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "missing_config")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}", "invalid_config")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object", "invalid_config")

    known = {f.name for f in fields(JobConfig)}
    unknown = sorted(set(raw).difference(known))
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {unknown}", "invalid_config")
    return {k: _coerce(k, v) for k, v in raw.items()}


def load_job_config(cli_values: Optional[Mapping[str, Any]] = None,
                    config_path: Optional[Union[str, Path]] = None) -> JobConfig:
    values: Dict[str, Any] = {}
    values.update(_from_environment())
    if config_path is not None:
        values.update(_from_file(config_path))
    known = {f.name for f in fields(JobConfig)}
    for key, value in (cli_values or {}).items():
        if key in known:
            values[key] = _coerce(key, value)
    config = JobConfig(**values)
    _validate(config)
    return config


def _validate(config: JobConfig) -> None:
    if not isinstance(logging.getLevelName(config.log_level.upper()), int):
        raise ConfigError(f"unknown log level '{config.log_level}'", "invalid_value")
    if config.objective not in ("fscpu", "fscpu-mi", "fscpu_mi"):
        raise ConfigError(f"unknown objective '{config.objective}'", "invalid_value")
    if config.budget is not None and config.budget < 1:
        raise ConfigError(f"budget must be >= 1, got {config.budget}", "invalid_value")
    if config.trials < 1 or config.n_seeds < 1:
        raise ConfigError("trials and n_seeds must be >= 1", "invalid_value")
    if config.jobs == 0:
        raise ConfigError("jobs must be non-zero", "invalid_value")
    if config.subsample is not None and config.subsample < 2:
        raise ConfigError("subsample must keep at least 2 rows", "invalid_value")
    # surfaces bad backend / iteration values as ConfigError before any work starts
    config.run_config()
