"""Experiment configuration: versioned JSON in, dataclasses out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..descent import DescentConfig
from ..errors import ConfigError

SCHEMA_VERSION = 1

_DESCENT_KEYS = {"step_size", "max_iters", "grad_tol", "step_tol", "kind",
                 "beta1", "beta2", "eps_adam", "backtracking"}


@dataclass
class FlowSpec:
    """How to build the parameter flow for an experiment.

    type is one of: fold, kink_cross, one_unit, random_interpolation,
    micro_train, file. delta is the discretization step (ignored for
    recorded snapshot sequences, which are used as-is).
    """

    type: str = "fold"
    delta: float = 0.04
    horizon: float = 1.0
    k: int = 2
    eps: float = 0.1
    seed: int = 0
    drift: float = 0.05
    steps: int = 400
    cadence: int = 40
    lr: float = 1e-3
    batch_size: int | None = None
    n_targets: int = 8
    path: str | None = None

    def __post_init__(self):
        known = {"fold", "kink_cross", "one_unit", "random_interpolation",
                 "micro_train", "file"}
        if self.type not in known:
            raise ConfigError(f"unknown flow type {self.type!r}; expected one of {sorted(known)}")
        if self.delta <= 0 or self.horizon <= 0:
            raise ConfigError("flow delta and horizon must be positive")


@dataclass
class ExperimentConfig:
    kind: str = ""
    seed: int = 0
    out: str = "results"
    trials: int = 50
    success_threshold: float = 0.01
    m_list: list[int] = field(default_factory=list)
    dims: dict = field(default_factory=lambda: {"k": 2, "widths": [8, 12], "n": 16})
    flow: FlowSpec = field(default_factory=FlowSpec)
    descent: DescentConfig = field(default_factory=DescentConfig)
    tau: float = 0.25
    timing: bool = False
    jobs: int = 1
    # landscape-only knobs
    radii: list[float] = field(default_factory=lambda: [0.1, 0.25, 0.5, 1.0, 2.0])
    n_samples: int = 500
    landscape_seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    # tracking-only knobs
    oracle_bound: float = 2.0
    oracle_resolution: float = 0.01
    s_samples: int = 41
    # rate-distortion knobs
    targets_path: str | None = None
    noise: float = 0.5

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.success_threshold <= 0:
            raise ConfigError("success_threshold must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


def _build_descent(raw: dict) -> DescentConfig:
    unknown = set(raw) - _DESCENT_KEYS
    if unknown:
        raise ConfigError(f"unknown descent options: {sorted(unknown)}")
    try:
        return DescentConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad descent configuration: {exc}") from exc


def parse_config(data: dict, kind: str | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {version!r}; expected {SCHEMA_VERSION}")
    body = {k: v for k, v in data.items() if k != "version"}
    if kind is not None:
        declared = body.pop("kind", None)
        if declared is not None and declared != kind:
            raise ConfigError(f"config kind {declared!r} does not match subcommand {kind!r}")
        body["kind"] = kind
    try:
        if "flow" in body:
            body["flow"] = FlowSpec(**body["flow"])
        if "descent" in body:
            body["descent"] = _build_descent(body["descent"])
        return ExperimentConfig(**body)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc


def load_config(path: str | Path, kind: str | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(data, kind=kind)
