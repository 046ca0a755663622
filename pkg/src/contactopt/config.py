"""Run configuration: file parsing, validation, and manifest payloads.

A run is described by a small key-value file with two sections.  The
``[run]`` section holds the driver settings (scenario, method, seed,
budgets, tolerances, output directory); the optional ``[scenario]``
section holds keyword overrides forwarded verbatim to the scenario
constructor (bounds, pressure limits, aggregation exponent, mesh
parameters).  JSON files with the same two-level structure are accepted
as an alternate format.  Unknown ``[run]`` keys are rejected so that a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

_METHODS = ("gradient", "cbo")


@dataclass
class RunConfig:
    """Resolved settings for one optimization run."""

    scenario: str
    method: str
    seed: int = 0
    budget: int = 50
    max_iter: int = 100
    tol_viol: float = 1.0e-6
    tol_dual: float = 1.0e-4
    xi: float = 0.01
    n_init: int = 8
    out_dir: str = ""
    scenario_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.scenario:
            raise ConfigError("missing required key 'scenario' in [run]")
        if self.method not in _METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; expected one of {_METHODS}"
            )
        self.seed = int(self.seed)
        self.budget = int(self.budget)
        self.max_iter = int(self.max_iter)
        self.tol_viol = float(self.tol_viol)
        self.tol_dual = float(self.tol_dual)
        self.xi = float(self.xi)
        self.n_init = int(self.n_init)
        if self.budget < 0:
            raise ConfigError("budget must be nonnegative")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if not self.out_dir:
            self.out_dir = f"runs/{self.scenario}-{self.method}"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scenario_params"] = dict(self.scenario_params)
        return d


_RUN_KEYS = tuple(
    f.name for f in dataclasses.fields(RunConfig) if f.name != "scenario_params"
)


def _parse_value(text: str):
    """Interpret an ini value: numbers, booleans, and lists via JSON,
    anything else as a plain string."""
    try:
        return json.loads(text)
    except (json.JSONDecodeError, ValueError):
        return text


def _from_sections(run: dict, scenario: dict) -> RunConfig:
    unknown = sorted(set(run) - set(_RUN_KEYS))
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [run]: {', '.join(unknown)}; "
            f"known keys: {', '.join(_RUN_KEYS)}"
        )
    if "scenario" not in run:
        raise ConfigError("missing required key 'scenario' in [run]")
    if "method" not in run:
        raise ConfigError("missing required key 'method' in [run]")
    try:
        return RunConfig(scenario_params=dict(scenario), **run)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [run] value: {exc}") from exc


def load_config(path) -> RunConfig:
    """Load a RunConfig from an ini-style or JSON file.

    Raises:
        ConfigError: unreadable file, syntax error (with line number when
            the parser provides one), unknown or missing keys.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: JSON syntax error at line {exc.lineno}: {exc.msg}"
            ) from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: top level must be an object")
        extra = sorted(set(payload) - {"run", "scenario"})
        if extra:
            raise ConfigError(
                f"{path}: unknown top-level section(s): {', '.join(extra)}"
            )
        run = payload.get("run", {})
        scenario = payload.get("scenario", {})
        if not isinstance(run, dict) or not isinstance(scenario, dict):
            raise ConfigError(f"{path}: 'run' and 'scenario' must be objects")
        return _from_sections(dict(run), dict(scenario))
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    extra = sorted(set(parser.sections()) - {"run", "scenario"})
    if extra:
        raise ConfigError(f"{path}: unknown section(s): {', '.join(extra)}")
    if not parser.has_section("run"):
        raise ConfigError(f"{path}: missing [run] section")
    run = {k: _parse_value(v) for k, v in parser.items("run")}
    scenario = {}
    if parser.has_section("scenario"):
        scenario = {k: _parse_value(v) for k, v in parser.items("scenario")}
    return _from_sections(run, scenario)


def dump_config(cfg: RunConfig, path) -> None:
    """Write a config back out as JSON; load_config(dump) round-trips."""
    payload = {"run": cfg.to_dict(), "scenario": dict(cfg.scenario_params)}
    del payload["run"]["scenario_params"]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def manifest_payload(cfg: RunConfig, seed: int, version: str) -> dict:
    """Everything needed to reproduce a run, with the effective seed."""
    return {
        "tool": "contactopt",
        "version": version,
        "seed": seed,
        "run": {k: v for k, v in cfg.to_dict().items() if k != "scenario_params"},
        "scenario_params": dict(cfg.scenario_params),
    }
