"""Experiment configuration: strict parsing of the runner's JSON configs.

Configs are plain JSON files with a fixed top-level shape; unknown fields
anywhere are rejected with a diagnostic naming the offending field, and a
parsed config serializes back to the same structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "VERBS"]

VERBS = (
    "characteristics",
    "shift-apply",
    "hilbert-approx",
    "sawyer-test",
    "lerner-decompose",
    "stopping-audit",
    "sharpness-sweep",
    "invariant-suite",
)

# verbs whose outputs depend on pseudo-randomness even with fixed params
_ALWAYS_RANDOM = {"hilbert-approx", "stopping-audit", "sharpness-sweep", "invariant-suite"}

_PARAM_FIELDS = {
    "characteristics": {"weight", "p", "ainfty_mode"},
    "shift-apply": {"input", "operator"},
    "hilbert-approx": {"count", "pairs"},
    "sawyer-test": {"tau", "w", "sigma", "p"},
    "lerner-decompose": {"input", "function"},
    "stopping-audit": {"count", "weight"},
    "sharpness-sweep": {"operators", "p", "N", "budget", "random_starts"},
    "invariant-suite": {"samples"},
}

_WEIGHT_FIELDS = {
    "constant": {"kind", "value"},
    "two_value": {"kind", "value", "level"},
    "power": {"kind", "alpha", "center"},
    "cascade": {"kind", "volatility", "seed"},
}

_OPERATOR_FIELDS = {
    "petermichl": {"kind"},
    "random": {"kind", "m", "n", "seed", "cancellative"},
    "paraproduct": {"kind", "coefficients"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    verb: str
    d: int
    N: int
    seed: int | None
    params: dict[str, Any] = field(default_factory=dict)
    out_format: str = "csv"
    out_path: str | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "verb": self.verb,
            "grid": {"d": self.d, "N": self.N},
            "params": self.params,
            "output": {"format": self.out_format},
        }
        if self.seed is not None:
            out["seed"] = self.seed
        if self.out_path is not None:
            out["output"]["path"] = self.out_path
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)


def _require_keys(obj: dict, allowed: set[str], where: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown field {key!r} in {where}")


def _check_weight_spec(spec, where: str):
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    kind = spec.get("kind")
    if kind not in _WEIGHT_FIELDS:
        raise ConfigError(f"{where}.kind must be one of {sorted(_WEIGHT_FIELDS)}")
    _require_keys(spec, _WEIGHT_FIELDS[kind], where)


def _check_operator_spec(spec, where: str):
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be an object")
    kind = spec.get("kind")
    if kind not in _OPERATOR_FIELDS:
        raise ConfigError(f"{where}.kind must be one of {sorted(_OPERATOR_FIELDS)}")
    _require_keys(spec, _OPERATOR_FIELDS[kind], where)


def _spec_is_random(spec) -> bool:
    return isinstance(spec, dict) and spec.get("kind") in ("cascade", "random")


def parse_config(obj: dict, verb: str | None = None) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be an object")
    _require_keys(obj, {"verb", "grid", "seed", "params", "output"}, "config")
    cfg_verb = obj.get("verb")
    if cfg_verb not in VERBS:
        raise ConfigError(f"field 'verb' must be one of {VERBS}")
    if verb is not None and cfg_verb != verb:
        raise ConfigError(f"field 'verb' is {cfg_verb!r} but the command ran {verb!r}")
    grid = obj.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("field 'grid' must be an object {d, N}")
    _require_keys(grid, {"d", "N"}, "grid")
    try:
        d = int(grid["d"])
        N = int(grid["N"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("grid.d and grid.N must be integers") from exc
    seed = obj.get("seed")
    if seed is not None:
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("field 'seed' must be a non-negative integer")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("field 'params' must be an object")
    allowed = _PARAM_FIELDS[cfg_verb]
    _require_keys(params, allowed, "params")

    randomized = cfg_verb in _ALWAYS_RANDOM
    for key in ("weight", "w", "sigma"):
        if key in params:
            _check_weight_spec(params[key], f"params.{key}")
            randomized = randomized or _spec_is_random(params[key])
    if "operator" in params:
        _check_operator_spec(params["operator"], "params.operator")
        randomized = randomized or _spec_is_random(params["operator"])
    if "tau" in params:
        spec = params["tau"]
        if not isinstance(spec, (dict, list)):
            raise ConfigError("params.tau must be an object or a list")
        if isinstance(spec, dict):
            if spec.get("kind") != "random":
                raise ConfigError("params.tau.kind must be 'random' (or give a list)")
            _require_keys(spec, {"kind", "density", "scale"}, "params.tau")
            randomized = True
    if "function" in params:
        spec = params["function"]
        if not isinstance(spec, dict) or spec.get("kind") not in ("random", "values"):
            raise ConfigError("params.function.kind must be 'random' or 'values'")
        if spec["kind"] == "random":
            _require_keys(spec, {"kind", "spikes"}, "params.function")
            randomized = True
        else:
            _require_keys(spec, {"kind", "values"}, "params.function")
    if randomized and seed is None:
        raise ConfigError(f"field 'seed' is mandatory for randomized verb {cfg_verb!r}")

    output = obj.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("field 'output' must be an object")
    _require_keys(output, {"format", "path"}, "output")
    out_format = output.get("format", "csv")
    if out_format not in ("csv", "json"):
        raise ConfigError("output.format must be 'csv' or 'json'")
    out_path = output.get("path")
    if out_path is not None and not isinstance(out_path, str):
        raise ConfigError("output.path must be a string")
    return ExperimentConfig(cfg_verb, d, N, seed, params, out_format, out_path)


def load_config(path: str, verb: str | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return parse_config(obj, verb)
