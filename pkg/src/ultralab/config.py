"""Experiment configuration: TOML files and command-line overrides.

A config holds an optional ``[thresholds]`` table and one or more
``[[experiment]]`` tables, each with an ``id`` and the parameters listed in
:data:`SCHEMA`. Unknown keys are errors, so a typo can never silently fall
back to a default.

Example::

    [thresholds]
    tau = 1.0

    [[experiment]]
    id = "lemma-min"
    m = [0.3, 0.5]
    rho = [3, 100]
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Dict, List

import tomli

from .errors import ConfigInvalid

DYADIC = [8, 16, 32, 64, 128, 256]

# id -> {key: default}; the type of the default is enforced (ints accepted for floats)
SCHEMA: Dict[str, Dict[str, Any]] = {
    "null-decay": {"order": 1.5, "center": 0.0, "mu": 2.0, "kind": "pow", "m": 2.0,
                   "nus": [1.0, 2.0, 4.0], "n_range": DYADIC, "control": True, "roumieu": False},
    "moderate-growth": {"f": "delta", "k": 0, "width": 1.0, "kind": "der", "m": 2.0, "nu": 1.0,
                        "mu": 2.0, "n_range": DYADIC},
    "weak-equality": {"order": 1.5, "center": 0.0, "mu": 2.0, "m": 2.0, "g_offsets": [0, 1],
                      "control_shift": 0.5, "n_range": DYADIC},
    "product-consistency": {"orders": [1.5, 1.25], "centers": [0.0, 0.0], "mu": 2.0, "kind": "pow",
                            "m": 2.0, "nu": 1.0, "n_range": DYADIC},
    "circle-embed": {"sequence": "exp_root", "lam": 1.5, "m_prime": 2.0, "n_max": 512, "K": 64,
                     "slack": 0.05},
    "circle-null": {"p": 0.5, "m": 0.5, "lam": 2.0, "m_prime": 2.0, "n_max": 512,
                    "control_p": 0.99, "control_lam": 1.2},
    "prop-aba": {"count": 200, "seed": 0, "lam": 2.0, "mu": 1.5, "K": 64, "rho0": 3.0,
                 "m_prime": 2.0, "n_max": 64},
    "lemma-min": {"m": [0.5], "rho": [100.0]},
    "mollifier-certify": {"kind": "pow", "m": 2.0, "n": "1..16", "bound_n": "1..40",
                          "moments": [4, 9, 16, 25]},
    "abe-classify": {"sequence": "stretched", "beta": 2.0, "m": 0.5, "K": 4096, "p": 0.5,
                     "support": [], "a": 1.0},
}

THRESHOLD_KEYS = {"tau": 1.0, "bound": 50.0, "oscillation": 0.5, "tau_c": 0.02, "k_sweep": [1.0, 2.0, 3.0]}


def parse_range(text) -> List[int]:
    """``"1..16"`` -> ``[1, ..., 16]``; lists pass through."""
    if isinstance(text, list):
        return [int(v) for v in text]
    if isinstance(text, int):
        return [text]
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigInvalid(f"bad integer range {text!r}") from None


def _coerce(key, value, default, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigInvalid(f"{where}.{key}: expected a boolean")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalid(f"{where}.{key}: expected a number")
        return float(value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalid(f"{where}.{key}: expected an integer")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            value = [value]
        if default and isinstance(default[0], float):
            return [float(_coerce(key, v, 0.0, where)) for v in value]
        return list(value)
    if isinstance(default, str):
        if key in ("n", "bound_n") and isinstance(value, (list, int)):
            return value
        if not isinstance(value, str):
            raise ConfigInvalid(f"{where}.{key}: expected a string")
        return value
    return value


@dataclass
class ExperimentConfig:
    id: str
    params: Dict[str, Any]

    def to_dict(self):
        return {"id": self.id, **self.params}


@dataclass
class RunConfig:
    experiments: List[ExperimentConfig]
    thresholds: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(THRESHOLD_KEYS))

    def to_dict(self):
        return {"thresholds": self.thresholds, "experiments": [e.to_dict() for e in self.experiments]}


def validate_experiment(raw: Dict[str, Any], index: int = 0) -> ExperimentConfig:
    where = f"experiment[{index}]"
    if "id" not in raw:
        raise ConfigInvalid(f"{where}: missing id")
    eid = raw["id"]
    if eid not in SCHEMA:
        raise ConfigInvalid(f"{where}: unknown experiment id {eid!r}; known: {sorted(SCHEMA)}")
    schema = SCHEMA[eid]
    unknown = sorted(set(raw) - set(schema) - {"id"})
    if unknown:
        raise ConfigInvalid(f"{where} ({eid}): unknown keys {unknown}")
    params = copy.deepcopy(schema)
    for k, v in raw.items():
        if k != "id":
            params[k] = _coerce(k, v, schema[k], where)
    _check_values(eid, params, where)
    return ExperimentConfig(eid, params)


def _check_values(eid, p, where):
    for key in ("lam", "mu", "m", "m_prime", "nu", "order"):
        v = p.get(key)
        if isinstance(v, float) and not v > 0:
            raise ConfigInvalid(f"{where}.{key} must be positive")
    if "kind" in p and p["kind"] not in ("pow", "der"):
        raise ConfigInvalid(f"{where}.kind must be 'pow' or 'der'")
    if eid == "moderate-growth" and p["f"] not in ("delta", "hat"):
        raise ConfigInvalid(f"{where}.f must be 'delta' or 'hat'")
    if eid == "abe-classify" and p["sequence"] not in ("stretched", "power_of_p", "finite", "ones",
                                                        "geometric", "exp_root"):
        raise ConfigInvalid(f"{where}.sequence is not a circle catalog item")
    if eid == "circle-embed" and p["sequence"] not in ("exp_root", "geometric", "constant"):
        raise ConfigInvalid(f"{where}.sequence must be exp_root, geometric or constant")
    if eid == "prop-aba" and not 1 < p["mu"] < p["lam"]:
        raise ConfigInvalid(f"{where}: need 1 < mu < lam")
    for key in ("n", "bound_n"):
        if key in p:
            p[key] = parse_range(p[key])


def validate(raw: Dict[str, Any]) -> RunConfig:
    unknown = sorted(set(raw) - {"thresholds", "experiment"})
    if unknown:
        raise ConfigInvalid(f"unknown top-level keys {unknown}")
    th = copy.deepcopy(THRESHOLD_KEYS)
    for k, v in raw.get("thresholds", {}).items():
        if k not in THRESHOLD_KEYS:
            raise ConfigInvalid(f"thresholds: unknown key {k!r}")
        th[k] = _coerce(k, v, THRESHOLD_KEYS[k], "thresholds")
    for k in ("tau", "bound", "oscillation", "tau_c"):
        if not th[k] > 0:
            raise ConfigInvalid(f"thresholds.{k} must be positive")
    exps = raw.get("experiment", [])
    if not isinstance(exps, list) or not exps:
        raise ConfigInvalid("no experiments listed")
    return RunConfig([validate_experiment(e, i) for i, e in enumerate(exps)], th)


def load(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc.strerror}") from exc
    return validate(raw)


def loads(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigInvalid(str(exc)) from exc
    return validate(raw)
