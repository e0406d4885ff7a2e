"""Experiment configuration: JSON schema, validation, canonical hashing.

Configs are strict: unknown fields are rejected everywhere, and validation
happens before any computation. Error messages carry the JSON path of the
offending field (and line/column for syntax errors).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

from .core import ConfigError

EXPERIMENT_KINDS = (
    "fixed_point",
    "closure",
    "entropy_compare",
    "reversibility",
    "duality",
    "stack",
    "cocycle",
    "persistence",
)

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_POSINT = {"type": "integer", "minimum": 1}
_VECTOR = {"type": "array", "items": _NUMBER, "minItems": 1}
_CELL = {"type": "array", "items": {"type": "integer", "minimum": 0},
         "minItems": 2, "maxItems": 2}

_PARAMS_SCHEMAS = {
    "fixed_point": {
        "type": "object",
        "additionalProperties": False,
        "required": ["pull", "target"],
        "properties": {
            "pull": _NUMBER,
            "target": _VECTOR,
            "tol": _POSITIVE,
            "max_iter": _POSINT,
            "inits": _POSINT,
            "init_scale": _POSITIVE,
            "retrieval_gain": _POSITIVE,
        },
    },
    "closure": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n_contexts"],
        "properties": {
            "radius": _POSITIVE,
            "n_contexts": {"type": "integer", "minimum": 1},
            "pull": _NUMBER,
            "rounds": _POSINT,
            "tol": _POSITIVE,
            "noise_floor": _NONNEG,
        },
    },
    "entropy_compare": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "radius": _POSITIVE,
            "n_anchor": {"type": "integer", "minimum": 8},
            "obs_noise": _NONNEG,
            "aliasing": {"enum": ["none", "antipodal"]},
            "episodes": _POSINT,
            "horizon": {"type": "integer", "minimum": 2},
            "sigma": _POSITIVE,
            "beta": _NONNEG,
            "bins_per_dim": {"type": "integer", "minimum": 2},
        },
    },
    "reversibility": {
        "type": "object",
        "additionalProperties": False,
        "required": ["mode"],
        "properties": {
            "mode": {"enum": ["ring", "independent"]},
            "samples": _POSINT,
            "radius": _POSITIVE,
            "n_anchor": {"type": "integer", "minimum": 8},
            "obs_noise": _NONNEG,
            "sigma": _POSITIVE,
            "beta": _NONNEG,
            "bins_per_dim": {"type": "integer", "minimum": 2},
        },
    },
    "duality": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "width": {"type": "integer", "minimum": 2},
            "height": {"type": "integer", "minimum": 2},
            "walls": {"type": "array", "items": _CELL},
            "rewards": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["cell", "value"],
                    "properties": {"cell": _CELL, "value": _NUMBER},
                },
            },
            "episodes": {"type": "integer", "minimum": 0},
            "steps_per_episode": _POSINT,
            "discount": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            "alpha0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "sigma": _POSITIVE,
            "suffix_len": _POSINT,
            "holdout_suffixes": _POSINT,
            "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        },
    },
    "stack": {
        "type": "object",
        "additionalProperties": False,
        "required": ["gluings"],
        "properties": {
            "gluings": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "rotation_deg": _NUMBER,
                        "scale": _POSITIVE,
                        "offset": _VECTOR,
                    },
                },
            },
            "perturb": {
                "type": "object",
                "additionalProperties": False,
                "required": ["layer", "offset"],
                "properties": {"layer": {"type": "integer", "minimum": 0}, "offset": _VECTOR},
            },
            "pull": _NUMBER,
            "rounds": _POSINT,
            "tol": _POSITIVE,
            "base_vertices": {"type": "integer", "minimum": 3},
            "radius": _POSITIVE,
        },
    },
    "cocycle": {
        "type": "object",
        "additionalProperties": False,
        "required": ["patches", "mode"],
        "properties": {
            "patches": {"type": "integer", "minimum": 3},
            "mode": {"enum": ["translation", "rotation"]},
            "perturb": {
                "type": "object",
                "additionalProperties": False,
                "required": ["pair", "offset"],
                "properties": {
                    "pair": {"type": "array", "items": {"type": "integer", "minimum": 0},
                             "minItems": 2, "maxItems": 2},
                    "offset": _VECTOR,
                },
            },
        },
    },
    "persistence": {
        "type": "object",
        "additionalProperties": False,
        "required": ["cloud", "max_filtration"],
        "properties": {
            "cloud": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["circle", "file"]},
                    "n": {"type": "integer", "minimum": 1},
                    "radius": _POSITIVE,
                    "noise": _NONNEG,
                    "path": {"type": "string"},
                },
            },
            "max_filtration": _POSITIVE,
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "seeds", "params"],
    "properties": {
        "kind": {"enum": list(EXPERIMENT_KINDS)},
        "seeds": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        },
        "output_dir": {"type": "string"},
        "params": {"type": "object"},
    },
}


def _semantic_checks(config: dict):
    """Bounds that deserve precise messages beyond the schema's wording."""
    params = config["params"]
    pull = params.get("pull")
    if pull is not None and not (0.0 < pull < 1.0):
        raise ConfigError(
            f"params.pull: {pull} outside the open interval (0, 1)"
        )
    discount = params.get("discount")
    if discount is not None and not (0.0 <= discount < 1.0):
        raise ConfigError(f"params.discount: {discount} outside [0, 1)")
    if config["kind"] == "persistence":
        cloud = params["cloud"]
        if cloud["kind"] == "circle" and "n" not in cloud:
            raise ConfigError("params.cloud.n: required for circle clouds")
        if cloud["kind"] == "file" and "path" not in cloud:
            raise ConfigError("params.cloud.path: required for file clouds")
    if config["kind"] == "cocycle":
        perturb = params.get("perturb")
        if perturb is not None:
            i, j = perturb["pair"]
            if not (0 <= i < j < params["patches"]):
                raise ConfigError("params.perturb.pair: must be an ordered pair of patch indices")
    if config["kind"] == "stack":
        perturb = params.get("perturb")
        if perturb is not None and perturb["layer"] >= len(params["gluings"]):
            raise ConfigError("params.perturb.layer: no such gluing")


def validate_config(config: dict) -> dict:
    """Validate against the schema plus semantic bounds; returns the config."""
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise ConfigError(f"{path}: {exc.message}") from exc
    try:
        jsonschema.validate(config["params"], _PARAMS_SCHEMAS[config["kind"]])
    except jsonschema.ValidationError as exc:
        path = ".".join(["params", *(str(p) for p in exc.absolute_path)])
        raise ConfigError(f"{path}: {exc.message}") from exc
    _semantic_checks(config)
    return config


def load_config(path) -> dict:
    """Parse and validate a config file; syntax errors carry line/column."""
    text = Path(path).read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return validate_config(config)


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
