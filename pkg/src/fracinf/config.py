"""Run configuration: versioned JSON schema, loading and validation."""
import json
from pathlib import Path

from .errors import ConfigError

SCHEMA_VERSION = 1
COMMANDS = ("eval", "solve-dirichlet", "solve-obstacle", "game", "verify", "counterexample")
SUITES = ("fundamental", "operator_laws", "harness")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 0}
_point = {"type": "array", "items": _num, "minItems": 1}

QUADRATURE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "delta_in": _pos, "R_out": _pos, "n_inner": {"type": "integer", "minimum": 1},
        "n_mid": {"type": "integer", "minimum": 1}, "K_dir": {"type": "integer", "minimum": 8},
        "tau_grad": {"type": ["number", "null"]}, "h_grad": _pos, "tol": _pos,
        "golden_iters": {"type": "integer", "minimum": 0},
    },
}

GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "h": _pos, "tol": _pos, "max_sweeps": {"type": "integer", "minimum": 1},
        "eps": _pos, "W": _pos, "n_dirs": {"type": "integer", "minimum": 4},
        "far_cells": {"type": "integer", "minimum": 1},
    },
}

FIELD_SCHEMA = {"type": "object", "required": ["name"], "properties": {"name": {"type": "string"}}}

STRIP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["flat", "sinusoidal"]}, "dim": {"type": "integer", "minimum": 1},
        "c1": _num, "c2": _num, "width": _pos, "amplitude": _num, "amplitude2": _num,
        "frequency": _num, "phase": _num, "period": _pos, "m": _pos, "C1": _num,
    },
}

OBSTACLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["model", "constant"]}, "gamma1": _pos, "gamma2": _pos,
        "dim": {"type": "integer", "minimum": 1}, "theta": _pos, "rho0": _pos,
        "lower": _num, "upper": _num,
    },
}

GAME_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "a": _num, "b": _num, "left": _num, "right": _num,
        "points": {"type": "array", "items": _num},
        "n_episodes": _int, "antithetic": {"type": "boolean"},
        "max_turns": {"type": "integer", "minimum": 1},
    },
}

GEOMETRY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {k: _pos for k in ("a", "r", "rho1", "rho2", "delta", "rho")},
}

CERT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_samples": {"type": "integer", "minimum": 1}, "K_dir": {"type": "integer", "minimum": 8},
        "n_spot": _int, "weak_sub_integrals": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "command"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": list(COMMANDS)},
        "s": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1},
        "seed": _int,
        "output_dir": {"type": "string"},
        "quadrature": QUADRATURE_SCHEMA,
        "grid": GRID_SCHEMA,
        "field": FIELD_SCHEMA,
        "points": {"type": "array", "items": _point},
        "side": {"enum": ["strong", "sub", "super"]},
        "strip": STRIP_SCHEMA,
        "obstacles": OBSTACLE_SCHEMA,
        "game": GAME_SCHEMA,
        "geometry": GEOMETRY_SCHEMA,
        "certificate": CERT_SCHEMA,
        "suites": {"type": "array", "items": {"enum": list(SUITES)}, "uniqueItems": True},
        "post_check": {"type": "boolean"},
        "measure": {"type": "boolean"},
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": "eval"}}},
         "then": {"required": ["field", "points", "s"]}},
        {"if": {"properties": {"command": {"const": "solve-dirichlet"}}},
         "then": {"required": ["strip", "s"]}},
        {"if": {"properties": {"command": {"const": "solve-obstacle"}}},
         "then": {"required": ["obstacles", "s"]}},
        {"if": {"properties": {"command": {"const": "game"}}},
         "then": {"required": ["game", "s"]}},
    ],
}


def validate_config(cfg):
    """Validate a config dict; raises :class:`ConfigError` with the failing path."""
    import jsonschema
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(cfg)
