"""
Experiment configuration: JSON schema, defaults and line-precise validation.
"""
from __future__ import annotations

import copy
import json
from json.decoder import scanstring

import jsonschema

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT0 = {"type": "integer", "minimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_WINDOW = {"type": "array", "items": _INT0, "minItems": 2, "maxItems": 2}
_RWINDOW = {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2}

MODULUS = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["hoelder", "lipschitz", "exp_log_power", "log_poly"]},
        "alpha": _POS,
        "L": _POS,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

OBSERVABLE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["radial", "constant", "sawtooth", "cos", "coordinate", "sum"]},
        "class": MODULUS,
        "anchor": {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 3},
        "cap": _POS,
        "value": _NUM,
        "index": _INT0,
        "scale": _NUM,
        "parts": {"type": "array", "items": {"$ref": "#/$defs/observable"}, "minItems": 2, "maxItems": 2},
    },
    "required": ["kind"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": "radial"}}}, "then": {"required": ["class", "anchor"]}},
        {"if": {"properties": {"kind": {"const": "sum"}}}, "then": {"required": ["parts"]}},
    ],
}

SYSTEM = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["henon", "intermittent_circle", "intermittent_solenoid", "doubling"]},
        "a": _NUM,
        "b": _NUM,
        "gamma": _POS,
        "d": {"type": "integer", "minimum": 2},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

LAW = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["exp", "stretched", "poly"]},
        "theta": _POS,
        "c": _POS,
        "eta": _POS,
        "alpha": _POS,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

RATE_MODEL = {
    "type": "object",
    "properties": {
        "model": {"enum": ["Exponential", "StretchedExp", "Polynomial", "LogPolynomial", "ExpLogPower"]},
        "theta": _POS, "c": _POS, "eta": _POS, "p": _POS, "alpha": _POS, "C": _POS,
    },
    "required": ["model"],
    "additionalProperties": False,
}

CHECKS = ["oracle", "constant", "tail_slope", "delta_slope", "approximation", "kac",
          "semiconjugacy", "rate_fit", "bound"]

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"observable": OBSERVABLE},
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": _INT0,
        "output": {"type": "string"},
        "system": SYSTEM,
        "observables": {
            "type": "object",
            "properties": {"phi": {"$ref": "#/$defs/observable"}, "psi": {"$ref": "#/$defs/observable"}},
            "additionalProperties": False,
        },
        "estimator": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["ensemble", "time_average"]},
                "N": _INT1,
                "burn_in": _INT1,
                "spacing": _INT1,
                "n_max": _INT0,
                "batches": {"type": "integer", "minimum": 2},
                "chains": _INT1,
                "ensemble": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "tower": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["induced", "synthetic"]},
                "depth": _INT1,
                "min_width": _POS,
                "max_nodes": _INT1,
                "remainder_threshold": _POS,
                "law": LAW,
                "branching": _INT1,
                "cutoff": _INT1,
                "max_truncation": _POS,
                "k_max": _INT0,
                "sample_budget": _INT1,
                "binary": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "analysis": {
            "type": "object",
            "properties": {
                "window": _WINDOW,
                "candidates": {"type": "array", "items": RATE_MODEL["properties"]["model"], "minItems": 1},
                "slack": {"type": "number", "minimum": 1},
                "checks": {"type": "array", "items": {"enum": CHECKS}},
                "k_grid": {"type": "array", "items": _INT0, "minItems": 1},
                "verify_n_max": _INT0,
                "verify_samples": _INT1,
                "tail_window": _RWINDOW,
                "delta_window": _RWINDOW,
                "tail_tolerance": _POS,
                "delta_tolerance": _POS,
                "bound_law": RATE_MODEL,
                "semiconjugacy_states": _INT1,
            },
            "additionalProperties": False,
        },
        "predict": {
            "type": "object",
            "properties": {
                "modulus": MODULUS,
                "case": {"enum": ["henon", "solenoid"]},
                "theta": _POS,
                "gamma": _POS,
                "delta": RATE_MODEL,
            },
            "required": ["modulus"],
            "additionalProperties": False,
        },
    },
    "required": ["schema_version"],
    "additionalProperties": False,
}

DEFAULTS = {
    "output": ".",
    "estimator": {"kind": "ensemble", "N": 100_000, "burn_in": 10_000, "spacing": 16, "n_max": 20,
                  "batches": 32, "chains": 1024},
    "tower": {"kind": "induced", "depth": 10_000, "min_width": 1e-13, "max_nodes": 2_000_000,
              "remainder_threshold": 1e-3, "branching": 2, "cutoff": 100_000, "max_truncation": 1e-3,
              "k_max": 1000, "sample_budget": 32, "binary": False},
    "analysis": {"slack": 1.0, "candidates": ["Exponential", "StretchedExp", "Polynomial", "LogPolynomial",
                                              "ExpLogPower"],
                 "k_grid": [2, 4, 8, 16], "verify_n_max": 64, "verify_samples": 1_000_000,
                 "tail_window": [100, 10_000], "delta_window": [10, 1000], "tail_tolerance": 0.3,
                 "delta_tolerance": 0.4, "semiconjugacy_states": 100_000},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending line."""


def _position_index(text: str) -> dict:
    """Map each JSON path (tuple of keys and indices) to the offset where its value starts."""
    dec = json.JSONDecoder()
    pos = {}
    n = len(text)

    def ws(i):
        while i < n and text[i] in " \t\r\n":
            i += 1
        return i

    def value(i, path):
        i = ws(i)
        pos[path] = i
        c = text[i]
        if c == "{":
            i = ws(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = scanstring(text, ws(i) + 1)
                i = ws(i) + 1  # ':'
                i = ws(value(i, path + (key,)))
                if text[i] == "}":
                    return i + 1
                i += 1
        if c == "[":
            i = ws(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = ws(value(i, path + (k,)))
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        _, end = dec.raw_decode(text, i)
        return end

    value(0, ())
    return pos


def _line(text, offset):
    return text.count("\n", 0, offset) + 1


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse and validate; raises :class:`ConfigError` with ``source:line`` on any problem."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}:{err.lineno}:{err.colno}: invalid JSON: {err.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        index = _position_index(text)
        lines = []
        for e in errors:
            path = tuple(e.absolute_path)
            while path not in index and path:
                path = path[:-1]
            where = "/".join(map(str, e.absolute_path)) or "(top level)"
            lines.append(f"{source}:{_line(text, index.get(path, 0))}: {where}: {e.message}")
        raise ConfigError("\n".join(lines))
    return cfg


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(cfg: dict, seed=None, out=None) -> dict:
    """Fill defaults and apply command-line overrides; the seed must end up set."""
    res = _merge(DEFAULTS, cfg)
    if seed is not None:
        res["seed"] = int(seed)
    if out is not None:
        res["output"] = str(out)
    if "seed" not in res:
        raise ConfigError("seed is required (set \"seed\" in the config or pass --seed)")
    return res


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
