"""Run configuration: JSON schema, validation and construction of the system and cocycle."""
from __future__ import annotations

import json
from typing import Any

import jsonschema

from .cocycle import CocycleSpec
from .errors import ConfigError, DomsplitError
from .sft import Point, SftSystem
from .snumbers import NormContext

_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_nonneg = {"type": "integer", "minimum": 0}
_matrix = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}
_word = {"type": "string", "pattern": "^[0-9]+$"}
_point = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["periodic"],
         "properties": {"periodic": _word}},
        {"type": "object", "additionalProperties": False, "required": ["left", "right"],
         "properties": {"left": _word, "center": {"type": "string", "pattern": "^[0-9]*$"}, "right": _word,
                        "offset": {"type": "integer"}}},
    ]
}


def _cmd(name, props, required=()):
    props = dict(props)
    props["command"] = {"const": name}
    props["require"] = {"type": "string"}
    return {"type": "object", "additionalProperties": False, "required": ["command", *required], "properties": props}


COMMANDS = {
    "enumerate-periodic": _cmd("enumerate-periodic", {"N": _posint}, ["N"]),
    "periodic-data": _cmd("periodic-data", {"N": _posint, "k": _posint, "tol_const": _pos}, ["N"]),
    "gelfand-profile": _cmd("gelfand-profile", {"point": _point, "q_max": _posint, "n_max": _posint}, ["point"]),
    "spectrum": _cmd("spectrum", {"q_max": _posint, "n": _posint, "sample_count": _posint, "tol_group": _pos}),
    "certify": _cmd("certify", {"k": _posint, "N": _posint, "random_count": _nonneg, "n_min": _nonneg,
                                "n_max": _posint, "tau_accept": {"type": "number", "exclusiveMinimum": 0,
                                                                 "exclusiveMaximum": 1},
                                "res_accept": _pos, "slope_reject": {"type": "number", "minimum": 0},
                                "slope_tol": _pos, "verify_samples": _nonneg, "n_check": _posint}, ["k"]),
    "classify": _cmd("classify", {"N": _posint, "indices": {"type": "array", "items": _posint},
                                  "random_count": _nonneg, "sample_count": _posint, "eps": _pos,
                                  "zero_tol": _pos, "n_check": _posint, "n_center": _posint, "depth": _posint}),
    "shadow": _cmd("shadow", {"point": _point, "n": {"type": "array", "minItems": 1, "items": _posint}},
                   ["point", "n"]),
    "semicontinuity": _cmd("semicontinuity", {"point": _point, "q": _posint,
                                              "periods": {"type": "array", "minItems": 1, "items": _posint}},
                           ["point", "periods"]),
    "uniform-convergence": _cmd("uniform-convergence", {"k": _posint, "n_list": {"type": "array", "minItems": 1,
                                                                                  "items": _posint},
                                                        "sample_count": _posint, "N": _posint}, ["k", "n_list"]),
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "domsplit run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "cocycle", "analysis", "seed"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "output_dir": {"type": "string", "minLength": 1},
        "system": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["full_shift", "golden_mean"]},
                "alphabet": {"type": "integer", "minimum": 1},
                "transitions": {"type": "array", "minItems": 1,
                                "items": {"type": "array", "items": {"enum": [0, 1]}}},
                "n_max": _posint,
                "closing": {"type": "object", "additionalProperties": False, "required": ["c", "theta"],
                            "properties": {"c": _pos, "theta": _pos}},
            },
            "oneOf": [{"required": ["preset"], "not": {"required": ["transitions"]}},
                      {"required": ["transitions"], "not": {"required": ["preset"]}}],
        },
        "cocycle": {
            "type": "object", "additionalProperties": False, "required": ["family"],
            "properties": {
                "family": {"enum": ["locally_constant", "conjugated_diagonal", "galerkin"]},
                "norm": {"enum": ["euclidean", "l1", "linf"]},
                "injective": {"type": "boolean"},
                "holder_alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "radius": _nonneg,
                "table": {"type": "object", "additionalProperties": _matrix},
                "exponents": {"oneOf": [{"type": "array", "items": {"type": "number"}},
                                        {"type": "object", "additionalProperties":
                                            {"type": "array", "items": {"type": "number"}}}]},
                "exponent_radius": _nonneg,
                "conjugacy": {"type": "object", "additionalProperties": _matrix},
                "conjugacy_radius": _nonneg,
                "cond_bound": _pos,
                "truncation": {"type": "integer", "minimum": 2},
                "amplitudes": {"type": "object", "additionalProperties": {"type": "number"}},
                "decay": _pos,
            },
            "allOf": [
                {"if": {"properties": {"family": {"const": "locally_constant"}}},
                 "then": {"required": ["table"]}},
                {"if": {"properties": {"family": {"const": "conjugated_diagonal"}}},
                 "then": {"required": ["exponents", "conjugacy"]}},
                {"if": {"properties": {"family": {"const": "galerkin"}}},
                 "then": {"required": ["truncation", "amplitudes"]}},
            ],
        },
        "analysis": {
            "type": "object", "additionalProperties": False, "required": ["commands"],
            "properties": {
                "commands": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "required": ["command"],
                        "properties": {"command": {"enum": list(COMMANDS)}},
                        "allOf": [{"if": {"properties": {"command": {"const": c}}}, "then": s}
                                  for c, s in COMMANDS.items()],
                    },
                },
            },
        },
    },
}

REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "domsplit report",
    "type": "object",
    "required": ["format", "report_version", "library_version", "config_sha256", "seed", "results"],
    "properties": {
        "format": {"const": "domsplit-report"},
        "report_version": {"const": 1},
        "library_version": {"type": "string"},
        "config_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seed": {"type": "integer"},
        "results": {"type": "array", "items": {"type": "object", "required": ["command", "csv"],
                                               "properties": {"command": {"enum": list(COMMANDS)},
                                                              "csv": {"type": "array",
                                                                      "items": {"type": "string"}}}}},
    },
    "description": "Floats carry 12 significant digits; infinities are the strings 'inf' and '-inf'. "
                   "CSV series: enumerate_periodic.csv (n,word), periodic_data.csv (word,period,i,exponent), "
                   "gelfand_profile.csv (n,q,value), spectrum.csv (q,l,zeta), certify_k<k>.csv (n,log_ratio,"
                   "log_ratio_bg), shadow.csv (n,i,distance,bound), semicontinuity.csv (period,value,"
                   "one_period_value), uniform_convergence.csv (n,q,e_n).",
}


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(cfg: Any) -> dict:
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = list(v.iter_errors(cfg))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        # descend into the most specific sub-error for oneOf/if-then failures
        while err.context:
            err = jsonschema.exceptions.best_match(err.context)
        raise ConfigError(err.message, _path(err))
    return cfg


def load(path) -> tuple[dict, bytes]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", str(path)) from None
    try:
        cfg = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return validate(cfg), raw


def build_system(block: dict) -> SftSystem:
    kw = {}
    if "n_max" in block:
        kw["n_max"] = block["n_max"]
    if "closing" in block:
        kw["closing_constants"] = (block["closing"]["c"], block["closing"]["theta"])
    try:
        if "preset" in block:
            if block["preset"] == "golden_mean":
                return SftSystem.golden_mean(**kw)
            return SftSystem.full_shift(block.get("alphabet", 2), **kw)
        M = block["transitions"]
        if "alphabet" in block and block["alphabet"] != len(M):
            raise ConfigError("alphabet does not match the transition matrix size", "system/alphabet")
        return SftSystem(M, **kw)
    except DomsplitError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "system") from None


def build_cocycle(block: dict, sys: SftSystem) -> CocycleSpec:
    fam = block["family"]
    extra = {"injective": block.get("injective"), "holder_alpha": block.get("holder_alpha", 1.0)}
    try:
        if fam == "locally_constant":
            spec = CocycleSpec.locally_constant(sys, block.get("radius", 0), block["table"], **extra)
        elif fam == "conjugated_diagonal":
            spec = CocycleSpec.conjugated_diagonal(sys, block["exponents"], block["conjugacy"],
                                                   block.get("conjugacy_radius", 0), block.get("exponent_radius", 0),
                                                   block.get("cond_bound", 1e6), **extra)
        else:
            if extra["injective"] is None:
                extra["injective"] = False
            spec = CocycleSpec.weighted_shift(sys, block["truncation"], block["amplitudes"], block.get("radius", 0),
                                              block.get("decay", 1.0), **extra)
        if "norm" in block:
            spec.norm_context = NormContext(block["norm"], spec.dimension)
        return spec
    except DomsplitError as exc:
        raise ConfigError(str(exc), "cocycle") from None


def build_point(obj: dict, sys: SftSystem) -> Point:
    digits = lambda s: tuple(int(c) for c in s)
    try:
        if "periodic" in obj:
            return sys.point(digits(obj["periodic"]), (), digits(obj["periodic"]), 0)
        return sys.point(digits(obj["left"]), digits(obj.get("center", "")), digits(obj["right"]),
                         obj.get("offset", 0))
    except DomsplitError as exc:
        raise ConfigError(str(exc), "point") from None
