"""Run configuration: JSON schema, defaults and construction of library objects.

Complex numbers are written as ``[re, im]`` pairs; matrices as nested lists of
such pairs. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .pointers import PointerSpec, custom_pointer, gaussian_pointer, qubit_pointer, tilted_qubit_pointer
from .process import (
    CHANNEL_PARAMS,
    NAMED_BASES,
    BasisQuartet,
    KrausChannel,
    default_bases,
    named_basis,
    standard_channel,
)

SCHEMES = ("weak", "strong", "sigma-x", "multi", "ancilla")
POINTERS = ("qubit", "gaussian", "tilted-qubit")

_complex = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_matrix = {"type": "array", "items": {"type": "array", "items": _complex, "minItems": 1}, "minItems": 1}
_basis = {"oneOf": [{"enum": sorted(NAMED_BASES)}, _matrix]}
_pointer = {
    "oneOf": [
        {"enum": list(POINTERS)},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": list(POINTERS)},
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "n_max": {"type": "integer", "minimum": 8},
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["sigma", "p", "q"],
            "properties": {"sigma": _matrix, "p": _matrix, "q": _matrix, "label": {"type": "string"}},
        },
    ]
}
_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["channel"],
    "properties": {
        "scheme": {"enum": list(SCHEMES)},
        "channel": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["name"],
                    "properties": {"name": {"enum": sorted(CHANNEL_PARAMS)}, "params": {"type": "object"}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kraus"],
                    "properties": {"kraus": {"type": "array", "items": _matrix, "minItems": 1},
                                   "label": {"type": "string"}},
                },
            ]
        },
        "ground_truth": {"type": "boolean"},
        "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "bases": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _basis for k in ("psi", "alpha", "beta", "phi")},
        },
        "pointer": _pointer,
        "pointer_v": _pointer,
        "coupling": {"oneOf": [_pair, {"type": "array", "items": _pair, "minItems": 1}]},
        "mode": {"enum": ["exact", "perturbative", "sampled"]},
        "shots": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "cap": {"type": "integer", "minimum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "r4_only": {"type": "boolean"},
        "gamma": _matrix,
    },
}

DEFAULTS = {
    "scheme": "weak",
    "ground_truth": True,
    "mode": "perturbative",
    "seed": 0,
    "cap": 4096,
    "r4_only": False,
}


class ConfigError(ValueError):
    pass


def _cmat(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim < 1 or a.shape[-1] != 2:
        raise ConfigError("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def load_config(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    return validate_config(raw, str(path))


def validate_config(raw: dict, source: str = "<config>") -> dict:
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{source}: field '{where}': {e.message}")
    cfg = dict(DEFAULTS)
    cfg.update(raw)
    if cfg["mode"] == "sampled" and "shots" not in cfg:
        raise ConfigError(f"{source}: field 'shots' is required in sampled mode")
    return cfg


def build_channel(cfg: dict, d: int | None = None) -> KrausChannel:
    spec = cfg["channel"]
    if "kraus" in spec:
        return KrausChannel(tuple(_cmat(k) for k in spec["kraus"]), name=spec.get("label", "explicit"))
    params = dict(spec.get("params", {}))
    if d is not None and spec["name"] in ("identity", "depolarizing"):
        params["d"] = d
    if "u" in params:
        params["u"] = _cmat(params["u"])
    return standard_channel(spec["name"], **params)


def build_pointer(entry) -> PointerSpec:
    if entry is None or entry == "qubit":
        return qubit_pointer()
    if isinstance(entry, str):
        entry = {"name": entry}
    if "sigma" in entry:
        return custom_pointer(_cmat(entry["sigma"]), _cmat(entry["p"]), _cmat(entry["q"]), entry.get("label", "custom"))
    name = entry["name"]
    if name == "gaussian":
        return gaussian_pointer(entry.get("delta", 1.0), entry.get("n_max", 20))
    if name == "tilted-qubit":
        return tilted_qubit_pointer()
    return qubit_pointer()


def build_bases(cfg: dict, d_in: int, d_out: int) -> BasisQuartet:
    spec = cfg.get("bases")
    if not spec:
        return default_bases(d_in, d_out)
    dflt = {"psi": "computational", "alpha": "fourier", "beta": "fourier", "phi": "computational"}
    mats = {}
    for key, d in (("psi", d_in), ("alpha", d_in), ("beta", d_out), ("phi", d_out)):
        v = spec.get(key, dflt[key])
        mats[key] = named_basis(v, d) if isinstance(v, str) else _cmat(v)
    return BasisQuartet(mats["psi"], mats["alpha"], mats["beta"], mats["phi"])


def build_couplings(cfg: dict, n: int = 1) -> list[tuple[float, float]]:
    c = cfg.get("coupling")
    if c is None:
        return [(1e-3, 1e-3)] * n
    if isinstance(c[0], (int, float)):
        return [(float(c[0]), float(c[1]))] * n
    if len(c) != n:
        raise ConfigError(f"field 'coupling': expected {n} per-particle pairs, got {len(c)}")
    return [(float(a), float(b)) for a, b in c]
