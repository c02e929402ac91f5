"""JSON scene configurations.

A config describes the outer boundary, the cavities, the discretization and
the reconstruction settings.  Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .geometry import Curve, Scene, build_scene, curve_from_dict

_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_POS = {"type": "number", "exclusiveMinimum": 0}

CURVE_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["kind", "radius"],
         "properties": {"kind": {"const": "circle"}, "center": _COMPLEX, "radius": _POS}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "semi_axes"],
         "properties": {"kind": {"const": "ellipse"}, "center": _COMPLEX,
                        "semi_axes": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                        "rotation": {"type": "number"}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "width", "height"],
         "properties": {"kind": {"const": "rounded_rectangle"}, "center": _COMPLEX,
                        "width": _POS, "height": _POS, "corner_radius": _POS,
                        "rotation": {"type": "number"}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "r0"],
         "properties": {"kind": {"const": "trig_polynomial"}, "center": _COMPLEX, "r0": _POS,
                        "cos": {"type": "array", "items": {"type": "number"}},
                        "sin": {"type": "array", "items": {"type": "number"}},
                        "rotation": {"type": "number"}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "a1"],
         "properties": {"kind": {"const": "laurent_map"}, "a1": _POS, "a0": _COMPLEX,
                        "a_neg": {"type": "array", "items": _COMPLEX}}},
    ]
}

_N_ATOMS = {"type": "integer", "minimum": 1, "maximum": 32}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["outer", "cavities"],
    "properties": {
        "name": {"type": "string"},
        "outer": CURVE_SCHEMA,
        "cavities": {"type": "array", "items": CURVE_SCHEMA},
        "mesh": {"type": "object", "additionalProperties": False,
                 "properties": {"nodes_per_curve": {"type": "integer", "minimum": 16}}},
        "moments": {"type": "object", "additionalProperties": False,
                    "properties": {
                        "n_atoms": {"oneOf": [_N_ATOMS, {"type": "array", "items": _N_ATOMS,
                                                          "minItems": 1}]},
                        "max_order": {"type": "integer", "minimum": 2, "maximum": 128},
                        "extra": {"type": "integer", "minimum": 0}}},
        "prony": {"type": "object", "additionalProperties": False,
                  "properties": {
                      "rank_tol": _POS,
                      "weight_floor": {"type": "number", "minimum": 0},
                      "mass_convention": {"enum": ["2pi", "4pi"]}}},
        "noise": {"type": "object", "additionalProperties": False,
                  "properties": {"level": {"type": "number", "minimum": 0},
                                 "seed": {"type": "integer", "minimum": 0}}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string"},
                                  "moments_csv": {"type": "string"},
                                  "atoms_csv": {"type": "string"},
                                  "svg": {"type": "string"},
                                  "report": {"type": "string"}}},
    },
}

DEFAULTS = {
    "mesh": {"nodes_per_curve": 256},
    "moments": {"n_atoms": 1, "max_order": 64, "extra": 2},
    "prony": {"rank_tol": 1e-10, "weight_floor": None, "mass_convention": "4pi"},
    "noise": {"level": 0.0, "seed": 0},
    "output": {"dir": ".", "moments_csv": "moments.csv", "atoms_csv": "atoms.csv",
               "svg": "reconstruction.svg", "report": "report.json"},
}


@dataclass(frozen=True)
class SceneConfig:
    raw: dict
    outer: Curve
    cavities: tuple[Curve, ...]
    nodes_per_curve: int
    n_atoms: tuple[int, ...]
    max_order: int
    extra: int
    rank_tol: float
    weight_floor: float | None
    mass_convention: str
    noise_level: float
    noise_seed: int
    output: dict
    name: str = "scene"

    def scene(self) -> Scene:
        return build_scene(self.outer, self.cavities)


def _merged(section: str, data: dict) -> dict:
    out = copy.deepcopy(DEFAULTS[section])
    out.update(data.get(section, {}))
    return out


def parse_config(data: dict) -> SceneConfig:
    """Validate a config dictionary and build the curves."""
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    moments = _merged("moments", data)
    prony = _merged("prony", data)
    noise = _merged("noise", data)
    mesh = _merged("mesh", data)
    n_atoms = moments["n_atoms"]
    n_atoms = tuple(n_atoms) if isinstance(n_atoms, list) else (n_atoms,)
    if 2 * max(n_atoms) + moments["extra"] > moments["max_order"]:
        raise ConfigError(f"2*n_atoms + extra = {2 * max(n_atoms) + moments['extra']} "
                          f"exceeds max_order = {moments['max_order']}")
    if mesh["nodes_per_curve"] % 2:
        raise ConfigError("mesh.nodes_per_curve must be even")
    return SceneConfig(
        raw=data,
        outer=curve_from_dict(data["outer"]),
        cavities=tuple(curve_from_dict(c) for c in data["cavities"]),
        nodes_per_curve=mesh["nodes_per_curve"],
        n_atoms=n_atoms,
        max_order=moments["max_order"],
        extra=moments["extra"],
        rank_tol=prony["rank_tol"],
        weight_floor=prony["weight_floor"],
        mass_convention=prony["mass_convention"],
        noise_level=float(noise["level"]),
        noise_seed=int(noise["seed"]),
        output=_merged("output", data),
        name=data.get("name", "scene"),
    )


def load_config(path: str | Path) -> SceneConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(data)
