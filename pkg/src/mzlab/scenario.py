"""Scenario files: JSON blocks describing species, beam, geometry, gratings
and the experiment to run.

Every physical quantity carries its unit in the field name.  Validation is
strict: unknown fields are rejected, and each experiment kind has its own
closed schema checked before the run starts.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import jsonschema

from .bragg import GratingConfig, design_pulse, dimensionless_from_physical
from .interferometer import InterferometerGeometry
from .physics import LaserField, Species, VelocityDistribution


class ScenarioError(ValueError):
    """Semantically invalid scenario (schema-valid but inconsistent)."""


EXPERIMENT_KINDS = (
    "diffract-scan",
    "fringes",
    "tilt-scan",
    "mismatch-scan",
    "slit-scan",
    "magnetic-scan",
)

_THREE_NUMBERS = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 3,
    "maxItems": 3,
}

BASE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["species", "beam", "gratings", "experiment"],
    "properties": {
        "species": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": {"type": "string", "enum": ["li7", "li6"]}},
        },
        "beam": {
            "type": "object",
            "additionalProperties": False,
            "required": ["u_m_per_s", "alpha_over_u"],
            "properties": {
                "u_m_per_s": {"type": "number", "exclusiveMinimum": 0},
                "alpha_over_u": {"type": "number", "minimum": 0, "maximum": 0.9},
                "quadrature_order": {"type": "integer", "minimum": 1},
                "flux_counts_per_s": {"type": "number", "minimum": 0},
            },
        },
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "z_skimmer_m": {"type": "number"},
                "z_S0_m": {"type": "number"},
                "z_S1_m": {"type": "number"},
                "z_M1_m": {"type": "number"},
                "z_M2_m": {"type": "number"},
                "z_M3_m": {"type": "number"},
                "z_SD_m": {"type": "number"},
                "z_hotwire_m": {"type": "number"},
                "e_0_m": {"type": "number", "exclusiveMinimum": 0},
                "e_1_m": {"type": "number", "exclusiveMinimum": 0},
                "e_D_m": {"type": "number", "exclusiveMinimum": 0},
                "h_D_m": {"type": "number", "exclusiveMinimum": 0},
                "wavelength_m": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "gratings": {
            "type": "object",
            "additionalProperties": False,
            "required": ["order_p"],
            "properties": {
                "order_p": {"type": "integer", "enum": [1, 2, 3, 4]},
                "duration_tau": {"type": "number", "exclusiveMinimum": 0},
                "roles": {
                    "type": "array",
                    "items": {"type": "string", "enum": ["splitter", "mirror"]},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "depths_q": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "physical": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["powers_mW", "waist_m", "detuning_GHz"],
                    "properties": {
                        "powers_mW": {
                            "type": "array",
                            "items": {"type": "number", "minimum": 0},
                            "minItems": 3,
                            "maxItems": 3,
                        },
                        "waist_m": {"type": "number", "exclusiveMinimum": 0},
                        "detuning_GHz": {"type": "number"},
                        "profile": {"type": "string",
                                    "enum": ["gaussian", "flat_top"]},
                    },
                },
                "tilts_z_rad": _THREE_NUMBERS,
                "x_positions_m": _THREE_NUMBERS,
            },
        },
        "experiment": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"type": "string", "enum": list(EXPERIMENT_KINDS)},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

EXPERIMENT_SCHEMAS = {
    "diffract-scan": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "theta_start_rad", "theta_stop_rad", "points"],
        "properties": {
            "kind": {"const": "diffract-scan"},
            "theta_start_rad": {"type": "number"},
            "theta_stop_rad": {"type": "number"},
            "points": {"type": "integer", "minimum": 2},
            "method": {"type": "string", "enum": ["bloch", "two_level"]},
            "collimation": {"type": "boolean"},
            "angle_nodes": {"type": "integer", "minimum": 1},
        },
    },
    "fringes": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "x3_span_m", "points"],
        "properties": {
            "kind": {"const": "fringes"},
            "x3_span_m": {"type": "number", "exclusiveMinimum": 0},
            "points": {"type": "integer", "minimum": 2},
            "t_c_s": {"type": "number", "exclusiveMinimum": 0},
            "background_counts_per_s": {"type": "number", "minimum": 0},
            "i0_counts_per_s": {"type": "number", "minimum": 0},
            "visibility": {"type": "number", "minimum": 0, "maximum": 1},
        },
    },
    "tilt-scan": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "theta_z_start_rad", "theta_z_stop_rad", "points"],
        "properties": {
            "kind": {"const": "tilt-scan"},
            "theta_z_start_rad": {"type": "number"},
            "theta_z_stop_rad": {"type": "number"},
            "points": {"type": "integer", "minimum": 2},
            "v0_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            "apodization_sigma_m": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "mismatch-scan": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "delta_l_start_m", "delta_l_stop_m", "points"],
        "properties": {
            "kind": {"const": "mismatch-scan"},
            "delta_l_start_m": {"type": "number"},
            "delta_l_stop_m": {"type": "number"},
            "points": {"type": "integer", "minimum": 2},
            "v0_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        },
    },
    "slit-scan": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "vary", "width_start_m", "width_stop_m", "points"],
        "properties": {
            "kind": {"const": "slit-scan"},
            "vary": {"type": "string", "enum": ["e_D", "e_1"]},
            "width_start_m": {"type": "number", "exclusiveMinimum": 0},
            "width_stop_m": {"type": "number", "exclusiveMinimum": 0},
            "points": {"type": "integer", "minimum": 2},
            "n_rays": {"type": "integer", "minimum": 5},
            "mode": {"type": "string", "enum": ["deterministic", "monte_carlo"]},
            "n_samples": {"type": "integer", "minimum": 100},
        },
    },
    "magnetic-scan": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "current_start_A", "current_stop_A", "points"],
        "properties": {
            "kind": {"const": "magnetic-scan"},
            "current_start_A": {"type": "number"},
            "current_stop_A": {"type": "number"},
            "points": {"type": "integer", "minimum": 2},
            "k_phi_rad_per_A": {"type": "number", "exclusiveMinimum": 0},
            "coil": {
                "type": "object",
                "additionalProperties": False,
                "required": ["moment_per_ampere_A_m2", "distance_m"],
                "properties": {
                    "moment_per_ampere_A_m2": {"type": "number",
                                               "exclusiveMinimum": 0},
                    "distance_m": {"type": "number", "exclusiveMinimum": 0},
                    "path_separation_m": {"type": "number",
                                          "exclusiveMinimum": 0},
                    "background_field_T": {"type": "number",
                                           "exclusiveMinimum": 0},
                },
            },
            "v0_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            "mode": {"type": "string", "enum": ["closed", "brute"]},
        },
    },
}


def apply_override(cfg: dict, assignment: str) -> None:
    """Apply a ``dotted.path=value`` override in place; values parse as JSON
    with plain-string fallback."""
    if "=" not in assignment:
        raise ScenarioError(f"override {assignment!r} is not of the form key=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"override path {path!r} crosses a non-object")
    node[keys[-1]] = value


def load_scenario(path: str | Path, overrides: list[str] | None = None) -> dict:
    """Read, override and validate a scenario file.

    Raises ``jsonschema.ValidationError`` (with JSON path) on schema
    violations and :class:`ScenarioError` on semantic ones.
    """
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    cfg = copy.deepcopy(cfg)
    for assignment in overrides or []:
        apply_override(cfg, assignment)
    jsonschema.validate(cfg, BASE_SCHEMA)
    kind = cfg["experiment"]["kind"]
    jsonschema.validate(cfg["experiment"], EXPERIMENT_SCHEMAS[kind])
    return cfg


def species_from(cfg: dict) -> Species:
    return Species.from_table(cfg["species"]["name"])


def distribution_from(cfg: dict) -> VelocityDistribution:
    beam = cfg["beam"]
    u = beam["u_m_per_s"]
    return VelocityDistribution(
        u=u,
        alpha=beam["alpha_over_u"] * u,
        quadrature_order=beam.get("quadrature_order", 16),
    )


def geometry_from(cfg: dict) -> InterferometerGeometry:
    g = cfg.get("geometry", {})
    rename = {
        "z_skimmer_m": "z_skimmer", "z_S0_m": "z_s0", "z_S1_m": "z_s1",
        "z_M1_m": "z_m1", "z_M2_m": "z_m2", "z_M3_m": "z_m3",
        "z_SD_m": "z_sd", "z_hotwire_m": "z_hotwire",
        "e_0_m": "e_0", "e_1_m": "e_1", "e_D_m": "e_d",
        "h_D_m": "h_d", "wavelength_m": "wavelength",
    }
    kwargs = {rename[k]: v for k, v in g.items()}
    return InterferometerGeometry(**kwargs)


def gratings_from(
    cfg: dict,
    species: Species,
    geom: InterferometerGeometry,
    dist: VelocityDistribution,
) -> tuple[GratingConfig, GratingConfig, GratingConfig]:
    """Build the three standing waves from one of the supported encodings:
    explicit depths, designed roles at a common duration, or physical laser
    parameters."""
    block = cfg["gratings"]
    p = block["order_p"]
    tilts = block.get("tilts_z_rad", [0.0, 0.0, 0.0])
    xs = block.get("x_positions_m", [0.0, 0.0, 0.0])

    if "physical" in block:
        phys = block["physical"]
        out = []
        for i in range(3):
            laser = LaserField(
                wavelength=geom.wavelength,
                detuning=2.0 * math.pi * phys["detuning_GHz"] * 1e9,
                power=phys["powers_mW"][i] * 1e-3,
                waist=phys["waist_m"],
                profile=phys.get("profile", "gaussian"),
            )
            q, tau = dimensionless_from_physical(laser, species, dist.u)
            out.append(GratingConfig(p, q, tau, tilt_z=tilts[i],
                                     x_position=xs[i], laser=laser))
        return tuple(out)

    if "duration_tau" not in block:
        raise ScenarioError(
            "gratings block needs 'duration_tau' unless 'physical' is given"
        )
    tau = block["duration_tau"]
    if "depths_q" in block:
        qs = block["depths_q"]
    else:
        roles = block.get("roles", ["splitter", "mirror", "splitter"])
        if p == 4:
            raise ScenarioError("designed pulses need a closed form; order 4 "
                                "requires explicit depths_q")
        qs = [design_pulse(p, tau, role) for role in roles]
    return tuple(
        GratingConfig(p, q, tau, tilt_z=tz, x_position=x)
        for q, tz, x in zip(qs, tilts, xs)
    )
