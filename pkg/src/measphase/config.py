"""Run configuration: JSON schema, defaults and resolution into library objects.

Units live in key suffixes (``_mm``, ``_nm``, ``_rad``); stage deflections
may be given as ``beta_arcsec`` instead of ``beta_rad``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .gafit import GAConfig
from .optics import ARCSEC, OpticsConfig
from .scan import ScanSpec, SetupTemplate

SCHEMA_VERSION = 1

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_range = {
    "oneOf": [
        {"type": "array", "items": _number, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": _number, "stop": _number, "num": {"type": "integer", "minimum": 1}},
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "optics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "wavelength_nm": _positive,
                "w0_mm": _positive,
                "d_x_mm": {"type": "number", "minimum": 0},
                "gamma_rad": _number,
                "tilt_scale": _number,
            },
        },
        "stages": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "nu_rad": _number,
                    "beta_rad": {"type": "number", "minimum": 0},
                    "beta_arcsec": {"type": "number", "minimum": 0},
                },
                "not": {"required": ["beta_rad", "beta_arcsec"]},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "w0_mm": _range,
                "gamma_rad": _range,
                "alpha_points": {"type": "integer", "minimum": 2},
                "bracket_mm": {"type": "array", "items": _positive, "minItems": 2, "maxItems": 2},
                "tol_mm": _positive,
            },
        },
        "ga": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "population": {"type": "integer", "minimum": 2},
                "generations": {"type": "integer", "minimum": 0},
                "tournament": {"type": "integer", "minimum": 1},
                "crossover_rate": {"type": "number", "minimum": 0, "maximum": 1},
                "sigma_nu_rad": _positive,
                "sigma_beta_arcsec": _positive,
                "elitism": {"type": "integer", "minimum": 0},
                "beta_max_arcsec": _positive,
                "mutation_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "gene_mutation_rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "contrast_weight": {"type": "number", "minimum": 0},
                "immigrants": {"type": "integer", "minimum": 0},
                "polish_every": {"type": "integer", "minimum": 0},
                "polish_count": {"type": "integer", "minimum": 0},
                "polish_evals": {"type": "integer", "minimum": 1},
                "data": {"type": "string"},
            },
        },
        "fringe": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha_rad": _number,
                "points": {"type": "integer", "minimum": 3},
                "noise": {"type": "number", "minimum": 0},
            },
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_measurements": {"type": "integer", "minimum": 1},
                "resolution": _positive,
                "theta_points": {"type": "integer", "minimum": 3},
                "zeta": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "output_dir": {"type": "string"},
        "seed": {"type": "integer"},
        "threads": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS: dict[str, Any] = {
    "schema": SCHEMA_VERSION,
    "optics": {"wavelength_nm": 632.9, "w0_mm": 1.0, "d_x_mm": 1.0, "gamma_rad": 0.0, "tilt_scale": 1.0},
    "stages": [{"nu_rad": 0.0, "beta_rad": 0.0}] * 3,
    "scan": {
        "w0_mm": {"start": 0.3, "stop": 3.0, "num": 64},
        "gamma_rad": {"start": -np.pi, "stop": np.pi, "num": 64},
        "alpha_points": 181,
        "bracket_mm": [0.3, 1.5],
        "tol_mm": 1e-3,
    },
    "ga": {
        "population": 64,
        "generations": 200,
        "tournament": 2,
        "crossover_rate": 0.7,
        "sigma_nu_rad": 1.0,
        "sigma_beta_arcsec": 5.0,
        "elitism": 2,
        "beta_max_arcsec": 60.0,
        "mutation_decay": 0.001,
        "gene_mutation_rate": 0.5,
        "contrast_weight": 1.0,
        "immigrants": 8,
        "polish_every": 25,
        "polish_count": 4,
        "polish_evals": 150,
    },
    "fringe": {"alpha_rad": np.pi / 8, "points": 64, "noise": 0.0},
    "protocol": {"n_measurements": 3, "resolution": 1e-6, "theta_points": 721},
    "output_dir": "out",
    "seed": 0,
    "threads": 1,
}


class ConfigError(ValueError):
    """Configuration failed schema validation or could not be read."""


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  {'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n" + "\n".join(lines))


def _normalize_stage(stage: dict) -> dict:
    beta = stage.get("beta_rad")
    if "beta_arcsec" in stage:
        beta = stage["beta_arcsec"] * ARCSEC
    return {"nu_rad": float(stage.get("nu_rad", 0.0)), "beta_rad": float(beta or 0.0)}


def resolve(raw: dict | None = None) -> dict:
    """Validate ``raw`` and fill defaults; the result is the canonical echo."""
    raw = raw or {}
    validate(raw)
    resolved = _merge(DEFAULTS, raw)
    resolved["stages"] = [_normalize_stage(s) for s in resolved["stages"]]
    validate(resolved)
    return resolved


def echo(resolved: dict) -> str:
    """Compact, key-sorted JSON of a resolved configuration."""
    return json.dumps(resolved, sort_keys=True, separators=(",", ":"))


def load(path: str | Path) -> dict:
    """Read a JSON config, or the ``# config=`` echo embedded in an output file."""
    path = Path(path)
    if not path.exists() or path.is_dir():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text()
    if text.lstrip().startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config="):
                return json.loads(line[len("# config="):])
        raise ConfigError(f"{path}: no '# config=' line in file header")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(data, dict) and "config" in data and isinstance(data["config"], dict):
        return data["config"]
    return data


def expand_range(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.asarray(spec, dtype=float)


@dataclass(frozen=True)
class RunConfig:
    """Library objects built from a resolved configuration dictionary."""

    raw: dict

    @property
    def optics(self) -> OpticsConfig:
        return OpticsConfig(**self.raw["optics"])

    @property
    def imperfections(self) -> list[tuple[float, float]]:
        return [(s["nu_rad"], s["beta_rad"]) for s in self.raw["stages"]]

    @property
    def n_stages(self) -> int:
        return len(self.raw["stages"])

    @property
    def template(self) -> SetupTemplate:
        pairs = self.imperfections
        if all(b == 0.0 for _, b in pairs):
            pairs = []
        return SetupTemplate(self.optics, self.n_stages, tuple(pairs))

    @property
    def alpha_grid(self) -> np.ndarray:
        return np.linspace(0.0, np.pi / 2, self.raw["scan"]["alpha_points"])

    @property
    def scan(self) -> ScanSpec:
        s = self.raw["scan"]
        return ScanSpec(
            tuple(expand_range(s["w0_mm"])),
            tuple(self.alpha_grid),
            tuple(expand_range(s["gamma_rad"])),
            tuple(self.imperfections) if any(b for _, b in self.imperfections) else (),
        )

    @property
    def ga(self) -> GAConfig:
        g = self.raw["ga"]
        return GAConfig(
            seed=self.raw["seed"],
            population=g["population"],
            generations=g["generations"],
            tournament=g["tournament"],
            crossover_rate=g["crossover_rate"],
            sigma_nu=g["sigma_nu_rad"],
            sigma_beta=g["sigma_beta_arcsec"] * ARCSEC,
            elitism=g["elitism"],
            beta_max=g["beta_max_arcsec"] * ARCSEC,
            mutation_decay=g["mutation_decay"],
            gene_mutation_rate=g["gene_mutation_rate"],
            immigrants=g["immigrants"],
            polish_every=g["polish_every"],
            polish_count=g["polish_count"],
            polish_evals=g["polish_evals"],
        )

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])
