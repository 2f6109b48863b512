"""Run configuration: JSON schema, validation and object construction."""
from __future__ import annotations

import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .errors import ConfigError

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_NUM_OR_VEC = {"oneOf": [_NUM, _VEC]}
_INT_OR_VEC = {"oneOf": [{"type": "integer"}, {"type": "array", "items": {"type": "integer"}}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario", "n", "initial_state", "dt", "steps"],
    "properties": {
        "scenario": {"enum": ["harmonic", "anharmonic", "kepler"]},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": _NUM, "a": _NUM, "b": _NUM, "mu": _NUM, "lam": _NUM, "r_min": _NUM,
            },
        },
        "n": {"enum": [1, 2, 3]},
        "formalism": {"enum": ["kvn", "kvh"]},
        "representation": {"enum": ["grid", "characteristics"]},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lower", "upper", "points"],
            "properties": {"lower": _NUM_OR_VEC, "upper": _NUM_OR_VEC, "points": _INT_OR_VEC},
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sample_count": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "kind": {"enum": ["gaussian", "uniform"]},
                "h_fd_rel": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["center", "width"],
            "properties": {
                "kind": {"enum": ["gaussian"]},
                "center": _VEC,
                "width": {"type": "number", "exclusiveMinimum": 0},
                "phase_wavevector": _VEC,
            },
        },
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "steps": {"type": "integer", "minimum": 0},
        "diagnostics_every": {"type": "integer", "minimum": 1},
        "cfl_safety": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "hbar": {"type": "number", "exclusiveMinimum": 0},
        "flow_method": {"enum": ["leapfrog", "yoshida4"]},
        "oracle_dt": {"type": "number", "exclusiveMinimum": 0},
        "output_dir": {"type": "string"},
        "snapshot_steps": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "checks": {"type": "array", "items": {"type": "string"}},
        "tolerances": {"type": "object", "additionalProperties": _NUM},
    },
}


@dataclass
class RunConfig:
    raw: dict

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def scenario(self):
        return self.raw["scenario"]

    @property
    def n(self):
        return self.raw["n"]

    @property
    def representation(self):
        return self.raw.get("representation", "grid")

    @property
    def formalism(self):
        return self.raw.get("formalism", "kvh")

    @property
    def hbar(self):
        return float(self.raw.get("hbar", 1.0))

    @property
    def dt(self):
        return float(self.raw["dt"])

    @property
    def steps(self):
        return int(self.raw["steps"])

    @property
    def diagnostics_every(self):
        return int(self.raw.get("diagnostics_every", 1))

    @property
    def seed(self):
        return int(self.raw.get("sampler", {}).get("seed", 0))

    def model(self):
        from .hamiltonians import HamiltonianModel

        p = self.raw.get("model", {})
        n = self.n
        if self.scenario == "harmonic":
            return HamiltonianModel.harmonic(n, k=p.get("k", 1.0))
        if self.scenario == "anharmonic":
            return HamiltonianModel.anharmonic(n, a=p.get("a", 1.0), b=p.get("b", 1.0))
        return HamiltonianModel.kepler(n, mu=p.get("mu", 1.0), lam=p.get("lam", 1.0),
                                       r_min=p.get("r_min", 1e-3))

    def grid(self):
        from .phase_space import PhaseGrid

        g = self.raw["grid"]
        return PhaseGrid(self.n, g["lower"], g["upper"], g["points"])

    def initial_state(self):
        from .wavefunction import InitialStateSpec

        s = self.raw["initial_state"]
        return InitialStateSpec(tuple(s["center"]), s["width"], s.get("phase_wavevector"))


def _path(err):
    parts = [str(p) for p in err.absolute_path]
    return "/".join(parts) if parts else "<root>"


def validate(raw):
    """Schema plus cross-field checks; raises ConfigError with a field path."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(_path(e), e.message)
    cfg = RunConfig(raw)
    n = cfg.n
    if len(raw["initial_state"]["center"]) != 2 * n:
        raise ConfigError("initial_state/center", f"needs {2 * n} entries for n = {n}")
    k = raw["initial_state"].get("phase_wavevector")
    if k is not None and len(k) != 2 * n:
        raise ConfigError("initial_state/phase_wavevector", f"needs {2 * n} entries")
    if cfg.representation == "grid":
        if "grid" not in raw:
            raise ConfigError("grid", "required for representation = grid")
        if n > 2:
            raise ConfigError("n", "representation = grid supports n <= 2")
        for key in ("lower", "upper", "points"):
            val = raw["grid"][key]
            if isinstance(val, list) and len(val) not in (1, 2 * n):
                raise ConfigError(f"grid/{key}", f"needs 1 or {2 * n} entries")
        try:
            grid = cfg.grid()
        except ValueError as exc:
            raise ConfigError("grid", str(exc)) from None
    else:
        grid = None
        if cfg.steps and (cfg.diagnostics_every > cfg.steps or cfg.steps % cfg.diagnostics_every):
            raise ConfigError("diagnostics_every", "must divide steps")
    try:
        model = cfg.model()
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    if grid is not None and cfg.scenario == "kepler":
        q, _ = grid.coordinates()
        r = float(np.sqrt(np.min(np.sum(q * q, axis=-1))))
        if r < model.r_min:
            raise ConfigError("grid", f"a grid node lies at |q| = {r:.3g} < r_min = {model.r_min:g}; "
                              "shift the grid so the singular region is excluded")
    return cfg


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return validate(raw)
