"""Run configuration: JSON files, dotted overrides, validation and the
objects each subcommand needs."""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractViolation, DomainError
from .field_ops import AdmissiblePair
from .grid import ComplexField, GridSpec, RadialGrid

DEFAULTS = {
    "geometry": "cubic",
    "grid": {"n": 96, "L": 32.0},
    "datum": {
        "kind": "annulus",
        "c0": 0.06,
        "rho": 0.2136,
        "sigma": 0.032,
        "potential_sup": 0.05,
        "amplitude": None,
        "grid_n": 96,
        "grid_L": 0.42,
        "path": None,
        "epsilon0": 0.1,
        "allow_origin_support": False,
    },
    "phase": {
        "T1": "auto",
        "T_end": 64.0,
        "t_min": 2.0,
        "knots_per_decade": 12,
        "tol_hj": 1e-4,
        "grad_budget": 5.0,
        "lap_budget": 50.0,
        "coulomb": True,
        "n_traj": 3000,
        "certify_from": None,
    },
    "evolution": {"dt": 0.1, "softening": None, "coupling": 1.0, "mass_tol": 1e-8},
    "scattering": {
        "b": 0.45,
        "T": 32.0,
        "S_max": 64.0,
        "n_knots": 12,
        "n_iters": 3,
        "fd_step": None,
        "t_out": 2.0,
    },
    "diagnostics": {
        "pairs": [["inf", 2], [4, 3], [2, 6]],
        "ablations": True,
        "window": [4.0, 32.0],
        "min_points": 6,
        "plot": False,
    },
    "identity": {
        "n": 64,
        "L": 16.0,
        "c0": 0.25,
        "rho": 0.95,
        "sigma": 0.14,
        "grid_n": 96,
        "grid_L": 1.7,
        "times": [8.0, 10.0],
        "U_time": 10.0,
    },
    "seed": 0,
    "output_dir": "runs",
}


def _merge(base, extra, path=""):
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v, path + k + ".")
        else:
            base[k] = v
    return base


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg, item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config section {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = _parse_value(raw)


class RunConfig:
    """Validated configuration (a nested dict plus typed accessors)."""

    def __init__(self, data):
        self.data = data
        self.validate()

    @classmethod
    def load(cls, path=None, overrides=(), seed=None, output=None):
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                user = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(user, dict):
                raise ConfigError("config root must be an object")
            _merge(data, user)
        for item in overrides:
            apply_override(data, item)
        if seed is not None:
            data["seed"] = int(seed)
        if output is not None:
            data["output_dir"] = str(output)
        return cls(data)

    def __getitem__(self, key):
        return self.data[key]

    def to_json(self):
        return json.dumps(self.data, indent=2, sort_keys=True)

    def validate(self):
        d = self.data
        try:
            if d["geometry"] not in ("cubic", "radial"):
                raise ConfigError("geometry must be 'cubic' or 'radial'")
            b = float(d["scattering"]["b"])
            if not 0.25 < b < 0.5:
                raise ConfigError(f"b={b} outside (1/4, 1/2)")
            K = float(d["evolution"]["coupling"])
            if K != 1.0:
                raise ConfigError("the Coulomb coupling is fixed to K = +1")
            if not float(d["evolution"]["dt"]) > 0:
                raise ConfigError("evolution.dt must be positive")
            ph = d["phase"]
            if ph["T1"] != "auto" and not float(ph["T1"]) > 0:
                raise ConfigError("phase.T1 must be 'auto' or a positive number")
            if not 1 <= float(ph["t_min"]) < float(ph["T_end"]):
                raise ConfigError("need 1 <= phase.t_min < phase.T_end")
            sc = d["scattering"]
            if not 1 <= float(sc["T"]) < float(ph["T_end"]):
                raise ConfigError("need 1 <= scattering.T < phase.T_end")
            self.pairs()
            self.grid()
            self.datum_grid()
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config: {exc}") from exc

    # -- typed accessors

    def pairs(self):
        out = []
        for q, r in self.data["diagnostics"]["pairs"]:
            q = np.inf if q in ("inf", None) else float(q)
            r = np.inf if r in ("inf", None) else float(r)
            try:
                out.append(AdmissiblePair(q, r))
            except DomainError as exc:
                raise ConfigError(str(exc)) from exc
        return tuple(out)

    def grid(self):
        g = self.data["grid"]
        try:
            if self.data["geometry"] == "radial":
                return RadialGrid(int(g["n"]), float(g["L"]))
            return GridSpec(int(g["n"]), float(g["L"]))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def datum_grid(self):
        d = self.data["datum"]
        try:
            if self.data["geometry"] == "radial":
                return RadialGrid(int(d["grid_n"]), float(d["grid_L"]))
            return GridSpec(int(d["grid_n"]), float(d["grid_L"]))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def evolution(self, record_times=()):
        from .propagator import EvolutionConfig

        e = self.data["evolution"]
        soft = e["softening"]
        soft = None if soft is None else (math.inf if soft == "inf" else float(soft))
        return EvolutionConfig(dt=float(e["dt"]), coulomb_softening=soft,
                               record_times=tuple(record_times), coupling=float(e["coupling"]),
                               mass_tol=float(e["mass_tol"]))

    def datum(self):
        from .io import read_field_file
        from .profile import ScatteringDatum, annulus_datum, zero_datum

        d = self.data["datum"]
        try:
            if d["path"]:
                grid, values = read_field_file(d["path"])
                return ScatteringDatum.from_samples(ComplexField(grid, values), float(d["c0"]),
                                                    float(d["epsilon0"]),
                                                    bool(d["allow_origin_support"]))
            grid = self.datum_grid()
            if d["kind"] == "zero":
                return zero_datum(grid, float(d["c0"]))
            if d["kind"] != "annulus":
                raise ConfigError(f"unknown datum kind {d['kind']!r}")
            amp = d["amplitude"]
            return annulus_datum(grid, float(d["c0"]), float(d["rho"]), float(d["sigma"]),
                                 float(d["potential_sup"]),
                                 None if amp is None else float(amp), float(d["epsilon0"]),
                                 bool(d["allow_origin_support"]))
        except (ContractViolation, DomainError) as exc:
            raise ConfigError(f"datum rejected: {exc}") from exc

    def identity_setup(self):
        from .profile import annulus_datum

        s = self.data["identity"]
        grid = GridSpec(int(s["n"]), float(s["L"]))
        dgrid = GridSpec(int(s["grid_n"]), float(s["grid_L"]))
        kind = self.data["datum"]["kind"]
        if kind == "zero":
            from .profile import zero_datum

            return grid, zero_datum(dgrid, float(s["c0"]))
        try:
            datum = annulus_datum(dgrid, float(s["c0"]), float(s["rho"]), float(s["sigma"]),
                                  float(self.data["datum"]["potential_sup"]))
        except (ContractViolation, DomainError) as exc:
            raise ConfigError(f"datum rejected: {exc}") from exc
        return grid, datum
