"""Run configuration: YAML loading, defaults per mode, dotted overrides and validation."""

from __future__ import annotations

import copy
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ValidationError

MODES = ("qm-run", "qft-stationary", "qft-evolve", "rate-fit", "sweep")

_QFT_MODEL = {"m_phi": 1.0, "h": 3.0, "beta": 0.5, "k": 1.0}

DEFAULTS: dict[str, dict[str, Any]] = {
    "qm-run": {
        "model": {"n_bath": 50, "omega0": 1.0, "beta": 2.0, "spacing": 0.01, "coupling": 0.075},
        "numerics": {"t_max": 500.0, "n_times": 5001, "rtol": 1e-10, "heisenberg_tol": 1e-9},
    },
    "qft-stationary": {
        "model": dict(_QFT_MODEL),
        "numerics": {"n_points": 4096, "cutoff_factor": 40.0, "h_values": None},
    },
    "qft-evolve": {
        "model": dict(_QFT_MODEL),
        "numerics": {
            "dt": 0.05,
            "n_t": 2000,
            "t_mem": "default",
            "prehistory": "free",
            "taper_fraction": 0.1,
            "decay_tol": 0.5,
            "kernel_source": "closed",
            "backend": None,
        },
    },
    "rate-fit": {
        "model": {"input": None},
        "numerics": {
            "delta_ms": "auto",
            "t_lo": None,
            "t_hi": None,
            "floor_rel": 1e-3,
            "min_efolds": 2.0,
            "residual_tol": 0.5,
        },
    },
    "sweep": {
        "model": {"base_mode": "qft-stationary", "base": {}, "grid": {}},
        "numerics": {"workers": 1},
    },
}

SWEEPABLE = ("qm-run", "qft-stationary", "qft-evolve")


@dataclass(frozen=True)
class RunConfig:
    """One fully specified run.

    ``model`` holds physical parameters (or, for ``rate-fit``, the input path
    and for ``sweep`` the base run plus the parameter grid); ``numerics``
    holds step sizes, grid sizes and tolerances; ``output`` is the CSV file
    name written inside the output directory.
    """

    mode: str
    model: dict[str, Any] = field(default_factory=dict)
    numerics: dict[str, Any] = field(default_factory=dict)
    output: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"mode": self.mode, "model": copy.deepcopy(self.model), "numerics": copy.deepcopy(self.numerics), "output": self.output}

    def to_json(self) -> str:
        """Canonical one-line form used in output headers."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def output_name(self) -> str:
        return self.output or f"{self.mode.replace('-', '_')}.csv"


def _merge(base: dict[str, Any], extra: Mapping[str, Any], where: str) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key not in out:
            raise ValidationError(f"unknown key {where}.{key} (allowed: {sorted(out)})")
        out[key] = value
    return out


def make_config(raw: Mapping[str, Any]) -> RunConfig:
    """Fill defaults for the mode in ``raw`` and validate the result."""
    if not isinstance(raw, Mapping):
        raise ValidationError("configuration must be a mapping")
    unknown = set(raw) - {"mode", "model", "numerics", "output"}
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")
    mode = raw.get("mode")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    defaults = DEFAULTS[mode]
    model = _merge(defaults["model"], raw.get("model") or {}, "model")
    numerics = _merge(defaults["numerics"], raw.get("numerics") or {}, "numerics")
    output = raw.get("output")
    if output is not None and (not isinstance(output, str) or not output or Path(output).name != output):
        raise ValidationError("output must be a plain file name")
    cfg = RunConfig(mode, model, numerics, output)
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    return make_config(raw or {})


def parse_override(item: str) -> tuple[list[str], Any]:
    """``"model.h=2.5"`` -> ``(["model", "h"], 2.5)``; values are parsed as YAML scalars."""
    key, sep, value = item.partition("=")
    if not sep or not key.strip():
        raise ValidationError(f"override {item!r} is not of the form key=value")
    return key.strip().split("."), yaml.safe_load(value)


def apply_overrides(raw: Mapping[str, Any], overrides: list[str]) -> dict[str, Any]:
    out = copy.deepcopy(dict(raw))
    for item in overrides:
        path, value = parse_override(item)
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(f"override {item!r} descends into a non-mapping")
        node[path[-1]] = value
    return out


def _positive(name: str, value: Any, integer: bool = False, allow_zero: bool = False) -> None:
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ValidationError(f"{name} must be {'an integer' if integer else 'a number'}, got {value!r}")
    if not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise ValidationError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value!r}")


def _validate_qft_model(model: Mapping[str, Any], prefix: str = "model") -> None:
    _positive(f"{prefix}.m_phi", model["m_phi"])
    _positive(f"{prefix}.h", model["h"], allow_zero=True)
    _positive(f"{prefix}.beta", model["beta"])
    _positive(f"{prefix}.k", model["k"], allow_zero=True)


def validate(cfg: RunConfig) -> None:
    """Check every parameter against the preconditions of the target module.

    Raises:
        ValidationError: on the first offending entry.
    """
    m, n = cfg.model, cfg.numerics
    if cfg.mode == "qm-run":
        _positive("model.n_bath", m["n_bath"], integer=True)
        for key in ("omega0", "beta", "spacing"):
            _positive(f"model.{key}", m[key])
        _positive("model.coupling", m["coupling"], allow_zero=True)
        _positive("numerics.t_max", n["t_max"])
        _positive("numerics.n_times", n["n_times"], integer=True)
        if n["n_times"] < 2:
            raise ValidationError("numerics.n_times must be at least 2")
        _positive("numerics.rtol", n["rtol"])
        _positive("numerics.heisenberg_tol", n["heisenberg_tol"])
    elif cfg.mode == "qft-stationary":
        _validate_qft_model(m)
        if m["k"] == 0:
            raise ValidationError("model.k must be positive for the stationary solver")
        _positive("numerics.n_points", n["n_points"], integer=True)
        if n["n_points"] < 64:
            raise ValidationError("numerics.n_points must be at least 64")
        _positive("numerics.cutoff_factor", n["cutoff_factor"])
        hv = n["h_values"]
        if hv is not None:
            if not isinstance(hv, list) or not hv:
                raise ValidationError("numerics.h_values must be a non-empty list or null")
            for i, h in enumerate(hv):
                _positive(f"numerics.h_values[{i}]", h, allow_zero=True)
    elif cfg.mode == "qft-evolve":
        _validate_qft_model(m)
        if m["k"] == 0:
            raise ValidationError("model.k must be positive for the two-time evolution")
        _positive("numerics.dt", n["dt"])
        _positive("numerics.n_t", n["n_t"], integer=True)
        if n["n_t"] < 2:
            raise ValidationError("numerics.n_t must be at least 2")
        if n["t_mem"] not in ("default", None):
            _positive("numerics.t_mem", n["t_mem"])
        if n["prehistory"] not in ("free", "sharp"):
            raise ValidationError("numerics.prehistory must be 'free' or 'sharp'")
        tf = n["taper_fraction"]
        if isinstance(tf, bool) or not isinstance(tf, (int, float)) or not 0 <= tf < 1:
            raise ValidationError("numerics.taper_fraction must lie in [0, 1)")
        _positive("numerics.decay_tol", n["decay_tol"])
        if not isinstance(n["kernel_source"], str) or not n["kernel_source"]:
            raise ValidationError("numerics.kernel_source must be 'closed', 'spectrum' or a qft-stationary CSV path")
        if n["backend"] not in (None, "compiled", "python"):
            raise ValidationError("numerics.backend must be null, 'compiled' or 'python'")
    elif cfg.mode == "rate-fit":
        if not isinstance(m["input"], str) or not m["input"]:
            raise ValidationError("model.input must name a qft-evolve CSV file")
        if n["delta_ms"] != "auto":
            _positive("numerics.delta_ms", n["delta_ms"])
        for key in ("t_lo", "t_hi"):
            if n[key] is not None:
                _positive(f"numerics.{key}", n[key], allow_zero=True)
        for key in ("floor_rel", "min_efolds", "residual_tol"):
            _positive(f"numerics.{key}", n[key])
    elif cfg.mode == "sweep":
        base_mode = m["base_mode"]
        if base_mode not in SWEEPABLE:
            raise ValidationError(f"model.base_mode must be one of {SWEEPABLE}")
        grid = m["grid"]
        if not isinstance(grid, dict) or not grid:
            raise ValidationError("model.grid must map parameter names to value lists")
        for key, values in grid.items():
            if not isinstance(values, list) or not values:
                raise ValidationError(f"model.grid.{key} must be a non-empty list")
        if not isinstance(m["base"], dict):
            raise ValidationError("model.base must be a mapping")
        _positive("numerics.workers", n["workers"], integer=True)
        for point in sweep_points(cfg):
            make_config(point)


def sweep_points(cfg: RunConfig) -> list[dict[str, Any]]:
    """Raw configs of every grid point (Cartesian product, keys in sorted order).

    Grid keys name model parameters of the base mode, or numerics when
    prefixed with ``numerics.``.
    """
    base = copy.deepcopy(cfg.model["base"])
    base["mode"] = cfg.model["base_mode"]
    keys = sorted(cfg.model["grid"])
    points = []
    for combo in itertools.product(*(cfg.model["grid"][k] for k in keys)):
        raw = copy.deepcopy(base)
        raw.pop("output", None)
        overrides = [
            f"{key if '.' in key else 'model.' + key}={json.dumps(value)}" for key, value in zip(keys, combo)
        ]
        points.append(apply_overrides(raw, overrides))
    return points
