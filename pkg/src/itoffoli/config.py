"""Run configuration: JSON schema, validation and resolution into model objects.

Frequencies are given as nu = omega / 2 pi (GHz for mode frequencies, MHz for
anharmonicities, couplings, amplitudes and shifts), times in ns and
capacitances in fF.  :func:`resolve` fills every default so the emitted
"resolved" config re-ingests to the same values.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from itoffoli.circuit import GHZ, MHZ, BareParams, CircuitSpec, derive_bare
from itoffoli.dynamics import PropagationConfig
from itoffoli.effective import EffectiveParams, dress_parameters
from itoffoli.pulses import DriveSignal

NS = 1e-9

_num = {"type": "number"}
_triple = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_QC = _obj({k: _num for k in ("1c1", "2c1", "2c2", "3c2")}, ("1c1", "2c1", "2c2", "3c2"))
_COUPLINGS_BARE = _obj({k: _num for k in ("12", "23", "13", "1c1", "2c1", "2c2", "3c2")}, ("12", "23", "13", "1c1", "2c1", "2c2", "3c2"))
_COUPLINGS_EFF = _obj({k: _num for k in ("12", "23", "13")}, ("12", "23", "13"))

SCHEMA = _obj(
    {
        "mode": {"enum": ["circuit", "bare", "effective"]},
        "circuit": _obj(
            {
                "qubit_capacitance_ff": _triple,
                "coupler_capacitance_ff": _pair,
                "coupling_capacitance_ff": _QC,
                "qubit_qubit_capacitance_ff": _obj({"12": _num, "23": _num}, ("12", "23")),
                "qubit_ej_ghz": _triple,
                "coupler_ej_ghz": _pair,
                "coupler_flux": _pair,
                "capacitance_method": {"enum": ["closed_form", "exact_inverse"]},
            },
            ("qubit_capacitance_ff", "coupler_capacitance_ff", "coupling_capacitance_ff", "qubit_qubit_capacitance_ff", "qubit_ej_ghz", "coupler_ej_ghz"),
        ),
        "bare": _obj(
            {
                "qubit_freq_ghz": _triple,
                "qubit_anharm_mhz": _triple,
                "coupler_freq_ghz": _pair,
                "coupler_anharm_mhz": _pair,
                "couplings_mhz": _COUPLINGS_BARE,
            },
            ("qubit_freq_ghz", "qubit_anharm_mhz", "coupler_freq_ghz", "coupler_anharm_mhz", "couplings_mhz"),
        ),
        "effective": _obj(
            {"freq_ghz": _triple, "anharm_mhz": _triple, "couplings_mhz": _COUPLINGS_EFF, "dispersive": {"type": ["boolean", "null"]}},
            ("freq_ghz", "anharm_mhz", "couplings_mhz"),
        ),
        "model": {"enum": ["effective_3mode", "full_5mode", "two_level"]},
        "levels": {"type": "integer", "minimum": 2, "maximum": 5},
        "counter_rotating": {"type": "boolean"},
        "two_level": _obj({"chi12_mhz": _num, "chi23_mhz": _num}),
        "pulse": _obj(
            {
                "gate_time_ns": {"type": "number", "exclusiveMinimum": 0},
                "peak_amplitude_mhz": _num,
                "sigma_ns": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "drag_ns": {"type": ["number", "null"]},
                "drive_freq_ghz": {"type": ["number", "null"]},
                "drive_detuning_mhz": _num,
                "phase": _num,
                "envelope": {"enum": ["gaussian", "flat_top_gaussian"]},
                "plateau_ns": {"type": "number", "minimum": 0},
            },
            ("gate_time_ns", "peak_amplitude_mhz"),
        ),
        "propagation": _obj(
            {
                "frame": {"enum": ["lab", "rotating"]},
                "method": {"enum": ["cfm4", "dop853"]},
                "basis": {"enum": ["dressed", "bare"]},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
                "steps": {"type": ["integer", "null"], "minimum": 1},
                "max_step_ns": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "samples": {"type": "integer", "minimum": 2},
            }
        ),
        "correction": {"enum": ["full", "fit"]},
        "calibration": _obj(
            {
                "free": {"type": "array", "items": {"enum": ["peak_amplitude", "drive_freq", "sigma", "drag", "phase"]}, "uniqueItems": True, "minItems": 1},
                "bounds": {"type": "object", "additionalProperties": _pair},
                "budget": {"type": "integer", "minimum": 1},
                "target": {"type": ["number", "null"]},
                "steps": {"type": ["integer", "null"], "minimum": 1},
            }
        ),
        "sweep": _obj({"grid": {"type": "object", "additionalProperties": {"type": "array", "minItems": 1}}}, ("grid",)),
        "seed": {"type": "integer"},
    },
    ("mode",),
)


class ConfigError(ValueError):
    """Config failed validation; the message names the offending field."""


def validate(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {err.message}")
    blocks = [b for b in ("circuit", "bare", "effective") if b in cfg]
    if blocks != [cfg["mode"]]:
        raise ConfigError(f"mode {cfg['mode']!r} needs exactly the {cfg['mode']!r} parameter block, found {blocks}")
    if cfg.get("model") == "full_5mode" and cfg["mode"] == "effective":
        raise ConfigError("model: the full model needs circuit or bare parameters")


def load(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON ({err})") from err
    validate(cfg)
    return cfg


DEFAULTS = {
    "model": "effective_3mode",
    "levels": 3,
    "counter_rotating": False,
    "correction": "full",
    "seed": 0,
}
PROPAGATION_DEFAULTS = {"frame": "rotating", "method": "cfm4", "basis": "dressed", "rtol": 1e-9, "atol": 1e-11, "steps": None, "max_step_ns": None, "samples": 101}


@dataclass
class Resolved:
    """Config with every default filled plus the objects built from it."""

    config: dict
    bare: BareParams | None
    effective: EffectiveParams
    propagation: PropagationConfig


def parameters(cfg: dict) -> tuple[BareParams | None, EffectiveParams]:
    if cfg["mode"] == "circuit":
        c = cfg["circuit"]
        spec = CircuitSpec.from_dict(c)
        bare = derive_bare(spec, c.get("capacitance_method", "closed_form"))
        return bare, dress_parameters(bare)
    if cfg["mode"] == "bare":
        bare = BareParams.from_dict(cfg["bare"])
        return bare, dress_parameters(bare)
    return None, EffectiveParams.from_dict(cfg["effective"])


def propagation_config(cfg: dict) -> PropagationConfig:
    p = {**PROPAGATION_DEFAULTS, **cfg.get("propagation", {})}
    return PropagationConfig(
        model=cfg["model"], frame=p["frame"], rtol=p["rtol"], atol=p["atol"], method=p["method"], basis=p["basis"],
        steps=p["steps"], max_step=None if p["max_step_ns"] is None else p["max_step_ns"] * NS,
    )


def resolve(cfg: dict, levels: int | None = None, seed: int | None = None) -> Resolved:
    """Validate, apply command-line overrides and fill defaults (except the drive frequency)."""
    cfg = copy.deepcopy(cfg)
    validate(cfg)
    for key, value in DEFAULTS.items():
        cfg.setdefault(key, value)
    if levels is not None:
        cfg["levels"] = levels
    if seed is not None:
        cfg["seed"] = seed
    cfg["propagation"] = {**PROPAGATION_DEFAULTS, **cfg.get("propagation", {})}
    validate(cfg)
    bare, eff = parameters(cfg)
    return Resolved(cfg, bare, eff, propagation_config(cfg))


def drive_signal(pulse: dict, drive_freq: float) -> DriveSignal:
    """Signal from a fully resolved pulse block (``drive_freq`` in rad/s)."""
    return DriveSignal(
        peak_amplitude=pulse["peak_amplitude_mhz"] * MHZ,
        gate_time=pulse["gate_time_ns"] * NS,
        drive_freq=drive_freq,
        sigma=None if pulse.get("sigma_ns") is None else pulse["sigma_ns"] * NS,
        drag=(pulse.get("drag_ns") or 0.0) * NS,
        phase=pulse.get("phase", 0.0),
        envelope=pulse.get("envelope", "gaussian"),
        plateau=pulse.get("plateau_ns", 0.0) * NS,
    )


def pulse_block(signal: DriveSignal) -> dict:
    """Inverse of :func:`drive_signal` with every field explicit."""
    d = signal.to_dict()
    return {
        "gate_time_ns": d["gate_time_ns"],
        "peak_amplitude_mhz": d["peak_amplitude_mhz"],
        "sigma_ns": d["sigma_ns"],
        "drag_ns": d["drag_ns"],
        "drive_freq_ghz": d["drive_freq_ghz"],
        "drive_detuning_mhz": 0.0,
        "phase": d["phase"],
        "envelope": d["envelope"],
        "plateau_ns": d["plateau_ns"],
    }


def set_path(cfg: dict, dotted: str, value) -> dict:
    """Copy of ``cfg`` with the dotted path (``pulse.sigma_ns``, ``effective.freq_ghz.1``) replaced."""
    out = copy.deepcopy(cfg)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node.setdefault(k, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return out


def dumps(obj) -> str:
    """Deterministic JSON text."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
