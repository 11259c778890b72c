"""Command-line front end: derive, shifts, gate, sweep, calibrate.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import functools
import sys
from pathlib import Path

import numpy as np

from itoffoli import config as C
from itoffoli.circuit import GHZ, MHZ, ConfigurationError
from itoffoli.dynamics import PropagationError, population_traces, write_matrix_json
from itoffoli.effective import residual_couplings
from itoffoli.fidelity import IdleCouplingError, calibrate_pulse, parameter_sweep
from itoffoli.hilbert import label_str
from itoffoli.perturbation import ResonanceError, shift_report
from itoffoli.pipeline import GateSetup, build_model, resonant_frequency
from itoffoli.pulses import default_drag
from itoffoli.spectrum import LabelingError, dispersive_shifts_exact, labeled_spectrum

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (ResonanceError, PropagationError, LabelingError, IdleCouplingError, np.linalg.LinAlgError, FloatingPointError)


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


# -- model assembly ---------------------------------------------------------


def model_params(res: C.Resolved):
    cfg = res.config
    if cfg["model"] == "full_5mode":
        return res.bare
    if cfg["model"] == "two_level":
        tl = cfg.get("two_level", {})
        if "chi12_mhz" in tl and "chi23_mhz" in tl:
            chi12, chi23 = tl["chi12_mhz"] * MHZ, tl["chi23_mhz"] * MHZ
        else:
            rep = shift_report(res.effective)
            chi12, chi23 = rep.chi12.total, rep.chi23.total
        return (chi12, chi23, res.effective.freq[1])
    return res.effective


def undriven_model(res: C.Resolved):
    return build_model(res.config["model"], model_params(res), res.config["levels"], res.config["counter_rotating"])


def resolve_pulse(res: C.Resolved, h) -> dict:
    """Fill sigma, DRAG and carrier so the pulse block is explicit."""
    p = dict(res.config["pulse"])
    p.setdefault("phase", 0.0)
    p.setdefault("envelope", "gaussian")
    p.setdefault("plateau_ns", 0.0)
    if p.get("sigma_ns") is None:
        p["sigma_ns"] = p["gate_time_ns"] / 6
    if p.get("drag_ns") is None:
        p["drag_ns"] = default_drag(res.effective.anharm[1]) / C.NS
    if p.get("drive_freq_ghz") is None:
        p["drive_freq_ghz"] = resonant_frequency(h) / GHZ + p.get("drive_detuning_mhz", 0.0) / 1e3
        p["drive_detuning_mhz"] = 0.0
    p.setdefault("drive_detuning_mhz", 0.0)
    return p


def prepared(res: C.Resolved):
    """Undriven model, resolved config (pulse explicit) and drive signal."""
    if "pulse" not in res.config:
        raise C.ConfigError("pulse: required for gate simulation")
    h = undriven_model(res)
    cfg = dict(res.config)
    cfg["pulse"] = resolve_pulse(res, h)
    signal = C.drive_signal(cfg["pulse"], cfg["pulse"]["drive_freq_ghz"] * GHZ)
    return h, cfg, signal


# -- subcommands -----------------------------------------------------------


def cmd_derive(res: C.Resolved, args) -> dict:
    if res.config["mode"] == "effective":
        raise C.ConfigError("mode: derive needs circuit or bare parameters")
    resid = residual_couplings(res.bare)
    out = {"bare": res.bare.to_dict(), "effective": res.effective.to_dict(), "residual_couplings_mhz": resid.to_dict()}
    _write(args.out / "derive.json", C.dumps(out))
    e = res.effective
    lines = ["qubit  freq_ghz      anharm_mhz"]
    for k in range(3):
        lines.append(f"q{k + 1}     {e.freq[k] / GHZ:.6f}    {e.anharm[k] / MHZ:.3f}")
    lines.append("couplings_mhz  " + "  ".join(f"g{k}={v:.4f}" for k, v in e.to_dict()["couplings_mhz"].items()))
    lines.append("residual_mhz   " + "  ".join(f"g{k}={v:.4f}" for k, v in resid.to_dict().items()))
    lines.append(f"dispersive     {e.dispersive}")
    print("\n".join(lines))
    return out


def exact_shift_values(res: C.Resolved, out: Path | None = None) -> dict:
    model = "full_5mode" if res.bare is not None else "effective_3mode"
    params = res.bare if res.bare is not None else res.effective
    h = build_model(model, params, res.config["levels"], res.config["counter_rotating"])
    spec = labeled_spectrum(h.static, h.layout)
    if out is not None:
        spec.write_csv(out / "spectrum.csv")
    return dispersive_shifts_exact(spec)


def cmd_shifts(res: C.Resolved, args) -> dict:
    method = args.method
    pert = {"pt2": ("pt2",), "pt3": ("pt2", "pt3"), "exact": (), "all": ("pt2", "pt3")}[method]
    exact = exact_shift_values(res, args.out) if method in ("exact", "all") else None
    report = shift_report(res.effective if pert else None, exact=exact, methods=pert)
    report.write_json(args.out / "shifts.json")
    report.write_csv(args.out / "shifts.csv")
    for name, entry in report.entries().items():
        d = entry.to_dict()
        print(f"{name:7s} " + "  ".join(f"{k}={'' if v is None else f'{v:.5f}'}" for k, v in d.items() if k.endswith("_mhz")) + (f"  error={d['error']}" if d["error"] else ""))
    failed = [n for n, e in report.entries().items() if e.error]
    return {"report": report.to_dict(), "failed": failed}


def gate_outputs(setup: GateSetup, cfg: dict, signal, out: Path, samples: int) -> dict:
    gate, report = setup.run(signal)
    result = {"gate": gate.to_dict(), "fidelity": report.to_dict(), "config": cfg}
    write_matrix_json(out / "corrected_unitary.json", report.corrected)
    labels = [label_str(lab[:3]) for lab in setup.hamiltonian.layout.computational_labels()]
    with (out / "unitary_magnitude.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["output", *labels])
        for k, row in enumerate(np.abs(report.corrected)):
            w.writerow([labels[k], *(repr(float(x)) for x in row)])
    times = np.linspace(0.0, signal.gate_time, samples)
    h = setup.hamiltonian.with_signal(signal)
    density = gate.steps / gate.gate_time if gate.steps else None
    traces = population_traces(h, [tuple(int(c) for c in lab) for lab in labels], times, setup.config, density)
    drift = 0.0
    for lab, trace in zip(labels, traces.values()):
        trace.write_csv(out / f"populations_{lab}.csv")
        drift = max(drift, trace.norm_drift)
    result["norm_drift"] = drift
    _write(out / "gate.json", C.dumps(result))
    _write(out / "resolved_config.json", C.dumps(cfg))
    return result


def cmd_gate(res: C.Resolved, args) -> dict:
    h, cfg, signal = prepared(res)
    setup = GateSetup(h, res.propagation, cfg["correction"])
    result = gate_outputs(setup, cfg, signal, args.out, cfg["propagation"]["samples"])
    fid = result["fidelity"]
    print(f"F_p = {fid['fidelity']:.6f}  (fit correction {fid['fidelity_fit_correction']:.6f})  max leakage = {fid['max_leakage']:.3e}")
    return result


def _sweep_point(base: dict, point: dict) -> dict:
    cfg = base
    for path, value in point.items():
        cfg = C.set_path(cfg, path, value)
    cfg = {k: v for k, v in cfg.items() if k != "sweep"}
    res = C.resolve(cfg)
    rep = shift_report(res.effective)
    errors = [f"{n}: {e.error}" for n, e in rep.entries().items() if e.error]
    if errors:
        raise ResonanceError("; ".join(errors))
    row = {f"{n}_mhz": e.total / MHZ if e.total is not None else None for n, e in rep.entries().items()}
    if "pulse" in cfg:
        h, rcfg, signal = prepared(res)
        gate, report = GateSetup(h, res.propagation, rcfg["correction"]).run(signal)
        row.update(fidelity=report.fidelity, max_leakage=report.max_leakage, drive_freq_ghz=rcfg["pulse"]["drive_freq_ghz"])
    return row


def cmd_sweep(res: C.Resolved, args) -> dict:
    if "sweep" not in res.config:
        raise C.ConfigError("sweep: a grid is required")
    grid = res.config["sweep"]["grid"]
    evaluate = functools.partial(_sweep_point, res.config)

    def progress(done, total):
        print(f"sweep {done}/{total}", file=sys.stderr)

    rows = parameter_sweep(evaluate, grid, jobs=args.jobs, resume=args.out / "sweep.jsonl", progress=progress)
    cols = ["key", *grid, "status", "error"]
    extra = sorted({k for r in rows for k in r} - set(cols))
    with (args.out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + extra)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols + extra])
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} rows, {failed} failed")
    return {"rows": rows}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


CAL_DEFAULT_BOUNDS = {
    "drive_freq": (-2.0, 2.0),  # MHz around the resolved carrier
    "peak_amplitude": (0.2, 2.0),  # multiples of the start amplitude
    "sigma": (1 / 12, 2.0),  # multiples of the gate time
    "drag": (-20.0, 20.0),  # ns
    "phase": (-np.pi, np.pi),
}


def _calibration_bounds(signal, cal: dict) -> dict:
    """Bounds in SI units from config units (MHz offsets, ns, gate-time fractions)."""
    bounds = {}
    for name in cal["free"]:
        lo, hi = cal.get("bounds", {}).get(name, CAL_DEFAULT_BOUNDS[name])
        if name == "drive_freq":
            bounds[name] = (signal.drive_freq + lo * MHZ, signal.drive_freq + hi * MHZ)
        elif name == "peak_amplitude":
            bounds[name] = (lo * signal.peak_amplitude, hi * signal.peak_amplitude)
        elif name == "sigma":
            bounds[name] = (lo * signal.gate_time, hi * signal.gate_time)
        elif name == "drag":
            bounds[name] = (lo * C.NS, hi * C.NS)
        else:
            bounds[name] = (lo, hi)
    return bounds


def cmd_calibrate(res: C.Resolved, args) -> dict:
    h, cfg, signal = prepared(res)
    cal = {"free": ["drive_freq", "sigma", "drag"], "budget": 300, "target": None, "steps": 300, **res.config.get("calibration", {})}
    search_cfg = res.propagation if cal["steps"] is None else res.propagation.with_(steps=cal["steps"])
    search = GateSetup(h, search_cfg, cfg["correction"])

    def evaluate(sig):
        rep = search.report(sig)
        print(f"eval F_p = {rep.fidelity:.6f}", file=sys.stderr)
        return rep

    result = calibrate_pulse(evaluate, signal, cal["free"], _calibration_bounds(signal, cal), budget=cal["budget"], target=cal["target"], seed=cfg["seed"])
    tuned = dict(cfg)
    tuned["pulse"] = C.pulse_block(result.signal)
    _write(args.out / "calibration.json", C.dumps(result.to_dict()))
    _write(args.out / "calibrated_config.json", C.dumps(tuned))
    final = GateSetup(h, res.propagation, cfg["correction"])
    gate_result = gate_outputs(final, tuned, result.signal, args.out, cfg["propagation"]["samples"])
    print(f"calibrated F_p = {gate_result['fidelity']['fidelity']:.6f} after {result.evaluations} evaluations")
    return {"calibration": result.to_dict(), "gate": gate_result}


COMMANDS = {"derive": cmd_derive, "shifts": cmd_shifts, "gate": cmd_gate, "sweep": cmd_sweep, "calibrate": cmd_calibrate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itoffoli", description="Three-transmon i-Toffoli gate modelling")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    parser.add_argument("--method", choices=["pt2", "pt3", "exact", "all"], default="all", help="shift methods (shifts only)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--levels", type=int, default=None, help="levels per mode")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        res = C.resolve(C.load(args.config), levels=args.levels, seed=args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](res, args)
    except (C.ConfigError, ConfigurationError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.command == "shifts" and result["failed"]:
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
