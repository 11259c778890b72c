import copy
import json
from pathlib import Path

import numpy as np
import pytest

from itoffoli import config as C
from itoffoli.circuit import CircuitSpec, derive_bare
from itoffoli.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from itoffoli.effective import dress_parameters, table_bare_params

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

HEADLINE_EFF = {"freq_ghz": [4.984, 5.300, 4.820], "anharm_mhz": [-330, -240, -330], "couplings_mhz": {"12": 15.4, "23": 29.2, "13": 2.0}}

CIRCUIT = {
    "qubit_capacitance_ff": [70, 70, 70],
    "coupler_capacitance_ff": [70, 70],
    "coupling_capacitance_ff": {"1c1": 4, "2c1": 4, "2c2": 4, "3c2": 4},
    "qubit_qubit_capacitance_ff": {"12": 0.2, "23": 0.2},
    "qubit_ej_ghz": [12.5, 14.0, 11.5],
    "coupler_ej_ghz": [20.0, 20.0],
}


def run(tmp_path, command, cfg, *extra, name="out"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    out = tmp_path / name
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def flat(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(flat(v, f"{prefix}{k}."))
        elif isinstance(v, list):
            out.update({f"{prefix}{k}.{i}": x for i, x in enumerate(v)})
        else:
            out[prefix + k] = v
    return out


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def test_missing_field_is_named(tmp_path, capsys):
    cfg = {"mode": "circuit", "circuit": {k: v for k, v in CIRCUIT.items() if k != "qubit_ej_ghz"}}
    code, _ = run(tmp_path, "derive", cfg)
    assert code == EXIT_VALIDATION
    assert "qubit_ej_ghz" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg, field",
    [
        ({"mode": "effective"}, "effective"),
        ({"mode": "effective", "effective": HEADLINE_EFF, "levels": 9}, "levels"),
        ({"mode": "effective", "effective": HEADLINE_EFF, "pulse": {"gate_time_ns": -1, "peak_amplitude_mhz": 1}}, "gate_time_ns"),
        ({"mode": "bare", "effective": HEADLINE_EFF}, "bare"),
    ],
)
def test_invalid_configs(tmp_path, capsys, cfg, field):
    code, _ = run(tmp_path, "gate", cfg)
    assert code == EXIT_VALIDATION
    assert field in capsys.readouterr().err


def test_derive_table(tmp_path, capsys):
    cfg = read_json(CONFIGS / "table_bare.json")
    code, out = run(tmp_path, "derive", cfg)
    assert code == EXIT_OK
    result = read_json(out / "derive.json")
    expected = dress_parameters(table_bare_params()).to_dict()
    assert result["effective"]["freq_ghz"] == pytest.approx(expected["freq_ghz"], rel=1e-12)
    assert result["effective"]["couplings_mhz"] == pytest.approx(expected["couplings_mhz"], rel=1e-12)
    assert set(result["residual_couplings_mhz"]) == {"1c1", "2c1", "2c2", "3c2"}
    assert "dispersive" in capsys.readouterr().out


def test_derive_circuit_matches_bare_path(tmp_path):
    code, out = run(tmp_path, "derive", {"mode": "circuit", "circuit": CIRCUIT}, name="circ")
    assert code == EXIT_OK
    via_circuit = read_json(out / "derive.json")
    assert flat(via_circuit["bare"]) == pytest.approx(flat(derive_bare(CircuitSpec.from_dict(CIRCUIT)).to_dict()))
    code, out = run(tmp_path, "derive", {"mode": "bare", "bare": via_circuit["bare"]}, name="bare")
    assert code == EXIT_OK
    via_bare = read_json(out / "derive.json")
    for key in ("freq_ghz", "anharm_mhz"):
        assert via_bare["effective"][key] == pytest.approx(via_circuit["effective"][key], rel=1e-12)
    assert via_bare["effective"]["couplings_mhz"] == pytest.approx(via_circuit["effective"]["couplings_mhz"], rel=1e-10)


def test_derive_needs_bare_parameters(tmp_path):
    assert run(tmp_path, "derive", {"mode": "effective", "effective": HEADLINE_EFF})[0] == EXIT_VALIDATION


def test_shifts_table_report(tmp_path):
    code, out = run(tmp_path, "shifts", read_json(CONFIGS / "table_bare.json"), "--method", "all")
    assert code == EXIT_OK
    report = read_json(out / "shifts.json")
    assert set(report) >= {"chi12", "chi23", "chi13", "chi123"}
    for name in ("chi12", "chi23", "chi13", "chi123"):
        assert report[name]["order3_mhz"] is not None and report[name]["exact_mhz"] is not None
    rows = (out / "shifts.csv").read_text().strip().splitlines()
    assert len(rows) == 5
    assert (out / "spectrum.csv").exists()


def test_shifts_zero_coupling(tmp_path):
    eff = copy.deepcopy(HEADLINE_EFF)
    eff["couplings_mhz"] = {"12": 0, "23": 0, "13": 0}
    code, out = run(tmp_path, "shifts", {"mode": "effective", "effective": eff}, "--method", "all")
    assert code == EXIT_OK
    for entry in read_json(out / "shifts.json").values():
        for key in ("order2_mhz", "order3_mhz", "total_mhz"):
            assert entry[key] == 0
        assert abs(entry["exact_mhz"]) < 1e-9


def test_shifts_resonance_rows(tmp_path):
    eff = {"freq_ghz": [5.6, 5.3, 4.6], "anharm_mhz": [-300, -240, -330], "couplings_mhz": {"12": 15, "23": 20, "13": 2}}
    code, out = run(tmp_path, "shifts", {"mode": "effective", "effective": eff}, "--method", "pt3")
    assert code == EXIT_NUMERICAL
    report = read_json(out / "shifts.json")
    assert "a1+D12" in report["chi12"]["error"]
    assert report["chi13"]["order2_mhz"] is not None


def test_exact_labeling_failure_exit_code(tmp_path, capsys):
    eff = {"freq_ghz": [5.0, 5.0, 5.1], "anharm_mhz": [-300, -300, -300], "couplings_mhz": {"12": 50, "23": 50, "13": 0}}
    code, _ = run(tmp_path, "shifts", {"mode": "effective", "effective": eff}, "--method", "exact")
    assert code == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def gate_config(amplitude=1.5, **pulse):
    return {"mode": "effective", "effective": HEADLINE_EFF, "pulse": {"gate_time_ns": 500, "peak_amplitude_mhz": amplitude, **pulse}, "propagation": {"samples": 11}}


def test_gate_without_drive_is_identity(tmp_path):
    code, out = run(tmp_path, "gate", gate_config(0.0))
    assert code == EXIT_OK
    result = read_json(out / "gate.json")
    assert result["fidelity"]["fidelity"] == pytest.approx(0.75, abs=1e-9)


def test_gate_outputs(tmp_path):
    code, out = run(tmp_path, "gate", gate_config(sigma_ns=200, drag_ns=0))
    assert code == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"gate.json", "resolved_config.json", "corrected_unitary.json", "unitary_magnitude.csv"} <= names
    assert sum(n.startswith("populations_") for n in names) == 8
    table = np.loadtxt(out / "unitary_magnitude.csv", delimiter=",", skiprows=1, usecols=range(1, 9))
    assert table.shape == (8, 8) and np.all(table <= 1 + 1e-9)
    pops = np.loadtxt(out / "populations_101.csv", delimiter=",", skiprows=1)
    assert pops.shape[0] == 11
    assert read_json(out / "gate.json")["norm_drift"] < 1e-8


def test_gate_runs_are_byte_identical(tmp_path):
    _, first = run(tmp_path, "gate", gate_config(), name="a")
    _, second = run(tmp_path, "gate", gate_config(), name="b")
    files = sorted(p.name for p in first.iterdir())
    assert files == sorted(p.name for p in second.iterdir())
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_resolved_config_round_trip(tmp_path):
    _, out = run(tmp_path, "gate", gate_config(), name="first")
    resolved = read_json(out / "resolved_config.json")
    assert resolved["pulse"]["drive_freq_ghz"] is not None and resolved["pulse"]["sigma_ns"] is not None
    assert C.resolve(resolved).config == resolved
    _, again = run(tmp_path, "gate", resolved, name="second")
    assert (again / "resolved_config.json").read_bytes() == (out / "resolved_config.json").read_bytes()
    assert (again / "gate.json").read_bytes() == (out / "gate.json").read_bytes()


def test_one_point_sweep_equals_gate(tmp_path):
    cfg = gate_config(sigma_ns=200, drag_ns=0)
    _, gate_out = run(tmp_path, "gate", cfg, name="gate")
    sweep_cfg = {**cfg, "sweep": {"grid": {"pulse.peak_amplitude_mhz": [1.5]}}}
    code, out = run(tmp_path, "sweep", sweep_cfg, name="sweep")
    assert code == EXIT_OK
    row = json.loads((out / "sweep.jsonl").read_text().splitlines()[0])
    assert row["fidelity"] == read_json(gate_out / "gate.json")["fidelity"]["fidelity"]


def test_sweep_resumes_interrupted_run(tmp_path, capsys):
    cfg = {"mode": "effective", "effective": HEADLINE_EFF, "sweep": {"grid": {"effective.couplings_mhz.13": [0.0, 1.0, 2.0]}}}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == EXIT_OK
    complete = (out / "sweep.csv").read_bytes()
    lines = (out / "sweep.jsonl").read_text().splitlines()
    assert len(lines) == 3
    (out / "sweep.jsonl").write_text(lines[0] + "\n")  # as if stopped after one row
    capsys.readouterr()
    assert run(tmp_path, "sweep", cfg)[0] == EXIT_OK
    assert "sweep" in capsys.readouterr().err
    assert (out / "sweep.csv").read_bytes() == complete


def test_sweep_isolates_failing_points(tmp_path):
    cfg = {"mode": "effective", "effective": HEADLINE_EFF, "sweep": {"grid": {"effective.freq_ghz.0": [4.984, 5.63]}}}
    # 5.63 GHz puts |110> on |020>: a1 + D12 = 0
    code, out = run(tmp_path, "sweep", cfg)
    assert code == EXIT_OK
    rows = [json.loads(line) for line in (out / "sweep.jsonl").read_text().splitlines()]
    assert [r["status"] for r in rows] == ["ok", "failed"]


def test_calibrate_two_level_recovers_resonance(tmp_path):
    chi12, chi23 = -5.1, -4.95
    cfg = {
        "mode": "effective",
        "effective": HEADLINE_EFF,
        "model": "two_level",
        "two_level": {"chi12_mhz": chi12, "chi23_mhz": chi23},
        "pulse": {"gate_time_ns": 500, "peak_amplitude_mhz": 1.5, "drive_detuning_mhz": 0.5},
        "propagation": {"samples": 5},
        "calibration": {"free": ["drive_freq"], "budget": 100, "steps": 200},
    }
    code, out = run(tmp_path, "calibrate", cfg)
    assert code == EXIT_OK
    tuned = read_json(out / "calibrated_config.json")
    resonance_ghz = 5.300 + (chi12 + chi23) / 1e3
    assert abs(tuned["pulse"]["drive_freq_ghz"] - resonance_ghz) * 1e9 < 10e3
    assert read_json(out / "calibration.json")["evaluations"] <= 100
