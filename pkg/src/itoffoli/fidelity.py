"""Target gate, phase corrections, process fidelity, calibration and sweeps."""

from __future__ import annotations

import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from itoffoli.dynamics import GateResult, PropagationConfig, computational_basis, matrix_to_json, propagate
from itoffoli.hamiltonian import Hamiltonian

LABELS = tuple(itertools.product((0, 1), repeat=3))
_OCC = np.array(LABELS, dtype=float)
# global, Z1, Z2, Z3, ZZ12, ZZ23
PHASE_MODEL = np.column_stack([np.ones(8), _OCC, _OCC[:, 0] * _OCC[:, 1], _OCC[:, 1] * _OCC[:, 2]])
# theta_111 - theta_110 - theta_101 - theta_011 + theta_100 + theta_010 + theta_001 - theta_000
_THREE_BODY = np.array([-1, 1, 1, -1, 1, -1, -1, 1], dtype=float)


def target_itoffoli() -> np.ndarray:
    """CCX with -i on the swapped pair |101> <-> |111>."""
    u = np.eye(8, dtype=complex)
    u[5, 5] = u[7, 7] = 0
    u[5, 7] = u[7, 5] = -1j
    return u


def phase_correction_unitary(chi12: float, chi23: float, t: float) -> np.ndarray:
    """diag[1, 1, 1, e^{i chi23 t}, 1, 1, e^{i chi12 t}, e^{i (chi12 + chi23) t}]."""
    d = np.ones(8, dtype=complex)
    d[3] = np.exp(1j * chi23 * t)
    d[6] = np.exp(1j * chi12 * t)
    d[7] = np.exp(1j * (chi12 + chi23) * t)
    return np.diag(d)


def process_fidelity(u_a: np.ndarray, u_b: np.ndarray) -> float:
    """|Tr(U_a^dag U_b)| / d."""
    u_a, u_b = np.asarray(u_a), np.asarray(u_b)
    if u_a.shape != u_b.shape or u_a.ndim != 2 or u_a.shape[0] != u_a.shape[1]:
        raise ValueError(f"shape mismatch: {u_a.shape} vs {u_b.shape}")
    return float(abs(np.trace(u_a.conj().T @ u_b)) / u_a.shape[0])


@dataclass(frozen=True)
class PhaseCorrection:
    """Accumulated idle angles ``theta_k`` (the idle gate is diag e^{-i theta}).

    ``theta = global + z . n + zz12 n1 n2 + zz23 n2 n3 + residual``; the
    residual holds whatever single- and two-qubit phase gates on the
    nearest-neighbour pairs cannot remove (the 1-3 conditional phase and the
    three-body CCPhase).
    """

    angles: np.ndarray
    global_phase: float
    z: tuple[float, float, float]
    zz12: float
    zz23: float
    residual: np.ndarray
    source: str

    @classmethod
    def from_angles(cls, angles, source: str) -> "PhaseCorrection":
        angles = np.asarray(angles, dtype=float)
        coef, *_ = np.linalg.lstsq(PHASE_MODEL, angles, rcond=None)
        residual = angles - PHASE_MODEL @ coef
        return cls(angles, float(coef[0]), tuple(float(x) for x in coef[1:4]), float(coef[4]), float(coef[5]), residual, source)

    @classmethod
    def analytic(cls, chi12: float, chi23: float, t: float) -> "PhaseCorrection":
        """Conditional phases of an ideal two-level evolution under chi12, chi23."""
        return cls.from_angles(t * np.array([0, 0, 0, chi23, 0, 0, chi12, chi12 + chi23]), "analytic")

    @property
    def three_body(self) -> float:
        """CCPhase: the alternating sum of the eight angles."""
        return float(_THREE_BODY @ self.angles)

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    def correction_unitary(self, mode: str = "full") -> np.ndarray:
        """Diagonal D with ``corrected = D @ U_sim``.

        ``full`` undoes every idle angle; ``fit`` only the global, single-qubit
        and nearest-neighbour conditional phases.
        """
        if mode == "full":
            theta = self.angles
        elif mode == "fit":
            theta = self.angles - self.residual
        else:
            raise ValueError(f"unknown correction mode {mode!r}")
        return np.diag(np.exp(1j * theta))

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "angles": [float(x) for x in self.angles],
            "global": self.global_phase,
            "z": list(self.z),
            "zz12": self.zz12,
            "zz23": self.zz23,
            "residual": [float(x) for x in self.residual],
            "three_body": self.three_body,
        }


class IdleCouplingError(RuntimeError):
    """The undriven gate is not diagonal in the computational basis."""


def idle_phase_reference(h: Hamiltonian, t_g: float, cfg: PropagationConfig | None = None, tol: float = 1e-6) -> PhaseCorrection:
    """Angles accumulated by the undriven model over ``t_g``.

    Phases read from the propagator are unwrapped against the labeled
    energies so the least-squares split is free of 2 pi jumps.
    """
    cfg = cfg or PropagationConfig()
    idle = h.undriven()
    cols, energies = computational_basis(idle, cfg.basis)
    u = propagate(idle, t_g, cfg, cols).states
    block = cols.conj().T @ u
    off = block - np.diag(np.diag(block))
    if np.max(np.abs(off)) > tol:
        raise IdleCouplingError(f"idle gate has off-diagonal weight {np.max(np.abs(off)):.2e}; residual exchange is not dispersive")
    theta = -np.angle(np.diag(block))
    if energies is not None:
        guess = energies * t_g
        theta = theta + 2 * np.pi * np.round((guess - theta) / (2 * np.pi))
    return PhaseCorrection.from_angles(theta, "idle_reference")


def apply_corrections(u_sim: np.ndarray, corr: PhaseCorrection, mode: str = "full") -> np.ndarray:
    """Undo the idle phases and fix the global phase so the |000> element is real positive."""
    if u_sim.shape != (8, 8):
        raise ValueError(f"expected an 8x8 gate, got {u_sim.shape}")
    out = corr.correction_unitary(mode) @ u_sim
    ref = out[0, 0]
    if abs(ref) > 0:
        out = out * (np.conj(ref) / abs(ref))
    return out


@dataclass
class FidelityReport:
    fidelity: float
    fidelity_fit: float
    leakage: np.ndarray
    corrected: np.ndarray
    deviation: np.ndarray
    correction: PhaseCorrection
    mode: str = "full"

    @property
    def max_leakage(self) -> float:
        return float(np.max(self.leakage))

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "fidelity_fit_correction": self.fidelity_fit,
            "correction_mode": self.mode,
            "leakage": [float(x) for x in self.leakage],
            "max_leakage": self.max_leakage,
            "max_deviation": float(np.max(self.deviation)),
            "correction": self.correction.to_dict(),
            "corrected_unitary": matrix_to_json(self.corrected),
        }


def fidelity_report(gate: GateResult, corr: PhaseCorrection, mode: str = "full", target: np.ndarray | None = None) -> FidelityReport:
    target = target_itoffoli() if target is None else target
    corrected = apply_corrections(gate.unitary, corr, mode)
    f = process_fidelity(target, corrected)
    f_fit = process_fidelity(target, apply_corrections(gate.unitary, corr, "fit"))
    # align the swap block's global phase with the target before comparing elements
    phase = np.trace(target.conj().T @ corrected)
    aligned = corrected * (np.conj(phase) / abs(phase)) if abs(phase) > 0 else corrected
    return FidelityReport(f, f_fit, gate.leakage, corrected, np.abs(aligned - target), corr, mode)


# -- calibration --------------------------------------------------------------

CALIBRATABLE = ("peak_amplitude", "drive_freq", "sigma", "drag", "phase")


class _BudgetExhausted(Exception):
    pass


@dataclass
class CalibrationResult:
    signal: object
    report: FidelityReport
    trace: list[float]
    evaluations: int
    met_target: bool
    budget_exhausted: bool

    @property
    def fidelity(self) -> float:
        return self.report.fidelity

    def to_dict(self) -> dict:
        return {
            "signal": self.signal.to_dict(),
            "fidelity": self.fidelity,
            "evaluations": self.evaluations,
            "met_target": self.met_target,
            "budget_exhausted": self.budget_exhausted,
            "trace": [float(x) for x in self.trace],
            "report": self.report.to_dict(),
        }


def calibrate_pulse(
    evaluate: Callable[[object], FidelityReport],
    start,
    free: Sequence[str],
    bounds: Mapping[str, tuple[float, float]],
    budget: int = 300,
    target: float | None = None,
    seed: int = 0,
    initial_step: float = 0.1,
    xatol: float = 1e-4,
    fatol: float = 1e-7,
) -> CalibrationResult:
    """Restarted bounded Nelder-Mead on ``1 - F_p`` over the ``free`` signal fields.

    Parameters are rescaled to [0, 1] within ``bounds``.  Each restart begins
    at the best point found so far with a fresh simplex whose edge signs are
    drawn from ``seed``; the search stops at the evaluation ``budget``, when
    ``target`` is reached, or when a restart no longer improves.
    """
    free = list(free)
    for name in free:
        if name not in CALIBRATABLE:
            raise ValueError(f"cannot calibrate {name!r}; choose from {CALIBRATABLE}")
        if name not in bounds:
            raise ValueError(f"missing bounds for {name!r}")
    lo = np.array([bounds[n][0] for n in free], dtype=float)
    hi = np.array([bounds[n][1] for n in free], dtype=float)
    rng = np.random.default_rng(seed)

    def to_signal(x):
        values = lo + np.clip(x, 0.0, 1.0) * (hi - lo)
        return start.with_(**{n: float(v) for n, v in zip(free, values)})

    x_start = np.array([(getattr(start, n) - l) / (h - l) for n, l, h in zip(free, lo, hi)])
    if np.any(x_start < 0) or np.any(x_start > 1):
        raise ValueError("start point lies outside the bounds")

    trace: list[float] = []
    best = {"x": x_start, "f": math.inf, "report": None}

    def objective(x):
        if len(trace) >= budget:
            raise _BudgetExhausted
        report = evaluate(to_signal(x))
        value = 1.0 - report.fidelity
        trace.append(value)
        if value < best["f"]:
            best.update(x=np.clip(np.array(x, dtype=float), 0, 1), f=value, report=report)
        if target is not None and report.fidelity >= target:
            raise _BudgetExhausted
        return value

    exhausted = False
    step = initial_step
    try:
        objective(x_start)
        while True:
            before = best["f"]
            signs = rng.choice([-1.0, 1.0], size=len(free))
            x0 = best["x"]
            simplex = [x0]
            for k in range(len(free)):
                v = x0.copy()
                v[k] += signs[k] * step
                if not 0 <= v[k] <= 1:
                    v[k] = x0[k] - signs[k] * step
                simplex.append(np.clip(v, 0, 1))
            minimize(
                objective, x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(free),
                options={"initial_simplex": np.array(simplex), "xatol": xatol, "fatol": fatol, "maxfev": budget},
            )
            if before - best["f"] <= fatol:
                break
            step = max(step / 2, 10 * xatol)
    except _BudgetExhausted:
        exhausted = len(trace) >= budget
    report = best["report"]
    met = target is None or report.fidelity >= target
    if target is not None and not met:
        warnings.warn(f"calibration stopped at F_p = {report.fidelity:.5f} below target {target}", stacklevel=2)
    return CalibrationResult(to_signal(best["x"]), report, trace, len(trace), met, exhausted)


# -- sweeps -------------------------------------------------------------------


def grid_points(grid: Mapping[str, Sequence]) -> list[dict]:
    names = list(grid)
    return [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]


def row_key(point: Mapping) -> str:
    return json.dumps(point, sort_keys=True)


def _run_point(evaluate, point):
    try:
        return {"key": row_key(point), **point, "status": "ok", "error": None, **evaluate(point)}
    except Exception as err:  # one failed point must not stop the sweep
        return {"key": row_key(point), **point, "status": "failed", "error": f"{type(err).__name__}: {err}"}


def parameter_sweep(
    evaluate: Callable[[dict], dict],
    grid: Mapping[str, Sequence],
    jobs: int = 1,
    resume: str | Path | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> list[dict]:
    """Evaluate every grid point; rows come back in grid order.

    ``evaluate`` maps a point to a dict of results and must be picklable when
    ``jobs > 1``.  With ``resume``, finished rows are appended to that JSON
    Lines file and rows already present are not recomputed.
    """
    points = grid_points(grid)
    done: dict[str, dict] = {}
    resume = Path(resume) if resume is not None else None
    if resume is not None and resume.exists():
        for line in resume.read_text(encoding="utf-8").splitlines():
            if line.strip():
                row = json.loads(line)
                done[row["key"]] = row
    todo = [p for p in points if row_key(p) not in done]

    def record(row):
        done[row["key"]] = row
        if resume is not None:
            with resume.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        if progress is not None:
            progress(len(done), len(points))

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_point, evaluate, p) for p in todo]
            for fut in futures:
                record(fut.result())
    else:
        for p in todo:
            record(_run_point(evaluate, p))
    return [done[row_key(p)] for p in points]
