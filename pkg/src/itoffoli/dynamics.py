"""Time-dependent Schroedinger propagation and gate extraction.

Two integrators:

* ``cfm4``: fourth-order commutator-free Magnus scheme (two exponentials per
  step on Gauss nodes), exact for a time-independent Hamiltonian, with global
  step doubling until successive propagators agree to ``rtol``.
* ``dop853``: adaptive explicit Runge-Kutta via scipy, kept as an independent
  cross-check.

The rotating frame is a common frame where every mode rotates at the carrier
frequency.  It needs an excitation-conserving static Hamiltonian, and the
result is transformed back so callers always receive the lab-frame
propagator (or, for the two-level model, the propagator in its own frame).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from itoffoli.hamiltonian import Hamiltonian
from itoffoli.hilbert import ModeLayout, basis_index, label_str
from itoffoli.spectrum import LabeledSpectrum, labeled_spectrum

MODELS = ("full_5mode", "effective_3mode", "two_level")
FRAMES = ("lab", "rotating")
METHODS = ("cfm4", "dop853")
BASES = ("dressed", "bare")

_C1, _C2 = 0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6
_W1, _W2 = 0.25 + math.sqrt(3) / 6, 0.25 - math.sqrt(3) / 6


class PropagationError(RuntimeError):
    """The integrator could not reach the requested tolerance within its budget."""


@dataclass(frozen=True)
class PropagationConfig:
    """How to propagate.

    ``steps`` fixes the cfm4 step count and skips the doubling search.
    ``max_step`` (seconds) bounds the cfm4 starting step and the dop853 step.
    """

    model: str = "effective_3mode"
    frame: str = "rotating"
    rtol: float = 1e-9
    atol: float = 1e-11
    max_step: float | None = None
    method: str = "cfm4"
    basis: str = "dressed"
    steps: int | None = None
    initial_steps: int = 64
    max_steps: int = 2**20
    sample_times: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be positive")

    def with_(self, **changes) -> "PropagationConfig":
        return replace(self, **changes)

    def halved(self) -> "PropagationConfig":
        """Same configuration with both tolerances halved (and twice the fixed steps)."""
        steps = None if self.steps is None else 2 * self.steps
        return replace(self, rtol=self.rtol / 2, atol=self.atol / 2, steps=steps)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("model", "frame", "rtol", "atol", "max_step", "method", "basis", "steps", "initial_steps", "max_steps")}
        d["sample_times"] = None if self.sample_times is None else list(self.sample_times)
        return d


@dataclass
class Propagation:
    """Evolved states ``Y = U(t1, t0) Y0`` with diagnostics."""

    states: np.ndarray
    steps: int
    error_estimate: float


def _frame_parts(h: Hamiltonian, cfg: PropagationConfig):
    frame_freq = 0.0
    if h.rotating_freqs is None and cfg.frame == "rotating":
        frame_freq = h.signal.drive_freq if h.driven else 0.0
    s, a, c = h.parts(cfg.frame, frame_freq)
    return s, a, c, frame_freq


def _cfm4(s, a, c, t0: float, t1: float, n: int, y: np.ndarray) -> np.ndarray:
    dt = (t1 - t0) / n
    half = 0.5 * s
    adag = a.T
    for k in range(n):
        t = t0 + k * dt
        c1, c2 = complex(c(t + _C1 * dt)), complex(c(t + _C2 * dt))
        z_first = _W1 * c1 + _W2 * c2
        z_second = _W2 * c1 + _W1 * c2
        m1 = half + z_first * a + np.conj(z_first) * adag
        m2 = half + z_second * a + np.conj(z_second) * adag
        y = expm(-1j * dt * m2) @ (expm(-1j * dt * m1) @ y)
    return y


def _static_exponential(s: np.ndarray, t: float) -> np.ndarray:
    if np.count_nonzero(s - np.diag(np.diag(s))) == 0:
        return np.diag(np.exp(-1j * np.diag(s) * t))
    return expm(-1j * s * t)


def _starting_steps(cfg: PropagationConfig, t0: float, t1: float, frame_freq: float, h: Hamiltonian) -> int:
    span = t1 - t0
    n = cfg.initial_steps
    if cfg.max_step is not None:
        n = max(n, math.ceil(span / cfg.max_step))
    if cfg.frame == "lab" and h.driven and h.rotating_freqs is None:
        # resolve the carrier: ~16 steps per period
        n = max(n, math.ceil(16 * span * abs(h.signal.drive_freq) / (2 * math.pi)))
    return n


def _evolve(h: Hamiltonian, times: Sequence[float], y0: np.ndarray, cfg: PropagationConfig, density: float | None = None):
    """States at every entry of ``times`` (frame of ``cfg``), shape (len(times), dim, ncols)."""
    s, a, c, frame_freq = _frame_parts(h, cfg)
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times),) + y0.shape, dtype=complex)
    out[0] = y0
    y = y0.astype(complex)
    for k in range(1, len(times)):
        t0, t1 = times[k - 1], times[k]
        if t1 == t0:
            out[k] = y
            continue
        if a is None:
            y = _static_exponential(s, t1 - t0) @ y
        elif cfg.method == "dop853":
            y = _dop853(s, a, c, t0, t1, y, cfg)
        else:
            n = max(1, math.ceil((t1 - t0) * density))
            y = _cfm4(s, a, c, t0, t1, n, y)
        out[k] = y
    return out, frame_freq


def _dop853(s, a, c, t0, t1, y, cfg: PropagationConfig) -> np.ndarray:
    shape = y.shape
    adag = a.T

    def rhs(t, v):
        ct = complex(c(t))
        m = v.reshape(shape)
        return (-1j * (s @ m + ct * (a @ m) + np.conj(ct) * (adag @ m))).ravel()

    kw = {} if cfg.max_step is None else {"max_step": cfg.max_step}
    sol = solve_ivp(rhs, (t0, t1), y.ravel().astype(complex), method="DOP853", rtol=cfg.rtol, atol=cfg.atol, **kw)
    if not sol.success:
        raise PropagationError(f"DOP853 failed: {sol.message}")
    return sol.y[:, -1].reshape(shape)


def _to_reference_frame(h: Hamiltonian, y: np.ndarray, t: float, frame_freq: float) -> np.ndarray:
    if frame_freq == 0.0:
        return y
    return np.exp(-1j * frame_freq * h.excitations * t)[:, None] * y


def step_density(h: Hamiltonian, t_g: float, cfg: PropagationConfig, y0: np.ndarray | None = None) -> tuple[float, Propagation]:
    """Find a cfm4 step density (steps per second) meeting ``cfg.rtol`` over [0, t_g]."""
    y0 = np.eye(h.dim, dtype=complex) if y0 is None else y0
    s, a, c, frame_freq = _frame_parts(h, cfg)
    if a is None:
        return 1.0 / t_g, Propagation(_static_exponential(s, t_g) @ y0, 1, 0.0)
    if cfg.steps is not None:
        return cfg.steps / t_g, Propagation(_cfm4(s, a, c, 0.0, t_g, cfg.steps, y0), cfg.steps, float("nan"))
    n = _starting_steps(cfg, 0.0, t_g, frame_freq, h)
    prev = _cfm4(s, a, c, 0.0, t_g, n, y0)
    while True:
        if 2 * n > cfg.max_steps:
            raise PropagationError(f"cfm4 did not reach rtol={cfg.rtol:g} within {cfg.max_steps} steps")
        n *= 2
        cur = _cfm4(s, a, c, 0.0, t_g, n, y0)
        diff = float(np.max(np.abs(cur - prev)))
        if diff < cfg.rtol:
            # Richardson: the finer solution is ~16x more accurate than the difference
            return n / t_g, Propagation(cur, n, diff / 15)
        prev = cur


def propagate(h: Hamiltonian, t_g: float, cfg: PropagationConfig | None = None, initial: np.ndarray | None = None) -> Propagation:
    """Propagator over [0, t_g] (applied to ``initial`` columns if given).

    The result is expressed in the model's reference frame: the lab frame, or
    the qubit frame for the two-level model.
    """
    cfg = cfg or PropagationConfig()
    y0 = np.eye(h.dim, dtype=complex) if initial is None else np.asarray(initial, dtype=complex)
    if y0.ndim == 1:
        y0 = y0[:, None]
    _, _, _, frame_freq = _frame_parts(h, cfg)
    if cfg.method == "dop853" and h.driven:
        states, _ = _evolve(h, [0.0, t_g], y0, cfg)
        prop = Propagation(states[-1], 0, float("nan"))
    else:
        _, prop = step_density(h, t_g, cfg, y0)
    prop.states = _to_reference_frame(h, prop.states, t_g, frame_freq)
    return prop


def unitarity_error(u: np.ndarray) -> float:
    """max |U^dag U - I| over the evolved columns."""
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def computational_basis(h: Hamiltonian, basis: str = "dressed", spectrum: LabeledSpectrum | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Columns spanning the computational subspace and, for ``dressed``, their energies."""
    labels = h.layout.computational_labels()
    if basis == "bare":
        cols = np.zeros((h.dim, 8), dtype=complex)
        for k, lab in enumerate(labels):
            cols[basis_index(h.layout, lab), k] = 1.0
        return cols, None
    spectrum = spectrum or labeled_spectrum(h.static, h.layout)
    return spectrum.dressed_basis(labels), spectrum.computational_energies()


@dataclass
class GateResult:
    """Computational-subspace gate extracted from a propagation.

    ``unitary`` is the 8x8 block in the chosen basis (order 000 ... 111);
    ``propagator`` holds the evolved full-space columns.
    """

    unitary: np.ndarray
    propagator: np.ndarray
    leakage: np.ndarray
    gate_time: float
    frame: str
    basis: str
    layout: ModeLayout
    energies: np.ndarray | None = None
    unitarity_error: float = 0.0
    steps: int = 0
    error_estimate: float = float("nan")

    @property
    def max_leakage(self) -> float:
        return float(np.max(self.leakage))

    def populations(self) -> np.ndarray:
        """|U_kj|^2: column j is the final distribution from input j."""
        return np.abs(self.unitary) ** 2

    def to_dict(self) -> dict:
        return {
            "gate_time_ns": self.gate_time * 1e9,
            "frame": self.frame,
            "basis": self.basis,
            "layout": self.layout.to_dict(),
            "leakage": [float(x) for x in self.leakage],
            "max_leakage": self.max_leakage,
            "unitarity_error": self.unitarity_error,
            "steps": self.steps,
            "unitary": matrix_to_json(self.unitary),
        }


def computational_projection(u_full: np.ndarray, layout: ModeLayout, basis_cols: np.ndarray | None = None, **meta) -> GateResult:
    """Restrict a propagator to the computational subspace.

    ``u_full`` is either the full square propagator or its image of
    ``basis_cols`` (shape dim x 8).  Leakage of column j is
    ``1 - sum_k |U_kj|^2``.
    """
    if basis_cols is None:
        basis_cols = np.zeros((layout.dim, 8), dtype=complex)
        for k, lab in enumerate(layout.computational_labels()):
            basis_cols[basis_index(layout, lab), k] = 1.0
    evolved = u_full @ basis_cols if u_full.shape[1] == layout.dim else u_full
    block = basis_cols.conj().T @ evolved
    leakage = np.clip(1.0 - np.sum(np.abs(block) ** 2, axis=0), 0.0, 1.0)
    meta.setdefault("gate_time", 0.0)
    meta.setdefault("frame", "lab")
    meta.setdefault("basis", "bare")
    return GateResult(block, u_full, leakage, layout=layout, **meta)


def simulate_gate(h: Hamiltonian, cfg: PropagationConfig | None = None, t_g: float | None = None, full: bool = True) -> GateResult:
    """Propagate the driven model and extract the 8x8 gate.

    ``full=True`` evolves the whole space so unitarity can be checked on the
    full propagator; otherwise only the eight computational columns.
    """
    cfg = cfg or PropagationConfig()
    t_g = t_g if t_g is not None else h.signal.gate_time
    cols, energies = computational_basis(h, cfg.basis)
    prop = propagate(h, t_g, cfg, None if full else cols)
    frame = "qubit" if h.rotating_freqs is not None else "lab"
    res = computational_projection(
        prop.states, h.layout, cols, gate_time=t_g, frame=frame, basis=cfg.basis,
        energies=energies, unitarity_error=unitarity_error(prop.states), steps=prop.steps,
        error_estimate=prop.error_estimate,
    )
    return res


@dataclass
class PopulationTrace:
    times: np.ndarray
    labels: list
    populations: np.ndarray  # (n_times, 8)
    norm: np.ndarray  # total norm squared at each time

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0)))

    def final(self, label) -> float:
        return float(self.populations[-1, self.labels.index(tuple(label))])

    def write_csv(self, path) -> Path:
        import csv

        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_ns", *(label_str(lab) for lab in self.labels)])
            for t, row in zip(self.times, self.populations):
                w.writerow([repr(float(t) * 1e9), *(repr(float(p)) for p in row)])
        return path


def population_traces(
    h: Hamiltonian, initial_labels, sample_times: Sequence[float], cfg: PropagationConfig | None = None, density: float | None = None
) -> dict[tuple, PopulationTrace]:
    """Population traces for several initial computational labels from one evolution.

    Populations are measured in the basis chosen by ``cfg.basis``; the first
    sample time is the start of the evolution.  ``density`` (cfm4 steps per
    second) skips the step-doubling search, e.g. reusing a gate run's steps.
    """
    cfg = cfg or PropagationConfig()
    cols, _ = computational_basis(h, cfg.basis)
    labels = [tuple(lab[:3]) for lab in h.layout.computational_labels()]
    initial_labels = [tuple(lab) for lab in initial_labels]
    psi0 = cols[:, [labels.index(lab) for lab in initial_labels]]
    times = np.asarray(sample_times, dtype=float)
    if density is None and cfg.method == "cfm4" and h.driven:
        density, _ = step_density(h, float(times[-1] - times[0]), cfg, psi0)
    states, _ = _evolve(h, times, psi0, cfg, density)
    amps = np.einsum("dk,tdj->tkj", cols.conj(), states)
    norms = np.sum(np.abs(states) ** 2, axis=1)
    return {
        lab: PopulationTrace(times, labels, np.abs(amps[:, :, j]) ** 2, norms[:, j])
        for j, lab in enumerate(initial_labels)
    }


def population_trace(
    h: Hamiltonian, initial_label, sample_times: Sequence[float], cfg: PropagationConfig | None = None, density: float | None = None
) -> PopulationTrace:
    """Computational-state populations over time starting from ``initial_label``."""
    return population_traces(h, [initial_label], sample_times, cfg, density)[tuple(initial_label)]


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dims": list(m.shape), "re": [float(x) for x in m.real.ravel()], "im": [float(x) for x in m.imag.ravel()]}


def matrix_from_json(d: dict) -> np.ndarray:
    dims = tuple(d["dims"])
    return (np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)).reshape(dims)


def write_matrix_json(path, m: np.ndarray) -> Path:
    path = Path(path)
    path.write_text(json.dumps(matrix_to_json(m)) + "\n", encoding="utf-8")
    return path
