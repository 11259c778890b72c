"""Drive and coupler-bias waveforms.

All times are in seconds and all frequencies/amplitudes are angular (rad/s).
The drive enters the Hamiltonian as ``Omega(t) (q2 + q2^dag)`` with the real
lab-frame field

    Omega(t) = A(t) cos(w_d t + phi0) + beta A'(t) sin(w_d t + phi0),

so after the rotating-wave approximation on the carrier the lowering operator
carries the complex coefficient ``(A - i beta A') / 2 * exp(i(delta t + phi0))``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

ENVELOPES = ("gaussian", "flat_top_gaussian")


@dataclass(frozen=True)
class DriveSignal:
    """Gaussian (optionally flat-topped) DRAG pulse on the target qubit.

    ``sigma=None`` means ``gate_time / 6``.  ``drag`` is the quadrature scale
    beta in seconds; ``plateau`` is only used by ``flat_top_gaussian``.
    """

    peak_amplitude: float
    gate_time: float
    drive_freq: float
    sigma: float | None = None
    drag: float = 0.0
    phase: float = 0.0
    envelope: str = "gaussian"
    plateau: float = 0.0

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.gate_time / 6)
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.gate_time <= 0:
            raise ValueError(f"gate time must be positive, got {self.gate_time}")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"unknown envelope {self.envelope!r}; expected one of {ENVELOPES}")
        if not 0 <= self.plateau < self.gate_time:
            raise ValueError("plateau must lie in [0, gate_time)")

    def with_(self, **changes) -> "DriveSignal":
        return replace(self, **changes)

    def envelope_value(self, t):
        return gaussian_envelope(t, self)

    def envelope_derivative(self, t):
        return _envelope_and_derivative(np.asarray(t, dtype=float), self)[1]

    def lab(self, t):
        return drag_drive(t, self)

    def rotating_coefficient(self, t, frame_freq: float):
        """Coefficient of the lowering operator in a frame rotating at ``frame_freq``."""
        a, da = _envelope_and_derivative(np.asarray(t, dtype=float), self)
        detuning = self.drive_freq - frame_freq
        return 0.5 * (a - 1j * self.drag * da) * np.exp(1j * (detuning * np.asarray(t) + self.phase))

    def check_weak_drive(self, chi12: float, chi23: float) -> bool:
        """Warn unless the peak amplitude stays below both conditional shifts."""
        ok = abs(self.peak_amplitude) < min(abs(chi12), abs(chi23))
        if not ok:
            warnings.warn(
                "peak drive amplitude exceeds a conditional shift; transitions are not selectively addressed",
                stacklevel=2,
            )
        return ok

    def to_dict(self) -> dict:
        return {
            "envelope": self.envelope,
            "peak_amplitude_mhz": self.peak_amplitude / (2 * math.pi) / 1e6,
            "gate_time_ns": self.gate_time * 1e9,
            "sigma_ns": self.sigma * 1e9,
            "drag_ns": self.drag * 1e9,
            "drive_freq_ghz": self.drive_freq / (2 * math.pi) / 1e9,
            "phase": self.phase,
            "plateau_ns": self.plateau * 1e9,
        }


def _edge_gaussian(x, c, sigma):
    """Endpoint-subtracted, peak-normalised Gaussian value and x-derivative.

    ``x`` is the distance from the peak, ``c`` the distance from the peak to the
    window edge.  expm1 keeps the very-wide (sigma >> c) limit accurate.
    """
    s2 = 2.0 * sigma * sigma
    off = math.exp(-c * c / s2)
    den = -math.expm1(-c * c / s2)
    val = off * np.expm1((c * c - x * x) / s2) / den
    dval = -(x / (sigma * sigma)) * np.exp(-x * x / s2) / den
    return val, dval


def _envelope_and_derivative(t: np.ndarray, sig: DriveSignal):
    tg = sig.gate_time
    inside = (t >= 0) & (t <= tg)
    if sig.envelope == "gaussian":
        c = tg / 2
        val, dval = _edge_gaussian(t - c, c, sig.sigma)
    else:
        c = (tg - sig.plateau) / 2
        t1, t2 = c, tg - c
        x = np.where(t < t1, t - t1, np.where(t > t2, t - t2, 0.0))
        val, dval = _edge_gaussian(x, c, sig.sigma)
    a = np.where(inside, sig.peak_amplitude * val, 0.0)
    da = np.where(inside, sig.peak_amplitude * dval, 0.0)
    if a.ndim == 0:
        return float(a), float(da)
    return a, da


def gaussian_envelope(t, signal: DriveSignal):
    """Envelope A(t); zero at both window edges, ``peak_amplitude`` at the centre."""
    return _envelope_and_derivative(np.asarray(t, dtype=float), signal)[0]


def drag_drive(t, signal: DriveSignal):
    """Instantaneous real lab-frame drive Omega(t)."""
    t = np.asarray(t, dtype=float)
    a, da = _envelope_and_derivative(t, signal)
    theta = signal.drive_freq * t + signal.phase
    return a * np.cos(theta) + signal.drag * da * np.sin(theta)


def default_drag(anharmonicity: float) -> float:
    """First-order DRAG starting point beta = -1/alpha (seconds)."""
    return -1.0 / anharmonicity


def drive_frequency(shifts=None, eff=None, mode: str = "analytic", spectrum=None) -> float:
    """Carrier resonant with the |101> <-> |111> transition.

    ``analytic`` uses the dressed target frequency plus chi12 + chi23 from a
    shift report; ``exact_spectrum`` takes E_111 - E_101 from a labeled
    spectrum.
    """
    if mode == "analytic":
        if shifts is None or eff is None:
            raise ValueError("analytic drive frequency needs shifts and effective parameters")
        return float(eff.freq[1] + shifts.chi12.value + shifts.chi23.value)
    if mode == "exact_spectrum":
        if spectrum is None:
            raise ValueError("exact_spectrum drive frequency needs a labeled spectrum")
        return float(spectrum.energy((1, 1, 1)) - spectrum.energy((1, 0, 1)))
    raise ValueError(f"unknown drive-frequency mode {mode!r}")


@dataclass(frozen=True)
class BiasSchedule:
    """Cosine ramp up, constant hold, cosine ramp down, one flux per coupler.

    The hold spans ``[ramp, window - ramp]`` and the drive sits centred in it.
    """

    hold_flux: tuple[float, ...]
    ramp: float
    gate_time: float
    window: float

    @property
    def hold(self) -> float:
        return self.window - 2 * self.ramp

    @property
    def drive_start(self) -> float:
        return self.ramp + 0.5 * (self.hold - self.gate_time)

    def value(self, t) -> np.ndarray:
        """Flux of every coupler at time(s) ``t``; shape ``(..., n_couplers)``."""
        t = np.asarray(t, dtype=float)
        r, w = self.ramp, self.window
        if r > 0:
            rising = 0.5 * (1 - np.cos(np.pi * np.clip(t, 0, r) / r))
            falling = 0.5 * (1 - np.cos(np.pi * np.clip(w - t, 0, r) / r))
            shape = np.minimum(rising, falling)
        else:
            shape = np.ones_like(t)
        shape = np.where((t < 0) | (t > w), 0.0, shape)
        return shape[..., None] * np.asarray(self.hold_flux)

    def josephson_energy(self, t, coupler_ej: Sequence[float]) -> np.ndarray:
        from itoffoli.circuit import coupler_josephson_energy

        return coupler_josephson_energy(np.asarray(coupler_ej), self.value(t))


def bias_schedule(hold_flux: Sequence[float], ramp: float, gate_time: float, window: float | None = None) -> BiasSchedule:
    if ramp < 0 or gate_time <= 0:
        raise ValueError("ramp must be non-negative and gate time positive")
    if window is None:
        window = gate_time + 2 * ramp
    if window < gate_time + 2 * ramp:
        raise ValueError(
            f"window {window:g} s too short for two ramps of {ramp:g} s around a {gate_time:g} s gate"
        )
    return BiasSchedule(tuple(float(f) for f in hold_flux), float(ramp), float(gate_time), float(window))


def sample_waveform(signal: DriveSignal, rate: float, frame_freq: float | None = None):
    """Sample the drive at ``rate`` samples per second.

    Returns ``(t, omega)`` with the real lab field, or the complex rotating
    coefficient when ``frame_freq`` is given.
    """
    n = int(math.floor(signal.gate_time * rate)) + 1
    t = np.arange(n) / rate
    if frame_freq is None:
        return t, drag_drive(t, signal)
    return t, signal.rotating_coefficient(t, frame_freq)


def write_waveform_csv(path, signal: DriveSignal, rate: float) -> Path:
    t, omega = sample_waveform(signal, rate)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "omega_over_2pi_mhz"])
        for ti, oi in zip(t, omega):
            w.writerow([f"{ti * 1e9:.6f}", f"{oi / (2 * math.pi) / 1e6:.9e}"])
    return path
