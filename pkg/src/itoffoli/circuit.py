"""From capacitances and Josephson energies to the quantized five-mode
Hamiltonian of three transmons and two SQUID couplers.

Mode order is ``(q1, q2, q3, c1, c2)``.  Capacitances are in farads, Josephson
energies in GHz (E_J / h), fluxes in units of the reduced flux quantum.
:class:`BareParams` stores angular frequencies in rad/s.

Inverse coupling capacitances follow the ``1/Cbar_ij`` convention in which
the charge Hamiltonian reads ``- pi_i pi_j / (2 Cbar_ij Phi0^2)``, i.e.
``1/Cbar_ij = -2 (C^-1)_ij`` for the Maxwell capacitance matrix ``C``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import constants
from scipy.optimize import least_squares

from itoffoli.hamiltonian import Hamiltonian
from itoffoli.hilbert import ModeLayout, annihilation

TWO_PI = 2 * math.pi
GHZ = TWO_PI * 1e9
MHZ = TWO_PI * 1e6

MODE_NAMES = ("q1", "q2", "q3", "c1", "c2")
# (qubit, coupler) pairs with a direct coupling capacitance, as mode indices
QC_PAIRS = {"1c1": (0, 3), "2c1": (1, 3), "2c2": (1, 4), "3c2": (2, 4)}
QQ_PAIRS = {"12": (0, 1), "23": (1, 2)}
INVERSE_KEYS = ("12", "23", "13", "1c1", "2c1", "2c2", "3c2", "1c2", "3c1")
_PAIR_INDEX = {**QC_PAIRS, **QQ_PAIRS, "13": (0, 2), "1c2": (0, 4), "3c1": (2, 3)}


class ConfigurationError(ValueError):
    """Circuit parameters that cannot be turned into a Hamiltonian."""


def charging_energy_ghz(capacitance: float) -> float:
    """E_C / h in GHz for a capacitance in farads."""
    return constants.e**2 / (2 * capacitance) / constants.h / 1e9


@dataclass(frozen=True)
class CircuitSpec:
    qubit_capacitance: tuple[float, float, float]
    coupler_capacitance: tuple[float, float]
    # keyed by "1c1", "2c1", "2c2", "3c2"
    coupling_capacitance: dict[str, float]
    # keyed by "12", "23"
    qubit_qubit_capacitance: dict[str, float]
    qubit_ej: tuple[float, float, float]
    coupler_ej: tuple[float, float]
    coupler_flux: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if set(self.coupling_capacitance) != set(QC_PAIRS):
            raise ConfigurationError(f"coupling_capacitance needs keys {sorted(QC_PAIRS)}")
        if set(self.qubit_qubit_capacitance) != set(QQ_PAIRS):
            raise ConfigurationError(f"qubit_qubit_capacitance needs keys {sorted(QQ_PAIRS)}")
        caps = [*self.qubit_capacitance, *self.coupler_capacitance, *self.coupling_capacitance.values()]
        if any(c <= 0 for c in caps) or any(c < 0 for c in self.qubit_qubit_capacitance.values()):
            raise ConfigurationError("capacitances must be positive (qubit-qubit ones may be zero)")

    def check_hierarchy(self, ratio: float = 10.0) -> bool:
        """Warn unless C_ij << C_k,cl << C_m holds with at least ``ratio`` between tiers."""
        qq = max(self.qubit_qubit_capacitance.values())
        qc_min, qc_max = min(self.coupling_capacitance.values()), max(self.coupling_capacitance.values())
        shunt = min(*self.qubit_capacitance, *self.coupler_capacitance)
        ok = qq * ratio <= qc_min and qc_max * ratio <= shunt
        if not ok:
            warnings.warn("capacitance hierarchy C_ij << C_k,cl << C_m is violated; closed forms are inaccurate", stacklevel=2)
        return ok

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "qubit_capacitance_ff": [c * 1e15 for c in self.qubit_capacitance],
            "coupler_capacitance_ff": [c * 1e15 for c in self.coupler_capacitance],
            "coupling_capacitance_ff": {k: v * 1e15 for k, v in self.coupling_capacitance.items()},
            "qubit_qubit_capacitance_ff": {k: v * 1e15 for k, v in self.qubit_qubit_capacitance.items()},
            "qubit_ej_ghz": list(d["qubit_ej"]),
            "coupler_ej_ghz": list(d["coupler_ej"]),
            "coupler_flux": list(d["coupler_flux"]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitSpec":
        return cls(
            qubit_capacitance=tuple(c * 1e-15 for c in d["qubit_capacitance_ff"]),
            coupler_capacitance=tuple(c * 1e-15 for c in d["coupler_capacitance_ff"]),
            coupling_capacitance={k: v * 1e-15 for k, v in d["coupling_capacitance_ff"].items()},
            qubit_qubit_capacitance={k: v * 1e-15 for k, v in d["qubit_qubit_capacitance_ff"].items()},
            qubit_ej=tuple(d["qubit_ej_ghz"]),
            coupler_ej=tuple(d["coupler_ej_ghz"]),
            coupler_flux=tuple(d.get("coupler_flux", (0.0, 0.0))),
        )


@dataclass(frozen=True)
class EffectiveCapacitances:
    """Loaded capacitances (q1, q2, q3, c1, c2) and inverse couplings 1/Cbar_ij."""

    loaded: tuple[float, float, float, float, float]
    inverse: dict[str, float]
    method: str

    def inverse_matrix_element(self, key: str) -> float:
        """(C^-1)_ij for the pair ``key``."""
        return -0.5 * self.inverse[key]


def capacitance_matrix(spec: CircuitSpec) -> np.ndarray:
    """Maxwell capacitance matrix of the node fluxes (q1, q2, q3, c1, c2)."""
    c = np.zeros((5, 5))
    for k, v in enumerate(spec.qubit_capacitance):
        c[k, k] += v
    for k, v in enumerate(spec.coupler_capacitance):
        c[3 + k, 3 + k] += v
    for key, v in {**spec.coupling_capacitance, **spec.qubit_qubit_capacitance}.items():
        i, j = _PAIR_INDEX[key]
        c[i, i] += v
        c[j, j] += v
        c[i, j] -= v
        c[j, i] -= v
    return c


def reduce_capacitance_network(spec: CircuitSpec, method: str = "closed_form") -> EffectiveCapacitances:
    if method == "exact_inverse":
        cmat = capacitance_matrix(spec)
        if np.linalg.cond(cmat) > 1e12:
            raise ConfigurationError("capacitance matrix is singular")
        inv = np.linalg.inv(cmat)
        loaded = tuple(float(1 / inv[k, k]) for k in range(5))
        inverse = {key: float(-2 * inv[_PAIR_INDEX[key]]) for key in INVERSE_KEYS}
        return EffectiveCapacitances(loaded, inverse, method)
    if method != "closed_form":
        raise ValueError(f"unknown reduction method {method!r}")

    cq1, cq2, cq3 = spec.qubit_capacitance
    cc1, cc2 = spec.coupler_capacitance
    k = spec.coupling_capacitance
    c12, c23 = spec.qubit_qubit_capacitance["12"], spec.qubit_qubit_capacitance["23"]
    b1 = cq1 + c12 + k["1c1"]
    b2 = cq2 + c12 + c23 + k["2c1"] + k["2c2"]
    b3 = cq3 + c23 + k["3c2"]
    bc1 = cc1 + k["1c1"] + k["2c1"]
    bc2 = cc2 + k["2c2"] + k["3c2"]
    # Indirect (two-hop) entries carry -2 C_a C_b / (Cbar Cbar Cbar): second
    # term of the Neumann series for C^-1, mapped through 1/Cbar = -2 C^-1.
    inverse = {
        "12": -2 * c12 / (b1 * b2),
        "23": -2 * c23 / (b2 * b3),
        "13": -2 * c12 * c23 / (b1 * b2 * b3),
        "1c1": -2 * k["1c1"] / (b1 * bc1),
        "2c1": -2 * k["2c1"] / (b2 * bc1),
        "2c2": -2 * k["2c2"] / (b2 * bc2),
        "3c2": -2 * k["3c2"] / (b3 * bc2),
        "1c2": -2 * c12 * k["2c2"] / (b1 * b2 * bc2),
        "3c1": -2 * c23 * k["2c1"] / (b3 * b2 * bc1),
    }
    return EffectiveCapacitances((b1, b2, b3, bc1, bc2), inverse, method)


def coupler_josephson_energy(ej, flux):
    """SQUID Josephson energy 2 E_J cos(flux / 2); negative values are unphysical."""
    return 2 * np.asarray(ej) * np.cos(np.asarray(flux) / 2)


@dataclass(frozen=True)
class BareParams:
    """Quantized mode parameters, angular frequencies in rad/s.

    Couplings are magnitudes; :func:`build_full_hamiltonian` attaches the
    exchange sign.
    """

    qubit_freq: tuple[float, float, float]
    qubit_anharm: tuple[float, float, float]
    coupler_freq: tuple[float, float]
    coupler_anharm: tuple[float, float]
    g12: float
    g23: float
    g13: float
    g1c1: float
    g2c1: float
    g2c2: float
    g3c2: float
    phi_zpf: tuple[float, ...] | None = None
    charging_energy_ghz: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("qubit_freq", "qubit_anharm", "coupler_freq", "coupler_anharm"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        for name in ("g12", "g23", "g13", "g1c1", "g2c1", "g2c2", "g3c2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if any(a >= 0 for a in (*self.qubit_anharm, *self.coupler_anharm)):
            raise ConfigurationError("transmon-like modes need negative anharmonicity")

    @classmethod
    def from_units(cls, qubit_ghz, qubit_anharm_mhz, coupler_ghz, coupler_anharm_mhz, couplings_mhz: dict) -> "BareParams":
        """Build from GHz frequencies and MHz anharmonicities/couplings (all nu = omega / 2 pi)."""
        g = {k: couplings_mhz[k] * MHZ for k in ("12", "23", "13", "1c1", "2c1", "2c2", "3c2")}
        return cls(
            qubit_freq=tuple(f * GHZ for f in qubit_ghz),
            qubit_anharm=tuple(a * MHZ for a in qubit_anharm_mhz),
            coupler_freq=tuple(f * GHZ for f in coupler_ghz),
            coupler_anharm=tuple(a * MHZ for a in coupler_anharm_mhz),
            g12=g["12"], g23=g["23"], g13=g["13"],
            g1c1=g["1c1"], g2c1=g["2c1"], g2c2=g["2c2"], g3c2=g["3c2"],
        )

    @property
    def mode_freq(self) -> np.ndarray:
        return np.array([*self.qubit_freq, *self.coupler_freq])

    @property
    def mode_anharm(self) -> np.ndarray:
        return np.array([*self.qubit_anharm, *self.coupler_anharm])

    def qubit_qubit(self) -> dict[tuple[int, int], float]:
        return {(0, 1): self.g12, (1, 2): self.g23, (0, 2): self.g13}

    def qubit_coupler(self) -> dict[tuple[int, int], float]:
        return {(0, 3): self.g1c1, (1, 3): self.g2c1, (1, 4): self.g2c2, (2, 4): self.g3c2}

    def to_dict(self) -> dict:
        return {
            "qubit_freq_ghz": [f / GHZ for f in self.qubit_freq],
            "qubit_anharm_mhz": [a / MHZ for a in self.qubit_anharm],
            "coupler_freq_ghz": [f / GHZ for f in self.coupler_freq],
            "coupler_anharm_mhz": [a / MHZ for a in self.coupler_anharm],
            "couplings_mhz": {
                "12": self.g12 / MHZ, "23": self.g23 / MHZ, "13": self.g13 / MHZ,
                "1c1": self.g1c1 / MHZ, "2c1": self.g2c1 / MHZ, "2c2": self.g2c2 / MHZ, "3c2": self.g3c2 / MHZ,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BareParams":
        return cls.from_units(d["qubit_freq_ghz"], d["qubit_anharm_mhz"], d["coupler_freq_ghz"], d["coupler_anharm_mhz"], d["couplings_mhz"])


def quantize(caps: EffectiveCapacitances, spec: CircuitSpec) -> BareParams:
    """Transmon quantization of every mode plus capacitive exchange couplings.

    omega = sqrt(8 E_C E_J) - E_C, alpha = -E_C, phi_zpf = (2 E_C / E_J)^(1/4),
    g_ij = (C^-1)_ij sqrt(Cbar_i Cbar_j) sqrt(omega_i omega_j) / 2.
    """
    ej = np.array([*spec.qubit_ej, *coupler_josephson_energy(spec.coupler_ej, spec.coupler_flux)], dtype=float)
    # cos(pi/2) is 6e-17, not 0: anything below 1 Hz counts as vanished
    if np.any(ej <= 1e-9):
        raise ConfigurationError(f"nonpositive effective Josephson energy {ej.tolist()} (check coupler flux)")
    ec = np.array([charging_energy_ghz(c) for c in caps.loaded])
    ratio = ej / ec
    if np.any(ratio < 20):
        warnings.warn(f"E_J/E_C = {ratio.min():.1f} < 20; outside the transmon regime", stacklevel=2)
    freq = (np.sqrt(8 * ec * ej) - ec) * GHZ
    anharm = -ec * GHZ
    phi = (2 * ec / ej) ** 0.25
    loaded = np.array(caps.loaded)

    def coupling(key):
        i, j = _PAIR_INDEX[key]
        return float(caps.inverse_matrix_element(key) * math.sqrt(loaded[i] * loaded[j]) * math.sqrt(freq[i] * freq[j]) / 2)

    return BareParams(
        qubit_freq=tuple(freq[:3]),
        qubit_anharm=tuple(anharm[:3]),
        coupler_freq=tuple(freq[3:]),
        coupler_anharm=tuple(anharm[3:]),
        g12=coupling("12"), g23=coupling("23"), g13=coupling("13"),
        g1c1=coupling("1c1"), g2c1=coupling("2c1"), g2c2=coupling("2c2"), g3c2=coupling("3c2"),
        phi_zpf=tuple(phi),
        charging_energy_ghz=tuple(ec),
    )


def derive_bare(spec: CircuitSpec, method: str = "closed_form") -> BareParams:
    spec.check_hierarchy()
    return quantize(reduce_capacitance_network(spec, method), spec)


def fit_circuit(target: BareParams, coupler_flux=(0.0, 0.0), method: str = "closed_form") -> CircuitSpec:
    """Find a CircuitSpec whose quantized parameters reproduce ``target``.

    Matches every frequency, anharmonicity and nearest-neighbour coupling;
    g13 follows from the two qubit-qubit capacitances and is not fitted.
    """
    wanted = np.array([
        *target.qubit_freq, *target.coupler_freq, *target.qubit_anharm, *target.coupler_anharm,
        target.g12, target.g23, target.g1c1, target.g2c1, target.g2c2, target.g3c2,
    ])
    # start from uncoupled transmon estimates
    ec0 = -np.array([*target.qubit_anharm, *target.coupler_anharm]) / GHZ
    w0 = np.array([*target.qubit_freq, *target.coupler_freq]) / GHZ
    ej0 = (w0 + ec0) ** 2 / (8 * ec0)
    c0 = constants.e**2 / (2 * ec0 * 1e9 * constants.h)
    ej0[3:] /= 2 * np.cos(np.asarray(coupler_flux) / 2)
    x0 = np.log(np.concatenate([c0, ej0, [1e-15] * 4, [0.3e-15] * 2]))

    def build(x):
        v = np.exp(x)
        return CircuitSpec(
            qubit_capacitance=tuple(v[0:3]),
            coupler_capacitance=tuple(v[3:5]),
            coupling_capacitance=dict(zip(QC_PAIRS, v[10:14])),
            qubit_qubit_capacitance=dict(zip(QQ_PAIRS, v[14:16])),
            qubit_ej=tuple(v[5:8]),
            coupler_ej=tuple(v[8:10]),
            coupler_flux=tuple(coupler_flux),
        )

    def residual(x):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = quantize(reduce_capacitance_network(build(x), method), build(x))
        got = np.array([
            *p.qubit_freq, *p.coupler_freq, *p.qubit_anharm, *p.coupler_anharm,
            p.g12, p.g23, p.g1c1, p.g2c1, p.g2c2, p.g3c2,
        ])
        return (got - wanted) / np.abs(wanted)

    sol = least_squares(residual, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    if np.max(np.abs(sol.fun)) > 1e-6:
        raise ConfigurationError(f"circuit fit did not converge (max relative error {np.max(np.abs(sol.fun)):.2e})")
    return build(sol.x)


def build_full_hamiltonian(params: BareParams, layout: ModeLayout | None = None, drive=None, counter_rotating: bool = False) -> Hamiltonian:
    """Five-mode Hamiltonian with the drive on q2.

    Exchange terms carry a leading minus, ``-g (a b^dag + a^dag b)``, for both
    qubit-qubit and qubit-coupler pairs.  ``counter_rotating`` adds
    ``+g (a b + a^dag b^dag)`` so each pair reads ``g (a - a^dag)(b - b^dag)``.
    """
    layout = layout or ModeLayout.full()
    if layout.n_modes != 5:
        raise ValueError(f"the full model has 5 modes, layout has {layout.n_modes}")
    ops = [annihilation(layout, k) for k in range(5)]
    h = np.zeros((layout.dim, layout.dim))
    for a, w, alpha in zip(ops, params.mode_freq, params.mode_anharm):
        n = a.T @ a
        h += w * n + 0.5 * alpha * (n @ n - n)
    for (i, j), g in {**params.qubit_qubit(), **params.qubit_coupler()}.items():
        h += _pair_term(ops[i], ops[j], g, counter_rotating)
    return Hamiltonian(h, layout, drive_mode=1, signal=drive)


def _pair_term(a: np.ndarray, b: np.ndarray, g: float, counter_rotating: bool) -> np.ndarray:
    term = -g * (a @ b.T + a.T @ b)
    if counter_rotating:
        term = term + g * (a @ b + a.T @ b.T)
    return term
