"""Coupler-eliminated three-qubit model and the 8x8 two-level model.

Dressed parameters follow second-order Schrieffer-Wolff elimination of the
couplers, assuming both couplers stay in their ground state.  All
frequencies are angular (rad/s).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from itoffoli.circuit import GHZ, MHZ, BareParams, ConfigurationError
from itoffoli.hamiltonian import Hamiltonian
from itoffoli.hilbert import ModeLayout, annihilation, basis_index

PAIRS = ((0, 1), (1, 2), (0, 2))
DISPERSIVE_LIMIT = 0.1
RESIDUAL_WARN = MHZ


@dataclass(frozen=True)
class EffectiveParams:
    """Dressed qubit frequencies, anharmonicities and couplings (rad/s).

    ``dispersive`` is None when the parameters were given directly rather
    than dressed from bare values.
    """

    freq: tuple[float, float, float]
    anharm: tuple[float, float, float]
    g12: float
    g23: float
    g13: float
    dispersive: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "freq", tuple(float(x) for x in self.freq))
        object.__setattr__(self, "anharm", tuple(float(x) for x in self.anharm))
        for name in ("g12", "g23", "g13"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.dispersive is not None:
            object.__setattr__(self, "dispersive", bool(self.dispersive))
        if len(self.freq) != 3 or len(self.anharm) != 3:
            raise ConfigurationError("effective model needs three frequencies and three anharmonicities")

    @classmethod
    def from_units(cls, freq_ghz, anharm_mhz, couplings_mhz) -> "EffectiveParams":
        """``couplings_mhz`` is (g12, g23, g13) or a dict keyed "12", "23", "13"."""
        if isinstance(couplings_mhz, dict):
            couplings_mhz = (couplings_mhz["12"], couplings_mhz["23"], couplings_mhz["13"])
        g12, g23, g13 = (g * MHZ for g in couplings_mhz)
        return cls(tuple(f * GHZ for f in freq_ghz), tuple(a * MHZ for a in anharm_mhz), g12, g23, g13)

    def coupling(self, i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        return {(0, 1): self.g12, (1, 2): self.g23, (0, 2): self.g13}[key]

    def detuning(self, i: int, j: int) -> float:
        return self.freq[i] - self.freq[j]

    def total(self, i: int, j: int) -> float:
        return self.freq[i] + self.freq[j]

    def scaled(self, lam: float) -> "EffectiveParams":
        """Every qubit-qubit coupling multiplied by ``lam``."""
        return replace(self, g12=lam * self.g12, g23=lam * self.g23, g13=lam * self.g13)

    def to_dict(self) -> dict:
        return {
            "freq_ghz": [f / GHZ for f in self.freq],
            "anharm_mhz": [a / MHZ for a in self.anharm],
            "couplings_mhz": {"12": self.g12 / MHZ, "23": self.g23 / MHZ, "13": self.g13 / MHZ},
            "dispersive": self.dispersive,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EffectiveParams":
        return cls.from_units(d["freq_ghz"], d["anharm_mhz"], d["couplings_mhz"])


# Effective parameters of the headline 500 ns gate and of the faster 350 ns point.
def headline_params() -> EffectiveParams:
    return EffectiveParams.from_units((4.984, 5.300, 4.820), (-330, -240, -330), (15.4, 29.2, 2.0))


def fast_params() -> EffectiveParams:
    return EffectiveParams.from_units((5.00, 5.300, 4.820), (-300, -200, -300), (19.4, 35.0, 2.0))


def table_bare_params() -> BareParams:
    """Suggested bare circuit parameters for the three-qubit, two-coupler device."""
    return BareParams.from_units(
        (4.99, 5.31, 4.83), (-300, -250, -300), (7.0, 6.8), (-200, -200),
        {"12": 12, "13": 2, "23": 10.5, "1c1": 55, "2c1": 55, "2c2": 130, "3c2": 130},
    )


# Shift values quoted alongside the suggested parameters (MHz).
TABLE_SHIFTS_MHZ = {"chi12": -5.1, "chi23": -4.95, "chi13": 0.04, "chi123": 0.63}


def _coupler_detunings(bare: BareParams) -> dict[tuple[int, int], float]:
    w = bare.mode_freq
    out = {}
    for pair in bare.qubit_coupler():
        d = w[pair[0]] - w[pair[1]]
        if d == 0:
            raise ConfigurationError(f"qubit {pair[0] + 1} is resonant with coupler {pair[1] - 2}")
        out[pair] = d
    return out


def dispersive_ratio(bare: BareParams) -> float:
    """max |g_{i,cj} / Delta_{i,cj}|."""
    det = _coupler_detunings(bare)
    return max(abs(g / det[p]) for p, g in bare.qubit_coupler().items())


def dress_parameters(bare: BareParams, anharm_override=None) -> EffectiveParams:
    """Second-order dressing by the couplers; anharmonicities pass through
    unchanged unless ``anharm_override`` (rad/s) is given."""
    d = _coupler_detunings(bare)
    qc = bare.qubit_coupler()
    w1, w2, w3 = bare.qubit_freq
    freq = (
        w1 + qc[0, 3] ** 2 / d[0, 3],
        w2 + qc[1, 3] ** 2 / d[1, 3] + qc[1, 4] ** 2 / d[1, 4],
        w3 + qc[2, 4] ** 2 / d[2, 4],
    )
    g12 = bare.g12 + qc[0, 3] * qc[1, 3] * (1 / d[0, 3] + 1 / d[1, 3])
    g23 = bare.g23 + qc[1, 4] * qc[2, 4] * (1 / d[1, 4] + 1 / d[2, 4])
    anharm = bare.qubit_anharm if anharm_override is None else tuple(anharm_override)
    return EffectiveParams(freq, anharm, g12, g23, bare.g13, dispersive=dispersive_ratio(bare) < DISPERSIVE_LIMIT)


@dataclass(frozen=True)
class ResidualCouplings:
    """Second-order qubit-coupler hopping left after the elimination (rad/s)."""

    g1c1: float
    g2c1: float
    g2c2: float
    g3c2: float

    def as_dict(self) -> dict[str, float]:
        return {"1c1": self.g1c1, "2c1": self.g2c1, "2c2": self.g2c2, "3c2": self.g3c2}

    def max_abs(self) -> float:
        return max(abs(v) for v in self.as_dict().values())

    def check(self, limit: float = RESIDUAL_WARN) -> bool:
        ok = self.max_abs() <= limit
        if not ok:
            warnings.warn(f"residual qubit-coupler coupling {self.max_abs() / MHZ:.3f} MHz exceeds {limit / MHZ:.3f} MHz", stacklevel=2)
        return ok

    def to_dict(self) -> dict:
        return {k: v / MHZ for k, v in self.as_dict().items()}


def residual_couplings(bare: BareParams) -> ResidualCouplings:
    d = _coupler_detunings(bare)
    qc = bare.qubit_coupler()
    res = ResidualCouplings(
        g1c1=bare.g12 * qc[0, 3] / d[0, 3],
        g2c1=bare.g12 * qc[1, 3] / d[1, 3],
        g2c2=bare.g23 * qc[1, 4] / d[1, 4],
        g3c2=bare.g23 * qc[2, 4] / d[2, 4],
    )
    res.check()
    return res


def build_effective_hamiltonian(eff: EffectiveParams, layout: ModeLayout | None = None, drive=None, counter_rotating: bool = False) -> Hamiltonian:
    """Three-qubit Hamiltonian with the drive on q2.

    Exchange terms read ``-g (a b^dag + a^dag b)``; ``counter_rotating`` adds
    ``+g (a b + a^dag b^dag)``, giving ``g (a - a^dag)(b - b^dag)`` per pair.
    """
    layout = layout or ModeLayout.qubits()
    if layout.n_modes != 3:
        raise ValueError(f"the effective model has 3 modes, layout has {layout.n_modes}")
    ops = [annihilation(layout, k) for k in range(3)]
    h = np.zeros((layout.dim, layout.dim))
    for a, w, alpha in zip(ops, eff.freq, eff.anharm):
        n = a.T @ a
        h += w * n + 0.5 * alpha * (n @ n - n)
    for i, j in PAIRS:
        g = eff.coupling(i, j)
        h -= g * (ops[i] @ ops[j].T + ops[i].T @ ops[j])
        if counter_rotating:
            h += g * (ops[i] @ ops[j] + ops[i].T @ ops[j].T)
    return Hamiltonian(h, layout, drive_mode=1, signal=drive)


def build_two_level_hamiltonian(chi12: float, chi23: float, drive=None, target_freq: float | None = None) -> Hamiltonian:
    """Eight-level model: conditional shifts on |110>, |011>, |111> plus the drive on q2.

    Written in the frame where every qubit rotates at its own transition
    frequency; ``target_freq`` is the q2 frequency that frame uses, so a
    carrier at ``target_freq + chi12 + chi23`` is resonant with |101> <-> |111>.
    """
    layout = ModeLayout.qubits(2)
    h = np.zeros((8, 8))
    for label, shift in (((1, 1, 0), chi12), ((0, 1, 1), chi23), ((1, 1, 1), chi12 + chi23)):
        k = basis_index(layout, label)
        h[k, k] = shift
    ref = 0.0 if target_freq is None else float(target_freq)
    return Hamiltonian(h, layout, drive_mode=1, signal=drive, rotating_freqs=(0.0, ref, 0.0))
