"""Shared fixtures and independent numerical oracles.

The oracles here are written without the package's own operator builders:
lowering operators from explicit Fock-space loops, perturbation theory by
direct Rayleigh-Schroedinger sums over a bare spectrum.
"""

import itertools
import math

import numpy as np
import pytest

TWO_PI = 2 * math.pi
MHZ = TWO_PI * 1e6
GHZ = TWO_PI * 1e9


def fock_lowering(dims, mode):
    """Lowering operator built element by element from the occupation labels."""
    labels = list(itertools.product(*(range(d) for d in dims)))
    index = {lab: k for k, lab in enumerate(labels)}
    a = np.zeros((len(labels), len(labels)))
    for lab in labels:
        n = lab[mode]
        if n == 0:
            continue
        lower = lab[:mode] + (n - 1,) + lab[mode + 1:]
        a[index[lower], index[lab]] = math.sqrt(n)
    return a, labels


def three_qubit_oracle(freq, anharm, couplings, levels=4, counter_rotating=True):
    """Diagonal bare energies, perturbation V and labels of the three-qubit model.

    Each pair couples as ``g (a - a^dag)(b - b^dag)`` (or its exchange part).
    """
    dims = (levels,) * 3
    ops = []
    for k in range(3):
        a, labels = fock_lowering(dims, k)
        ops.append(a)
    h0 = np.array([sum(freq[i] * lab[i] + 0.5 * anharm[i] * lab[i] * (lab[i] - 1) for i in range(3)) for lab in labels])
    v = np.zeros((len(labels), len(labels)))
    for (i, j), g in zip(((0, 1), (1, 2), (0, 2)), couplings):
        if counter_rotating:
            v += g * (ops[i] - ops[i].T) @ (ops[j] - ops[j].T)
        else:
            v -= g * (ops[i] @ ops[j].T + ops[i].T @ ops[j])
    return h0, v, labels


def rayleigh_schroedinger(h0, v, index):
    """Second- and third-order energy corrections of a nondegenerate bare state."""
    d = h0[index] - h0
    d[index] = np.inf
    r = 1.0 / d
    row = v[index] * r
    e2 = float(row @ v[:, index])
    e3 = float(row @ v @ (r * v[:, index])) - float(v[index, index]) * float(row @ (r * v[:, index]))
    return e2, e3


def exact_labeled_energies(h, labels, wanted):
    """Eigenvalue with the largest weight on each wanted bare label."""
    vals, vecs = np.linalg.eigh(h)
    out = {}
    for lab in wanted:
        k = labels.index(lab)
        out[lab] = float(vals[int(np.argmax(np.abs(vecs[k]) ** 2))])
    return out


def shift_combinations(e):
    return {
        "chi12": e[1, 1, 0] - e[1, 0, 0] - e[0, 1, 0] + e[0, 0, 0],
        "chi23": e[0, 1, 1] - e[0, 1, 0] - e[0, 0, 1] + e[0, 0, 0],
        "chi13": e[1, 0, 1] - e[1, 0, 0] - e[0, 0, 1] + e[0, 0, 0],
        "chi123": e[1, 1, 1] - e[1, 0, 0] - e[0, 1, 0] - e[0, 0, 1] + 2 * e[0, 0, 0],
    }


COMPUTATIONAL = list(itertools.product((0, 1), repeat=3))


@pytest.fixture
def headline():
    from itoffoli.effective import headline_params

    return headline_params()


@pytest.fixture
def table_bare():
    from itoffoli.effective import table_bare_params

    return table_bare_params()


def rs_shifts(freq, anharm, couplings, levels=4):
    """Second- and third-order shifts from Rayleigh-Schroedinger sums.

    Uses the ``g (a - a^dag)(b - b^dag)`` coupling, the form whose
    perturbation series the closed-form shift expressions expand.
    """
    h0, v, labels = three_qubit_oracle(freq, anharm, couplings, levels, counter_rotating=True)
    e2, e3 = {}, {}
    for lab in COMPUTATIONAL:
        e2[lab], e3[lab] = rayleigh_schroedinger(h0, v, labels.index(lab))
    return shift_combinations(e2), shift_combinations(e3), e3


def exact_shift_oracle(freq, anharm, couplings, levels=4, counter_rotating=True):
    """Shifts from exact diagonalization of the oracle Hamiltonian."""
    h0, v, labels = three_qubit_oracle(freq, anharm, couplings, levels, counter_rotating)
    # subtract the mean bare energy so the eigenvalues carry fewer digits
    offset = float(np.mean(h0[[labels.index(lab) for lab in COMPUTATIONAL]]))
    e = exact_labeled_energies(np.diag(h0 - offset) + v, labels, COMPUTATIONAL)
    return shift_combinations(e)


def params_tuple(eff):
    return eff.freq, eff.anharm, (eff.g12, eff.g23, eff.g13)


class ConstantDrive:
    """Drive whose rotating-frame coefficient is a constant ``c``.

    Duck-types the parts of a drive signal the propagator uses.
    """

    def __init__(self, c, drive_freq, gate_time):
        self.c = complex(c)
        self.drive_freq = float(drive_freq)
        self.gate_time = float(gate_time)

    def rotating_coefficient(self, t, frame_freq):
        return self.c * np.exp(1j * (self.drive_freq - frame_freq) * np.asarray(t))

    def lab(self, t):
        return 2 * np.real(self.c * np.exp(-1j * self.drive_freq * np.asarray(t)))


def eigen_exponential(h, t):
    """exp(-i H t) from an eigendecomposition of a hermitian matrix."""
    vals, vecs = np.linalg.eigh(h)
    return vecs @ np.diag(np.exp(-1j * vals * t)) @ vecs.conj().T


def headline_signal(h, sigma=200e-9, drag=0.0, amplitude_mhz=1.5, gate_time=500e-9):
    """Gaussian drive on |101> <-> |111> of the undriven model ``h``."""
    from itoffoli.pipeline import resonant_frequency
    from itoffoli.pulses import DriveSignal

    return DriveSignal(amplitude_mhz * MHZ, gate_time, resonant_frequency(h), sigma=sigma, drag=drag)
