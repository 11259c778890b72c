"""Glue between models, drives, propagation and phase correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from itoffoli.circuit import BareParams, build_full_hamiltonian
from itoffoli.dynamics import GateResult, PropagationConfig, simulate_gate
from itoffoli.effective import EffectiveParams, build_effective_hamiltonian, build_two_level_hamiltonian, dress_parameters
from itoffoli.fidelity import FidelityReport, PhaseCorrection, fidelity_report, idle_phase_reference
from itoffoli.hamiltonian import Hamiltonian
from itoffoli.hilbert import ModeLayout
from itoffoli.spectrum import labeled_spectrum


def build_model(model: str, params, levels: int = 3, counter_rotating: bool = False) -> Hamiltonian:
    """Undriven Hamiltonian of the requested model.

    ``params`` is BareParams for ``full_5mode``; EffectiveParams (or BareParams,
    dressed on the fly) for ``effective_3mode``; a ``(chi12, chi23, target_freq)``
    tuple for ``two_level``.
    """
    if model == "full_5mode":
        if not isinstance(params, BareParams):
            raise TypeError("the full model needs bare parameters")
        return build_full_hamiltonian(params, ModeLayout.full(levels), counter_rotating=counter_rotating)
    if model == "effective_3mode":
        eff = dress_parameters(params) if isinstance(params, BareParams) else params
        return build_effective_hamiltonian(eff, ModeLayout.qubits(levels), counter_rotating=counter_rotating)
    if model == "two_level":
        chi12, chi23, target_freq = params
        return build_two_level_hamiltonian(chi12, chi23, target_freq=target_freq)
    raise ValueError(f"unknown model {model!r}")


def resonant_frequency(h: Hamiltonian) -> float:
    """E_111 - E_101 of the undriven model (in its own frame for the two-level model)."""
    spec = labeled_spectrum(h.static, h.layout)
    shift = spec.energy((1, 1, 1)) - spec.energy((1, 0, 1))
    if h.rotating_freqs is not None:
        shift += h.rotating_freqs[1]
    return float(shift)


@dataclass
class GateSetup:
    """A fixed undriven model plus everything needed to score a drive.

    The idle-phase reference depends only on the undriven model and the gate
    time, so it is computed once and reused for every drive evaluated.
    """

    hamiltonian: Hamiltonian
    config: PropagationConfig = field(default_factory=PropagationConfig)
    correction_mode: str = "full"
    _idle: dict = field(default_factory=dict, repr=False)

    def correction(self, gate_time: float) -> PhaseCorrection:
        if gate_time not in self._idle:
            self._idle[gate_time] = idle_phase_reference(self.hamiltonian, gate_time, self.config)
        return self._idle[gate_time]

    def run(self, signal, full: bool = True) -> tuple[GateResult, FidelityReport]:
        h = self.hamiltonian.with_signal(signal)
        gate = simulate_gate(h, self.config, signal.gate_time, full=full)
        return gate, fidelity_report(gate, self.correction(signal.gate_time), self.correction_mode)

    def report(self, signal) -> FidelityReport:
        return self.run(signal, full=False)[1]
