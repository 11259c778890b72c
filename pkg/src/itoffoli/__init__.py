"""Three transmons, two tunable couplers, one single-shot i-Toffoli gate.

Dense numerical models of the circuit, perturbative and exact dispersive
shifts, pulse-level gate simulation and calibration.
"""

from itoffoli.hilbert import ModeLayout, annihilation, basis_index, basis_label
from itoffoli.circuit import BareParams, CircuitSpec, EffectiveCapacitances
from itoffoli.effective import EffectiveParams, ResidualCouplings, dress_parameters
from itoffoli.perturbation import DispersiveShifts, ShiftEntry, shift_report
from itoffoli.pulses import DriveSignal
from itoffoli.dynamics import GateResult, PropagationConfig
from itoffoli.fidelity import FidelityReport, PhaseCorrection, process_fidelity, target_itoffoli

__version__ = "0.1.0"

__all__ = [
    "ModeLayout",
    "annihilation",
    "basis_index",
    "basis_label",
    "BareParams",
    "CircuitSpec",
    "EffectiveCapacitances",
    "EffectiveParams",
    "ResidualCouplings",
    "dress_parameters",
    "DispersiveShifts",
    "ShiftEntry",
    "shift_report",
    "DriveSignal",
    "GateResult",
    "PropagationConfig",
    "FidelityReport",
    "PhaseCorrection",
    "process_fidelity",
    "target_itoffoli",
]
