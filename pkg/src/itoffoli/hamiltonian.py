"""Time-dependent Hamiltonian carrier shared by the full, effective and
two-level models.

Every model has the shape ``H(t) = S + c(t) a + conj(c(t)) a^dag`` where ``a``
is the lowering operator of the driven mode.  What ``S`` and ``c`` are depends
on the frame; :meth:`Hamiltonian.parts` hands both to the propagator so the
per-step work is a scalar evaluation plus two matrix additions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from itoffoli.hilbert import ModeLayout, annihilation


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Static part plus an optional drive on one mode.

    If ``rotating_freqs`` is set, ``static`` is already written in the frame
    where mode k rotates at ``rotating_freqs[k]`` (the two-level model is
    built that way) and no lab-frame form exists.
    """

    static: np.ndarray
    layout: ModeLayout
    drive_mode: int | None = None
    signal: object | None = None
    rotating_freqs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.static.shape != (self.layout.dim, self.layout.dim):
            raise ValueError(f"static part {self.static.shape} does not match layout dimension {self.layout.dim}")

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def excitations(self) -> np.ndarray:
        return self.layout.occupations.sum(axis=1).astype(float)

    def lowering(self) -> np.ndarray:
        return annihilation(self.layout, self.drive_mode)

    def with_signal(self, signal) -> "Hamiltonian":
        return replace(self, signal=signal)

    def undriven(self) -> "Hamiltonian":
        return replace(self, signal=None)

    @property
    def driven(self) -> bool:
        return self.signal is not None and self.drive_mode is not None

    def conserves_excitations(self, tol: float = 1e-9) -> bool:
        n = self.excitations
        comm = self.static * (n[None, :] - n[:, None])
        return float(np.max(np.abs(comm), initial=0.0)) <= tol * max(1.0, float(np.max(np.abs(self.static))))

    def parts(self, frame: str = "lab", frame_freq: float = 0.0) -> tuple[np.ndarray, np.ndarray | None, Callable]:
        """Return ``(S, a, c)`` with ``H(t) = S + c(t) a + conj(c(t)) a^dag``.

        ``frame="lab"``: real carrier, ``c = Omega(t)``.
        ``frame="rotating"``: every mode rotates at ``frame_freq``; requires an
        excitation-conserving static part, and drops the counter-rotating half
        of the carrier.
        """
        if self.rotating_freqs is not None:
            s = self.static.astype(complex)
            if not self.driven:
                return s, None, _zero
            ref = self.rotating_freqs[self.drive_mode]
            sig = self.signal
            return s, self.lowering(), lambda t: sig.rotating_coefficient(t, ref)
        if frame == "lab":
            s = self.static.astype(complex)
            if not self.driven:
                return s, None, _zero
            sig = self.signal
            return s, self.lowering(), lambda t: complex(sig.lab(t))
        if frame == "rotating":
            if frame_freq != 0.0 and not self.conserves_excitations():
                raise ValueError("a common rotating frame needs an excitation-conserving static Hamiltonian")
            s = self.static.astype(complex) - frame_freq * np.diag(self.excitations)
            if not self.driven:
                return s, None, _zero
            sig = self.signal
            return s, self.lowering(), lambda t: sig.rotating_coefficient(t, frame_freq)
        raise ValueError(f"unknown frame {frame!r}")

    def __call__(self, t: float, frame: str = "lab", frame_freq: float = 0.0) -> np.ndarray:
        s, a, c = self.parts(frame, frame_freq)
        if a is None:
            return s
        ct = complex(c(t))
        return s + ct * a + np.conj(ct) * a.T


def _zero(t):
    return 0.0
