"""Truncated multimode bosonic Hilbert spaces.

Basis states are occupation tuples ordered row-major in the declared mode
order, so ``(n1, n2, n3)`` maps to ``n1*d2*d3 + n2*d3 + n3``.  The full circuit
uses modes ``(q1, q2, q3, c1, c2)``; the coupler-eliminated model uses
``(q1, q2, q3)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

FULL_MODES = ("q1", "q2", "q3", "c1", "c2")
QUBIT_MODES = ("q1", "q2", "q3")


@dataclass(frozen=True)
class ModeLayout:
    """Per-mode truncation levels plus mode names."""

    dims: tuple[int, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("layout needs at least one mode")
        if any(d < 2 for d in dims):
            raise ValueError(f"every mode needs at least 2 levels, got {dims}")
        object.__setattr__(self, "dims", dims)
        names = tuple(self.names) if self.names else tuple(f"m{k}" for k in range(len(dims)))
        if len(names) != len(dims):
            raise ValueError("names and dims differ in length")
        object.__setattr__(self, "names", names)

    @classmethod
    def full(cls, levels: int = 3) -> "ModeLayout":
        return cls((levels,) * 5, FULL_MODES)

    @classmethod
    def qubits(cls, levels: int = 3) -> "ModeLayout":
        return cls((levels,) * 3, QUBIT_MODES)

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def labels(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(d) for d in self.dims))

    @cached_property
    def occupations(self) -> np.ndarray:
        """(dim, n_modes) integer array of occupations for every flat index."""
        return np.array(list(self.labels()), dtype=int).reshape(self.dim, self.n_modes)

    def computational_labels(self) -> list[tuple[int, ...]]:
        """The eight qubit labels, couplers (modes beyond the third) in ground state."""
        pad = (0,) * (self.n_modes - 3)
        return [lab + pad for lab in itertools.product((0, 1), repeat=3)]

    def computational_indices(self) -> list[int]:
        return [basis_index(self, lab) for lab in self.computational_labels()]

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "names": list(self.names)}


def basis_index(layout: ModeLayout, label: Sequence[int]) -> int:
    label = tuple(int(n) for n in label)
    if len(label) != layout.n_modes:
        raise ValueError(f"label {label} does not match {layout.n_modes} modes")
    for n, d in zip(label, layout.dims):
        if not 0 <= n < d:
            raise ValueError(f"occupation {n} out of range for truncation {d} in {label}")
    return int(np.ravel_multi_index(label, layout.dims))


def basis_label(layout: ModeLayout, index: int) -> tuple[int, ...]:
    if not 0 <= index < layout.dim:
        raise ValueError(f"index {index} out of range for dimension {layout.dim}")
    return tuple(int(n) for n in np.unravel_index(index, layout.dims))


def label_str(label: Sequence[int]) -> str:
    return "".join(str(n) for n in label)


def _embed(layout: ModeLayout, mode: int, local: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1))
    for k, d in enumerate(layout.dims):
        out = np.kron(out, local if k == mode else np.eye(d))
    return out


def annihilation(layout: ModeLayout, mode: int) -> np.ndarray:
    """Truncated lowering operator of ``mode``, identity on the other modes."""
    if not 0 <= mode < layout.n_modes:
        raise IndexError(f"mode {mode} out of range for {layout.n_modes} modes")
    d = layout.dims[mode]
    local = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)
    return _embed(layout, mode, local)


def number(layout: ModeLayout, mode: int) -> np.ndarray:
    if not 0 <= mode < layout.n_modes:
        raise IndexError(f"mode {mode} out of range for {layout.n_modes} modes")
    return np.diag(layout.occupations[:, mode].astype(float))


def total_number(layout: ModeLayout) -> np.ndarray:
    return np.diag(layout.occupations.sum(axis=1).astype(float))


def basis_state(layout: ModeLayout, label: Sequence[int]) -> np.ndarray:
    psi = np.zeros(layout.dim, dtype=complex)
    psi[basis_index(layout, label)] = 1.0
    return psi
