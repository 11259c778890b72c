"""Exact diagonalization, dressed-state labeling and exact dispersive shifts."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from itoffoli.circuit import GHZ
from itoffoli.hilbert import ModeLayout, basis_index, label_str

LABEL_THRESHOLD = 0.5


class LabelingError(RuntimeError):
    """Eigenvectors cannot be matched to bare labels (non-dispersive regime)."""


def eigensolve(h: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues ascending and orthonormal eigenvectors (columns) of a hermitian matrix."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if np.max(np.abs(h - h.conj().T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not hermitian")
    return np.linalg.eigh(h)


@dataclass(frozen=True)
class LabeledSpectrum:
    """Eigenpairs matched to bare occupation labels.

    ``assignment`` maps each label to ``(eigen_index, energy, overlap)`` with
    overlap the squared bare-state amplitude.
    """

    layout: ModeLayout
    values: np.ndarray
    vectors: np.ndarray
    assignment: dict

    def _full(self, label: Sequence[int]) -> tuple[int, ...]:
        label = tuple(int(x) for x in label)
        return label + (0,) * (self.layout.n_modes - len(label))

    def __contains__(self, label) -> bool:
        return self._full(label) in self.assignment

    def energy(self, label: Sequence[int]) -> float:
        """Energy of ``label``; short labels are padded with ground-state couplers."""
        key = self._full(label)
        if key not in self.assignment:
            raise KeyError(f"label {label_str(key)} was not assigned")
        return float(self.assignment[key][1])

    def overlap(self, label: Sequence[int]) -> float:
        return float(self.assignment[self._full(label)][2])

    def dressed_vector(self, label: Sequence[int]) -> np.ndarray:
        """Eigenvector of ``label`` with its phase fixed so the bare amplitude is real positive."""
        key = self._full(label)
        vec = self.vectors[:, self.assignment[key][0]]
        amp = vec[basis_index(self.layout, key)]
        return vec * (np.conj(amp) / abs(amp))

    def dressed_basis(self, labels: Sequence[Sequence[int]] | None = None) -> np.ndarray:
        labels = labels if labels is not None else self.layout.computational_labels()
        return np.column_stack([self.dressed_vector(lab) for lab in labels])

    def computational_energies(self) -> np.ndarray:
        return np.array([self.energy(lab) for lab in self.layout.computational_labels()])

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", "energy_ghz", "overlap"])
            for label in sorted(self.assignment, key=lambda k: self.assignment[k][0]):
                _, e, ov = self.assignment[label]
                w.writerow([label_str(label), repr(float(e) / GHZ), repr(float(ov))])
        return path


def assign_labels(
    values: np.ndarray,
    vectors: np.ndarray,
    layout: ModeLayout,
    labels: Sequence[Sequence[int]] | str | None = None,
    threshold: float = LABEL_THRESHOLD,
) -> LabeledSpectrum:
    """Greedy matching of bare labels to eigenvectors by descending overlap.

    ``labels`` defaults to the eight computational labels; ``"all"`` labels
    the whole space.  Every requested label must end with overlap >= ``threshold``.
    """
    if labels is None:
        labels = layout.computational_labels()
    elif labels == "all":
        labels = list(layout.labels())
    labels = [tuple(int(x) for x in lab) for lab in labels]
    rows = [basis_index(layout, lab) for lab in labels]
    weights = np.abs(vectors[rows, :]) ** 2
    order = np.argsort(-weights, axis=None, kind="stable")
    taken_label: dict[int, int] = {}
    taken_vec: dict[int, int] = {}
    for flat in order:
        li, k = divmod(int(flat), weights.shape[1])
        if li in taken_label or k in taken_vec:
            continue
        taken_label[li] = k
        taken_vec[k] = li
        if len(taken_label) == len(labels):
            break
    assignment = {}
    for li, lab in enumerate(labels):
        k = taken_label[li]
        ov = float(weights[li, k])
        if ov < threshold:
            best = int(np.argmax(weights[li]))
            rival = taken_vec.get(best)
            if rival is not None and rival != li:
                raise LabelingError(
                    f"labels {label_str(lab)} and {label_str(labels[rival])} compete for eigenvector {best}"
                )
            raise LabelingError(f"label {label_str(lab)} has best overlap {ov:.3f} < {threshold}")
        assignment[lab] = (k, float(values[k]), ov)
    return LabeledSpectrum(layout, np.asarray(values), np.asarray(vectors), assignment)


def labeled_spectrum(h: np.ndarray, layout: ModeLayout, labels=None, threshold: float = LABEL_THRESHOLD) -> LabeledSpectrum:
    values, vectors = eigensolve(h)
    return assign_labels(values, vectors, layout, labels, threshold)


def dispersive_shifts_exact(spec: LabeledSpectrum) -> dict[str, float]:
    """chi12, chi23, chi13 and chi123 as signed combinations of labeled energies."""
    e = spec.energy
    return {
        "chi12": e((1, 1, 0)) - e((1, 0, 0)) - e((0, 1, 0)) + e((0, 0, 0)),
        "chi23": e((0, 1, 1)) - e((0, 1, 0)) - e((0, 0, 1)) + e((0, 0, 0)),
        "chi13": e((1, 0, 1)) - e((1, 0, 0)) - e((0, 0, 1)) + e((0, 0, 0)),
        "chi123": e((1, 1, 1)) - e((1, 0, 0)) - e((0, 1, 0)) - e((0, 0, 1)) + 2 * e((0, 0, 0)),
    }


def exact_shifts(hamiltonian) -> dict[str, float]:
    """Exact shifts of the undriven static part of a model Hamiltonian."""
    return dispersive_shifts_exact(labeled_spectrum(hamiltonian.static, hamiltonian.layout))
