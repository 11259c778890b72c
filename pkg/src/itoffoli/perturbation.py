"""Closed-form dispersive shifts of the coupler-eliminated three-qubit model.

The formulas hold for pairwise couplings of the form
``g (a - a^dag)(b - b^dag)``: exchange ``-g`` plus the counter-rotating pair
terms, which produce the ``omega_i + omega_j`` denominators.  First order
vanishes identically, so the series starts at ``g^2``.

Each expression is stored as a table of ``(coefficient, denominators)``
terms over the symbols ``a1..a3`` (anharmonicities), ``Dij = w_i - w_j`` and
``Sij = w_i + w_j``.  Keeping the terms as data lets every denominator be
checked against resonance and named in the error.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from itoffoli.circuit import MHZ
from itoffoli.effective import EffectiveParams

RESONANCE_EPS = 2 * math.pi * 1e6
COMPUTATIONAL = ("000", "001", "010", "011", "100", "101", "110", "111")


class ResonanceError(ArithmeticError):
    """A perturbative denominator is within the resonance guard of zero."""

    def __init__(self, quantity: str, denominator: str, value: float, eps: float):
        self.quantity = quantity
        self.denominator = denominator
        self.value = value
        super().__init__(
            f"{quantity}: denominator ({denominator}) = {value / MHZ:.4g} MHz straddles a resonance (|.| < {eps / MHZ:.4g} MHz)"
        )


# Third-order three-body shift, up to the prefactor 2 g12 g23 g13.
CHI3_TERMS = (
    (1, ("D12", "D13")), (1, ("S12", "D13")), (-2, ("a1+D12", "a1+D13")), (-4, ("a1+a2+S12", "a1+D13")),
    (-1, ("D12", "D23")), (1, ("S12", "D23")), (1, ("D13", "D23")), (-2, ("a2-D12", "a2+D23")),
    (-4, ("a1+a2+S12", "a2+D23")), (-4, ("a1+D13", "a2+D23")), (-4, ("a2-D12", "a3-D13")),
    (2, ("S12", "a3-D13")), (1, ("D12", "S13")), (2, ("a2-D12", "S13")), (-3, ("S12", "S13")),
    (2, ("a2+S12", "S13")), (-1, ("D23", "S13")), (2, ("a2+D23", "S13")), (2, ("a1+S12", "a1+S13")),
    (2, ("S12", "a3+S13")), (-4, ("a1+D12", "a1+a3+S13")), (-8, ("a1+a2+S12", "a1+a3+S13")),
    (-4, ("a1+D12", "a3-D23")), (2, ("S12", "a3-D23")), (-2, ("a3-D13", "a3-D23")),
    (-4, ("a1+a3+S13", "a3-D23")), (-1, ("D12", "S23")), (2, ("a1+D12", "S23")), (-3, ("S12", "S23")),
    (2, ("a1+S12", "S23")), (-1, ("D13", "S23")), (2, ("a1+D13", "S23")), (-3, ("S13", "S23")),
    (2, ("a1+S13", "S23")), (2, ("a2+S12", "a2+S23")), (2, ("S13", "a2+S23")), (2, ("S12", "a3+S23")),
    (2, ("a3+S13", "a3+S23")), (-4, ("a2-D12", "a2+a3+S23")), (-8, ("a1+a2+S12", "a2+a3+S23")),
    (-4, ("a3-D13", "a2+a3+S23")), (-8, ("a1+a3+S13", "a2+a3+S23")),
)

# Third-order energy corrections of the computational states, up to g12 g23 g13.
E3_TERMS = {
    "110": (
        (4, ("D13", "a2-D12")), (4, ("D23", "a1+D12")), (-2, ("S12", "D13")), (-2, ("S12", "D23")),
        (-8, ("a1+S13", "a2+S23")), (4, ("D23", "a1+S13")), (4, ("D13", "a2+S23")), (-2, ("D13", "D23")),
        (-8, ("a1+S13", "a1+a2+S12")), (-8, ("a2+S23", "a1+a2+S12")), (-4, ("a1+D12", "a1+S13")),
        (-4, ("a2-D12", "a2+S23")),
    ),
    "101": (
        (4, ("D12", "a3-D13")), (-4, ("D23", "a1+D13")), (-2, ("S13", "D12")), (2, ("S13", "D23")),
        (-8, ("a1+S12", "a3+S23")), (-4, ("D23", "a1+S12")), (4, ("D12", "a3+S23")), (2, ("D12", "D23")),
        (-8, ("a1+S12", "a1+a3+S13")), (-8, ("a3+S23", "a1+a3+S13")), (-4, ("a1+D13", "a1+S12")),
        (-4, ("a3-D13", "a3+S23")),
    ),
    "011": (
        (2, ("S23", "D12")), (-4, ("D13", "a2+D23")), (-4, ("D12", "a3-D23")), (2, ("S23", "D13")),
        (-8, ("a2+S12", "a3+S13")), (-4, ("D13", "a2+S12")), (-4, ("D12", "a3+S13")), (-2, ("D12", "D13")),
        (-8, ("a2+S12", "a2+a3+S23")), (-8, ("a3+S13", "a2+a3+S23")), (-4, ("a2+D23", "a2+S12")),
        (-4, ("a3-D23", "a3+S13")),
    ),
    "100": (
        (2, ("S23", "D12")), (-4, ("S23", "a1+S13")), (-4, ("S23", "a1+S12")), (2, ("S23", "D13")),
        (-4, ("a1+S12", "a1+S13")), (-2, ("D12", "D13")),
    ),
    "010": (
        (2, ("S13", "D23")), (-4, ("S13", "a2+S23")), (-2, ("S13", "D12")), (-4, ("S13", "a2+S12")),
        (-4, ("a2+S12", "a2+S23")), (2, ("D12", "D23")),
    ),
    "001": (
        (-4, ("S12", "a3+S13")), (-4, ("S12", "a3+S23")), (-2, ("S12", "D13")), (-2, ("S12", "D23")),
        (-4, ("a3+S13", "a3+S23")), (-2, ("D13", "D23")),
    ),
    "000": ((-2, ("S12", "S13")), (-2, ("S12", "S23")), (-2, ("S13", "S23"))),
}

# Factors that appear as (alpha_k - S_ij) in one printed version of the
# third-order expressions; only (alpha_k - D_ij) matches perturbation theory.
_PRINTED_VARIANT = {"a2-D12": "a2-S12", "a3-D13": "a3-S13", "a3-D23": "a3-S23"}

_SYMBOL = re.compile(r"([+-]?)([aDS]\d+)")


def _symbols(eff: EffectiveParams) -> dict[str, float]:
    sym = {f"a{k + 1}": eff.anharm[k] for k in range(3)}
    for i, j in ((0, 1), (0, 2), (1, 2)):
        tag = f"{i + 1}{j + 1}"
        sym["D" + tag] = eff.detuning(i, j)
        sym["S" + tag] = eff.total(i, j)
    return sym


def _denominator(expr: str, sym: dict[str, float]) -> float:
    return sum((-1 if sign == "-" else 1) * sym[name] for sign, name in _SYMBOL.findall(expr))


def _evaluate(terms, sym, quantity: str, eps: float, as_printed: bool = False) -> float:
    total = 0.0
    for coeff, dens in terms:
        prod = 1.0
        for expr in dens:
            if as_printed:
                expr = _PRINTED_VARIANT.get(expr, expr)
            value = _denominator(expr, sym)
            if abs(value) < eps:
                raise ResonanceError(quantity, expr, value, eps)
            prod *= value
        total += coeff / prod
    return total


def chi2_pair(eff: EffectiveParams, i: int, j: int, eps: float = RESONANCE_EPS) -> float:
    """Second-order conditional shift between qubits ``i`` and ``j`` (0-based)."""
    if i == j:
        raise ValueError("a pair shift needs two distinct qubits")
    g = eff.coupling(i, j)
    ai, aj = eff.anharm[i], eff.anharm[j]
    d_ij, s_ij = eff.detuning(i, j), eff.total(i, j)
    name = f"chi{min(i, j) + 1}{max(i, j) + 1}(2)"
    terms = (
        (-2, ai + d_ij, f"a{i + 1}+D{i + 1}{j + 1}"),
        (-2, aj - d_ij, f"a{j + 1}+D{j + 1}{i + 1}"),
        (2, ai + s_ij, f"a{i + 1}+S"),
        (2, aj + s_ij, f"a{j + 1}+S"),
        (-4, ai + aj + s_ij, f"a{i + 1}+a{j + 1}+S"),
    )
    out = 0.0
    for coeff, den, label in terms:
        if abs(den) < eps:
            raise ResonanceError(name, label, den, eps)
        out += coeff / den
    return g * g * out


def chi2_total(eff: EffectiveParams, eps: float = RESONANCE_EPS) -> float:
    return chi2_pair(eff, 0, 1, eps) + chi2_pair(eff, 1, 2, eps) + chi2_pair(eff, 0, 2, eps)


def chi3_123(eff: EffectiveParams, eps: float = RESONANCE_EPS, as_printed: bool = False) -> float:
    """Third-order shift of |111> beyond single-qubit energies (all three-body
    and pairwise third-order contributions together)."""
    pref = 2 * eff.g12 * eff.g23 * eff.g13
    if pref == 0:
        return 0.0
    return pref * _evaluate(CHI3_TERMS, _symbols(eff), "chi123(3)", eps, as_printed)


def energy_corrections_third(eff: EffectiveParams, eps: float = RESONANCE_EPS, as_printed: bool = False) -> dict:
    """Third-order energies of the seven lower computational states.

    Returns ``{"energies": {label: E}, "chi": {"12": .., "23": .., "13": ..},
    "energy_111": E}`` where the pair terms come from the energy combinations
    and E_111 is reconstructed from the three-body shift.
    """
    pref = eff.g12 * eff.g23 * eff.g13
    sym = _symbols(eff)
    energies = {}
    for label, terms in E3_TERMS.items():
        energies[label] = 0.0 if pref == 0 else pref * _evaluate(terms, sym, f"E{label}(3)", eps, as_printed)
    e = energies
    chi = {
        "12": e["110"] - e["100"] - e["010"] + e["000"],
        "23": e["011"] - e["010"] - e["001"] + e["000"],
        "13": e["101"] - e["100"] - e["001"] + e["000"],
    }
    e111 = chi3_123(eff, eps, as_printed) + e["100"] + e["010"] + e["001"] - 2 * e["000"]
    return {"energies": energies, "chi": chi, "energy_111": e111}


@dataclass
class ShiftEntry:
    """One dispersive shift by order and method (rad/s); missing parts are None."""

    order2: float | None = None
    order3: float | None = None
    exact: float | None = None
    error: str | None = None
    methods: tuple[str, ...] = ()

    @property
    def total(self) -> float | None:
        if self.order2 is None:
            return None
        return self.order2 + (self.order3 or 0.0)

    @property
    def value(self) -> float | None:
        """Best available estimate: perturbative total, else exact."""
        return self.total if self.total is not None else self.exact

    def to_dict(self) -> dict:
        def mhz(x):
            return None if x is None else x / MHZ

        return {
            "order2_mhz": mhz(self.order2),
            "order3_mhz": mhz(self.order3),
            "total_mhz": mhz(self.total),
            "exact_mhz": mhz(self.exact),
            "methods": list(self.methods),
            "error": self.error,
        }


SHIFT_NAMES = ("chi12", "chi23", "chi13", "chi123")


@dataclass
class DispersiveShifts:
    chi12: ShiftEntry = field(default_factory=ShiftEntry)
    chi23: ShiftEntry = field(default_factory=ShiftEntry)
    chi13: ShiftEntry = field(default_factory=ShiftEntry)
    chi123: ShiftEntry = field(default_factory=ShiftEntry)

    def entries(self) -> dict[str, ShiftEntry]:
        return {name: getattr(self, name) for name in SHIFT_NAMES}

    def to_dict(self) -> dict:
        return {name: e.to_dict() for name, e in self.entries().items()}

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def write_csv(self, path) -> Path:
        path = Path(path)
        cols = ["order2_mhz", "order3_mhz", "total_mhz", "exact_mhz", "methods", "error"]
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["shift", *cols])
            for name, entry in self.entries().items():
                d = entry.to_dict()
                row = ["" if d[c] is None else (repr(d[c]) if isinstance(d[c], float) else d[c]) for c in cols]
                row[cols.index("methods")] = ";".join(d["methods"])
                w.writerow([name, *row])
        return path


def shift_report(
    eff: EffectiveParams | None,
    exact: dict[str, float] | None = None,
    methods=("pt2", "pt3"),
    eps: float = RESONANCE_EPS,
    as_printed: bool = False,
) -> DispersiveShifts:
    """Collect perturbative and (optionally) exact shifts.

    ``exact`` maps shift names (``chi12`` ...) to exact values.  A resonance
    in one shift is recorded on that entry and does not stop the others.
    """
    report = DispersiveShifts()
    entries = report.entries()
    pairs = {"chi12": (0, 1), "chi23": (1, 2), "chi13": (0, 2)}
    if eff is not None and "pt2" in methods:
        for name, (i, j) in pairs.items():
            try:
                entries[name].order2 = chi2_pair(eff, i, j, eps)
                entries[name].methods += ("perturbative_2",)
            except ResonanceError as err:
                entries[name].error = str(err)
        if all(entries[n].order2 is not None for n in pairs):
            entries["chi123"].order2 = sum(entries[n].order2 for n in pairs)
            entries["chi123"].methods += ("perturbative_2",)
        else:
            entries["chi123"].error = "a pair shift failed"
    if eff is not None and "pt3" in methods:
        try:
            third = energy_corrections_third(eff, eps, as_printed)
            for name, key in (("chi12", "12"), ("chi23", "23"), ("chi13", "13")):
                if entries[name].order2 is not None or "pt2" not in methods:
                    entries[name].order3 = third["chi"][key]
                    entries[name].methods += ("perturbative_3",)
            if entries["chi123"].error is None:
                entries["chi123"].order3 = chi3_123(eff, eps, as_printed)
                entries["chi123"].methods += ("perturbative_3",)
        except ResonanceError as err:
            for entry in entries.values():
                entry.error = entry.error or str(err)
    if exact is not None:
        for name, value in exact.items():
            entries[name].exact = value
            entries[name].methods += ("exact",)
    return report
