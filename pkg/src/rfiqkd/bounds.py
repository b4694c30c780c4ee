"""Protocol constraint systems and secret-key bounds.

The reference-frame-independent protocol monitors the channel through the
quantity

    C = <XX>^2 + <XY>^2 + <YX>^2 + <YY>^2,

which is invariant under a slow rotation of the receiver's X/Y frame while
the Z direction stays shared.  This module builds the affine constraint
systems for the six-, four- and three-state protocol variants (either from
a full cross-basis probability table or from measured error rates), bounds
C from below with the conic solver, bounds the unobserved phase-error rates
from above, and converts (C, e_zz) into the eavesdropper-information and
asymptotic key-rate formulas.

Sign conventions.  The shared reference state has <Y (x) Y> = -1, i.e. a
sender "Y_i" measurement steers the transmitted qubit onto the opposite Y
eigenstate.  The probability table is therefore indexed by the sender-side
measurement outcome (the transmitted ket is the conjugate one), and the
Y-row error operators carry a plus sign,

    E_yx = (1 + Y (x) X)/2,   E_yy = (1 + Y (x) Y)/2,

so that the ideal aligned channel shows e_yy = 0 and e_yx = 1/2, in
agreement with the probability table and with C written as a sum of
(1 - 2 e)^2 terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rfiqkd import qubits
from rfiqkd.sdp import (
    ConicProblem,
    GAP_TOL,
    LinearObjective,
    QuadraticObjective,
    SolverError,
    solve_linear,
    solve_min_sum_squares,
)

VARIANTS = ("six_state", "four_state", "three_state", "bb84_three_state")

# sender states available to each variant, indexed by the sender-side
# measurement outcome in the entanglement picture
TRANSMITTED_STATES = {
    "six_state": (("Z", 0), ("Z", 1), ("X", 0), ("X", 1), ("Y", 0), ("Y", 1)),
    "four_state": (("Z", 0), ("Z", 1), ("X", 0), ("Y", 0)),
    "three_state": (("Z", 0), ("Z", 1), ("X", 0)),
    "bb84_three_state": (("Z", 0), ("Z", 1), ("X", 0)),
}

OUTCOMES = tuple((b, i) for b in ("Z", "X", "Y") for i in (0, 1))

PAIR_KEYS = ("e_zz", "e_xx", "e_xy", "e_yx", "e_yy")
MONITOR_PAIRS = ("xx", "xy", "yx", "yy")

# validity limit of the eavesdropper-information formula in the key basis
EZZ_FORMULA_LIMIT = 0.159

_XX = qubits.tensor(qubits.PAULI_X, qubits.PAULI_X)
_XY = qubits.tensor(qubits.PAULI_X, qubits.PAULI_Y)
_YX = qubits.tensor(qubits.PAULI_Y, qubits.PAULI_X)
_YY = qubits.tensor(qubits.PAULI_Y, qubits.PAULI_Y)
_ZZ = qubits.tensor(qubits.PAULI_Z, qubits.PAULI_Z)

C_OBJECTIVE_TERMS = (_XX, _XY, _YX, _YY)

ERROR_OPERATORS = {
    "zz": 0.5 * (qubits.ID4 - _ZZ),
    "xx": 0.5 * (qubits.ID4 - _XX),
    "xy": 0.5 * (qubits.ID4 + _XY),
    "yx": 0.5 * (qubits.ID4 + _YX),
    "yy": 0.5 * (qubits.ID4 + _YY),
}


def error_operator(pair: str) -> np.ndarray:
    """4x4 error observable for a (sender, receiver) basis pair like ``'yx'``."""
    try:
        return ERROR_OPERATORS[pair].copy()
    except KeyError:
        raise ValueError(f"unknown basis pair {pair!r}") from None


def variant_check(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown protocol variant {variant!r}; expected one of {VARIANTS}")
    return variant


@dataclass(frozen=True)
class MeasurementStatistics:
    """Constraint data for the conic programs.

    Either a full probability table mapping ((basis, bit), (basis, bit)) to a
    joint outcome probability, or a dict of measured error rates keyed by
    ``e_zz``, ``e_xx``, ``e_xy`` and optionally ``e_yx``, ``e_yy``.  Rates
    follow the bit-flip convention (receiver flips when above one half), so
    they must lie in [0, 1/2].
    """

    mode: str
    table: dict | None = None
    rates: dict | None = None

    def __post_init__(self):
        if self.mode == "probability_table":
            if not self.table:
                raise ValueError("probability_table mode needs a table")
            for key, p in self.table.items():
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"probability out of range at {key}: {p}")
        elif self.mode == "error_rates":
            if not self.rates:
                raise ValueError("error_rates mode needs rates")
            for key, r in self.rates.items():
                if key not in PAIR_KEYS:
                    raise ValueError(f"unknown rate key {key!r}")
                if not 0.0 <= r <= 0.5:
                    raise ValueError(f"rate {key} out of range [0, 0.5]: {r}")
        else:
            raise ValueError(f"unknown statistics mode {self.mode!r}")

    @classmethod
    def from_rates(cls, **rates) -> "MeasurementStatistics":
        return cls(mode="error_rates", rates=rates)

    @classmethod
    def from_table(cls, table) -> "MeasurementStatistics":
        return cls(mode="probability_table", table=dict(table))

    def e_zz(self) -> float:
        """Key-basis error rate implied by the statistics."""
        if self.mode == "error_rates":
            return float(self.rates["e_zz"])
        return float(
            self.table[(("Z", 0), ("Z", 1))] + self.table[(("Z", 1), ("Z", 0))]
        ) / (
            self.table[(("Z", 0), ("Z", 0))]
            + self.table[(("Z", 0), ("Z", 1))]
            + self.table[(("Z", 1), ("Z", 0))]
            + self.table[(("Z", 1), ("Z", 1))]
        )


@dataclass
class RfiBoundResult:
    c_l: float
    i_e: float
    e_yx_max: float | None = None
    e_yy_max: float | None = None


def build_constraints(variant: str, stats: MeasurementStatistics) -> list:
    """Affine constraint list (observable, value) for the given variant.

    Probability-table mode adds one projector-product constraint per
    available (sender outcome, receiver outcome) cell; error-rate mode adds
    one error-operator constraint per available rate.  The unit-trace and
    positivity constraints are implicit in the solver.
    """
    variant_check(variant)
    if stats.mode == "probability_table":
        cons = []
        for row in TRANSMITTED_STATES[variant]:
            pa = qubits.projector(qubits.eigenstate(*row))
            for col in OUTCOMES:
                pb = qubits.projector(qubits.eigenstate(*col))
                try:
                    value = stats.table[(row, col)]
                except KeyError:
                    raise ValueError(
                        f"probability table lacks cell {(row, col)} needed by {variant}"
                    ) from None
                cons.append((np.kron(pa, pb), float(value)))
        return cons

    rates = stats.rates
    if variant in ("three_state", "bb84_three_state"):
        if set(rates) != {"e_zz", "e_xx", "e_xy"}:
            raise ValueError(
                "three-state error-rate statistics carry exactly e_zz, e_xx, e_xy"
            )
        keys = ("e_zz", "e_xx", "e_xy")
    else:
        missing = {"e_zz", "e_xx", "e_xy"} - set(rates)
        if missing:
            raise ValueError(f"missing error rates for {variant}: {sorted(missing)}")
        keys = tuple(k for k in PAIR_KEYS if k in rates)
    return [(error_operator(k.removeprefix("e_")), float(rates[k])) for k in keys]


def lower_bound_C(
    variant: str,
    stats: MeasurementStatistics,
    slack: float = 1e-6,
    gap_tol: float = GAP_TOL,
) -> RfiBoundResult:
    """Lower-bound C over all states compatible with the statistics.

    For the three-state variant the result also carries upper bounds on the
    unobserved phase-error rates e_yx and e_yy, obtained by maximizing the
    corresponding error observables over the same feasible set.
    """
    cons = build_constraints(variant, stats)
    problem = ConicProblem(QuadraticObjective(C_OBJECTIVE_TERMS), cons, slack=slack)
    rep = solve_min_sum_squares(problem, gap_tol=gap_tol)
    if rep.status != "optimal":
        raise SolverError(f"C bound solve failed with status {rep.status!r}")
    c_l = float(np.clip(rep.optimal_value, 0.0, 2.0))
    i_e = eve_information_clamped(c_l, stats.e_zz())
    result = RfiBoundResult(c_l=c_l, i_e=i_e)
    if variant in ("three_state", "bb84_three_state"):
        result.e_yx_max, result.e_yy_max = phase_error_maxima(
            variant, stats, slack=slack, gap_tol=gap_tol
        )
    return result


def phase_error_maxima(
    variant: str,
    stats: MeasurementStatistics,
    slack: float = 1e-6,
    gap_tol: float = GAP_TOL,
) -> tuple:
    """Upper bounds on the Y-row phase-error rates over the feasible set."""
    cons = build_constraints(variant, stats)
    out = []
    for pair in ("yx", "yy"):
        problem = ConicProblem(
            LinearObjective(error_operator(pair), sense="max"), cons, slack=slack
        )
        rep = solve_linear(problem, gap_tol=gap_tol)
        if rep.status != "optimal":
            raise SolverError(f"phase-error bound failed with status {rep.status!r}")
        out.append(float(np.clip(rep.optimal_value, 0.0, 1.0)))
    return tuple(out)


def c_prime(e_xx: float, e_xy: float, e_yx: float, e_yy: float) -> float:
    """C computed from the four monitored error rates as sum of (1-2e)^2."""
    rates = (e_xx, e_xy, e_yx, e_yy)
    for r in rates:
        if not 0.0 <= r <= 0.5:
            raise ValueError(f"error rates must lie in [0, 0.5], got {r}")
    return float(sum((1.0 - 2.0 * r) ** 2 for r in rates))


def eve_information(c: float, e_zz: float) -> float:
    """Eavesdropper information bound from (C, key-basis error rate).

    Raises ValueError when e_zz exceeds the formula's validity limit; use
    :func:`eve_information_clamped` where the caller prefers the
    conservative value 1 instead of an exception.
    """
    if not 0.0 <= e_zz <= 0.5:
        raise ValueError(f"e_zz out of range [0, 0.5]: {e_zz}")
    if e_zz > EZZ_FORMULA_LIMIT:
        raise ValueError(
            f"information bound is only valid for e_zz <= {EZZ_FORMULA_LIMIT}, got {e_zz}"
        )
    c = float(np.clip(c, 0.0, 2.0))
    half_c = 0.5 * c
    mu = min(np.sqrt(half_c) / (1.0 - e_zz), 1.0)
    info = (1.0 - e_zz) * qubits.binary_entropy(0.5 * (1.0 + mu))
    if e_zz > 0.0:
        # radicand clamped at 0 (numerical noise at the mu clamp boundary);
        # nu clamped at 1, i.e. C beyond the physical envelope
        # 2[(1-e)^2 + e^2] behaves like the envelope (a pure rotated state,
        # zero leakage), which keeps the bound monotone in C
        nu = np.sqrt(max(half_c - (1.0 - e_zz) ** 2 * mu * mu, 0.0)) / e_zz
        info += e_zz * qubits.binary_entropy(0.5 * (1.0 + min(nu, 1.0)))
    return float(min(info, 1.0))


def eve_information_clamped(c: float, e_zz: float) -> float:
    """As :func:`eve_information`, but out-of-validity e_zz yields 1 (no key)."""
    if e_zz > EZZ_FORMULA_LIMIT:
        return 1.0
    return eve_information(c, e_zz)


def asymptotic_rate(e_zz: float, c: float) -> float:
    """Asymptotic secret bits per detected key-basis pulse: 1 - h(e_zz) - I_E."""
    info = eve_information_clamped(c, e_zz)
    return max(0.0, 1.0 - qubits.binary_entropy(e_zz) - info)


def bb84_asymptotic_rate(e_zz: float, e_xx: float) -> float:
    """Asymptotic rate of the three-state BB84 comparison: 1 - h(e_zz) - h(e_xx)."""
    for r in (e_zz, e_xx):
        if not 0.0 <= r <= 0.5:
            raise ValueError(f"error rates must lie in [0, 0.5], got {r}")
    return max(
        0.0, 1.0 - qubits.binary_entropy(e_zz) - qubits.binary_entropy(e_xx)
    )
