"""Decoy-state finite-key estimation against coherent attacks.

Given per-intensity detection and error counts for each basis pair, this
module bounds the vacuum and single-photon event numbers in the key basis,
the single-photon error rate, and the phase-error rates of the monitoring
pairs (with a concentration correction for sampling without replacement),
and assembles the secret key length

    l = floor[ s_zz,0 + s_zz,1 (1 - I_E) - n_zz f h(E_zz)
               - log2(2/eps_EC) - 2 log2(1/eps_PA)
               - 7 n_zz sqrt(log2(2/eps_bar) / n_zz) - 30 log2(N + 1) ].

The concentration shifts use Hoeffding-style terms sqrt(n/2 ln(1/eps)); the
degenerate choice eps = 1 turns every shift off, which is how the
asymptotic (infinite-key) limit of the same chain is evaluated.

The fluctuation term is kept exactly in the printed form
``7 n sqrt(log2(2/eps)/n)``, which algebraically equals
``7 sqrt(n log2(2/eps))``.

Counts-file schema (CSV, header required, one row per basis-pair/intensity
cell)::

    basis_prepared,basis_measured,intensity_label,n,m

with ``basis_*`` in {Z, X, Y}, ``intensity_label`` in {mu, nu, omega} and
integer counts satisfying 0 <= m <= n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from rfiqkd import bounds
from rfiqkd.qubits import binary_entropy

INTENSITY_LABELS = ("mu", "nu", "omega")

#: basis pairs whose single-photon phase errors enter the monitoring bound
MONITORING_PAIRS = {
    "six_state": (("X", "X"), ("X", "Y"), ("Y", "X"), ("Y", "Y")),
    "four_state": (("X", "X"), ("X", "Y"), ("Y", "X"), ("Y", "Y")),
    "three_state": (("X", "X"), ("X", "Y")),
    "bb84_three_state": (("X", "X"), ("X", "Y")),
}


@dataclass(frozen=True)
class SecurityParams:
    """Failure probabilities of the post-processing steps and EC inefficiency.

    ``epsilon`` drives every concentration bound; setting it to 1 disables
    the statistical shifts (the asymptotic limit).
    """

    epsilon_ec: float = 1e-10
    epsilon_pa: float = 1e-10
    epsilon_bar: float = 1e-10
    epsilon: float = 1e-10
    f_ec: float = 1.16

    def __post_init__(self):
        for name in ("epsilon_ec", "epsilon_pa", "epsilon_bar", "epsilon"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.f_ec < 1.0:
            raise ValueError(f"error-correction inefficiency must be >= 1, got {self.f_ec}")

    def asymptotic(self) -> "SecurityParams":
        """Copy with all concentration shifts and block penalties disabled."""
        return SecurityParams(1.0, 1.0, 1.0, 1.0, self.f_ec)


@dataclass
class CountsRecord:
    """Detected (n) and error (m) counts per intensity for one basis pair."""

    prepared: str
    measured: str
    n: dict = field(default_factory=dict)
    m: dict = field(default_factory=dict)

    def __post_init__(self):
        for lab in INTENSITY_LABELS:
            self.n.setdefault(lab, 0.0)
            self.m.setdefault(lab, 0.0)
        for lab in INTENSITY_LABELS:
            if self.n[lab] < 0 or self.m[lab] < 0 or self.m[lab] > self.n[lab]:
                raise ValueError(
                    f"counts must satisfy 0 <= m <= n, got n={self.n[lab]} "
                    f"m={self.m[lab]} at intensity {lab!r}"
                )

    @property
    def n_total(self) -> float:
        return float(sum(self.n.values()))

    @property
    def m_total(self) -> float:
        return float(sum(self.m.values()))

    def error_rate(self) -> float:
        return self.m_total / self.n_total if self.n_total > 0 else 0.0


@dataclass
class DecoyEstimate:
    """Single-photon bounds extracted from a counts set."""

    s_zz_0: float
    s_zz_1: float
    e_zz_1: float
    s_pair_1: dict = field(default_factory=dict)
    e_pair: dict = field(default_factory=dict)


def tau(n: int, source) -> float:
    """Probability that a pulse carries exactly n photons (Poisson mixture)."""
    if n < 0:
        raise ValueError("photon number must be nonnegative")
    total = 0.0
    for lab in INTENSITY_LABELS:
        k = source.intensity(lab)
        p = source.probability(lab)
        total += math.exp(-k) * k**n * p / math.factorial(n)
    return total


def _deviation(total: float, epsilon: float) -> float:
    return math.sqrt(0.5 * total * math.log(1.0 / epsilon)) if epsilon < 1.0 else 0.0


def fluctuation_bounds(counts: CountsRecord, source, security: SecurityParams) -> dict:
    """Hoeffding-shifted per-intensity counts.

    Returns {label: (n_minus, n_plus, m_minus, m_plus)} with the e^k/p_k
    rescaling applied and negative shifts floored at zero.
    """
    dn = _deviation(counts.n_total, security.epsilon)
    dm = _deviation(counts.m_total, security.epsilon)
    out = {}
    for lab in INTENSITY_LABELS:
        k = source.intensity(lab)
        w = math.exp(k) / source.probability(lab)
        out[lab] = (
            max(w * (counts.n[lab] - dn), 0.0),
            max(w * (counts.n[lab] + dn), 0.0),
            max(w * (counts.m[lab] - dm), 0.0),
            max(w * (counts.m[lab] + dm), 0.0),
        )
    return out


def vacuum_events(counts: CountsRecord, source, security: SecurityParams) -> float:
    """Lower bound on detections caused by vacuum pulses in this basis pair."""
    if not source.nu > source.omega:
        raise ValueError("vacuum bound needs nu > omega")
    fb = fluctuation_bounds(counts, source, security)
    n_minus_omega = fb["omega"][0]
    n_plus_nu = fb["nu"][1]
    t0 = tau(0, source)
    return max(
        t0 * (source.nu * n_minus_omega - source.omega * n_plus_nu) / (source.nu - source.omega),
        0.0,
    )


def single_photon_events(
    counts: CountsRecord, s_0: float, source, security: SecurityParams
) -> float:
    """Lower bound on detections caused by single-photon pulses."""
    mu, nu, om = source.mu, source.nu, source.omega
    denom = mu * (nu - om) - nu * nu + om * om
    if denom <= 0.0:
        raise ValueError(
            f"invalid intensity configuration: mu(nu-omega) - nu^2 + omega^2 = {denom} <= 0"
        )
    fb = fluctuation_bounds(counts, source, security)
    t0 = tau(0, source)
    t1 = tau(1, source)
    bracket = (
        fb["nu"][0]
        - fb["omega"][1]
        - (nu * nu - om * om) / (mu * mu) * (fb["mu"][1] - s_0 / t0)
    )
    return max(t1 * mu / denom * bracket, 0.0)


def single_photon_qber(
    counts: CountsRecord, s_1: float, source, security: SecurityParams
) -> float:
    """Upper bound on the error rate of the single-photon events."""
    if s_1 <= 0.0:
        raise ValueError("single-photon error estimation needs s_1 > 0")
    fb = fluctuation_bounds(counts, source, security)
    t1 = tau(1, source)
    m_plus_nu = fb["nu"][3]
    m_minus_omega = fb["omega"][2]
    raw = t1 * (m_plus_nu - m_minus_omega) / ((source.nu - source.omega) * s_1)
    return min(max(raw, 0.0), 0.5)


def gamma_concentration(a: float, b: float, c: float, d: float) -> float:
    """Concentration penalty for inferring one sample's rate from another.

    Limits: zero when the observed rate b is 0 or 1 (with positive counts);
    infinity when the log argument degenerates (caller clamps to 1/2).
    """
    if c <= 0 or d <= 0:
        raise ValueError("concentration term needs positive event counts")
    if b <= 0.0 or b >= 1.0:
        return 0.0
    spread = (c + d) * (1.0 - b) * b / (c * d)
    log_arg = (c + d) / (2.0 * math.pi * c * d * (1.0 - b) * b * a * a)
    if log_arg <= 1.0:
        return math.inf
    return math.sqrt(spread * math.log(log_arg))


def phase_error_rate(
    e_tilde: float, s_pair_1: float, s_zz_1: float, security: SecurityParams
) -> float:
    """Phase-error upper bound for one monitoring pair, clamped at 1/2."""
    if not 0.0 <= e_tilde <= 0.5:
        raise ValueError(f"observed rate must lie in [0, 0.5], got {e_tilde}")
    if security.epsilon >= 1.0:
        return e_tilde
    g = gamma_concentration(security.epsilon, e_tilde, s_pair_1, s_zz_1)
    return min(e_tilde + g, 0.5)


def decoy_estimates(counts_set: dict, source, security: SecurityParams, variant: str) -> DecoyEstimate:
    """Run the full estimation chain over a counts set.

    ``counts_set`` maps (prepared_basis, measured_basis) to CountsRecord and
    must contain the ZZ pair plus every monitoring pair of the variant.
    """
    bounds.variant_check(variant)
    try:
        zz = counts_set[("Z", "Z")]
    except KeyError:
        raise ValueError("counts set lacks the key-basis (Z, Z) pair") from None
    s0 = vacuum_events(zz, source, security)
    s1 = single_photon_events(zz, s0, source, security)
    # no certifiable single-photon events: estimation degenerates to the
    # pessimistic rate, which downstream turns into an aborted block
    e1 = single_photon_qber(zz, s1, source, security) if s1 > 0.0 else 0.5
    est = DecoyEstimate(s_zz_0=s0, s_zz_1=s1, e_zz_1=e1)
    for pair in MONITORING_PAIRS[variant]:
        try:
            rec = counts_set[pair]
        except KeyError:
            raise ValueError(f"counts set lacks monitoring pair {pair}") from None
        sp0 = vacuum_events(rec, source, security)
        sp1 = single_photon_events(rec, sp0, source, security)
        est.s_pair_1[pair] = sp1
        if sp1 > 0.0 and s1 > 0.0:
            e_tilde = single_photon_qber(rec, sp1, source, security)
            est.e_pair[pair] = phase_error_rate(e_tilde, sp1, s1, security)
        else:
            est.e_pair[pair] = 0.5
    return est


def key_length(
    estimate: DecoyEstimate,
    counts_set: dict,
    i_e: float,
    security: SecurityParams,
    n_pulses: float,
) -> int:
    """Secret key length for the block; negative budgets clamp to zero.

    In the asymptotic regime (epsilons equal to 1) the log- and
    square-root penalty terms are dropped along with the shifts.
    """
    zz = counts_set[("Z", "Z")]
    n_zz = zz.n_total
    if n_zz <= 0:
        return 0
    budget = (
        estimate.s_zz_0
        + estimate.s_zz_1 * (1.0 - i_e)
        - n_zz * security.f_ec * binary_entropy(zz.error_rate())
    )
    if security.epsilon < 1.0:
        budget -= math.log2(2.0 / security.epsilon_ec)
        budget -= 2.0 * math.log2(1.0 / security.epsilon_pa)
        budget -= 7.0 * n_zz * math.sqrt(math.log2(2.0 / security.epsilon_bar) / n_zz)
        budget -= 30.0 * math.log2(n_pulses + 1.0)
    return max(int(math.floor(budget)), 0)


@dataclass
class FiniteKeyReport:
    """Full result of the counts-to-key-rate analysis."""

    variant: str
    estimate: DecoyEstimate
    c_lower: float
    i_e: float
    e_zz_observed: float
    n_zz: float
    length: int
    rate: float


def finite_key_report(
    counts_set: dict,
    source,
    security: SecurityParams,
    variant: str,
    slack: float = 1e-6,
    gap_tol: float = 1e-8,
) -> FiniteKeyReport:
    """Counts to secret-key rate: decoy bounds, C bound, key length.

    The single-photon phase-error upper bounds double as the error-rate
    constraints of the C program; the three-state variants constrain only
    the (X, X) and (X, Y) pairs and leave the Y rows to the optimizer.
    """
    est = decoy_estimates(counts_set, source, security, variant)
    rates = {"e_zz": est.e_zz_1, "e_xx": est.e_pair[("X", "X")], "e_xy": est.e_pair[("X", "Y")]}
    if variant in ("six_state", "four_state"):
        rates["e_yx"] = est.e_pair[("Y", "X")]
        rates["e_yy"] = est.e_pair[("Y", "Y")]
    if est.s_zz_1 <= 0.0:
        c_l, i_e = 0.0, 1.0
    else:
        stats = bounds.MeasurementStatistics.from_rates(**rates)
        res = bounds.lower_bound_C(variant, stats, slack=slack, gap_tol=gap_tol)
        c_l, i_e = res.c_l, res.i_e
    zz = counts_set[("Z", "Z")]
    length = key_length(est, counts_set, i_e, security, source.n_pulses)
    rate = length / source.n_pulses if source.n_pulses > 0 else 0.0
    return FiniteKeyReport(
        variant=variant,
        estimate=est,
        c_lower=c_l,
        i_e=i_e,
        e_zz_observed=zz.error_rate(),
        n_zz=zz.n_total,
        length=length,
        rate=rate,
    )


COUNTS_COLUMNS = ("basis_prepared", "basis_measured", "intensity_label", "n", "m")


class CountsFileError(ValueError):
    """Raised when a counts file violates the schema; carries row diagnostics."""


def read_counts_file(path) -> dict:
    """Parse a counts CSV into {(prepared, measured): CountsRecord}.

    Enforces the schema documented in the module docstring; any violation
    raises :class:`CountsFileError` naming the offending row.
    """
    cells: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(
            COUNTS_COLUMNS
        ):
            raise CountsFileError(
                f"counts file must start with header {','.join(COUNTS_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        for row_no, row in enumerate(reader, start=2):
            prepared = (row["basis_prepared"] or "").strip()
            measured = (row["basis_measured"] or "").strip()
            label = (row["intensity_label"] or "").strip()
            if prepared not in ("Z", "X", "Y") or measured not in ("Z", "X", "Y"):
                raise CountsFileError(f"row {row_no}: bad basis labels {prepared!r}, {measured!r}")
            if label not in INTENSITY_LABELS:
                raise CountsFileError(
                    f"row {row_no}: intensity_label must be one of {INTENSITY_LABELS}, got {label!r}"
                )
            try:
                n = float(row["n"])
                m = float(row["m"])
            except (TypeError, ValueError):
                raise CountsFileError(f"row {row_no}: counts are not numeric") from None
            if n < 0 or m < 0:
                raise CountsFileError(f"row {row_no}: negative count")
            if m > n:
                raise CountsFileError(f"row {row_no}: error count m={m} exceeds n={n}")
            key = (prepared, measured)
            rec = cells.setdefault(key, {"n": {}, "m": {}})
            if label in rec["n"]:
                raise CountsFileError(f"row {row_no}: duplicate cell {key} / {label}")
            rec["n"][label] = n
            rec["m"][label] = m
    out = {}
    for (prepared, measured), rec in cells.items():
        out[(prepared, measured)] = CountsRecord(
            prepared=prepared, measured=measured, n=rec["n"], m=rec["m"]
        )
    return out


def write_counts_file(path, counts_set: dict) -> None:
    """Inverse of :func:`read_counts_file`, in deterministic cell order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COUNTS_COLUMNS)
        for (prepared, measured) in sorted(counts_set):
            rec = counts_set[(prepared, measured)]
            for label in INTENSITY_LABELS:
                writer.writerow(
                    [prepared, measured, label, repr(rec.n[label]), repr(rec.m[label])]
                )
