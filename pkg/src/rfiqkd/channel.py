"""Channel and source models producing simulated statistics and counts.

Two layers are modeled:

* the qubit layer: a slow rotation ``beta`` of the receiver's X/Y frame
  about the shared Z axis plus independent bit-flip noise per preparation
  basis, which yields the cross-basis probability table used as SDP input;

* the detection layer: threshold detectors with dark-count probability
  ``e_d`` per gate, total transmittance ``eta`` (detector efficiency times
  channel loss, with optional per-measurement-basis excess loss), and an
  intrinsic optical error ``e_o``; double clicks are assigned a random bit.

On top of the detection layer sit the single-photon observables and the
phase-randomized weak-coherent-source (WCS) gains for the three-intensity
decoy scheme, plus expected (or Poisson-sampled) detection and error counts
for a finite pulse block.

Convention: probability-table rows and count cells for Y preparations are
indexed by the sender-side measurement outcome of the equivalent entangled
source, whose Y axes anti-correlate; the transmitted ket is then the
opposite Y eigenstate.  Error rates are unaffected (they are symmetric
under this relabeling combined with the bit-flip convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from rfiqkd import qubits
from rfiqkd.bounds import MeasurementStatistics, TRANSMITTED_STATES, variant_check
from rfiqkd.finitekey import CountsRecord, INTENSITY_LABELS

MEASURED_BASES = ("Z", "X", "Y")


@dataclass(frozen=True)
class ChannelParams:
    """Channel, detector and noise parameters.

    ``e_o`` may be a single intrinsic optical error probability or a mapping
    keyed by the receiver's measurement basis (time-bin setups have
    interferometric error only on the phase bases).  Transmittance comes
    either from ``distance_km * loss_coeff_db_per_km`` or, when
    ``channel_att_db`` is set, from that fixed attenuation; per-basis
    ``excess_loss_db`` is added on top.
    """

    beta: float = 0.0
    e_flip: Mapping[str, float] = field(default_factory=dict)
    eta_det: float = 1.0
    e_d: float = 0.0
    e_o: float | Mapping[str, float] = 0.0
    distance_km: float = 0.0
    loss_coeff_db_per_km: float = 0.21
    channel_att_db: float | None = None
    excess_loss_db: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.eta_det <= 1.0:
            raise ValueError(f"detector efficiency must be in (0, 1], got {self.eta_det}")
        if not 0.0 <= self.e_d < 1.0:
            raise ValueError(f"dark-count probability out of range: {self.e_d}")
        if self.distance_km < 0.0:
            raise ValueError("distance must be nonnegative")
        for b, e in self.e_flip.items():
            if b not in MEASURED_BASES or not 0.0 <= e <= 0.5:
                raise ValueError(f"bad bit-flip entry {b!r}: {e}")

    def flip_rate(self, prepared_basis: str) -> float:
        return float(self.e_flip.get(prepared_basis, 0.0))

    def optical_error(self, measured_basis: str) -> float:
        if isinstance(self.e_o, Mapping):
            return float(self.e_o.get(measured_basis, 0.0))
        return float(self.e_o)

    def transmittance(self, measured_basis: str | None = None) -> float:
        """Total transmittance eta for pulses analysed in the given basis."""
        att = (
            self.channel_att_db
            if self.channel_att_db is not None
            else self.loss_coeff_db_per_km * self.distance_km
        )
        if measured_basis is not None:
            att += float(self.excess_loss_db.get(measured_basis, 0.0))
        return self.eta_det * 10.0 ** (-att / 10.0)


@dataclass(frozen=True)
class SourceParams:
    """Decoy-state source: three intensities, their probabilities, basis split.

    The basis probabilities follow the symmetric monitoring convention: the
    receiver's X and Y probabilities equal the sender's X probability; for
    the three-state variants the sender's Y probability is zero, so the
    sender puts all monitoring weight on X (requires pr_z_a > 1/2).
    """

    mu: float
    nu: float
    omega: float = 0.0
    p_mu: float = 1.0 / 3.0
    p_nu: float = 1.0 / 3.0
    p_omega: float = 1.0 / 3.0
    pr_z_a: float = 0.5
    n_pulses: float = 1e10

    def __post_init__(self):
        if not self.mu > self.nu + self.omega:
            raise ValueError(
                f"intensities must satisfy mu > nu + omega, got {self.mu}, {self.nu}, {self.omega}"
            )
        if not 0.0 <= self.omega <= self.nu:
            raise ValueError(f"intensities must satisfy 0 <= omega <= nu, got {self.omega}, {self.nu}")
        probs = (self.p_mu, self.p_nu, self.p_omega)
        if any(p <= 0.0 for p in probs):
            raise ValueError(f"intensity probabilities must be positive, got {probs}")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"intensity probabilities must sum to 1, got {sum(probs)}")
        if not 0.0 < self.pr_z_a < 1.0:
            raise ValueError(f"pr_z_a must be in (0, 1), got {self.pr_z_a}")
        if self.n_pulses < 0:
            raise ValueError("n_pulses must be nonnegative")

    def intensity(self, label: str) -> float:
        return {"mu": self.mu, "nu": self.nu, "omega": self.omega}[label]

    def probability(self, label: str) -> float:
        return {"mu": self.p_mu, "nu": self.p_nu, "omega": self.p_omega}[label]

    def basis_probabilities(self, variant: str) -> tuple[dict, dict]:
        """(sender, receiver) basis probability maps for the given variant."""
        variant_check(variant)
        if variant in ("three_state", "bb84_three_state"):
            x = 1.0 - self.pr_z_a
            if self.pr_z_a <= 0.5:
                raise ValueError(
                    "three-state operation needs pr_z_a > 1/2 so the receiver "
                    "can split the remainder over X and Y"
                )
            sender = {"Z": self.pr_z_a, "X": x, "Y": 0.0}
            receiver = {"Z": 1.0 - 2.0 * x, "X": x, "Y": x}
        else:
            x = 0.5 * (1.0 - self.pr_z_a)
            sender = {"Z": self.pr_z_a, "X": x, "Y": x}
            receiver = dict(sender)
        return sender, receiver


def overlap_prob(alpha: tuple, chi: tuple, beta: float) -> float:
    """|<alpha_i | chi_j(beta)>|^2 with the receiver state rotated by beta."""
    a = qubits.eigenstate(*alpha)
    c = qubits.rotated_eigenstate(chi[0], chi[1], beta)
    return float(abs(np.vdot(a, c)) ** 2)


def effective_overlap(alpha: tuple, chi: tuple, params: ChannelParams) -> float:
    """Overlap including bit-flip noise and the Y-row conjugate indexing."""
    basis, i = alpha
    e = params.flip_rate(basis)
    direct = overlap_prob((basis, i), chi, params.beta)
    flipped = overlap_prob((basis, 1 - i), chi, params.beta)
    if basis == "Y":
        return e * direct + (1.0 - e) * flipped
    return (1.0 - e) * direct + e * flipped


def statistics_table(variant: str, params: ChannelParams) -> MeasurementStatistics:
    """Cross-basis joint probability table P[(alpha_i, chi_j)] for the variant.

    Entries carry the 1/2 preparation probability within the sender's basis,
    so each (row, receiver-basis) group sums to 1/2 and each row/basis-pair
    block is normalized.
    """
    table = {}
    for row in TRANSMITTED_STATES[variant_check(variant)]:
        for b in MEASURED_BASES:
            for j in (0, 1):
                table[(row, (b, j))] = 0.5 * effective_overlap(row, (b, j), params)
    return MeasurementStatistics.from_table(table)


def detection_prob_single(
    overlap: float, params: ChannelParams, measured_basis: str | None = None
) -> float:
    """Per-gate click probability on the detector selected by ``overlap``.

    Combines direct detection, a dark count standing in for a lost photon,
    and randomly assigned double clicks.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must be a probability, got {overlap}")
    eta = params.transmittance(measured_basis)
    ed = params.e_d
    return (
        eta * overlap * (1.0 - ed)
        + (1.0 - eta) * ed * (1.0 - ed)
        + 0.5 * (eta * ed + (1.0 - eta) * ed * ed)
    )


def single_photon_observables(variant: str, params: ChannelParams) -> dict:
    """Gain and error rate per basis pair for an ideal single-photon source.

    Returns {(alpha_basis, chi_basis): (gain, error_rate)} with the error
    rate already folded through the intrinsic optical error and the bit-flip
    (below one half) convention.
    """
    variant_check(variant)
    sender_bases = sorted({b for b, _ in TRANSMITTED_STATES[variant]})
    out = {}
    for a in sender_bases:
        for c in MEASURED_BASES:
            v = {
                (i, j): detection_prob_single(
                    effective_overlap((a, i), (c, j), params), params, c
                )
                for i in (0, 1)
                for j in (0, 1)
            }
            gain = 0.5 * (v[0, 0] + v[1, 1] + v[0, 1] + v[1, 0])
            e_raw = (v[0, 1] + v[1, 0]) / (2.0 * gain) if gain > 0 else 0.5
            e_opt = params.optical_error(c)
            e_tilde = e_opt * (1.0 - 2.0 * e_raw) + e_raw
            out[(a, c)] = (gain, min(e_tilde, 1.0 - e_tilde))
    return out


def wcs_gain(k: float, alpha: tuple, chi: tuple, params: ChannelParams) -> float:
    """Click probability for a phase-randomized coherent pulse of intensity k."""
    if k < 0:
        raise ValueError(f"intensity must be nonnegative, got {k}")
    eta = params.transmittance(chi[0])
    a = eta * effective_overlap(alpha, chi, params)
    d = 1.0 - params.e_d
    return 0.5 * (
        1.0 + d * (math.exp((-eta + a) * k) - math.exp(-a * k) - d * math.exp(-eta * k))
    )


def overlap_table(variant: str, params: ChannelParams) -> dict:
    """Noise-folded overlaps {((a, i), (c, j)): T} for all cells of the variant.

    Intensity-independent, so optimizer loops compute it once per channel.
    """
    variant_check(variant)
    sender_bases = sorted({b for b, _ in TRANSMITTED_STATES[variant]})
    return {
        ((a, i), (c, j)): effective_overlap((a, i), (c, j), params)
        for a in sender_bases
        for c in MEASURED_BASES
        for i in (0, 1)
        for j in (0, 1)
    }


def _gain_from_overlap(k: float, t_eff: float, eta: float, e_d: float) -> float:
    a = eta * t_eff
    d = 1.0 - e_d
    return 0.5 * (
        1.0 + d * (math.exp((-eta + a) * k) - math.exp(-a * k) - d * math.exp(-eta * k))
    )


def wcs_observables(
    variant: str,
    params: ChannelParams,
    source: SourceParams,
    overlaps: dict | None = None,
) -> dict:
    """Per (basis pair, intensity): gain, error gain and observed error rate.

    Returns {(alpha_basis, chi_basis, label): (Q, W, E)} where W is the raw
    error gain before the bit-flip convention and E = min(W/Q, 1 - W/Q).
    ``overlaps`` may carry a precomputed :func:`overlap_table`.
    """
    if overlaps is None:
        overlaps = overlap_table(variant, params)
    sender_bases = sorted({b for b, _ in TRANSMITTED_STATES[variant]})
    out = {}
    for a in sender_bases:
        for c in MEASURED_BASES:
            e_opt = params.optical_error(c)
            eta = params.transmittance(c)
            for label in INTENSITY_LABELS:
                k = source.intensity(label)
                q = {
                    (i, j): _gain_from_overlap(
                        k, overlaps[((a, i), (c, j))], eta, params.e_d
                    )
                    for i in (0, 1)
                    for j in (0, 1)
                }
                gain = 0.5 * (q[0, 0] + q[1, 0] + q[1, 1] + q[0, 1])
                w_tilde = 0.5 * (q[1, 0] + q[0, 1])
                w = e_opt * (gain - 2.0 * w_tilde) + w_tilde
                e_tilde = w / gain if gain > 0 else 0.5
                out[(a, c, label)] = (gain, w, min(e_tilde, 1.0 - e_tilde))
    return out


def expected_counts(
    variant: str,
    params: ChannelParams,
    source: SourceParams,
    rng: np.random.Generator | None = None,
    observables: dict | None = None,
) -> dict:
    """Detected and error counts per basis pair for a block of n_pulses.

    Returns {(alpha_basis, chi_basis): CountsRecord}.  Counts are real-valued
    expectations; passing a seeded ``rng`` instead draws the detections from
    a Poisson distribution and the errors binomially.  The bit-flip
    convention is applied per basis pair on the intensity-aggregated error
    ratio, mirroring what the sifting stage does with a real record.
    ``observables`` short-circuits the gain computation when the caller has
    already evaluated :func:`wcs_observables` for these intensities.
    """
    if observables is None:
        observables = wcs_observables(variant, params, source)
    pr_a, pr_b = source.basis_probabilities(variant)
    out = {}
    sender_bases = sorted({b for b, _ in TRANSMITTED_STATES[variant]})
    for a in sender_bases:
        if pr_a[a] == 0.0:
            continue
        for c in MEASURED_BASES:
            if pr_b[c] == 0.0:
                continue
            scale = source.n_pulses * pr_a[a] * pr_b[c]
            gains = {lab: observables[(a, c, lab)][0] for lab in INTENSITY_LABELS}
            errs = {lab: observables[(a, c, lab)][1] for lab in INTENSITY_LABELS}
            total_q = sum(source.probability(lab) * gains[lab] for lab in INTENSITY_LABELS)
            total_w = sum(source.probability(lab) * errs[lab] for lab in INTENSITY_LABELS)
            flip = total_q > 0 and total_w / total_q > 0.5
            n = {}
            m = {}
            for lab in INTENSITY_LABELS:
                n_bar = scale * source.probability(lab) * gains[lab]
                w = gains[lab] - errs[lab] if flip else errs[lab]
                ratio = w / gains[lab] if gains[lab] > 0 else 0.0
                if rng is None:
                    n[lab] = n_bar
                    m[lab] = n_bar * ratio
                else:
                    n[lab] = float(rng.poisson(n_bar))
                    m[lab] = float(rng.binomial(int(n[lab]), min(max(ratio, 0.0), 1.0)))
            out[(a, c)] = CountsRecord(prepared=a, measured=c, n=n, m=m)
    return out
