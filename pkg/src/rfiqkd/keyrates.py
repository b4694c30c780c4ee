"""End-to-end key-rate pipelines combining channel models with the bounds.

Three pipelines:

* :func:`qber_family_rate` -- asymptotic single-photon rate on the
  equal-error channel family (no detection model), used for error-tolerance
  studies;
* :func:`single_photon_rate` -- asymptotic rate per pulse through the
  detection model (gain-weighted), as a function of distance;
* :func:`wcs_finite_key` -- decoy-state finite-key (or asymptotic-limit)
  rate for a weak coherent source over a finite block.

The C quantity is obtained from the conic solver for the three-state
variants and from the closed-form sum of (1 - 2e)^2 terms when all four
monitoring pairs are measured (six- and four-state); the BB84 comparison
uses the entropy formula directly.
"""

from __future__ import annotations

import numpy as np

from rfiqkd import bounds, channel, finitekey
from rfiqkd.qubits import binary_entropy

# SDP accuracy knob for pipeline work: far tighter than any rate tolerance,
# far looser than the solver's ultimate capability, and fast
PIPELINE_GAP_TOL = 1e-8


def c_bound_from_rates(
    variant: str,
    e_zz: float,
    e_xx: float,
    e_xy: float,
    e_yx: float | None = None,
    e_yy: float | None = None,
    slack: float = 1e-6,
    cache: dict | None = None,
) -> float:
    """C lower bound from measured error rates, dispatched per variant.

    Six- and four-state statistics determine all four monitoring pairs, so C
    follows in closed form; the three-state variants bound the missing Y
    rows through the conic program.  ``cache`` (optional dict) memoizes
    solver calls on rounded rate keys for optimizer loops.
    """
    bounds.variant_check(variant)
    if variant in ("six_state", "four_state"):
        if e_yx is None or e_yy is None:
            raise ValueError(f"{variant} needs e_yx and e_yy")
        return bounds.c_prime(e_xx, e_xy, e_yx, e_yy)
    key = None
    if cache is not None:
        # 2e-3 rate granularity keeps the C error below ~1e-2, well inside
        # the flatness of the rate objective near its optimum; exact values
        # are recomputed for anything that gets reported
        key = (variant, round(500 * e_zz), round(500 * e_xx), round(500 * e_xy))
        if key in cache:
            return cache[key]
    stats = bounds.MeasurementStatistics.from_rates(
        e_zz=min(e_zz, 0.5), e_xx=min(e_xx, 0.5), e_xy=min(e_xy, 0.5)
    )
    res = bounds.lower_bound_C(variant, stats, slack=slack, gap_tol=PIPELINE_GAP_TOL)
    if cache is not None:
        cache[key] = res.c_l
    return res.c_l


def qber_family_rate(variant: str, e: float, slack: float = 1e-6) -> float:
    """Asymptotic single-photon rate on the equal-error family e_x=e_y=e_z=e.

    On this family the monitored rates are e_xx = e_yy = e and
    e_xy = e_yx = 1/2 at zero misalignment, so the six/four-state C is
    2 (1-2e)^2; the three-state C comes from the solver and the BB84
    comparison from 1 - h(e) - h(e).
    """
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"error rate out of range [0, 0.5]: {e}")
    if variant == "bb84_three_state":
        return bounds.bb84_asymptotic_rate(e, e)
    if variant in ("six_state", "four_state"):
        c = bounds.c_prime(e, 0.5, 0.5, e)
    else:
        c = c_bound_from_rates(variant, e, e, 0.5, slack=slack)
    return bounds.asymptotic_rate(e, c)


def single_photon_rate(
    variant: str, params: channel.ChannelParams, slack: float = 1e-6
) -> dict:
    """Asymptotic secret bits per emitted pulse with an ideal single-photon source.

    Returns a dict with the gain-weighted ``rate``, the key-basis gain and
    error rate, the monitored error rates and the C bound used.
    """
    obs = channel.single_photon_observables(variant, params)
    gain_zz, e_zz = obs[("Z", "Z")]
    if variant == "bb84_three_state":
        _, e_xx = obs[("X", "X")]
        rate = gain_zz * bounds.bb84_asymptotic_rate(e_zz, e_xx)
        return {"rate": rate, "gain_zz": gain_zz, "e_zz": e_zz, "e_xx": e_xx, "c": None}
    _, e_xx = obs[("X", "X")]
    _, e_xy = obs[("X", "Y")]
    if variant in ("six_state", "four_state"):
        _, e_yx = obs[("Y", "X")]
        _, e_yy = obs[("Y", "Y")]
        c = bounds.c_prime(e_xx, e_xy, e_yx, e_yy)
    else:
        c = c_bound_from_rates(variant, e_zz, e_xx, e_xy, slack=slack)
    rate = gain_zz * bounds.asymptotic_rate(e_zz, c)
    return {"rate": rate, "gain_zz": gain_zz, "e_zz": e_zz, "e_xx": e_xx, "c": c}


def wcs_finite_key(
    variant: str,
    params: channel.ChannelParams,
    source: channel.SourceParams,
    security: finitekey.SecurityParams,
    mode: str = "finite",
    slack: float = 1e-6,
    cache: dict | None = None,
    observables: dict | None = None,
) -> finitekey.FiniteKeyReport:
    """Simulated decoy-state key rate for a weak coherent source.

    ``mode='finite'`` runs the full concentration-corrected chain on the
    expected counts of the block; ``mode='asymptotic'`` reruns the same
    chain with every statistical shift and block penalty disabled.  BB84
    replaces the C-based leakage with h(e_xx) of the single-photon bound.
    ``cache`` memoizes solver calls and ``observables`` precomputed gains
    for optimizer loops.
    """
    if mode not in ("finite", "asymptotic"):
        raise ValueError(f"mode must be 'finite' or 'asymptotic', got {mode!r}")
    sec = security.asymptotic() if mode == "asymptotic" else security
    counts = channel.expected_counts(variant, params, source, observables=observables)
    est = finitekey.decoy_estimates(counts, source, sec, variant)
    if est.s_zz_1 <= 0.0:
        c_l, i_e = 0.0, 1.0
    elif variant == "bb84_three_state":
        c_l = 0.0
        i_e = binary_entropy(est.e_pair[("X", "X")])
    elif variant in ("six_state", "four_state"):
        c_l = bounds.c_prime(
            est.e_pair[("X", "X")],
            est.e_pair[("X", "Y")],
            est.e_pair[("Y", "X")],
            est.e_pair[("Y", "Y")],
        )
        i_e = bounds.eve_information_clamped(c_l, est.e_zz_1)
    else:
        c_l = c_bound_from_rates(
            variant,
            est.e_zz_1,
            est.e_pair[("X", "X")],
            est.e_pair[("X", "Y")],
            slack=slack,
            cache=cache,
        )
        i_e = bounds.eve_information_clamped(c_l, est.e_zz_1)
    zz = counts[("Z", "Z")]
    length = finitekey.key_length(est, counts, i_e, sec, source.n_pulses)
    rate = length / source.n_pulses if source.n_pulses > 0 else 0.0
    return finitekey.FiniteKeyReport(
        variant=variant,
        estimate=est,
        c_lower=c_l,
        i_e=i_e,
        e_zz_observed=zz.error_rate(),
        n_zz=zz.n_total,
        length=length,
        rate=rate,
    )


def error_tolerance(variant: str, lo: float = 0.02, hi: float = 0.2, tol: float = 1e-4) -> float:
    """Key-basis error rate where the equal-error-family rate hits zero (bisection)."""
    f_lo = qber_family_rate(variant, lo)
    if f_lo <= 0.0:
        raise ValueError(f"rate already zero at e={lo}")
    f_hi = qber_family_rate(variant, hi)
    if f_hi > 0.0:
        raise ValueError(f"rate still positive at e={hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if qber_family_rate(variant, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
