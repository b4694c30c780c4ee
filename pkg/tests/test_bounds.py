import numpy as np
import pytest

from rfiqkd import bounds, qubits
from rfiqkd.bounds import (
    MeasurementStatistics,
    build_constraints,
    bb84_asymptotic_rate,
    asymptotic_rate,
    c_prime,
    error_operator,
    eve_information,
    eve_information_clamped,
    lower_bound_C,
    phase_error_maxima,
)
from rfiqkd.channel import ChannelParams, statistics_table

import oracles


def equal_error_channel(e, beta=0.0):
    return ChannelParams(beta=beta, e_flip={"X": e, "Y": e, "Z": e})


def test_error_operator_zz_is_printed_form():
    zz = qubits.tensor(qubits.PAULI_Z, qubits.PAULI_Z)
    assert np.allclose(error_operator("zz"), 0.5 * (np.eye(4) - zz))


def test_error_operators_trace_and_spectrum():
    for pair in ("zz", "xx", "xy", "yx", "yy"):
        op = error_operator(pair)
        assert abs(np.trace(op).real - 2.0) < 1e-12
        w = np.linalg.eigvalsh(op)
        assert w.min() > -1e-12 and w.max() < 1.0 + 1e-12


def test_error_operators_match_projector_sums():
    # each error rate is a sum of joint-outcome cells; the operator identity
    # sum_i P_{a_i} x P_{b_j(i)} must reproduce the matrix exactly
    def proj(basis, bit):
        return qubits.projector(qubits.eigenstate(basis, bit))

    zz = sum(np.kron(proj("Z", i), proj("Z", 1 - i)) for i in (0, 1))
    assert np.allclose(zz, error_operator("zz"), atol=1e-12)
    yx = sum(np.kron(proj("Y", i), proj("X", i)) for i in (0, 1))
    assert np.allclose(yx, error_operator("yx"), atol=1e-12)
    yy = sum(np.kron(proj("Y", i), proj("Y", i)) for i in (0, 1))
    assert np.allclose(yy, error_operator("yy"), atol=1e-12)


def test_build_constraints_counts():
    three = MeasurementStatistics.from_rates(e_zz=0.0, e_xx=0.0, e_xy=0.5)
    assert len(build_constraints("three_state", three)) == 3
    six_table = statistics_table("six_state", equal_error_channel(0.05))
    assert len(build_constraints("six_state", six_table)) == 36
    four_table = statistics_table("four_state", equal_error_channel(0.05))
    assert len(build_constraints("four_state", four_table)) == 24


def test_build_constraints_rejects_extra_three_state_rates():
    stats = MeasurementStatistics.from_rates(e_zz=0.0, e_xx=0.0, e_xy=0.5, e_yy=0.1)
    with pytest.raises(ValueError):
        build_constraints("three_state", stats)


def test_z_cross_basis_cells_are_quarter():
    stats = statistics_table("six_state", equal_error_channel(0.05, beta=0.3))
    for i in (0, 1):
        for kappa in ("X", "Y"):
            for j in (0, 1):
                assert abs(stats.table[(("Z", i), (kappa, j))] - 0.25) < 1e-12


def test_lower_bound_c_perfect_channel_is_two():
    for variant in ("six_state", "four_state", "three_state"):
        res = lower_bound_C(variant, statistics_table(variant, equal_error_channel(0.0)))
        assert abs(res.c_l - 2.0) < 1e-4


@pytest.mark.parametrize(
    "rates,expected",
    [
        ((0.0072, 0.0262, 0.50), 1.77),
        ((0.0070, 0.2039, 0.1944), 1.42),
        ((0.0185, 0.0820, 0.50), 1.34),
        ((0.0171, 0.2176, 0.2156), 1.23),
    ],
)
def test_lower_bound_c_reference_run_values(rates, expected):
    e_zz, e_xx, e_xy = rates
    stats = MeasurementStatistics.from_rates(e_zz=e_zz, e_xx=e_xx, e_xy=e_xy)
    res = lower_bound_C("three_state", stats)
    assert abs(res.c_l - expected) < 0.02
    assert res.e_yx_max is not None and res.e_yy_max is not None


def test_three_state_bound_matches_oracle():
    stats = MeasurementStatistics.from_rates(e_zz=0.05, e_xx=0.05, e_xy=0.5)
    res = lower_bound_C("three_state", stats)
    cons = build_constraints("three_state", stats)
    oracle_val, _ = oracles.pg_min_sum_squares(
        bounds.C_OBJECTIVE_TERMS, [a for a, _ in cons], [b for _, b in cons]
    )
    assert abs(res.c_l - oracle_val) < 1e-4


def test_six_four_equivalence_on_grid():
    for e in (0.0, 0.05, 0.10, 0.15):
        cs = {
            v: lower_bound_C(v, statistics_table(v, equal_error_channel(e))).c_l
            for v in ("six_state", "four_state")
        }
        assert abs(cs["six_state"] - cs["four_state"]) < 1e-5


def test_three_state_never_exceeds_four_state():
    for e in (0.0, 0.04, 0.08, 0.12):
        ch = equal_error_channel(e)
        c4 = lower_bound_C("four_state", statistics_table("four_state", ch)).c_l
        c3 = lower_bound_C("three_state", statistics_table("three_state", ch)).c_l
        assert c3 <= c4 + 1e-7


def test_beta_invariance_three_state():
    for e in (0.02, 0.08):
        vals = [
            lower_bound_C(
                "three_state", statistics_table("three_state", equal_error_channel(e, beta))
            ).c_l
            for beta in (0.0, np.pi / 8, np.pi / 4, 3 * np.pi / 8)
        ]
        assert max(vals) - min(vals) < 1e-4


def test_monotone_degradation_in_e():
    es = np.linspace(0.0, 0.15, 50)
    vals = [
        lower_bound_C("three_state", statistics_table("three_state", equal_error_channel(e))).c_l
        for e in es
    ]
    for lo, hi in zip(vals[1:], vals):
        assert lo <= hi + 1e-7


def test_joint_bound_at_least_as_tight_as_phase_error_route():
    stats = MeasurementStatistics.from_rates(e_zz=0.03, e_xx=0.04, e_xy=0.45)
    res = lower_bound_C("three_state", stats)
    routed = c_prime(
        0.04, 0.45, min(res.e_yx_max, 0.5), min(res.e_yy_max, 0.5)
    )
    assert res.c_l >= routed - 1e-7


def test_phase_error_maxima_ideal_limits():
    for variant in ("six_state", "four_state"):
        for e in (0.0, 0.05, 0.10):
            stats = statistics_table(variant, equal_error_channel(e))
            e_yx, e_yy = phase_error_maxima(variant, stats)
            assert abs(e_yx - 0.5) < 1e-3
            assert abs(e_yy - e) < 1e-3


def test_c_prime_values():
    assert c_prime(0.5, 0.5, 0.5, 0.5) == 0.0
    assert abs(c_prime(0.0, 0.5, 0.5, 0.0) - 2.0) < 1e-12
    # frozen direct evaluation: 2*(1 - 2*0.0262)^2
    assert abs(c_prime(0.0262, 0.5, 0.5, 0.0262) - 1.7958915200000001) < 1e-12
    with pytest.raises(ValueError):
        c_prime(0.6, 0.1, 0.1, 0.1)


def test_eve_information_limits():
    assert eve_information(2.0, 0.0) == 0.0
    assert abs(eve_information(0.0, 0.10) - 1.0) < 1e-12
    with pytest.raises(ValueError):
        eve_information(1.0, 0.20)
    assert eve_information_clamped(1.0, 0.20) == 1.0


def test_eve_information_monotone_in_c():
    for e_zz in (0.01, 0.05, 0.10):
        cs = np.linspace(0.0, 2.0, 20)
        infos = [eve_information_clamped(c, e_zz) for c in cs]
        for lo, hi in zip(infos, infos[1:]):
            assert hi <= lo + 1e-9


def test_asymptotic_rate_endpoints():
    assert asymptotic_rate(0.0, 2.0) == 1.0
    assert asymptotic_rate(0.2, 2.0) == 0.0  # out of formula validity -> no key


def test_bb84_rate():
    assert bb84_asymptotic_rate(0.0, 0.0) == 1.0
    # near the 11% threshold; frozen from direct evaluation
    val = bb84_asymptotic_rate(0.11, 0.11)
    assert 0.0 < val < 5e-4
    with pytest.raises(ValueError):
        bb84_asymptotic_rate(0.6, 0.1)


def test_statistics_validation():
    with pytest.raises(ValueError):
        MeasurementStatistics.from_rates(e_zz=0.7, e_xx=0.0, e_xy=0.5)
    with pytest.raises(ValueError):
        MeasurementStatistics.from_rates(e_zz=0.1, e_bad=0.1, e_xy=0.5)
    with pytest.raises(ValueError):
        MeasurementStatistics(mode="probability_table", table={})
