import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylfmm.exceptions import DomainError, PrecisionLossError
from cylfmm.greens import RingGeometry
from cylfmm.oracle import greens_quadrature
from cylfmm.specfun import (BACKWARD_HEADROOM, SWITCH_CHI, carlson_rd, carlson_rf, elliptic_ke, legendre_q_batch,
                            legendre_q_seed, legendre_q_sequence, miller_headroom)

# 30-digit mpmath values: K(k), E(k) with k the modulus
ELLIPTIC = [
    (0.0, 1.5707963267948966192, 1.5707963267948966192),
    (0.3, 1.6080486199305127984, 1.5348334649232490444),
    (0.9, 2.2805491384227703005, 1.1716970527816141138),
    (0.999999, 7.9474797735479670327, 1.0000074474777243921),
]

# 30-digit mpmath values of Q_{n-1/2}(chi) for n = 0, 1, 2, 5, 10, 17, 24
Q_ORDERS = (0, 1, 2, 5, 10, 17, 24)
Q_VALUES = {
    1.0001: (6.3379714137292352639, 4.3382633107099694309, 3.6722723781449754824, 2.7681187444030042313,
             2.0868932202239860565, 1.5780418457852358225, 1.2602152946265886381),
    1.005: (4.3799156892317312378, 2.3896130361380605929, 1.7421095720144241153, 0.92262674190919692333,
            0.42067462751292632585, 0.16545548875956126163, 0.070228016051425851712),
    1.0081: (4.1376403276898889892, 2.1523668618930478053, 1.513854602069212327, 0.73024918922662933657,
             0.28833552838636747004, 0.093277017132149556642, 0.032638459992520201782),
    1.5: (2.0189058199784232156, 0.39317514837200473104, 0.11338169008453505689, 0.0041745653916465122335,
          0.000024377561438024631537, 2.2326158250669199665e-8, 2.2352248611718233121e-11),
    5.0: (1.0010773804561062361, 0.050629509754072014013, 0.0038376048751113480624, 2.597432220552125427e-6,
          1.9569276952369690215e-11, 1.6199082467298415942e-18, 1.4669819800039126485e-25),
    1000.0: (0.070248160481942087817, 0.00001756204505981198131, 6.5857686124738401832e-9,
             5.4023924229891802737e-19, 1.2087451594331915266e-35, 7.2800543651923182898e-59,
             4.7970621824500808261e-82),
}


@pytest.mark.parametrize("k, kk, ee", ELLIPTIC)
def test_elliptic_integrals_match_reference(k, kk, ee):
    pair = elliptic_ke(k)
    assert pair.k_complete == pytest.approx(kk, rel=4e-16)
    assert pair.e_complete == pytest.approx(ee, rel=4e-16)


def test_elliptic_rejects_modulus_outside_unit_interval():
    for bad in (-0.1, 1.0, 1.5, float("nan")):
        with pytest.raises(DomainError):
            elliptic_ke(bad)


def test_carlson_special_values():
    # R_F(0, 1, 1) = pi / 2 and R_D(0, 2, 1) from the reference tabulation
    assert carlson_rf(0.0, 1.0, 1.0) == pytest.approx(math.pi / 2, rel=1e-15)
    assert carlson_rf(1.0, 1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert carlson_rd(1.0, 1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert carlson_rd(0.0, 2.0, 1.0) == pytest.approx(1.7972103521033883112, rel=1e-15)


@pytest.mark.parametrize("chi", sorted(Q_VALUES))
def test_legendre_sequence_matches_reference(chi):
    values = legendre_q_sequence(chi, 24).values
    for n, ref in zip(Q_ORDERS, Q_VALUES[chi]):
        assert values[n] == pytest.approx(ref, rel=5e-15), n


@pytest.mark.parametrize("chi", sorted(Q_VALUES))
def test_seed_pair_matches_reference(chi):
    q_m, q_p = legendre_q_seed(chi)
    assert q_m == pytest.approx(Q_VALUES[chi][0], rel=4e-16)
    assert q_p == pytest.approx(Q_VALUES[chi][1], rel=1e-14)


def test_backward_branch_example():
    seq = legendre_q_sequence(5.0, 17)
    assert seq.values[0] == pytest.approx(legendre_q_seed(5.0)[0], rel=1e-15)
    geo = RingGeometry(1.0, 1.0, math.sqrt(8.0))  # chi = 1 + 8/2 = 5
    scale = 2.0 * math.pi
    for n in range(18):
        assert seq.values[n] / scale == pytest.approx(greens_quadrature(geo, n), rel=1e-12)


def test_branches_agree_across_switch():
    for chi in (SWITCH_CHI * (1 - 1e-9), SWITCH_CHI, SWITCH_CHI * (1 + 1e-9)):
        fwd = legendre_q_sequence(chi, 17, branch="forward").values
        bwd = legendre_q_sequence(chi, 17, branch="backward").values
        np.testing.assert_allclose(fwd, bwd, rtol=1e-12)


def test_fixed_headroom_is_honoured():
    a = legendre_q_sequence(5.0, 17, headroom=BACKWARD_HEADROOM).values
    b = legendre_q_sequence(5.0, 17).values
    np.testing.assert_allclose(a, b, rtol=1e-15)
    with pytest.raises(DomainError):
        legendre_q_sequence(5.0, 17, headroom=1)


def test_headroom_grows_near_switch():
    assert miller_headroom(4.0, BACKWARD_HEADROOM) == BACKWARD_HEADROOM
    assert miller_headroom(SWITCH_CHI - 1.0, BACKWARD_HEADROOM) > BACKWARD_HEADROOM


@pytest.mark.parametrize("chi", [1.0, 0.5, 1.0 + 1e-15, float("nan"), float("inf")])
def test_invalid_argument_raises(chi):
    with pytest.raises(DomainError):
        legendre_q_sequence(chi, 5)


def test_negative_order_rejected():
    with pytest.raises(DomainError):
        legendre_q_sequence(2.0, -1)


def test_underflow_raises_instead_of_returning_zero():
    with pytest.raises(PrecisionLossError):
        legendre_q_sequence(1e200, 24)


def test_batch_matches_scalar_and_keeps_shape():
    cm1 = np.array([[1e-3, 0.5], [4.0, 100.0]])
    out = legendre_q_batch(cm1, 10)
    assert out.shape == (2, 2, 11)
    for idx in np.ndindex(cm1.shape):
        # the scalar path re-derives chi - 1 from chi, which rounds
        np.testing.assert_allclose(out[idx], legendre_q_sequence(1.0 + cm1[idx], 10).values, rtol=1e-12)
    assert legendre_q_batch(0.3, 4).shape == (5,)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-4.0, max_value=5.0))
def test_sequence_satisfies_recurrence_and_decreases(log_cm1):
    chi = 1.0 + 10.0 ** log_cm1
    q = legendre_q_sequence(chi, 24).values
    assert np.all(q > 0)
    assert np.all(np.diff(q) < 0)
    n = np.arange(1, 24)
    lhs = (2 * n + 1) * q[2:]
    rhs = 4 * n * chi * q[1:-1] - (2 * n - 1) * q[:-2]
    scale = 4 * n * chi * q[1:-1]
    assert np.all(np.abs(lhs - rhs) <= 1e-13 * scale)
