import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lessnoisy.channels import BroadcastChannel, ChannelMatrix, bsc, compose, constant_channel, identity
from lessnoisy.errors import DimensionMismatch
from lessnoisy.ordering import (
    OrderStatus,
    Witness,
    chain_confirmed,
    concavity_gap,
    is_degraded,
    less_noisy_test,
    order_chain,
    witness_gap,
)

from conftest import C1, C2, channels


def test_identity_degrading_channel():
    w = bsc(0.3)
    m = is_degraded(w, w)
    assert m is not None
    assert np.max(np.abs(w.rows @ m.rows - w.rows)) <= 1e-9


def test_bsc_degrading_channel_closed_form():
    m = is_degraded(bsc(0.1), bsc(0.2))
    q = (0.2 - 0.1) / (1 - 2 * 0.1)
    assert q == pytest.approx(1 / 8)
    np.testing.assert_allclose(m.rows, bsc(q).rows, atol=1e-6)
    assert np.max(np.abs(bsc(0.1).rows @ m.rows - bsc(0.2).rows)) <= 1e-9


def test_reversed_pair_not_degraded():
    assert is_degraded(bsc(0.2), bsc(0.1)) is None


def test_mismatched_inputs():
    with pytest.raises(DimensionMismatch):
        is_degraded(bsc(0.1), identity(3))
    with pytest.raises(DimensionMismatch):
        less_noisy_test(bsc(0.1), identity(3))


def test_same_channel_certified():
    v = less_noisy_test(bsc(0.25), bsc(0.25))
    assert v.status is OrderStatus.CERTIFIED and v.certificate is not None


def test_degraded_pair_certified():
    assert less_noisy_test(bsc(0.1), bsc(0.2)).status is OrderStatus.CERTIFIED


def test_reversed_pair_witness():
    v = less_noisy_test(bsc(0.2), bsc(0.1))
    assert v.status is OrderStatus.NOT_LESS_NOISY and not v.ok
    w = v.witness
    assert w.lam == 0.5
    np.testing.assert_array_equal(w.p0, [1, 0])
    np.testing.assert_array_equal(w.p1, [0, 1])
    assert w.gap == pytest.approx(C1 - C2, abs=1e-12)
    assert w.gap == pytest.approx(0.25293, abs=1e-5)
    assert witness_gap(bsc(0.2), bsc(0.1), w) == pytest.approx(w.gap, abs=1e-9)


def test_bec_less_noisy_than_bsc_but_not_degraded():
    bec = ChannelMatrix([[0.7, 0.3, 0.0], [0.0, 0.3, 0.7]])
    assert is_degraded(bec, bsc(0.1)) is None
    assert less_noisy_test(bec, bsc(0.1)).status is OrderStatus.CONSISTENT
    assert less_noisy_test(bsc(0.1), bec).status is OrderStatus.NOT_LESS_NOISY


def test_constant_channel_is_dominated():
    c = constant_channel(2, [0.5, 0.5])
    assert less_noisy_test(bsc(0.3), c).status is OrderStatus.CERTIFIED
    assert less_noisy_test(c, bsc(0.3)).status is OrderStatus.NOT_LESS_NOISY


def test_order_chain_examples(cascade):
    verdicts = order_chain(cascade)
    assert len(verdicts) == 2
    assert all(v.status is OrderStatus.CERTIFIED for v in verdicts)
    assert chain_confirmed(verdicts)
    same = order_chain(BroadcastChannel((bsc(0.2),) * 3))
    assert all(v.status is OrderStatus.CERTIFIED for v in same)
    bad = order_chain(BroadcastChannel((bsc(0.1), bsc(0.3), bsc(0.1))))
    assert bad[1].status is OrderStatus.NOT_LESS_NOISY and not chain_confirmed(bad)


def test_concavity_gap_matches_mutual_information():
    rng = np.random.default_rng(5)
    ws, wt = bsc(0.2), ChannelMatrix([[0.6, 0.4], [0.3, 0.7]])
    for _ in range(20):
        p0, p1 = rng.dirichlet([1, 1], size=2)
        lam = rng.uniform()
        w = Witness(lam, p0, p1, float(concavity_gap(ws, wt, lam, p0, p1)))
        assert witness_gap(ws, wt, w) == pytest.approx(w.gap, abs=1e-12)


def test_thread_count_does_not_change_verdict():
    ws = ChannelMatrix([[0.5, 0.3, 0.2], [0.1, 0.1, 0.8], [0.3, 0.3, 0.4]])
    wt = ChannelMatrix([[0.7, 0.3], [0.2, 0.8], [0.5, 0.5]])
    a = less_noisy_test(ws, wt, trials=5000, seed=3, threads=1)
    b = less_noisy_test(ws, wt, trials=5000, seed=3, threads=3)
    assert a.status == b.status
    if a.witness is not None:
        assert a.witness.gap == b.witness.gap and a.witness.lam == b.witness.lam


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_degraded_implies_no_violation(data):
    ws = data.draw(channels())
    m = data.draw(channels(nx=ws.output_size))
    wt = compose(ws, m)
    assert is_degraded(ws, wt) is not None
    rng = np.random.default_rng(data.draw(st.integers(0, 2**16)))
    p0 = rng.dirichlet(np.ones(ws.input_size), size=1000)
    p1 = rng.dirichlet(np.ones(ws.input_size), size=1000)
    lam = rng.uniform(size=1000)
    assert np.max(concavity_gap(ws, wt, lam, p0, p1)) <= 1e-9
    assert less_noisy_test(ws, wt, trials=200).status is not OrderStatus.NOT_LESS_NOISY


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_verdict_contracts(data):
    nx = data.draw(st.integers(2, 3))
    ws, wt = data.draw(channels(nx=nx)), data.draw(channels(nx=nx))
    v = less_noisy_test(ws, wt, trials=300, seed=data.draw(st.integers(0, 100)))
    if v.status is OrderStatus.CERTIFIED:
        assert np.max(np.abs(ws.rows @ v.certificate.rows - wt.rows)) <= 1e-9
    elif v.status is OrderStatus.NOT_LESS_NOISY:
        assert v.witness.gap > 1e-9
        assert witness_gap(ws, wt, v.witness) == pytest.approx(v.witness.gap, abs=1e-9)
    # antisymmetry sanity
    assert less_noisy_test(ws, ws, trials=10).status is OrderStatus.CERTIFIED
