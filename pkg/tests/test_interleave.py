import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lessnoisy.channels import BroadcastChannel, ChannelMatrix, bsc, compose, constant_channel, identity
from lessnoisy.cli import fixture
from lessnoisy.errors import DimensionMismatch, NotApplicable
from lessnoisy.interleave import (
    CertificateStatus,
    InterleavingCertificate,
    builtin_certificate,
    effective_virtual_channels,
    interleaved_chain,
    verify_certificate,
)
from lessnoisy.ordering import OrderStatus

from conftest import random_cascade


def test_effective_identity():
    assert effective_virtual_channels(InterleavingCertificate((identity(2),))) == [identity(2)]


def test_effective_bsc_chain():
    cert = InterleavingCertificate((bsc(0.1), bsc(0.2), bsc(0.05)))
    eff = effective_virtual_channels(cert)
    # crossover of BSC(a) then BSC(b) is a + b - 2ab
    for w, p in zip(eff, (0.1, 0.1 + 0.2 - 2 * 0.02, 0.26 + 0.05 - 2 * 0.26 * 0.05)):
        np.testing.assert_allclose(w.rows, bsc(p).rows, atol=1e-12)
        np.testing.assert_allclose(w.rows.sum(axis=1), 1, atol=1e-12)


def test_certificate_dimension_checks(cascade):
    with pytest.raises(DimensionMismatch):
        InterleavingCertificate((bsc(0.1), identity(3)))
    with pytest.raises(DimensionMismatch):
        InterleavingCertificate(())
    with pytest.raises(DimensionMismatch):
        verify_certificate(cascade, InterleavingCertificate((bsc(0.1),)))
    with pytest.raises(DimensionMismatch):
        verify_certificate(cascade, InterleavingCertificate((identity(3), identity(3))))


def test_interleaved_chain_names(cascade):
    names = [name for name, _ in interleaved_chain(cascade, builtin_certificate(cascade, "three_receiver"))]
    assert names == ["Y1", "V1", "Y2", "V2", "Y3"]


def test_degraded_cascade_certified(cascade):
    cert = builtin_certificate(cascade, "degraded")
    np.testing.assert_allclose(cert.virtuals[0].rows, bsc(0.2).rows, atol=1e-12)
    np.testing.assert_allclose(cert.virtuals[1].rows, bsc(1 / 6).rows, atol=1e-6)
    report = verify_certificate(cascade, cert)
    assert len(report.links) == 2 * cascade.k - 2
    assert report.status is CertificateStatus.CERTIFIED and report.passed


def test_degraded_not_applicable():
    bc = BroadcastChannel((bsc(0.2), bsc(0.1)))
    with pytest.raises(NotApplicable):
        builtin_certificate(bc, "degraded")
    with pytest.raises(NotApplicable):
        builtin_certificate(bc, "bogus")


def test_three_receiver_certificate():
    spec = fixture("three_receiver")
    cert = builtin_certificate(spec.bc, "three_receiver")
    assert cert.virtuals == (spec.bc[1], identity(2))
    report = verify_certificate(spec.bc, cert)
    assert report.status is CertificateStatus.PASS and report.passed
    assert [l.verdict.status for l in report.links][1:] == [OrderStatus.CERTIFIED] * 3
    with pytest.raises(NotApplicable):
        builtin_certificate(BroadcastChannel((bsc(0.1), bsc(0.2))), "three_receiver")


def test_constant_virtual_fails(cascade):
    cert = InterleavingCertificate((constant_channel(2, [1.0]), identity(1)))
    report = verify_certificate(cascade, cert)
    link = report.links[1]
    assert (link.stronger, link.weaker) == ("V1", "Y2")
    assert link.verdict.status is OrderStatus.NOT_LESS_NOISY
    assert report.status is CertificateStatus.FAIL and not report.passed


def test_nested_certificate(cascade):
    cert = builtin_certificate(cascade, "nested")
    eff = effective_virtual_channels(cert)
    assert [w.output_size for w in eff] == [4, 2]
    np.testing.assert_allclose(eff[1].rows, bsc(0.3).rows, atol=1e-12)
    assert verify_certificate(cascade, cert).passed


def test_association_order_independent():
    rng = np.random.default_rng(4)
    a, b, c = (ChannelMatrix(rng.dirichlet(np.ones(3), 3)) for _ in range(3))
    eff = effective_virtual_channels(InterleavingCertificate((a, b, c)))
    np.testing.assert_allclose(eff[2].rows, compose(a, compose(b, c)).rows, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_three_receiver_on_less_noisy_triples(seed):
    bc = random_cascade(np.random.default_rng(seed))
    report = verify_certificate(bc, builtin_certificate(bc, "three_receiver"), trials=500)
    assert all(l.verdict.status is not OrderStatus.NOT_LESS_NOISY for l in report.links)
    assert verify_certificate(bc, builtin_certificate(bc, "degraded"), trials=500).status is CertificateStatus.CERTIFIED
