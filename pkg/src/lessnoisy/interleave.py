"""Interleavability certificates for k-receiver less noisy channels.

A certificate is a chain of virtual receivers ``X -> V_1 -> ... -> V_{k-1}``
such that ``Y_1 >= V_1 >= Y_2 >= ... >= V_{k-1} >= Y_k`` in the less noisy
order. Only marginals ``p(v_j | x)`` matter for that order, so each link is
checked on the composed channel from X.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import accumulate


from .channels import (
    BroadcastChannel,
    ChannelMatrix,
    compose,
    identity,
    product_channel,
    projection_channel,
)
from .errors import DimensionMismatch, NotApplicable
from .ordering import DEFAULT_TOL, DEFAULT_TRIALS, OrderStatus, OrderVerdict, is_degraded, less_noisy_test


class CertificateStatus(enum.Enum):
    CERTIFIED = "Certified"
    PASS = "Pass"
    FAIL = "Fail"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class InterleavingCertificate:
    """``virtuals = [W(V_1|X), W(V_2|V_1), ..., W(V_{k-1}|V_{k-2})]``."""

    virtuals: tuple[ChannelMatrix, ...]

    def __post_init__(self):
        virtuals = tuple(self.virtuals)
        if not virtuals:
            raise DimensionMismatch("certificate needs at least one virtual receiver")
        for a, b in zip(virtuals, virtuals[1:]):
            if a.output_size != b.input_size:
                raise DimensionMismatch(f"virtual channels {a.shape} and {b.shape} do not chain")
        object.__setattr__(self, "virtuals", virtuals)


@dataclass(frozen=True)
class LinkVerdict:
    stronger: str
    weaker: str
    verdict: OrderVerdict


@dataclass(frozen=True)
class CertificateReport:
    links: tuple[LinkVerdict, ...]

    @property
    def status(self) -> CertificateStatus:
        if any(l.verdict.status is OrderStatus.NOT_LESS_NOISY for l in self.links):
            return CertificateStatus.FAIL
        if all(l.verdict.status is OrderStatus.CERTIFIED for l in self.links):
            return CertificateStatus.CERTIFIED
        return CertificateStatus.PASS

    @property
    def passed(self) -> bool:
        return self.status is not CertificateStatus.FAIL


def effective_virtual_channels(cert: InterleavingCertificate) -> list[ChannelMatrix]:
    """``W(V_j | X)`` for each j, by composing the chain from the input."""
    return list(accumulate(cert.virtuals, compose))


def interleaved_chain(bc: BroadcastChannel, cert: InterleavingCertificate) -> list[tuple[str, ChannelMatrix]]:
    """``[Y_1, V_1, Y_2, ..., V_{k-1}, Y_k]`` as named channels from X."""
    if len(cert.virtuals) != bc.k - 1:
        raise DimensionMismatch(f"need {bc.k - 1} virtual receivers, got {len(cert.virtuals)}")
    if cert.virtuals[0].input_size != bc.input_size:
        raise DimensionMismatch("first virtual channel must take the channel input")
    chain = [("Y1", bc[0])]
    for j, v in enumerate(effective_virtual_channels(cert), start=1):
        chain.append((f"V{j}", v))
        chain.append((f"Y{j + 1}", bc[j]))
    return chain


def verify_certificate(
    bc: BroadcastChannel,
    cert: InterleavingCertificate,
    trials: int = DEFAULT_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    threads: int = 1,
) -> CertificateReport:
    """Run the less noisy test on each adjacent link of the interleaved chain."""
    chain = interleaved_chain(bc, cert)
    links = []
    for i, ((sname, ws), (tname, wt)) in enumerate(zip(chain, chain[1:])):
        verdict = less_noisy_test(ws, wt, trials, tol, seed + i, threads)
        links.append(LinkVerdict(sname, tname, verdict))
    return CertificateReport(tuple(links))


def builtin_certificate(bc: BroadcastChannel, kind: str, tol: float = DEFAULT_TOL) -> InterleavingCertificate:
    """Certificates for the standard interleavable families.

    ``degraded``: ``V_i = Y_{i+1}`` for a physically degraded cascade.
    ``nested``: ``V_i = (Y_{i+1}, ..., Y_k)``.
    ``three_receiver``: ``V_1 = V_2 = Y_2`` for ``k = 3``.
    """
    if kind == "degraded":
        links = [is_degraded(bc[l], bc[l + 1], tol) for l in range(bc.k - 1)]
        missing = [l + 1 for l, m in enumerate(links) if m is None]
        if missing:
            raise NotApplicable(f"no degrading channel from Y{missing[0]} to Y{missing[0] + 1}")
        return InterleavingCertificate((bc[1], *links[1:]))
    if kind == "nested":
        sizes = [w.output_size for w in bc.receivers]
        virtuals = [product_channel(bc.receivers[1:])]
        for i in range(2, bc.k):
            # V_i drops the first coordinate of V_{i-1} = (Y_i, ..., Y_k)
            tail = sizes[i - 1:]
            virtuals.append(projection_channel(tail, list(range(1, len(tail)))))
        return InterleavingCertificate(tuple(virtuals))
    if kind == "three_receiver":
        if bc.k != 3:
            raise NotApplicable(f"three_receiver certificate needs k = 3, got k = {bc.k}")
        return InterleavingCertificate((bc[1], identity(bc[1].output_size)))
    raise NotApplicable(f"unknown certificate kind {kind!r}")


BUILTIN_KINDS = ("degraded", "nested", "three_receiver")
