"""Degraded and less noisy orderings between receiver channels.

``Y_s`` is less noisy than ``Y_t`` when ``I(U;Y_s) >= I(U;Y_t)`` for every
``U -> X -> (Y_s, Y_t)``. Writing ``g(p) = H(pW_s) - H(pW_t)``, the gap
``I(U;Y_s) - I(U;Y_t)`` equals ``g(E p_U) - E g(p_U)``, so the order holds iff
``g`` is concave on the simplex. A concavity violation at a two-point mixture
is itself a binary ``U`` refuting the order. Degradedness (``W_t = W_s M``
for a stochastic ``M``) is the only certificate we issue.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from ._parallel import pmap
from .channels import BroadcastChannel, ChannelMatrix, entropy_rows, mutual_information
from .errors import DimensionMismatch

DEFAULT_TRIALS = 10_000
DEFAULT_TOL = 1e-9
_CHUNK = 2048


class OrderStatus(enum.Enum):
    CERTIFIED = "CertifiedLessNoisy"
    CONSISTENT = "ConsistentWithLessNoisy"
    NOT_LESS_NOISY = "NotLessNoisy"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Witness:
    """Binary ``U`` with ``P(U=0) = lam``, ``X|U=0 ~ p0``, ``X|U=1 ~ p1``."""

    lam: float
    p0: np.ndarray
    p1: np.ndarray
    gap: float  # I(U;Y_t) - I(U;Y_s), bits


@dataclass(frozen=True)
class OrderVerdict:
    status: OrderStatus
    certificate: Optional[ChannelMatrix] = None
    witness: Optional[Witness] = None

    @property
    def ok(self) -> bool:
        return self.status is not OrderStatus.NOT_LESS_NOISY


def _check_pair(ws: ChannelMatrix, wt: ChannelMatrix) -> None:
    if ws.input_size != wt.input_size:
        raise DimensionMismatch(f"input sizes differ: {ws.input_size} vs {wt.input_size}")


def _residual(ws: ChannelMatrix, m: np.ndarray, wt: ChannelMatrix) -> float:
    return float(np.max(np.abs(ws.rows @ m - wt.rows)))


def _polish(ws: ChannelMatrix, wt: ChannelMatrix, m: np.ndarray) -> np.ndarray:
    """Re-solve the equality system on the LP's support by least squares.

    Interior-point and simplex solvers stop at ~1e-7 feasibility; when the
    support is right this recovers the exact solution to rounding.
    """
    a, b = ws.output_size, wt.output_size
    support = np.argwhere(m > 1e-10)
    if support.size == 0:
        return m
    col = {tuple(ij): n for n, ij in enumerate(map(tuple, support))}
    n_var = len(col)
    eqs = ws.input_size * b + a
    lhs = np.zeros((eqs, n_var))
    rhs = np.zeros(eqs)
    for (i, j), n in col.items():
        # (ws @ m)[x, j] picks up ws[x, i] * m[i, j]
        lhs[np.arange(ws.input_size) * b + j, n] = ws.rows[:, i]
        lhs[ws.input_size * b + i, n] = 1.0
    rhs[: ws.input_size * b] = wt.rows.ravel()
    rhs[ws.input_size * b:] = 1.0
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if np.any(sol < -1e-12):
        return m
    out = np.zeros_like(m)
    for (i, j), n in col.items():
        out[i, j] = max(sol[n], 0.0)
    out /= out.sum(axis=1, keepdims=True)
    return out if _residual(ws, out, wt) <= _residual(ws, m, wt) else m


def is_degraded(ws: ChannelMatrix, wt: ChannelMatrix, tol: float = DEFAULT_TOL) -> Optional[ChannelMatrix]:
    """Find a stochastic ``M`` with ``||ws M - wt||_inf <= tol``, or return None.

    Solved as an LP over ``M >= 0`` (rows summing to one) and a slack ``t``,
    minimising the entrywise residual bound ``t``.
    """
    _check_pair(ws, wt)
    nx, a, b = ws.input_size, ws.output_size, wt.output_size
    n_m = a * b
    # variables: vec(M) row-major, then t
    c = np.zeros(n_m + 1)
    c[-1] = 1.0
    a_eq = np.zeros((a, n_m + 1))
    for i in range(a):
        a_eq[i, i * b:(i + 1) * b] = 1.0
    b_eq = np.ones(a)
    # (ws M)[x, j] = sum_i ws[x, i] M[i, j]
    prod = np.zeros((nx * b, n_m))
    for x in range(nx):
        for j in range(b):
            prod[x * b + j, j::b] = ws.rows[x]
    ones = np.ones((nx * b, 1))
    a_ub = np.vstack([np.hstack([prod, -ones]), np.hstack([-prod, -ones])])
    b_ub = np.concatenate([wt.rows.ravel(), -wt.rows.ravel()])
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * (n_m + 1),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        return None
    m = np.clip(res.x[:n_m].reshape(a, b), 0.0, None)
    m /= m.sum(axis=1, keepdims=True)
    m = _polish(ws, wt, m)
    if _residual(ws, m, wt) > tol:
        return None
    return ChannelMatrix(m)


def concavity_gap(ws: ChannelMatrix, wt: ChannelMatrix, lam, p0, p1) -> np.ndarray:
    """``I(U;Y_t) - I(U;Y_s)`` for binary ``U``; vectorised over leading axes.

    Positive values refute ``Y_s`` less noisy than ``Y_t``.
    """
    lam = np.asarray(lam, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)

    def g(p):
        return entropy_rows(p @ ws.rows) - entropy_rows(p @ wt.rows)

    mix = lam[..., None] * p0 + (1 - lam[..., None]) * p1
    return lam * g(p0) + (1 - lam) * g(p1) - g(mix)


def witness_gap(ws: ChannelMatrix, wt: ChannelMatrix, w: Witness) -> float:
    """Recompute a witness gap from mutual informations (independent of ``concavity_gap``)."""
    joint_u = np.array([w.lam, 1 - w.lam])
    cond = ChannelMatrix(np.vstack([w.p0, w.p1]))
    i_t = mutual_information(joint_u, ChannelMatrix(cond.rows @ wt.rows))
    i_s = mutual_information(joint_u, ChannelMatrix(cond.rows @ ws.rows))
    return i_t - i_s


def _sample_simplex(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    e = rng.standard_exponential((count, dim))
    return e / e.sum(axis=1, keepdims=True)


def _vertex_candidates(dim: int):
    eye = np.eye(dim)
    pairs = [(a, b) for a in range(dim) for b in range(a + 1, dim)]
    if not pairs:
        return np.empty(0), np.empty((0, dim)), np.empty((0, dim))
    lam = np.full(len(pairs), 0.5)
    return lam, eye[[a for a, _ in pairs]], eye[[b for _, b in pairs]]


def less_noisy_test(
    ws: ChannelMatrix,
    wt: ChannelMatrix,
    trials: int = DEFAULT_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    threads: int = 1,
) -> OrderVerdict:
    """Decide ``Y_s`` less noisy than ``Y_t`` as far as the evidence allows.

    A degrading channel gives ``CERTIFIED``. Otherwise the uniform midpoints of
    simplex vertices and ``trials`` random mixtures are scanned for a concavity
    violation larger than ``tol``; the largest one is returned as witness.
    """
    _check_pair(ws, wt)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m = is_degraded(ws, wt, tol)
    if m is not None:
        return OrderVerdict(OrderStatus.CERTIFIED, certificate=m)

    dim = ws.input_size
    rng = np.random.default_rng(seed)
    # drawn sequentially in trial order; evaluation below may be split freely
    lam_r = rng.uniform(size=trials)
    p0_r = _sample_simplex(rng, trials, dim)
    p1_r = _sample_simplex(rng, trials, dim)
    lam_v, p0_v, p1_v = _vertex_candidates(dim)
    lam = np.concatenate([lam_v, lam_r])
    p0 = np.vstack([p0_v, p0_r])
    p1 = np.vstack([p1_v, p1_r])

    chunks = [slice(i, min(i + _CHUNK, lam.size)) for i in range(0, lam.size, _CHUNK)]
    gaps = np.concatenate(pmap(lambda s: concavity_gap(ws, wt, lam[s], p0[s], p1[s]), chunks, threads))
    best = int(np.argmax(gaps))
    if gaps[best] > tol:
        w = Witness(float(lam[best]), p0[best].copy(), p1[best].copy(), float(gaps[best]))
        return OrderVerdict(OrderStatus.NOT_LESS_NOISY, witness=w)
    return OrderVerdict(OrderStatus.CONSISTENT)


def order_chain(
    bc: BroadcastChannel,
    trials: int = DEFAULT_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    threads: int = 1,
) -> list[OrderVerdict]:
    """Verdicts for each adjacent pair ``(Y_l, Y_{l+1})``."""
    return [
        less_noisy_test(bc[l], bc[l + 1], trials, tol, seed + l, threads)
        for l in range(bc.k - 1)
    ]


def chain_confirmed(verdicts) -> bool:
    return all(v.ok for v in verdicts)
