"""Exhaustive check of the multi-letter less noisy inequalities.

For ``M -> X^n -> (Y_s^n, Y_t^n)`` with ``Y_s`` less noisy than ``Y_t``, and
every ``1 <= i <= n``:

* part 1: ``I(Y_s^{i-1}; Y_{t,i} | M) >= I(Y_t^{i-1}; Y_{t,i} | M)``
* part 2: ``I(Y_s^{i-1}; Y_{s,i} | M) >= I(Y_t^{i-1}; Y_{s,i} | M)``

Small instances are enumerated exactly. A negative slack on any instance
shows the pair is *not* less noisy; absence of one proves nothing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._parallel import pmap, task_rng
from .channels import ChannelMatrix, ZERO_FLOOR, entropy_rows
from .errors import AlphabetOverflow, DimensionMismatch, ValidationError

MAX_BLOCKLENGTH = 4
MAX_M = 4
MAX_JOINT_STATES = 1_000_000
VIOLATION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MultiLetterInstance:
    """Source law ``p(m, x^n)`` plus the two marginal channels.

    ``joint_mx`` has shape ``(m_size, |X|, ..., |X|)`` (n input axes).
    ``coupling`` optionally gives ``p(y_s, y_t | x)`` with shape
    ``(|X|, |Y_s|, |Y_t|)``; by default the outputs are independent given x.
    """

    joint_mx: np.ndarray
    ws: ChannelMatrix
    wt: ChannelMatrix
    coupling: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.ws.input_size != self.wt.input_size:
            raise DimensionMismatch("ws and wt must share the input alphabet")
        nx = self.ws.input_size
        p = np.asarray(self.joint_mx, dtype=float)
        if p.ndim == 1:
            raise ValidationError("joint_mx must be shaped (m_size, |X|, ..., |X|)")
        if any(d != nx for d in p.shape[1:]):
            raise DimensionMismatch(f"input axes of joint_mx must have size {nx}, got {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError("joint_mx must be a probability distribution")
        n = p.ndim - 1
        if not 1 <= n <= MAX_BLOCKLENGTH:
            raise AlphabetOverflow(f"blocklength {n} outside 1..{MAX_BLOCKLENGTH}")
        if p.shape[0] > MAX_M:
            raise AlphabetOverflow(f"|M| = {p.shape[0]} exceeds {MAX_M}")
        states = p.size * (self.ws.output_size * self.wt.output_size) ** n
        if states > MAX_JOINT_STATES:
            raise AlphabetOverflow(f"joint has {states} states, cap is {MAX_JOINT_STATES}")
        object.__setattr__(self, "joint_mx", p / p.sum())
        if self.coupling is not None:
            c = np.asarray(self.coupling, dtype=float)
            if c.shape != (nx, self.ws.output_size, self.wt.output_size):
                raise DimensionMismatch(f"coupling must have shape {(nx, self.ws.output_size, self.wt.output_size)}")
            if not (np.allclose(c.sum(axis=2), self.ws.rows, atol=1e-12)
                    and np.allclose(c.sum(axis=1), self.wt.rows, atol=1e-12)):
                raise ValidationError("coupling marginals must equal ws and wt")
            object.__setattr__(self, "coupling", c)

    @property
    def n(self) -> int:
        return self.joint_mx.ndim - 1

    @property
    def m_size(self) -> int:
        return self.joint_mx.shape[0]

    def pair_law(self) -> np.ndarray:
        if self.coupling is not None:
            return self.coupling
        return self.ws.rows[:, :, None] * self.wt.rows[:, None, :]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m_size": self.m_size,
            "joint_mx": self.joint_mx.tolist(),
            "ws": self.ws.rows.tolist(),
            "wt": self.wt.rows.tolist(),
            "coupling": None if self.coupling is None else self.coupling.tolist(),
        }


def build_joint(inst: MultiLetterInstance) -> np.ndarray:
    """Full joint over ``(M, X_1..X_n, Ys_1..Ys_n, Yt_1..Yt_n)``, one axis each."""
    n = inst.n
    law = inst.pair_law()
    m_ax, x_ax = 0, list(range(1, n + 1))
    ys_ax = [n + i for i in range(1, n + 1)]
    yt_ax = [2 * n + i for i in range(1, n + 1)]
    operands: list = [inst.joint_mx, [m_ax, *x_ax]]
    for i in range(n):
        operands += [law, [x_ax[i], ys_ax[i], yt_ax[i]]]
    joint = np.einsum(*operands, [m_ax, *x_ax, *ys_ax, *yt_ax])
    return joint / joint.sum()


def _marginal(p: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    keep = list(keep)
    drop = tuple(a for a in range(p.ndim) if a not in keep)
    q = p.sum(axis=drop) if drop else p
    order = sorted(keep)
    return np.moveaxis(q, [order.index(a) for a in keep], list(range(len(keep))))


def _h(p: np.ndarray, keep: Sequence[int]) -> float:
    if not keep:
        return 0.0
    return float(entropy_rows(_marginal(p, keep).reshape(1, -1))[0])


def cmi_entropy(p: np.ndarray, a: Sequence[int], b: Sequence[int], c: Sequence[int]) -> float:
    """``I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)``."""
    if not a or not b:
        return 0.0
    a, b, c = list(a), list(b), list(c)
    return _h(p, a + c) + _h(p, b + c) - _h(p, a + b + c) - _h(p, c)


def _cmi_direct(p: np.ndarray, a: int, b: Sequence[int], c: Sequence[int]) -> float:
    """``sum p(a,b,c) log p(a,b,c) p(c) / (p(a,c) p(b,c))`` for a single axis ``a``."""
    c, b = list(c), list(b)
    q = _marginal(p, c + [a] + b)
    nc, nb = len(c), len(b)
    q = q.reshape(int(np.prod(q.shape[:nc], dtype=int)), q.shape[nc], -1)
    pc = q.sum(axis=(1, 2), keepdims=True)
    pac = q.sum(axis=2, keepdims=True)
    pbc = q.sum(axis=1, keepdims=True)
    mask = q > ZERO_FLOOR
    ratio = np.where(mask, q * pc, 1.0) / np.where(mask, pac * pbc, 1.0)
    return float(np.sum(np.where(mask, q * np.log2(ratio), 0.0)))


def cmi_chain(p: np.ndarray, a: Sequence[int], b: Sequence[int], c: Sequence[int]) -> float:
    """Same quantity via the chain rule ``sum_j I(A_j; B | C, A_<j)``."""
    total = 0.0
    for j, aj in enumerate(a):
        total += _cmi_direct(p, aj, b, list(c) + list(a[:j]))
    return total


def _slacks_from_joint(joint: np.ndarray, n: int, cmi) -> list[tuple[float, float]]:
    ys = [n + i for i in range(1, n + 1)]
    yt = [2 * n + i for i in range(1, n + 1)]
    out = []
    for i in range(1, n + 1):
        if i == 1:
            out.append((0.0, 0.0))
            continue
        past_s, past_t = ys[: i - 1], yt[: i - 1]
        part1 = cmi(joint, past_s, [yt[i - 1]], [0]) - cmi(joint, past_t, [yt[i - 1]], [0])
        part2 = cmi(joint, past_s, [ys[i - 1]], [0]) - cmi(joint, past_t, [ys[i - 1]], [0])
        out.append((part1, part2))
    return out


def lemma_slacks(inst: MultiLetterInstance) -> list[tuple[float, float]]:
    """``[(slack_1(i), slack_2(i)) for i in 1..n]``; ``i = 1`` is exactly zero."""
    joint = build_joint(inst)
    # X is not needed once the joint is built
    reduced = joint.sum(axis=tuple(range(1, inst.n + 1)))
    reduced = reduced.reshape(reduced.shape[0], *([1] * inst.n), *reduced.shape[1:])
    return _slacks_from_joint(reduced, inst.n, cmi_entropy)


def lemma_slacks_chain_rule(inst: MultiLetterInstance) -> list[tuple[float, float]]:
    """Slacks recomputed through the chain rule, straight from the full joint."""
    return _slacks_from_joint(build_joint(inst), inst.n, cmi_chain)


@dataclass(frozen=True)
class StressResult:
    min_slack: float
    count: int
    violating_instance: Optional[MultiLetterInstance] = None
    violation_index: Optional[int] = None

    @property
    def violated(self) -> bool:
        return self.violating_instance is not None


def random_instance(
    ws: ChannelMatrix, wt: ChannelMatrix, rng: np.random.Generator,
    n_choices: Sequence[int] = (2, 3), m_choices: Sequence[int] = (1, 2), coupling=None,
) -> MultiLetterInstance:
    n = int(rng.choice(n_choices))
    m = int(rng.choice(m_choices))
    shape = (m,) + (ws.input_size,) * n
    e = rng.standard_exponential(int(np.prod(shape)))
    return MultiLetterInstance((e / e.sum()).reshape(shape), ws, wt, coupling)


def stress_test(
    ws: ChannelMatrix,
    wt: ChannelMatrix,
    count: int = 1000,
    seed: int = 0,
    n_choices: Sequence[int] = (2, 3),
    m_choices: Sequence[int] = (1, 2),
    coupling=None,
    threads: int = 1,
) -> StressResult:
    """Minimum slack over ``count`` random instances drawn uniformly from the simplex.

    Instance ``i`` is drawn from its own generator seeded by ``(seed, i)``.
    The most negative instance is kept if it falls below ``-1e-9``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")

    def one(i):
        inst = random_instance(ws, wt, task_rng(seed, i), n_choices, m_choices, coupling)
        return min(min(pair) for pair in lemma_slacks(inst)), inst

    results = pmap(one, range(count), threads)
    worst = min(range(count), key=lambda i: (results[i][0], i))
    min_slack, inst = results[worst]
    if min_slack < -VIOLATION_TOL:
        return StressResult(min_slack, count, inst, worst)
    return StressResult(min_slack, count)
