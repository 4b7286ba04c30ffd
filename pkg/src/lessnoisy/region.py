"""Superposition-coding rate regions of less noisy broadcast channels.

For receivers ``Y_1 ... Y_k`` and an auxiliary chain
``U_k -> U_{k-1} -> ... -> U_2 -> U_1 = X`` the achievable rates are
``R_l <= I(U_l; Y_l | U_{l+1})`` with ``U_{k+1}`` constant. The region is the
union of these boxes over all chains; we trace its boundary through weighted
sums ``sum_l w_l R_l`` (supporting hyperplanes).

Two independent evaluation routes exist on purpose:

* :func:`rates_from_aux` and the brute-force oracle enumerate the full joint
  ``p(u_k, ..., u_2, x) p(y_l|x)`` and take entropies of its marginals;
* the optimiser uses a layered form of the same objective with an analytic
  gradient (see :class:`_LayeredObjective`).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from ._parallel import pmap, task_rng
from .channels import BroadcastChannel, ChannelMatrix, entropy_rows, prob_vector, validate_channel
from .errors import AllZeroWeights, AlphabetOverflow, DimensionMismatch, ValidationError

MAX_JOINT_STATES = 10_000_000
MAX_GRID_EVALUATIONS = 50_000_000
_LN2 = math.log(2.0)
_TINY = 1e-300


@dataclass(frozen=True, eq=False)
class AuxiliaryJoint:
    """Chain ``p(u_k) p(u_{k-1}|u_k) ... p(x|u_2)`` for a k-receiver channel.

    ``chain[0]`` is ``p(u_{k-1}|u_k)`` and ``chain[-1]`` is ``p(x|u_2)``.
    """

    top: np.ndarray
    chain: tuple[ChannelMatrix, ...]

    def __post_init__(self):
        top = prob_vector(self.top)
        top.setflags(write=False)
        chain = tuple(c if isinstance(c, ChannelMatrix) else validate_channel(c) for c in self.chain)
        if not chain:
            raise ValidationError("auxiliary chain needs at least one factor")
        if chain[0].input_size != top.size:
            raise DimensionMismatch(f"top has {top.size} symbols but first factor expects {chain[0].input_size}")
        for a, b in zip(chain, chain[1:]):
            if a.output_size != b.input_size:
                raise DimensionMismatch(f"chain factors {a.shape} and {b.shape} do not compose")
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "chain", chain)

    @property
    def k(self) -> int:
        return len(self.chain) + 1

    @property
    def cardinalities(self) -> list[int]:
        """``[|U_k|, ..., |U_2|, |X|]``."""
        return [self.top.size] + [c.output_size for c in self.chain]

    @property
    def input_size(self) -> int:
        return self.chain[-1].output_size

    def marginal(self, level: int) -> np.ndarray:
        """``p(u_level)``, with level 1 the channel input."""
        p = self.top
        for c in self.chain[: self.k - level]:
            p = p @ c.rows
        return p

    def conditional_input(self, level: int) -> np.ndarray:
        """Rows ``p(x | u_level)``."""
        q = np.eye(self.input_size)
        for c in reversed(self.chain[self.k - level:]):
            q = c.rows @ q
        return q

    def __eq__(self, other):
        if not isinstance(other, AuxiliaryJoint):
            return NotImplemented
        return np.array_equal(self.top, other.top) and self.chain == other.chain

    @classmethod
    def trivial(cls, input_dist, k: int) -> "AuxiliaryJoint":
        """All auxiliaries constant, ``X ~ input_dist``."""
        p = prob_vector(input_dist)
        chain = [ChannelMatrix(np.ones((1, 1)))] * (k - 2) + [ChannelMatrix(p[None, :])]
        return cls(np.ones(1), tuple(chain))


@dataclass(frozen=True)
class RateTuple:
    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(r < -1e-12 for r in rates):
            raise ValidationError(f"negative rate in {rates}")
        object.__setattr__(self, "rates", rates)

    def __getitem__(self, i):
        return self.rates[i]

    def __len__(self):
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def weighted(self, weights) -> float:
        return float(np.dot(weights, self.rates))


@dataclass(frozen=True)
class BoundaryPoint:
    weights: tuple[float, ...]
    rates: RateTuple
    aux: AuxiliaryJoint = field(compare=False)

    @property
    def value(self) -> float:
        return self.rates.weighted(self.weights)


@dataclass(frozen=True)
class RegionApproximation:
    points: tuple[BoundaryPoint, ...]

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class OptimizeOptions:
    restarts: int = 50
    iterations: int = 500
    seed: int = 0
    caps: Optional[tuple[int, ...]] = None  # [|U_k|, ..., |U_2|]
    tol: float = 1e-9
    threads: int = 1
    warm_start: Optional[AuxiliaryJoint] = None


def cardinality_caps(input_size: int, k: int) -> tuple[int, ...]:
    """Default auxiliary caps ``[|U_k|, ..., |U_2|]``: ``|U_{k-r}| <= (|X|+1)^(r+1)``."""
    return tuple((input_size + 1) ** (r + 1) for r in range(k - 1))


# ---------------------------------------------------------------------------
# joint enumeration


def _check_aux(aux: AuxiliaryJoint, bc: BroadcastChannel) -> None:
    if aux.k != bc.k:
        raise DimensionMismatch(f"auxiliary chain is for {aux.k} receivers, channel has {bc.k}")
    if aux.input_size != bc.input_size:
        raise DimensionMismatch(f"auxiliary chain ends in {aux.input_size} symbols, channel input has {bc.input_size}")


def _batched_joint(top: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Joint tensor of shape ``(B, n_k, ..., n_2, n_1)``."""
    joint = top
    for f in factors:
        lead = joint.ndim - 2
        joint = joint[..., None] * f.reshape(f.shape[0], *([1] * lead), *f.shape[1:])
    return joint


def _entropy_flat(t: np.ndarray) -> np.ndarray:
    return entropy_rows(t.reshape(t.shape[0], -1))


def _joint_rates(top: np.ndarray, factors: Sequence[np.ndarray], receivers: Sequence[np.ndarray]) -> np.ndarray:
    """Rates ``I(U_l; Y_l | U_{l+1})`` for a batch of chains, shape ``(B, k)``.

    Computed as ``H(A,B) + H(A,Y) - H(A,B,Y) - H(A)`` on marginals of the
    enumerated joint (``A = U_{l+1}``, ``B = U_l``), so no Markov structure is
    assumed.
    """
    joint = _batched_joint(top, factors)
    k = len(receivers)
    out = np.empty((joint.shape[0], k))
    axis_of = {j: 1 + (k - j) for j in range(1, k + 1)}  # level -> tensor axis
    for l in range(1, k + 1):
        a_ax = axis_of[l + 1] if l < k else None
        keep = {ax for ax in (a_ax, axis_of[l], axis_of[1]) if ax is not None}
        drop = tuple(ax for ax in range(1, joint.ndim) if ax not in keep)
        marg = joint.sum(axis=drop) if drop else joint
        if a_ax is None:
            marg = marg[:, None]
        # tab axes: (batch, U_{l+1}, U_l, Y_l)
        if l == 1:
            tab = marg[..., None] * receivers[0]
        else:
            tab = np.einsum("...bx,xy->...by", marg, receivers[l - 1])
        out[:, l - 1] = (
            _entropy_flat(tab.sum(axis=3))
            + _entropy_flat(tab.sum(axis=2))
            - _entropy_flat(tab)
            - _entropy_flat(tab.sum(axis=(2, 3)))
        )
    return np.clip(out, 0.0, None)


def rates_from_aux(aux: AuxiliaryJoint, bc: BroadcastChannel, max_states: int = MAX_JOINT_STATES) -> RateTuple:
    """Exact rate tuple ``(I(U_l; Y_l | U_{l+1}))_{l=1..k}`` by joint enumeration."""
    _check_aux(aux, bc)
    states = int(np.prod(aux.cardinalities, dtype=object)) * max(w.output_size for w in bc.receivers)
    if states > max_states:
        raise AlphabetOverflow(f"joint enumeration needs {states} states, cap is {max_states}")
    rates = _joint_rates(aux.top[None], [c.rows[None] for c in aux.chain], [w.rows for w in bc.receivers])
    return RateTuple(tuple(rates[0]))


# ---------------------------------------------------------------------------
# optimiser


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class _LayeredObjective:
    """``sum_l w_l R_l`` rewritten layer by layer, with its gradient.

    Level ``j`` (``U_1 = X`` up to ``U_{k+1}`` constant) contributes
    ``E f_j(p(x|U_j))`` with ``f_j(q) = w_{j-1} H(q W_{j-1}) - w_j H(q W_j)``.
    Factors are indexed ``F[j] = p(u_{j-1}|u_j)`` for ``j = 2..k+1`` and
    parameterised by row-wise softmax logits.
    """

    def __init__(self, receivers: Sequence[np.ndarray], weights: np.ndarray, cards: Sequence[int]):
        self.k = len(receivers)
        self.W = {l: receivers[l - 1] for l in range(1, self.k + 1)}
        self.w = {l: float(weights[l - 1]) for l in range(1, self.k + 1)}
        # n[j] = |U_j|; level k+1 is the constant
        self.n = {self.k + 1: 1}
        for j, size in zip(range(self.k, 0, -1), cards):
            self.n[j] = size
        self.shapes = {j: (self.n[j], self.n[j - 1]) for j in range(self.k + 1, 1, -1)}
        self.sizes = {j: a * b for j, (a, b) in self.shapes.items()}

    def unpack(self, theta: np.ndarray) -> dict[int, np.ndarray]:
        out, pos = {}, 0
        for j in range(self.k + 1, 1, -1):
            out[j] = theta[pos:pos + self.sizes[j]].reshape(self.shapes[j])
            pos += self.sizes[j]
        return out

    def pack(self, arrays: dict[int, np.ndarray]) -> np.ndarray:
        return np.concatenate([arrays[j].ravel() for j in range(self.k + 1, 1, -1)])

    def _terms(self, j):
        for l, sign in ((j - 1, 1.0), (j, -1.0)):
            if 1 <= l <= self.k and self.w[l] != 0.0:
                yield sign * self.w[l], self.W[l]

    def _phi(self, j: int, q: np.ndarray):
        val = np.zeros(q.shape[0])
        grad = np.zeros_like(q)
        for coef, w in self._terms(j):
            out = q @ w
            logs = np.log2(np.maximum(out, _TINY))
            val += coef * -np.sum(np.where(out > 0, out * logs, 0.0), axis=1)
            grad += coef * -((logs + 1.0 / _LN2) @ w.T)
        return val, grad

    def factors(self, theta: np.ndarray) -> dict[int, np.ndarray]:
        return {j: _softmax(z) for j, z in self.unpack(theta).items()}

    def value_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        k = self.k
        F = self.factors(theta)
        m = {k + 1: np.ones(1)}
        for j in range(k + 1, 1, -1):
            m[j - 1] = m[j] @ F[j]
        Q = {1: np.eye(self.n[1])}
        for j in range(2, k + 2):
            Q[j] = F[j] @ Q[j - 1]
        phi, dphi = {}, {}
        for j in range(1, k + 2):
            phi[j], dphi[j] = self._phi(j, Q[j])
        value = sum(float(m[j] @ phi[j]) for j in range(1, k + 2))

        G = {k + 1: m[k + 1][:, None] * dphi[k + 1]}
        for j in range(k, 1, -1):
            G[j] = m[j][:, None] * dphi[j] + F[j + 1].T @ G[j + 1]
        g = {1: phi[1]}
        for j in range(2, k + 1):
            g[j] = phi[j] + F[j] @ g[j - 1]
        dZ = {}
        for j in range(2, k + 2):
            dF = G[j] @ Q[j - 1].T + np.outer(m[j], g[j - 1])
            dZ[j] = F[j] * (dF - np.sum(F[j] * dF, axis=1, keepdims=True))
        return value, self.pack(dZ)

    def to_aux(self, theta: np.ndarray) -> AuxiliaryJoint:
        F = self.factors(theta)
        top = F[self.k + 1][0]
        chain = tuple(ChannelMatrix(F[j]) for j in range(self.k, 1, -1))
        return AuxiliaryJoint(top, chain)

    def from_aux(self, aux: AuxiliaryJoint) -> np.ndarray:
        """Logits for ``aux`` embedded into this objective's (possibly larger) alphabets."""
        mats = [aux.top[None, :]] + [c.rows for c in aux.chain]
        arrays = {}
        for j, mat in zip(range(self.k + 1, 1, -1), mats):
            rows, cols = self.shapes[j]
            if mat.shape[0] > rows or mat.shape[1] > cols:
                raise DimensionMismatch("warm start does not fit inside the caps")
            full = np.full((rows, cols), 1.0 / cols)
            full[: mat.shape[0]] = 0.0
            full[: mat.shape[0], : mat.shape[1]] = mat
            arrays[j] = np.log(np.maximum(full, 1e-30))
        return self.pack(arrays)


def _check_weights(bc: BroadcastChannel, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (bc.k,):
        raise DimensionMismatch(f"need {bc.k} weights, got {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if not np.any(w > 0):
        raise AllZeroWeights("at least one weight must be positive")
    return w


def _resolve_caps(bc: BroadcastChannel, caps) -> tuple[int, ...]:
    caps = tuple(caps) if caps is not None else cardinality_caps(bc.input_size, bc.k)
    if len(caps) != bc.k - 1 or any(int(c) < 1 for c in caps):
        raise DimensionMismatch(f"need {bc.k - 1} positive auxiliary caps, got {caps}")
    return tuple(int(c) for c in caps)


def _ascend(obj: _LayeredObjective, theta0: np.ndarray, iterations: int, tol: float) -> tuple[float, np.ndarray]:
    def neg(theta):
        v, g = obj.value_and_grad(theta)
        return -v, -g

    res = minimize(neg, theta0, jac=True, method="L-BFGS-B",
                   options={"maxiter": iterations, "ftol": tol, "gtol": 1e-10})
    return -float(res.fun), res.x


def maximize_weighted_sum(
    bc: BroadcastChannel, weights, opts: OptimizeOptions = OptimizeOptions()
) -> tuple[RateTuple, AuxiliaryJoint]:
    """Best auxiliary chain found for ``max sum_l w_l R_l``.

    Multi-start local ascent: each restart draws every chain factor at random
    (log-Dirichlet logits seeded by ``(seed, restart)``) and runs L-BFGS on the
    softmax logits. The first restart reaching the best value wins.
    """
    w = _check_weights(bc, weights)
    caps = _resolve_caps(bc, opts.caps)
    obj = _LayeredObjective([r.rows for r in bc.receivers], w, list(caps) + [bc.input_size])
    dim = sum(obj.sizes.values())

    starts: list = []
    if opts.warm_start is not None:
        starts.append(obj.from_aux(opts.warm_start))
    starts.extend(range(opts.restarts))

    def run(start):
        if isinstance(start, np.ndarray):
            theta0 = start
        else:
            theta0 = np.log(task_rng(opts.seed, start).standard_exponential(dim))
        return _ascend(obj, theta0, opts.iterations, opts.tol)

    results = pmap(run, starts, opts.threads)
    best_val, best_theta = results[0]
    for val, theta in results[1:]:
        if val > best_val:
            best_val, best_theta = val, theta
    aux = obj.to_aux(best_theta)
    return rates_from_aux(aux, bc), aux


def two_receiver_region(
    bc: BroadcastChannel, weights, opts: OptimizeOptions = OptimizeOptions()
) -> tuple[RateTuple, AuxiliaryJoint]:
    """Weighted-sum point of ``{R_1 <= I(X;Y_1|U), R_2 <= I(U;Y_2)}``, ``|U| <= |X|+1``."""
    if bc.k != 2:
        raise DimensionMismatch(f"two_receiver_region needs 2 receivers, got {bc.k}")
    return maximize_weighted_sum(bc, weights, opts)


def weight_sweep(k: int, directions: int) -> list[tuple[float, ...]]:
    """Deterministic weight vectors on the nonnegative simplex.

    The unit vectors come first (so the single-receiver capacities are always
    probed), then simplex lattice points of increasing resolution.
    """
    if directions < 1:
        raise ValueError("directions must be >= 1")
    seen: list[tuple[float, ...]] = []
    keys: set[tuple[int, ...]] = set()

    def add(counts):
        total = sum(counts)
        key = tuple(c * 720720 // total for c in counts)
        if key not in keys:
            keys.add(key)
            seen.append(tuple(c / total for c in counts))

    for i in range(k):
        add(tuple(1 if j == i else 0 for j in range(k)))
    resolution = 1
    while len(seen) < directions:
        resolution += 1
        for counts in _compositions(resolution, k):
            add(counts)
            if len(seen) >= directions:
                break
    return seen[:directions]


def region_boundary(
    bc: BroadcastChannel, directions: int, opts: OptimizeOptions = OptimizeOptions()
) -> RegionApproximation:
    points = []
    for d, weights in enumerate(weight_sweep(bc.k, directions)):
        rates, aux = maximize_weighted_sum(bc, weights, _with_seed(opts, opts.seed + 1000 * d))
        points.append(BoundaryPoint(weights, rates, aux))
    return RegionApproximation(tuple(points))


def _with_seed(opts: OptimizeOptions, seed: int) -> OptimizeOptions:
    return OptimizeOptions(opts.restarts, opts.iterations, seed, opts.caps, opts.tol, opts.threads, opts.warm_start)


# ---------------------------------------------------------------------------
# brute-force oracle


def _compositions(total: int, parts: int):
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def simplex_grid(dim: int, step: float) -> np.ndarray:
    """Points of the probability simplex whose coordinates are multiples of ``step``."""
    steps = round(1.0 / step)
    if steps < 1 or abs(steps * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step} must divide 1")
    return np.array(list(_compositions(steps, dim)), dtype=float) / steps


def brute_force_region(
    bc: BroadcastChannel,
    weights,
    grid_step: float = 0.05,
    caps=None,
    max_evaluations: int = MAX_GRID_EVALUATIONS,
    chunk: int = 1 << 16,
) -> RateTuple:
    """Best weighted sum over every chain whose factors lie on a simplex grid.

    Exhaustive and slow by design; this is the oracle the optimiser is
    checked against, and it shares no code with it beyond entropies.
    """
    w = _check_weights(bc, weights)
    if bc.input_size > 3:
        raise AlphabetOverflow("brute force supports binary or ternary inputs only")
    if grid_step < 0.02 - 1e-12:
        raise ValueError("grid_step must be at least 0.02")
    caps = _resolve_caps(bc, caps)
    cards = list(caps) + [bc.input_size]
    grids = {size: simplex_grid(size, grid_step) for size in set(cards)}

    # one "coordinate" per factor: top (1 row), then each conditional (n_parent rows)
    shapes = [(1, cards[0])] + [(cards[i], cards[i + 1]) for i in range(len(cards) - 1)]
    radices = [len(grids[cols]) ** rows for rows, cols in shapes]
    total = int(np.prod(radices, dtype=object))
    if total > max_evaluations:
        raise AlphabetOverflow(f"grid search needs {total} evaluations, cap is {max_evaluations}")

    receivers = [r.rows for r in bc.receivers]
    best_val, best_rates = -np.inf, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = np.unravel_index(idx, radices)
        mats = []
        for (rows, cols), d in zip(shapes, digits):
            g = grids[cols]
            row_idx = np.unravel_index(d, (len(g),) * rows)
            mats.append(np.stack([g[r] for r in row_idx], axis=1))
        top = mats[0][:, 0, :]
        rates = _joint_rates(top, mats[1:], receivers)
        vals = rates @ w
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_rates = float(vals[i]), rates[i]
    return RateTuple(tuple(best_rates))
