"""Finite-alphabet distributions, channels and information measures.

Alphabets are the index sets ``0..m-1``. All logarithms are base 2, so every
information quantity is in bits. Probability vectors are plain 1-d numpy
arrays; channels are wrapped in :class:`ChannelMatrix` so that the
row-stochastic invariant is checked once at construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import (
    AlphabetOverflow,
    DimensionMismatch,
    NegativeEntry,
    RowSumNotOne,
    ValidationError,
)

ROW_SUM_TOL = 1e-9
# entries below this are exact zeros in entropy sums (0 log 0 = 0)
ZERO_FLOOR = 1e-15
MAX_PRODUCT_ALPHABET = 1 << 16


def prob_vector(p, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate ``p`` as a distribution and return it renormalised as float64."""
    arr = np.array(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("probability vector must be a nonempty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("probability vector has non-finite entries")
    if np.any(arr < 0):
        raise NegativeEntry(f"probability vector has negative entry {arr.min()!r}")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise RowSumNotOne(0, float(total), "probability vector")
    return arr / total


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Row-stochastic transition matrix ``rows[x, y] = p(y|x)``."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    def __eq__(self, other):
        if not isinstance(other, ChannelMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.rows, other.rows))

    def __hash__(self):
        return hash((self.shape, self.rows.tobytes()))

    def __repr__(self):
        return f"ChannelMatrix({self.rows.tolist()!r})"


@dataclass(frozen=True)
class BroadcastChannel:
    """Shared input alphabet plus receivers ``Y_1, ..., Y_k`` (strongest first).

    The less noisy ordering of the receivers is a claim, checked by
    :mod:`lessnoisy.ordering`, not something enforced here.
    """

    receivers: tuple[ChannelMatrix, ...]

    def __post_init__(self):
        receivers = tuple(self.receivers)
        if len(receivers) < 2:
            raise ValidationError("a broadcast channel needs at least 2 receivers")
        sizes = {w.input_size for w in receivers}
        if len(sizes) != 1:
            raise DimensionMismatch(f"receivers disagree on input size: {sorted(sizes)}")
        object.__setattr__(self, "receivers", receivers)

    @property
    def input_size(self) -> int:
        return self.receivers[0].input_size

    @property
    def k(self) -> int:
        return len(self.receivers)

    def __getitem__(self, index: int) -> ChannelMatrix:
        return self.receivers[index]

    def __len__(self) -> int:
        return len(self.receivers)


def validate_channel(rows, tol: float = ROW_SUM_TOL, context: str = "") -> ChannelMatrix:
    """Check that ``rows`` is a rectangular row-stochastic matrix.

    Raises :class:`NegativeEntry` or :class:`RowSumNotOne` (carrying the
    offending row index and sum). Rows within ``tol`` of one are renormalised.
    """
    if isinstance(rows, ChannelMatrix):
        rows = rows.rows
    try:
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{context}: rows are not rectangular ({exc})") from None
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"{context}: expected a nonempty 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{context}: matrix has non-finite entries")
    neg = np.argwhere(arr < 0)
    if neg.size:
        r, c = neg[0]
        raise NegativeEntry(f"{context}: negative entry {arr[r, c]!r} at row {r}, column {c}")
    sums = arr.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise RowSumNotOne(int(bad[0]), float(sums[bad[0]]), context)
    return ChannelMatrix(arr / sums[:, None])


def identity(size: int) -> ChannelMatrix:
    return ChannelMatrix(np.eye(size))


def bsc(crossover: float) -> ChannelMatrix:
    """Binary symmetric channel with the given crossover probability."""
    if not 0.0 <= crossover <= 1.0:
        raise ValidationError(f"crossover {crossover!r} outside [0, 1]")
    p = float(crossover)
    return ChannelMatrix(np.array([[1 - p, p], [p, 1 - p]]))


def constant_channel(input_size: int, output: Sequence[float]) -> ChannelMatrix:
    """Channel whose output law ignores the input."""
    row = prob_vector(output)
    return ChannelMatrix(np.tile(row, (input_size, 1)))


def binary_entropy(q: float) -> float:
    return entropy([q, 1.0 - q])


def entropy(p) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > ZERO_FLOOR]
    return float(-np.sum(nz * np.log2(nz)))


def entropy_rows(p: np.ndarray) -> np.ndarray:
    """Entropy of each distribution along the last axis (vectorised)."""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > ZERO_FLOOR, p, 1.0)
    return -np.sum(np.where(p > ZERO_FLOOR, p * np.log2(safe), 0.0), axis=-1)


def _check_input(p: np.ndarray, w: ChannelMatrix) -> None:
    if p.shape != (w.input_size,):
        raise DimensionMismatch(
            f"distribution of length {p.shape[0]} does not match channel input size {w.input_size}"
        )


def output_distribution(p, w: ChannelMatrix) -> np.ndarray:
    """Output marginal ``pW``."""
    p = np.asarray(p, dtype=float)
    _check_input(p, w)
    q = p @ w.rows
    return q / q.sum()


def mutual_information(p, w: ChannelMatrix) -> float:
    """``I(X;Y) = H(pW) - sum_x p(x) H(W[x])`` in bits."""
    p = np.asarray(p, dtype=float)
    _check_input(p, w)
    value = entropy(p @ w.rows) - float(p @ entropy_rows(w.rows))
    return max(value, 0.0)


def compose(w1: ChannelMatrix, w2: ChannelMatrix) -> ChannelMatrix:
    """Cascade ``X -> w1 -> w2``: the matrix product ``w1 @ w2``."""
    if w1.output_size != w2.input_size:
        raise DimensionMismatch(
            f"cannot compose {w1.shape} with {w2.shape}: output {w1.output_size} != input {w2.input_size}"
        )
    rows = w1.rows @ w2.rows
    return ChannelMatrix(rows / rows.sum(axis=1, keepdims=True))


def compose_all(ws: Sequence[ChannelMatrix]) -> ChannelMatrix:
    if not ws:
        raise ValidationError("compose_all needs at least one channel")
    return reduce(compose, ws)


def product_channel(ws: Sequence[ChannelMatrix], max_alphabet: int = MAX_PRODUCT_ALPHABET) -> ChannelMatrix:
    """Channel to the product of the output alphabets, components independent given x.

    Output index is row-major over the components: for two channels with output
    sizes ``a`` and ``b`` the pair ``(y1, y2)`` maps to ``y1 * b + y2``.
    """
    ws = list(ws)
    if not ws:
        raise ValidationError("product_channel needs at least one channel")
    sizes = {w.input_size for w in ws}
    if len(sizes) != 1:
        raise DimensionMismatch(f"component channels disagree on input size: {sorted(sizes)}")
    total = int(np.prod([w.output_size for w in ws], dtype=object))
    if total > max_alphabet:
        raise AlphabetOverflow(f"product alphabet of size {total} exceeds cap {max_alphabet}")
    rows = ws[0].rows
    for w in ws[1:]:
        rows = (rows[:, :, None] * w.rows[:, None, :]).reshape(rows.shape[0], -1)
    return ChannelMatrix(rows)


def projection_channel(sizes: Sequence[int], keep: Sequence[int]) -> ChannelMatrix:
    """Deterministic map from a row-major product alphabet onto a sub-tuple of coordinates."""
    sizes = list(sizes)
    keep = list(keep)
    total = int(np.prod(sizes))
    kept_sizes = [sizes[i] for i in keep]
    rows = np.zeros((total, int(np.prod(kept_sizes))))
    for flat, coords in enumerate(np.ndindex(*sizes)):
        target = np.ravel_multi_index([coords[i] for i in keep], kept_sizes) if keep else 0
        rows[flat, target] = 1.0
    return ChannelMatrix(rows)
