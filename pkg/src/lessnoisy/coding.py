"""Monte Carlo simulation of three-layer superposition coding.

Codebooks are drawn layer by layer: cloud centres ``u^n(m3) ~ p_U``,
satellites ``v^n(m2, m3) ~ p_{V|U}`` and codewords ``x^n(m1, m2, m3) ~ p_{X|V}``.
Receiver 3 decodes ``m3`` alone; receivers 2 and 1 decode successively,
coarsest layer first.

Each stage is an information-density threshold decoder: a candidate passes
when its normalised log-likelihood ratio against the already-decoded layer
exceeds ``I_target - delta``, and decoding succeeds when exactly one
candidate passes. A stage with a single candidate is decoded without a test.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from ._parallel import pmap
from .channels import BroadcastChannel
from .errors import DimensionMismatch, MemoryCapExceeded, ValidationError
from .region import AuxiliaryJoint

DEFAULT_MEMORY_CAP = 1 << 24
DEFAULT_DELTA_FRACTION = 0.1
WILSON_Z = 1.959963984540054

STAGES = {1: ("u", "v", "x"), 2: ("u", "v"), 3: ("u",)}


def message_count(n: int, rate: float) -> int:
    """``floor(2^(nR))``, never below one."""
    return max(1, int(math.floor(2.0 ** (n * rate) + 1e-9)))


@dataclass(frozen=True, eq=False)
class SimConfig:
    n: int
    rates: tuple[float, float, float]  # (R1, R2, R3), bits per channel use
    aux: AuxiliaryJoint
    bc: BroadcastChannel
    trials: int = 500
    seed: int = 0
    threshold_delta: Optional[float] = None  # None: 0.1 x each stage's target
    fixed_codebook: bool = False
    memory_cap: int = DEFAULT_MEMORY_CAP
    threads: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("blocklength must be >= 1")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.bc.k != 3 or self.aux.k != 3:
            raise DimensionMismatch("the simulator handles three receivers")
        if self.aux.input_size != self.bc.input_size:
            raise DimensionMismatch("auxiliary chain and channel disagree on the input alphabet")
        rates = tuple(float(r) for r in self.rates)
        if len(rates) != 3 or any(r < 0 for r in rates):
            raise ValidationError(f"need three nonnegative rates, got {self.rates}")
        object.__setattr__(self, "rates", rates)
        if self.threshold_delta is not None and self.threshold_delta < 0:
            raise ValidationError("threshold_delta must be nonnegative")
        if self.codebook_symbols > self.memory_cap:
            raise MemoryCapExceeded(
                f"codebook needs {self.codebook_symbols} symbols (n={self.n}, "
                f"messages={self.message_counts}), cap is {self.memory_cap}"
            )

    @property
    def message_counts(self) -> tuple[int, int, int]:
        """``(M1, M2, M3)``."""
        return tuple(message_count(self.n, r) for r in self.rates)

    @cached_property
    def tables(self) -> "DecoderTables":
        return DecoderTables(self.aux, self.bc)

    @property
    def codebook_symbols(self) -> int:
        m1, m2, m3 = self.message_counts
        return self.n * (m3 + m3 * m2 + m3 * m2 * m1)


@dataclass(frozen=True, eq=False)
class Codebook:
    u_words: np.ndarray  # (M3, n)
    v_words: np.ndarray  # (M3, M2, n)
    x_words: np.ndarray  # (M3, M2, M1, n)

    def codeword(self, m1: int, m2: int, m3: int) -> np.ndarray:
        return self.x_words[m3, m2, m1]

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return all(
            a.dtype == b.dtype and np.array_equal(a, b)
            for a, b in ((self.u_words, other.u_words), (self.v_words, other.v_words), (self.x_words, other.x_words))
        )


class DecodeFailure(enum.Enum):
    NONE_TYPICAL = "NoneTypical"
    AMBIGUOUS = "Ambiguous"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Decoded:
    """Messages decoded so far, coarsest first: ``(m3, m2, m1)`` prefix.

    On failure, ``stage`` names the layer (``"u"``, ``"v"`` or ``"x"``) that
    failed and ``messages`` holds the layers decoded before it.
    """

    messages: tuple[int, ...]
    failure: Optional[DecodeFailure] = None
    stage: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


@dataclass
class SimResult:
    n: int
    rates: tuple[float, float, float]
    message_counts: tuple[int, int, int]
    trials: int
    total_errors: int = 0
    receiver_errors: dict = field(default_factory=lambda: {1: 0, 2: 0, 3: 0})
    stage_errors: dict = field(default_factory=lambda: {l: {s: 0 for s in STAGES[l]} for l in STAGES})

    @property
    def p_e_estimate(self) -> float:
        return self.total_errors / self.trials

    @property
    def p_e_interval(self) -> tuple[float, float]:
        return wilson_interval(self.total_errors, self.trials)

    def receiver_fraction(self, receiver: int) -> float:
        return self.receiver_errors[receiver] / self.trials

    def stage_fraction(self, receiver: int, stage: str) -> float:
        return self.stage_errors[receiver][stage] / self.trials

    def merge(self, other: "SimResult") -> None:
        self.total_errors += other.total_errors
        for l in STAGES:
            self.receiver_errors[l] += other.receiver_errors[l]
            for s in STAGES[l]:
                self.stage_errors[l][s] += other.stage_errors[l][s]


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # the bounds are exactly 0 and 1 at the extremes; rounding would leave ~1e-17
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


# ---------------------------------------------------------------------------
# sampling


def _sample_conditional(cdf: np.ndarray, parents: np.ndarray, rng: np.random.Generator, dtype) -> np.ndarray:
    """One symbol per entry of ``parents``, drawn from the row ``cdf[parent]``."""
    draws = rng.random(parents.shape)
    rows, width = cdf.shape
    if width == 1:
        return np.zeros(parents.shape, dtype=dtype)
    # thresholds of row s live in [s, s+1); one search handles every parent
    offsets = np.arange(rows)[:, None]
    flat = (offsets + cdf[:, :-1]).ravel()
    parents = parents.astype(np.intp)
    idx = np.searchsorted(flat, parents + draws, side="right") - parents * (width - 1)
    return np.minimum(idx, width - 1).astype(dtype)


def _cdf(rows: np.ndarray) -> np.ndarray:
    c = np.cumsum(rows, axis=-1)
    c[..., -1] = 1.0
    return c


def _dtype(size: int):
    return np.min_scalar_type(max(size - 1, 0))


def generate_codebooks(config: SimConfig, rng=None) -> Codebook:
    """Random superposition codebook; ``rng`` defaults to one seeded from ``config.seed``."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    m1, m2, m3 = config.message_counts
    n = config.n
    aux = config.aux
    p_u = aux.top
    p_v_u, p_x_v = aux.chain[0].rows, aux.chain[1].rows
    u = _sample_conditional(_cdf(p_u[None, :]), np.zeros((m3, n), dtype=np.uint8), rng, _dtype(p_u.size))
    v = _sample_conditional(_cdf(p_v_u), np.broadcast_to(u[:, None, :], (m3, m2, n)), rng, _dtype(p_v_u.shape[1]))
    x = _sample_conditional(_cdf(p_x_v), np.broadcast_to(v[:, :, None, :], (m3, m2, m1, n)), rng,
                            _dtype(p_x_v.shape[1]))
    return Codebook(u, v, x)


def transmit(x_word: np.ndarray, bc: BroadcastChannel, rng) -> tuple[np.ndarray, ...]:
    """Memoryless transmission; receivers are independent given the input."""
    rng = np.random.default_rng(rng)
    return tuple(_sample_conditional(_cdf(w.rows), np.asarray(x_word), rng, _dtype(w.output_size))
                 for w in bc.receivers)


# ---------------------------------------------------------------------------
# decoding


def _density(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``log2(num / den)``; ``-inf`` where the numerator vanishes."""
    num, den = np.broadcast_arrays(num, den)
    out = np.full(num.shape, -np.inf)
    ok = (num > 0) & (den > 0)
    out[ok] = np.log2(num[ok]) - np.log2(den[ok])
    return out


def _expect(weights: np.ndarray, table: np.ndarray) -> float:
    """``sum weights * table`` ignoring zero-probability cells."""
    mask = weights > 0
    return float(np.sum(weights[mask] * table[mask]))


@dataclass(frozen=True, eq=False)
class _Stage:
    table: np.ndarray  # [(condition,) candidate, y] information density
    target: float


class DecoderTables:
    """Per-letter information densities and target mutual informations."""

    def __init__(self, aux: AuxiliaryJoint, bc: BroadcastChannel):
        p_u = aux.top
        p_v_u, p_x_v = aux.chain[0].rows, aux.chain[1].rows
        p_uv = p_u[:, None] * p_v_u
        p_v = p_u @ p_v_u
        p_vx = p_v[:, None] * p_x_v
        q_u = p_v_u @ p_x_v  # p(x|u)
        self.stages: dict[tuple[int, str], _Stage] = {}
        for l in (1, 2, 3):
            w = bc[l - 1].rows
            y_u, y_v, y_marg = q_u @ w, p_x_v @ w, (p_u @ q_u) @ w
            t = _density(y_u, y_marg[None, :])
            self.stages[(l, "u")] = _Stage(t, _expect(p_u[:, None] * y_u, t))
            if l <= 2:
                t = _density(y_v[None, :, :], y_u[:, None, :])
                self.stages[(l, "v")] = _Stage(t, _expect(p_uv[:, :, None] * y_v[None, :, :], t))
        w = bc[0].rows
        y_v = p_x_v @ w
        t = _density(w[None, :, :], y_v[:, None, :])
        self.stages[(1, "x")] = _Stage(t, _expect(p_vx[:, :, None] * w[None, :, :], t))

    def target(self, receiver: int, stage: str) -> float:
        return self.stages[(receiver, stage)].target

    def threshold(self, receiver: int, stage: str, delta: Optional[float]) -> float:
        target = self.target(receiver, stage)
        d = DEFAULT_DELTA_FRACTION * target if delta is None else delta
        return target - d


def decoder_tables(config: SimConfig) -> DecoderTables:
    return config.tables


def _pick(scores: np.ndarray, threshold: float) -> tuple[Optional[int], Optional[DecodeFailure]]:
    if scores.size == 1:
        return 0, None
    passing = np.ones(scores.size, bool) if threshold == -np.inf else scores > threshold
    hits = np.flatnonzero(passing)
    if hits.size == 1:
        return int(hits[0]), None
    if hits.size == 0:
        return None, DecodeFailure.NONE_TYPICAL
    return None, DecodeFailure.AMBIGUOUS


def _decode_stage(candidates: np.ndarray, y: np.ndarray, stage: _Stage, threshold: float,
                  condition: Optional[np.ndarray] = None):
    n = y.shape[0]
    cand = candidates.astype(np.intp)
    yy = y.astype(np.intp)[None, :]
    if condition is None:
        per_letter = stage.table[cand, yy]
    else:
        per_letter = stage.table[condition.astype(np.intp)[None, :], cand, yy]
    return _pick(per_letter.sum(axis=1) / n, threshold)


def decode_receiver3(y3: np.ndarray, codebook: Codebook, config: SimConfig) -> Decoded:
    tables = decoder_tables(config)
    m3, fail = _decode_stage(codebook.u_words, y3, tables.stages[(3, "u")],
                             tables.threshold(3, "u", config.threshold_delta))
    if fail is not None:
        return Decoded((), fail, "u")
    return Decoded((m3,))


def decode_successive(y: np.ndarray, codebook: Codebook, config: SimConfig, receiver: int) -> Decoded:
    """Decode ``m3``, then ``m2`` given ``u^n(m3)``, then (receiver 1) ``m1`` given ``v^n``."""
    if receiver not in (1, 2):
        raise ValueError("successive decoding is for receivers 1 and 2")
    tables = decoder_tables(config)
    delta = config.threshold_delta
    m3, fail = _decode_stage(codebook.u_words, y, tables.stages[(receiver, "u")],
                             tables.threshold(receiver, "u", delta))
    if fail is not None:
        return Decoded((), fail, "u")
    u = codebook.u_words[m3]
    m2, fail = _decode_stage(codebook.v_words[m3], y, tables.stages[(receiver, "v")],
                             tables.threshold(receiver, "v", delta), condition=u)
    if fail is not None:
        return Decoded((m3,), fail, "v")
    if receiver == 2:
        return Decoded((m3, m2))
    v = codebook.v_words[m3, m2]
    m1, fail = _decode_stage(codebook.x_words[m3, m2], y, tables.stages[(1, "x")],
                             tables.threshold(1, "x", delta), condition=v)
    if fail is not None:
        return Decoded((m3, m2), fail, "x")
    return Decoded((m3, m2, m1))


# ---------------------------------------------------------------------------
# harness


def _first_wrong_stage(receiver: int, decoded: Decoded, truth: tuple[int, int, int]) -> Optional[str]:
    stages = STAGES[receiver]
    for stage, got, want in zip(stages, decoded.messages, truth):
        if got != want:
            return stage
    if not decoded.ok:
        return decoded.stage
    return None


def _trial_seeds(seed: int, trial: int):
    return np.random.SeedSequence(seed, spawn_key=(1, trial)).spawn(3)


def _run_one(config: SimConfig, trial: int, fixed: Optional[Codebook]) -> SimResult:
    cb_seed, msg_seed, ch_seed = _trial_seeds(config.seed, trial)
    codebook = fixed if fixed is not None else generate_codebooks(config, np.random.default_rng(cb_seed))
    m1_n, m2_n, m3_n = config.message_counts
    msg_rng = np.random.default_rng(msg_seed)
    m3, m2, m1 = (int(msg_rng.integers(c)) for c in (m3_n, m2_n, m1_n))
    truth = (m3, m2, m1)
    ys = transmit(codebook.codeword(m1, m2, m3), config.bc, np.random.default_rng(ch_seed))
    decoded = {
        3: decode_receiver3(ys[2], codebook, config),
        2: decode_successive(ys[1], codebook, config, 2),
        1: decode_successive(ys[0], codebook, config, 1),
    }
    res = SimResult(config.n, config.rates, config.message_counts, 1)
    any_error = False
    for l, d in decoded.items():
        stage = _first_wrong_stage(l, d, truth)
        if stage is not None:
            any_error = True
            res.receiver_errors[l] += 1
            res.stage_errors[l][stage] += 1
    res.total_errors = int(any_error)
    return res


def run_trials(config: SimConfig) -> SimResult:
    """Monte Carlo estimate of the error probability of the scheme.

    Trial ``t`` draws its codebook, messages and channel noise from seeds
    derived from ``(config.seed, t)``, so results do not depend on
    ``config.threads``.
    """
    fixed = generate_codebooks(config) if config.fixed_codebook else None
    config.tables  # build once before any worker thread starts
    parts = pmap(lambda t: _run_one(config, t, fixed), range(config.trials), config.threads)
    total = SimResult(config.n, config.rates, config.message_counts, config.trials)
    for p in parts:
        total.merge(p)
    return total
