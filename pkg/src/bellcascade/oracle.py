"""Independent checks for the closed-form yield machinery.

Two routes, neither of which touches the entropy or merge code in
``bellspace``/``engine``:

* exact enumeration of label ensembles under AEM/BPM parity checks, with the
  BPM merge ``g ~ g + P r`` applied literally;
* a Monte Carlo run of the cascade that draws actual pair parities, performs
  the pairing trick round by round and tracks which pairs share a bracket.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal

import numpy as np

from .gf2core import BitVec, symplectic_product

__all__ = [
    "ImpossibleOutcomeError",
    "EnumerationTooLarge",
    "ParityCheck",
    "EnsembleState",
    "apply_aem",
    "apply_bpm",
    "exact_bracket_entropy",
    "support_bracket_entropy",
    "recurrence_bruteforce",
    "vv_ledger",
    "MonteCarloResult",
    "mc_cascade",
    "MAX_ENUM_PAIRS",
]

MAX_ENUM_PAIRS = 10


class ImpossibleOutcomeError(ValueError):
    """The requested parity outcome has zero probability."""


class EnumerationTooLarge(ValueError):
    """The label space exceeds the enumeration cap."""


def _entropy_bits(weights) -> float:
    total = 0.0
    for w in np.asarray(weights, dtype=float).ravel():
        if w > 0:
            total -= w * math.log2(w)
    return total


def _parity(labels: np.ndarray, r: int) -> np.ndarray:
    return (np.bitwise_count(labels & r) & 1).astype(np.uint8)


@dataclass(frozen=True)
class ParityCheck:
    vector: BitVec
    method: Literal["AEM", "BPM"]
    outcome: int


@dataclass(frozen=True)
class EnsembleState:
    """Weights over all ``2 n_pairs``-bit labels plus the merges caused by past BPMs.

    Merged labels form cosets of the span of ``shifts``; the weight of a class
    is the sum over its labels.
    """

    n_pairs: int
    weights: np.ndarray
    shifts: tuple[BitVec, ...] = ()
    history: tuple[ParityCheck, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n_pairs < 1:
            raise ValueError("need at least one pair")
        if self.n_pairs > MAX_ENUM_PAIRS:
            raise EnumerationTooLarge(f"{self.n_pairs} pairs exceeds the cap of {MAX_ENUM_PAIRS}")
        if self.weights.shape != (1 << (2 * self.n_pairs),):
            raise ValueError("weights must cover every label")

    @classmethod
    def product(cls, pair_dist, n_pairs: int) -> EnsembleState:
        """Independent pairs, each with label distribution ``pair_dist`` (order 00, 01, 10, 11)."""
        single = np.asarray(pair_dist, dtype=float)
        weights = np.ones(1)
        for _ in range(n_pairs):
            weights = (weights[:, None] * single[None, :]).ravel()
        return cls(n_pairs, weights / weights.sum())

    @property
    def length(self) -> int:
        return 2 * self.n_pairs

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.weights.size, dtype=np.int64)

    def bpm_vectors(self) -> list[BitVec]:
        return [h.vector for h in self.history if h.method == "BPM"]

    def representatives(self) -> np.ndarray:
        labels = self.labels
        reps = labels.copy()
        span = {0}
        for s in self.shifts:
            span |= {x ^ s.value for x in span}
        for x in span:
            reps = np.minimum(reps, labels ^ x)
        return reps

    def class_weights(self) -> dict[int, float]:
        reps = self.representatives()
        totals = np.bincount(reps, weights=self.weights, minlength=self.weights.size)
        return {int(i): float(totals[i]) for i in np.flatnonzero(totals)}

    def entropy(self) -> float:
        return _entropy_bits(list(self.class_weights().values()))

    def parity_probability(self, r: BitVec, outcome: int) -> float:
        return float(self.weights[_parity(self.labels, r.value) == outcome].sum())

    def accessible(self, q: BitVec) -> bool:
        return all(symplectic_product(q, r) == 0 for r in self.bpm_vectors())


def _condition(state: EnsembleState, r: BitVec, outcome: int) -> np.ndarray:
    if r.length != state.length:
        raise ValueError(f"parity vector has length {r.length}, ensemble needs {state.length}")
    if not r:
        raise ValueError("parity vector must be nonzero")
    if not state.accessible(r):
        raise ValueError(f"parity {r} does not commute with an earlier BPM")
    keep = _parity(state.labels, r.value) == outcome
    mass = state.weights[keep].sum()
    if mass <= 0:
        raise ImpossibleOutcomeError(f"outcome {outcome} of parity {r} has probability zero")
    return np.where(keep, state.weights, 0.0) / mass


def apply_aem(state: EnsembleState, r: BitVec, outcome: int) -> EnsembleState:
    """Learn ``r^T s`` through an appended ebit: condition only."""
    weights = _condition(state, r, outcome)
    return replace(state, weights=weights, history=state.history + (ParityCheck(r, "AEM", outcome),))


def apply_bpm(state: EnsembleState, r: BitVec, outcome: int) -> EnsembleState:
    """Learn ``r^T s`` by measuring the pairs themselves: condition, then merge ``s`` with ``s + P r``."""
    weights = _condition(state, r, outcome)
    return replace(
        state,
        weights=weights,
        shifts=state.shifts + (r.swap_pairs(),),
        history=state.history + (ParityCheck(r, "BPM", outcome),),
    )


def _cond_pairs(cond) -> tuple[list[float], list[float]]:
    even = [cond.q00, 0.0, 0.0, cond.q11]
    odd = [0.0, cond.q01, cond.q10, 0.0]
    return even, odd


def exact_bracket_entropy(n0: int, n1: int, cond) -> float:
    """Entropy of a bracket by building all labels, then a BPM of the all-ones vector."""
    n = n0 + n1
    if n0 < 0 or n1 < 0 or n < 1:
        raise ValueError(f"need n0, n1 >= 0 and n0 + n1 >= 1, got {n0}, {n1}")
    if n > MAX_ENUM_PAIRS:
        raise EnumerationTooLarge(f"{n} pairs exceeds the cap of {MAX_ENUM_PAIRS}")
    even, odd = _cond_pairs(cond)
    weights = np.ones(1)
    for dist in [even] * n0 + [odd] * n1:
        weights = (weights[:, None] * np.asarray(dist)[None, :]).ravel()
    state = EnsembleState(n, weights)
    state = apply_bpm(state, BitVec.ones(2 * n), n1 % 2)
    return state.entropy()


def support_bracket_entropy(n0: int, n1: int, cond) -> float:
    """Same quantity as :func:`exact_bracket_entropy`, enumerating only the ``2^n`` supported labels."""
    n = n0 + n1
    if n > 20:
        raise EnumerationTooLarge(f"{n} pairs exceeds the support-enumeration cap of 20")
    # bit k of c picks the second label of pair k's class (11 for even, 10 for odd)
    c = np.arange(1 << n, dtype=np.int64)
    probs = np.ones(c.size)
    for k in range(n):
        bit = (c >> k) & 1
        lo, hi = (cond.q00, cond.q11) if k < n0 else (cond.q01, cond.q10)
        probs *= np.where(bit == 1, hi, lo)
    comp = c ^ ((1 << n) - 1)
    merged = probs + probs[comp]
    return _entropy_bits(merged[c < comp])


@lru_cache(maxsize=None)
def _brute_force_completion(last: int, length: int) -> np.ndarray:
    # scans candidate upper rows from the highest integers down, unlike gf2core's forward scan
    P = np.kron(np.eye(length // 2, dtype=np.int64), np.array([[0, 1], [1, 0]]))
    last_row = np.array([(last >> (length - 1 - i)) & 1 for i in range(length)])
    top = 1 << length
    for rows in itertools.product(range(top - 1, -1, -1), repeat=length - 1):
        C = np.array(
            [[(x >> (length - 1 - i)) & 1 for i in range(length)] for x in rows] + [last_row.tolist()]
        )
        if np.array_equal((C.T @ P @ C) % 2, P):
            return C
    raise RuntimeError("no symplectic completion found")


def recurrence_bruteforce(pair_dist) -> tuple[np.ndarray, float]:
    """One recurrence round on two pairs: BPM ``1111``, keep outcome 0.

    Returns the kept-pair distribution (labelled through an independently
    found symplectic completion) and the success probability.
    """
    state = EnsembleState.product(pair_dist, 2)
    r = BitVec.ones(4)
    success = state.parity_probability(r, 0)
    after = apply_bpm(state, r, 0)
    C = _brute_force_completion(r.value, 4)
    kept = np.zeros(4)
    for g, w in enumerate(after.weights):
        if w == 0:
            continue
        bits = np.array([(g >> (3 - i)) & 1 for i in range(4)])
        image = (C[:2] @ bits) % 2
        kept[2 * image[0] + image[1]] += w
    return kept, success


def vv_ledger(pair_dist) -> dict[str, float]:
    """Per-pair cost ledger of the ``1010`` two-pair protocol by direct enumeration."""
    state = EnsembleState.product(pair_dist, 2)
    a = BitVec.from_string("1010")
    bpm = BitVec.from_string("1000")
    p_even = state.parity_probability(a, 0)
    p_odd = state.parity_probability(a, 1)
    residual = 0.0
    if p_even > 0:
        residual += p_even * apply_aem(state, a, 0).entropy()
    if p_odd > 0:
        odd = apply_aem(state, a, 1)
        for outcome in (0, 1):
            q = odd.parity_probability(bpm, outcome)
            if q > 0:
                residual += p_odd * q * apply_bpm(odd, bpm, outcome).entropy()
    s_a = _entropy_bits([p_even, p_odd])
    kept_pairs = 2 * p_even + p_odd
    return {
        "pb_cost": (s_a + p_odd) / 2,
        "bpm_savings": p_odd / 2,
        "residual": residual / 2,
        "nonmeasured_fraction": kept_pairs / 2,
        "yield": (kept_pairs - s_a - residual) / 2,
    }


@dataclass
class MonteCarloResult:
    """Empirical pair-level class frequencies per ``2^qdepth`` pairs with standard errors.

    Classes are keyed as ``"loose0"``, ``"loose1"`` or ``(n0, n1)``.
    """

    qdepth: int
    mode: str
    trunc: int
    samples: int
    seed: int
    frequencies: dict
    std_errors: dict
    yield_estimate: float
    yield_std_error: float
    eta_by_level: dict[int, tuple[float, float]]


def _pairing_rounds(order: np.ndarray, values: np.ndarray, trunc: int) -> np.ndarray:
    """Run the pairing trick on even blocks listed in priority order; return the blocks that get a BPM."""
    leads = order
    vals = values[order]
    chosen = []
    for _ in range(trunc):
        n = leads.size
        h = n // 2
        if h == 0:
            break
        a, b = leads[:h], leads[h : 2 * h]
        va, vb = vals[:h], vals[h : 2 * h]
        hit = va != vb
        chosen.append(a[hit])
        next_leads = [a[~hit]]
        next_vals = [va[~hit]]
        if n % 2:
            next_leads.append(leads[-1:])
            next_vals.append(vals[-1:])
        leads = np.concatenate(next_leads)
        vals = np.concatenate(next_vals)
    return np.concatenate(chosen) if chosen else np.zeros(0, dtype=np.int64)


def _class_keys(bracket: np.ndarray, parity: np.ndarray, n_ids: int) -> np.ndarray:
    in_bracket = bracket >= 0
    ids = bracket[in_bracket]
    n0 = np.bincount(ids, weights=(parity[in_bracket] == 0), minlength=n_ids)
    n1 = np.bincount(ids, weights=(parity[in_bracket] == 1), minlength=n_ids)
    keys = np.full(bracket.size, np.iinfo(np.int64).max, dtype=np.int64)
    size = (n0 + n1)[ids].astype(np.int64)
    keys[in_bracket] = size * (1 << 20) + n0[ids].astype(np.int64)
    return keys


def _simulate(pair_dist, qdepth, mode, trunc, samples, rng):
    n_pairs = 1 << qdepth
    p_odd = pair_dist[1] + pair_dist[2]
    flat = (rng.random(samples * n_pairs) < p_odd).astype(np.uint8)
    bracket = np.full(samples, -1, dtype=np.int64)
    next_id = 0
    block_pairs = n_pairs
    eta_counts: dict[int, tuple[int, int]] = {}
    while block_pairs > 1:
        nblocks = flat.size // block_pairs
        half = block_pairs // 2
        halves = np.bitwise_xor.reduce(flat.reshape(nblocks * 2, half), axis=1)
        first, second = halves[0::2], halves[1::2]
        parity = first ^ second
        bpm = parity == 1
        zeros = np.flatnonzero(parity == 0)
        if mode == "uniform":
            order = rng.permutation(zeros)
        else:
            keys = _class_keys(bracket, parity, next_id)[zeros]
            order = zeros[np.lexsort((rng.random(zeros.size), keys))]
        chosen = _pairing_rounds(order, first, trunc)
        bpm[chosen] = True
        eta_counts[2 * block_pairs] = (chosen.size, zeros.size)
        idx = np.flatnonzero(bpm)
        bracket = np.repeat(bracket, 2)
        bracket[2 * idx] = next_id + np.arange(idx.size)
        next_id += idx.size
        block_pairs = half
    sample_of = np.arange(flat.size) // n_pairs
    return flat, bracket, sample_of, next_id, eta_counts


@dataclass
class _ShardSums:
    samples: int
    counts: dict  # class key -> [sum of per-sample counts, sum of squares]
    y_sum: float
    y_sq: float
    eta_counts: dict[int, list[int]]

    def merge(self, other: _ShardSums) -> _ShardSums:
        counts = {k: list(v) for k, v in self.counts.items()}
        for k, (a, b) in other.counts.items():
            acc = counts.setdefault(k, [0.0, 0.0])
            acc[0] += a
            acc[1] += b
        eta = {k: list(v) for k, v in self.eta_counts.items()}
        for k, (h, t) in other.eta_counts.items():
            acc = eta.setdefault(k, [0, 0])
            acc[0] += h
            acc[1] += t
        return _ShardSums(
            self.samples + other.samples, counts, self.y_sum + other.y_sum, self.y_sq + other.y_sq, eta
        )


def _shard(pair_dist, qdepth, mode, trunc, samples, seed_seq) -> _ShardSums:
    rng = np.random.default_rng(seed_seq)
    flat, bracket, sample_of, n_ids, eta_counts = _simulate(pair_dist, qdepth, mode, trunc, samples, rng)

    in_b = bracket >= 0
    # brackets never cross initial blocks, so each bracket id has one owner sample
    n0 = np.bincount(bracket[in_b], weights=(flat[in_b] == 0), minlength=n_ids).astype(np.int64)
    n1 = np.bincount(bracket[in_b], weights=(flat[in_b] == 1), minlength=n_ids).astype(np.int64)
    owner = np.zeros(n_ids, dtype=np.int64)
    owner[bracket[in_b]] = sample_of[in_b]
    cap = (1 << qdepth) + 1
    code = n0 * cap + n1

    counts: dict = {}
    loose0 = np.bincount(sample_of[~in_b & (flat == 0)], minlength=samples)
    loose1 = np.bincount(sample_of[~in_b & (flat == 1)], minlength=samples)
    for key, per_sample in (("loose0", loose0), ("loose1", loose1)):
        counts[key] = [float(per_sample.sum()), float((per_sample.astype(float) ** 2).sum())]
    keys, per_pair = np.unique(owner * (cap * cap) + code, return_counts=True)
    codes = keys % (cap * cap)
    for c in np.unique(codes):
        sel = per_pair[codes == c].astype(float)
        counts[(int(c // cap), int(c % cap))] = [float(sel.sum()), float((sel ** 2).sum())]

    q00, q11 = _normalized(pair_dist[0], pair_dist[3])
    q01, q10 = _normalized(pair_dist[1], pair_dist[2])
    cond = _Cond(q00, q11, q01, q10)
    unique_codes = np.unique(code)
    entropies = np.array([support_bracket_entropy(int(c // cap), int(c % cap), cond) for c in unique_codes])
    bracket_s = entropies[np.searchsorted(unique_codes, code)] if n_ids else np.zeros(0)
    per_sample_s = loose0 * _entropy_bits([q00, q11]) + loose1 * _entropy_bits([q01, q10])
    per_sample_s = per_sample_s + np.bincount(owner, weights=bracket_s, minlength=samples)
    s2 = _entropy_bits([pair_dist[0] + pair_dist[3], pair_dist[1] + pair_dist[2]])
    y = 1.0 - s2 - per_sample_s / (1 << qdepth)
    eta = {level: [hits, total] for level, (hits, total) in eta_counts.items()}
    return _ShardSums(samples, counts, float(y.sum()), float((y ** 2).sum()), eta)


def _mean_se(total: float, squares: float, n: int) -> tuple[float, float]:
    mean = total / n
    var = max(squares / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def mc_cascade(
    rho,
    qdepth: int,
    mode: str = "uniform",
    trunc: int = 10,
    samples: int = 100_000,
    seed: int = 0,
    shards: int = 1,
    jobs: int = 1,
) -> MonteCarloResult:
    """Simulate the cascade on ``samples`` independent blocks of ``2^qdepth`` pairs.

    Within each level all even blocks of a shard take part in one pairing
    trick (random order in uniform mode; sorted by class with random
    tie-breaks in ordered mode).  The yield estimate plugs the per-block class
    counts into ``1 - S2 - 2^-q sum_A count(A) S(A)``, with ``S(A)`` from
    support enumeration.

    Samples are split into ``shards`` with sub-seeds spawned from ``seed``;
    the result depends on ``shards`` but not on ``jobs``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 1 <= qdepth <= 4:
        raise ValueError("Monte Carlo supports qdepth in 1..4")
    if mode not in ("uniform", "ordered"):
        raise ValueError(f"unknown mode {mode!r}")
    if trunc < 1:
        raise ValueError("trunc must be >= 1")
    if not 1 <= shards <= samples:
        raise ValueError("need 1 <= shards <= samples")
    pair_dist = np.asarray(rho.probs if hasattr(rho, "probs") else rho, dtype=float)
    root = np.random.SeedSequence(seed)
    seeds = [root] if shards == 1 else root.spawn(shards)
    sizes = [samples // shards + (i < samples % shards) for i in range(shards)]
    args = [(pair_dist, qdepth, mode, trunc, n, sq) for n, sq in zip(sizes, seeds)]
    if jobs > 1 and shards > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, shards)) as pool:
            parts = list(pool.map(_shard, *zip(*args)))
    else:
        parts = [_shard(*a) for a in args]
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)

    stats = {k: _mean_se(a, b, samples) for k, (a, b) in total.counts.items()}
    y_mean, y_se = _mean_se(total.y_sum, total.y_sq, samples)
    eta_by_level = {}
    for level, (hits, n) in sorted(total.eta_counts.items(), reverse=True):
        frac = hits / n if n else 0.0
        eta_by_level[level] = (frac, math.sqrt(frac * (1 - frac) / n) if n else 0.0)
    return MonteCarloResult(
        qdepth=qdepth,
        mode=mode,
        trunc=trunc,
        samples=samples,
        seed=seed,
        frequencies={k: v[0] for k, v in stats.items()},
        std_errors={k: v[1] for k, v in stats.items()},
        yield_estimate=y_mean,
        yield_std_error=y_se,
        eta_by_level=eta_by_level,
    )


def _normalized(a: float, b: float) -> tuple[float, float]:
    s = a + b
    return (a / s, b / s) if s > 0 else (1.0, 0.0)


@dataclass(frozen=True)
class _Cond:
    q00: float
    q11: float
    q01: float
    q10: float
