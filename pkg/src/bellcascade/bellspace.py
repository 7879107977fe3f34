"""Bell-diagonal distributions, parity-class probabilities and entropies.

Everything is measured in bits and uses the convention ``0 log 0 = 0``.
Bell labels are indexed ``00, 01, 10, 11`` in that order (phase bit first).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .gf2core import BitVec

__all__ = [
    "NORM_TOL",
    "UndefinedConditionalError",
    "BellDiagonal",
    "ConditionalPairDist",
    "ClassProbs",
    "shannon_entropy",
    "binary_entropy",
    "state_entropy",
    "grouped_entropy",
    "class_probs_ladder",
    "entropy_reduction",
    "product_distribution",
    "merged_pair_distribution",
    "parse_probs",
]

NORM_TOL = 1e-12


class UndefinedConditionalError(ValueError):
    """Conditioning on an event of probability zero."""


def _xlog2x(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def shannon_entropy(probs) -> float:
    """Shannon entropy in bits of a (not necessarily normalized) weight vector."""
    return float(-_xlog2x(probs).sum())


def binary_entropy(p: float) -> float:
    """``H(p, 1-p)`` in bits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability outside [0, 1]: {p}")
    return shannon_entropy([p, 1.0 - p])


@dataclass(frozen=True)
class BellDiagonal:
    """Bell-diagonal two-qubit state as the probabilities of ``|B_00>, |B_01>, |B_10>, |B_11>``."""

    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self) -> None:
        probs = self.probs
        if not np.all(np.isfinite(probs)):
            raise ValueError(f"non-finite probabilities: {probs.tolist()}")
        if np.any(probs < 0):
            raise ValueError(f"negative probabilities: {probs.tolist()}")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum():.15g}, not 1")

    @classmethod
    def werner(cls, fidelity: float) -> BellDiagonal:
        if not 0.0 <= fidelity <= 1.0:
            raise ValueError(f"fidelity outside [0, 1]: {fidelity}")
        rest = (1.0 - fidelity) / 3.0
        return cls(fidelity, rest, rest, rest)

    @classmethod
    def from_probs(cls, probs: Iterable[float]) -> BellDiagonal:
        probs = [float(p) for p in probs]
        if len(probs) != 4:
            raise ValueError(f"need four probabilities, got {len(probs)}")
        return cls(*probs)

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p00, self.p01, self.p10, self.p11], dtype=float)

    @property
    def fidelity(self) -> float:
        return self.p00

    def conditionals(self) -> ConditionalPairDist:
        return ConditionalPairDist.from_state(self)

    def __str__(self) -> str:
        return ",".join(f"{p:.12g}" for p in self.probs)


@dataclass(frozen=True)
class ConditionalPairDist:
    """Pair-label distribution given its ``11``-parity.

    ``q00, q11`` are conditional on the class ``{00, 11}`` and ``q01, q10`` on
    ``{01, 10}``.  A class of probability zero never occurs; its conditionals
    are set to the deterministic ``(1, 0)``.
    """

    q00: float
    q11: float
    q01: float
    q10: float

    def __post_init__(self) -> None:
        for a, b in ((self.q00, self.q11), (self.q01, self.q10)):
            if a < 0 or b < 0 or abs(a + b - 1.0) > NORM_TOL:
                raise ValueError(f"invalid conditional pair {a}, {b}")

    @classmethod
    def from_state(cls, rho: BellDiagonal) -> ConditionalPairDist:
        even = rho.p00 + rho.p11
        odd = rho.p01 + rho.p10
        q00, q11 = (rho.p00 / even, rho.p11 / even) if even > 0 else (1.0, 0.0)
        q01, q10 = (rho.p01 / odd, rho.p10 / odd) if odd > 0 else (1.0, 0.0)
        return cls(q00, q11, q01, q10)

    @classmethod
    def from_halves(cls, q00: float, q01: float) -> ConditionalPairDist:
        return cls(q00, 1.0 - q00, q01, 1.0 - q01)


@dataclass(frozen=True)
class ClassProbs:
    """Probabilities that an ``level``-bit block has even / odd all-ones parity."""

    level: int
    p0: float
    p1: float

    def __post_init__(self) -> None:
        if self.level < 2 or self.level & (self.level - 1):
            raise ValueError(f"level must be a power of two >= 2, got {self.level}")
        if self.p0 < 0 or self.p1 < 0 or abs(self.p0 + self.p1 - 1.0) > 1e-9:
            raise ValueError(f"invalid class probabilities {self.p0}, {self.p1}")

    def doubled(self) -> ClassProbs:
        return ClassProbs(2 * self.level, self.p0 ** 2 + self.p1 ** 2, 2 * self.p0 * self.p1)

    @property
    def entropy(self) -> float:
        return shannon_entropy([self.p0, self.p1])


def state_entropy(rho: BellDiagonal) -> float:
    """``S(rho)``: Shannon entropy of the Bell-label distribution."""
    return shannon_entropy(rho.probs)


def product_distribution(rho: BellDiagonal, n_pairs: int) -> np.ndarray:
    """Weights of all ``2 n_pairs``-bit labels for ``rho`` on ``n_pairs`` independent pairs.

    Entry ``g`` (as an integer, leftmost pair most significant) is ``p_g``.
    """
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    dist = rho.probs
    for _ in range(n_pairs - 1):
        dist = np.kron(dist, rho.probs)
    return dist


def _parity_table(length: int, a: BitVec) -> np.ndarray:
    labels = np.arange(1 << length, dtype=np.int64)
    return (np.bitwise_count(labels & a.value) & 1).astype(np.uint8)


def grouped_entropy(rho: BellDiagonal, a) -> float:
    """``S^(a)(rho)``: binary entropy of the ``a``-parity of an ``len(a)``-bit block."""
    a = a if isinstance(a, BitVec) else BitVec.from_string(str(a))
    if not a:
        raise ValueError("parity vector a must be nonzero")
    weights = product_distribution(rho, a.n_pairs)
    odd = _parity_table(a.length, a).astype(bool)
    p1 = float(weights[odd].sum())
    return binary_entropy(min(max(p1, 0.0), 1.0))


def class_probs_ladder(rho: BellDiagonal, qdepth: int) -> list[ClassProbs]:
    """Class probabilities for block sizes ``2, 4, ..., 2^(qdepth+1)``."""
    if qdepth < 1:
        raise ValueError(f"qdepth must be >= 1, got {qdepth}")
    ladder = [ClassProbs(2, rho.p00 + rho.p11, rho.p01 + rho.p10)]
    for _ in range(qdepth):
        ladder.append(ladder[-1].doubled())
    return ladder


def entropy_reduction(x: float, y: float) -> float:
    """Entropy removed when two labels of weights ``x`` and ``y`` are merged.

    Equals ``(x + y) H(x / (x + y))``; zero for an empty merge.
    """
    if x < 0 or y < 0:
        raise ValueError(f"weights must be nonnegative, got {x}, {y}")
    total = x + y
    if total == 0:
        return 0.0
    return total * binary_entropy(min(x / total, 1.0))


def merged_pair_distribution(rho2, a, outcome: int) -> dict[tuple[BitVec, BitVec], float]:
    """Distribution left after a BPM of ``a`` with the given outcome.

    ``rho2`` holds the weight of every label in ``Z_2^m`` (index = integer
    value of the label).  Labels with ``a^T g == outcome`` are kept, ``g`` and
    ``g + P a`` are merged into one class and the result is renormalized.
    Keys are the two merged labels in increasing order.
    """
    weights = np.asarray(rho2, dtype=float)
    a = a if isinstance(a, BitVec) else BitVec.from_string(str(a))
    if not a:
        raise ValueError("parity vector a must be nonzero")
    if weights.shape != (1 << a.length,):
        raise ValueError(f"expected {1 << a.length} weights, got shape {weights.shape}")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > NORM_TOL:
        raise ValueError("rho2 must be a normalized nonnegative distribution")
    parity = _parity_table(a.length, a)
    mass = float(weights[parity == outcome].sum())
    if mass <= 0:
        raise UndefinedConditionalError(f"outcome {outcome} of parity {a} has probability zero")
    shift = a.swap_pairs().value
    out: dict[tuple[BitVec, BitVec], float] = {}
    for g in np.flatnonzero(parity == outcome):
        partner = int(g) ^ shift
        if partner < g:
            continue
        key = (BitVec(int(g), a.length), BitVec(partner, a.length))
        out[key] = float(weights[g] + weights[partner]) / mass
    return out


def parse_probs(text: str) -> BellDiagonal:
    """Parse ``"p00,p01,p10,p11"``."""
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ValueError(f"cannot parse probabilities {text!r}") from exc
    return BellDiagonal.from_probs(values)
