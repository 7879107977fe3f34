"""Asymptotic yield calculators.

Three families are covered:

* breeding, yield ``1 - S(rho)``;
* the two-pair adaptive variant that breeds even ``1010`` blocks and, on odd
  blocks, measures the phase bit of the first pair by a BPM;
* the BPM cascade.  After a partial breeding of the all-ones parity on blocks
  of ``2^q`` pairs, every block is halved level by level.  Odd blocks always
  get a BPM of the first half; even blocks get one with probability ``eta``
  (uniform mode) or ``eta(A)`` depending on the class they belong to (ordered
  mode).  At pair level the remaining entropy is bred away.

Frequencies are expected occurrences per ``2^q`` pairs and are propagated
exactly; nothing here samples.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterator, Literal

import numpy as np
from scipy.signal import convolve2d
from scipy.special import comb

from .bellspace import (
    BellDiagonal,
    ClassProbs,
    ConditionalPairDist,
    binary_entropy,
    class_probs_ladder,
    shannon_entropy,
    state_entropy,
)

__all__ = [
    "PROTOCOLS",
    "protocol_report",
    "Mode",
    "MODES",
    "Kind",
    "StateClass",
    "LOOSE0",
    "LOOSE1",
    "FrequencyTable",
    "EtaState",
    "YieldReport",
    "breeding_report",
    "breeding_yield",
    "vv_report",
    "vv_yield",
    "eta_states",
    "eta_uniform",
    "eta_ordered",
    "propagate_frequencies",
    "class_ordering_fractions",
    "bracket_entropy",
    "loose_pair_entropy",
    "class_entropy",
    "initial_table",
    "cascade_tables",
    "cascade_yield",
]

Mode = Literal["uniform", "ordered"]
MODES: tuple[str, ...] = ("uniform", "ordered")

DEFAULT_TRUNC = 10


class Kind(Enum):
    LOOSE0 = "loose0"
    LOOSE1 = "loose1"
    BRACKET = "bracket"


@dataclass(frozen=True)
class StateClass:
    """A loose even/odd block, or a bracket ``[n0, n1]`` of blocks merged by earlier BPMs."""

    kind: Kind
    n0: int = 0
    n1: int = 0

    def __post_init__(self) -> None:
        if self.kind is Kind.BRACKET:
            if self.n0 < 0 or self.n1 < 0 or self.n0 + self.n1 < 1:
                raise ValueError(f"bracket needs n0, n1 >= 0 and n0 + n1 >= 1, got [{self.n0},{self.n1}]")
        elif self.n0 or self.n1:
            raise ValueError("loose classes carry no counts")

    @classmethod
    def bracket(cls, n0: int, n1: int) -> StateClass:
        return cls(Kind.BRACKET, n0, n1)

    @property
    def is_bracket(self) -> bool:
        return self.kind is Kind.BRACKET

    @property
    def zeros(self) -> int:
        """Even blocks in the class (a loose even block counts as one)."""
        return 1 if self.kind is Kind.LOOSE0 else self.n0

    @property
    def ones(self) -> int:
        return 1 if self.kind is Kind.LOOSE1 else self.n1

    @property
    def size(self) -> int:
        return self.zeros + self.ones

    def order_key(self) -> tuple[int, int, int]:
        # brackets by (n0 + n1, n0) ascending, every bracket before loose even blocks
        if self.kind is Kind.BRACKET:
            return (0, self.n0 + self.n1, self.n0)
        return (1, 0, 0) if self.kind is Kind.LOOSE0 else (2, 0, 0)

    def __str__(self) -> str:
        if self.kind is Kind.BRACKET:
            return f"[{self.n0},{self.n1}]"
        return self.kind.value


LOOSE0 = StateClass(Kind.LOOSE0)
LOOSE1 = StateClass(Kind.LOOSE1)


@dataclass(frozen=True)
class FrequencyTable:
    """Expected class occurrences per ``2^qdepth`` pairs, at block size ``level`` bits."""

    level: int
    qdepth: int
    entries: dict[StateClass, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.level < 2 or self.level & (self.level - 1):
            raise ValueError(f"level must be a power of two >= 2, got {self.level}")
        if any(f < 0 for f in self.entries.values()):
            raise ValueError("frequencies must be nonnegative")

    def __getitem__(self, cls: StateClass) -> float:
        return self.entries.get(cls, 0.0)

    def __iter__(self) -> Iterator[StateClass]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return self.entries.items()

    def block_count(self) -> float:
        return sum(cls.size * f for cls, f in self.entries.items())

    def pair_count(self) -> float:
        """Pairs per ``2^qdepth`` pairs; conserved at ``2^qdepth`` on every level."""
        return self.block_count() * self.level / 2

    def zero_block_count(self) -> float:
        return sum(cls.zeros * f for cls, f in self.entries.items())

    def bracket_count(self) -> float:
        return sum(f for cls, f in self.entries.items() if cls.is_bracket)

    def sorted_items(self) -> list[tuple[StateClass, float]]:
        return sorted(self.entries.items(), key=lambda kv: kv[0].order_key())


@dataclass(frozen=True)
class EtaState:
    """One step of the even-block pairing recursion.

    ``t`` is the probability of reaching the step, ``px``/``py`` the
    probabilities of the two joint values of a group, ``k`` the number of
    even blocks per group pair.
    """

    t: float
    px: float
    py: float
    k: int

    @property
    def bpm_probability(self) -> float:
        """Unconditional probability that the lead block of a group gets its BPM at this step."""
        return 2.0 * self.t * self.px * self.py

    @property
    def fraction(self) -> float:
        """Fraction of all even blocks receiving a BPM at this step."""
        return self.bpm_probability / self.k

    def advance(self) -> EtaState:
        s = self.px ** 2 + self.py ** 2
        return EtaState(self.t * s, self.px ** 2 / s, self.py ** 2 / s, 2 * self.k)


def _check_pair(p0: float, p1: float) -> None:
    if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-9:
        raise ValueError(f"p0, p1 must be a probability pair, got {p0}, {p1}")


def _vw(p0: float, p1: float) -> tuple[float, float]:
    s = p0 * p0 + p1 * p1
    return p0 * p0 / s, p1 * p1 / s


def eta_states(p0: float, p1: float, trunc: int) -> list[EtaState]:
    """The first ``trunc`` steps of the recursion for halves with class probabilities ``p0, p1``."""
    _check_pair(p0, p1)
    if trunc < 1:
        raise ValueError(f"trunc must be >= 1, got {trunc}")
    v, w = _vw(p0, p1)
    states = [EtaState(1.0, v, w, 2)]
    for _ in range(trunc - 1):
        states.append(states[-1].advance())
    return states


def eta_uniform(p0: float, p1: float, trunc: int = DEFAULT_TRUNC) -> float:
    """Fraction of even ``2m``-bit blocks whose first half gets a BPM, all blocks treated alike.

    ``p0``, ``p1`` are the class probabilities of the ``m``-bit halves.  The
    series is cut after ``trunc`` terms.
    """
    return math.fsum(s.fraction for s in eta_states(p0, p1, trunc))


def eta_ordered(p0: float, p1: float, L: float, U: float, trunc: int = DEFAULT_TRUNC) -> float:
    """BPM fraction for the even blocks occupying positions ``[L, U]`` of the class ordering.

    At step ``i`` the lead blocks are the ones at positions below ``2^-i``;
    a class entirely below that cut-off collects the full step probability,
    a straddling class its covered share.  Both sums stop at ``trunc``.
    """
    if not 0.0 <= L < U <= 1.0:
        raise ValueError(f"need 0 <= L < U <= 1, got L={L}, U={U}")
    z = [s.bpm_probability for s in eta_states(p0, p1, trunc)]
    u = math.ceil(-math.log2(U))
    l = math.floor(-math.log2(L)) if L > 0 else trunc
    full = math.fsum(z[i - 1] for i in range(1, min(u - 1, trunc) + 1))
    partial = math.fsum(
        (2.0 ** -i - L) / (U - L) * z[i - 1] for i in range(max(u, 1), min(l, trunc) + 1)
    )
    return full + partial


def class_ordering_fractions(table: FrequencyTable) -> dict[StateClass, tuple[float, float]]:
    """Cumulative share ``(L, U)`` of even blocks lying in classes before / up to each class.

    Classes are ordered brackets first, by ``(n0 + n1, n0)``, then loose even
    blocks.  Classes without even blocks (or with zero frequency) are omitted.
    """
    items = [(cls, f) for cls, f in table.sorted_items() if cls.zeros > 0 and f > 0]
    total = math.fsum(cls.zeros * f for cls, f in items)
    out: dict[StateClass, tuple[float, float]] = {}
    if total <= 0:
        return out
    running = 0.0
    for cls, f in items:
        lower = running / total
        running += cls.zeros * f
        upper = min(running / total, 1.0)
        if upper > lower:
            out[cls] = (lower, upper)
    last = items[-1][0]
    if last in out:
        out[last] = (out[last][0], 1.0)
    return out


@lru_cache(maxsize=None)
def _one_block_power(n: int) -> np.ndarray:
    # odd block: half of the time it leaves an even half, half an odd half
    d = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        d[i, n - i] = comb(n, i) / 2.0 ** n
    return d


def _zero_block_kernel(eta: float, v: float, w: float) -> np.ndarray:
    # contribution of one even block to the bracket it stays in, indexed [even, odd] halves
    k = np.zeros((3, 3))
    k[1, 0] = eta / 2
    k[0, 1] = eta / 2
    k[2, 0] = max(v - eta / 2, 0.0)
    k[0, 2] = max(w - eta / 2, 0.0)
    return k


def _power(kernel: np.ndarray, n: int) -> np.ndarray:
    result = np.ones((1, 1))
    base = kernel
    while n:
        if n & 1:
            result = convolve2d(result, base)
        n >>= 1
        if n:
            base = convolve2d(base, base)
    return result


def propagate_frequencies(
    table: FrequencyTable,
    halves: ClassProbs,
    mode: Mode = "uniform",
    trunc: int = DEFAULT_TRUNC,
) -> FrequencyTable:
    """Advance a frequency table from block size ``2m`` to ``m``.

    ``halves`` are the class probabilities at the child size ``m``.  Odd
    blocks always get a BPM of their first half; even blocks get one with
    probability ``eta`` and are otherwise split by partial breeding.  Spawned
    halves become singleton brackets, the sibling stays where its parent was.
    """
    if table.level < 4:
        raise ValueError("the cascade ends at pair level; cannot propagate from level 2")
    if halves.level != table.level // 2:
        raise ValueError(f"class probabilities are for level {halves.level}, need {table.level // 2}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    p0, p1 = halves.p0, halves.p1
    v, w = _vw(p0, p1)
    if mode == "uniform":
        eta_common = eta_uniform(p0, p1, trunc)
        etas = {cls: eta_common for cls in table if cls.zeros}
    else:
        fractions = class_ordering_fractions(table)
        etas = {cls: eta_ordered(p0, p1, L, U, trunc) for cls, (L, U) in fractions.items()}

    new: dict[StateClass, float] = defaultdict(float)
    single0 = StateClass.bracket(1, 0)
    single1 = StateClass.bracket(0, 1)
    spawned = 0.0
    for cls, f in table.items():
        if f <= 0:
            continue
        eta = etas.get(cls, 0.0)
        if cls.kind is Kind.LOOSE0:
            spawned += f * eta / 2
            new[LOOSE0] += f * (eta / 2 + 2 * max(v - eta / 2, 0.0))
            new[LOOSE1] += f * (eta / 2 + 2 * max(w - eta / 2, 0.0))
        elif cls.kind is Kind.LOOSE1:
            spawned += f / 2
            new[LOOSE0] += f / 2
            new[LOOSE1] += f / 2
        else:
            spawned += f * (cls.n1 / 2 + cls.n0 * eta / 2)
            dist = _one_block_power(cls.n1)
            if cls.n0:
                dist = convolve2d(dist, _power(_zero_block_kernel(eta, v, w), cls.n0))
            for i, j in zip(*np.nonzero(dist)):
                new[StateClass.bracket(int(i), int(j))] += f * float(dist[i, j])
    new[single0] += spawned
    new[single1] += spawned
    return FrequencyTable(table.level // 2, table.qdepth, dict(new))


def initial_table(rho: BellDiagonal, qdepth: int) -> FrequencyTable:
    """Classes after the opening partial breeding on blocks of ``2^qdepth`` pairs."""
    top = class_probs_ladder(rho, qdepth)[-1]
    return FrequencyTable(top.level, qdepth, {LOOSE0: top.p0, LOOSE1: top.p1})


def _check_cascade_args(qdepth: int, mode: str, trunc: int) -> None:
    if not isinstance(qdepth, (int, np.integer)) or qdepth < 1:
        raise ValueError(f"qdepth must be an integer >= 1, got {qdepth!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if trunc < 1:
        raise ValueError(f"trunc must be >= 1, got {trunc}")


def cascade_tables(
    rho: BellDiagonal, qdepth: int, mode: Mode = "uniform", trunc: int = DEFAULT_TRUNC
) -> list[FrequencyTable]:
    """Frequency tables at every block size, from ``2^(qdepth+1)`` bits down to single pairs."""
    _check_cascade_args(qdepth, mode, trunc)
    ladder = class_probs_ladder(rho, qdepth)
    tables = [initial_table(rho, qdepth)]
    for probs in reversed(ladder[:-1]):
        tables.append(propagate_frequencies(tables[-1], probs, mode, trunc))
    return tables


def bracket_entropy(n0: int, n1: int, cond: ConditionalPairDist) -> float:
    """Entropy of ``n0`` even and ``n1`` odd pairs whose labels are merged under global complement."""
    if n0 < 0 or n1 < 0 or n0 + n1 < 1:
        raise ValueError(f"need n0, n1 >= 0 and n0 + n1 >= 1, got {n0}, {n1}")
    i = np.arange(n0 + 1)[:, None]
    j = np.arange(n1 + 1)[None, :]
    with np.errstate(under="ignore"):
        P = (
            cond.q00 ** i * cond.q11 ** (n0 - i) * cond.q01 ** j * cond.q10 ** (n1 - j)
            + cond.q00 ** (n0 - i) * cond.q11 ** i * cond.q01 ** (n1 - j) * cond.q10 ** j
        )
        mult = comb(n0, i) * comb(n1, j)
        logP = np.where(P > 0, np.log2(np.where(P > 0, P, 1.0)), 0.0)
    return float(max(-0.5 * np.sum(mult * P * logP), 0.0))


def loose_pair_entropy(kind: Kind | StateClass, cond: ConditionalPairDist) -> float:
    """Entropy of a single pair known to be even (``H(q00, q11)``) or odd (``H(q01, q10)``)."""
    if isinstance(kind, StateClass):
        kind = kind.kind
    if kind is Kind.LOOSE0:
        return shannon_entropy([cond.q00, cond.q11])
    if kind is Kind.LOOSE1:
        return shannon_entropy([cond.q01, cond.q10])
    raise ValueError(f"not a loose class: {kind}")


def class_entropy(cls: StateClass, cond: ConditionalPairDist) -> float:
    if cls.is_bracket:
        return bracket_entropy(cls.n0, cls.n1, cond)
    return loose_pair_entropy(cls, cond)


@dataclass(frozen=True)
class YieldReport:
    """Cost ledger of one protocol run, all per input pair.

    ``raw_yield`` keeps the sign; ``floored_yield`` is what gets reported as
    the yield (a negative value means the protocol should not be run).
    """

    protocol: str
    pb_cost: float
    bpm_savings: float
    residual_breeding_cost: float
    nonmeasured_fraction: float
    raw_yield: float
    qdepth: int | None = None
    trunc: int | None = None

    @property
    def floored_yield(self) -> float:
        return max(self.raw_yield, 0.0)

    def ledger_yield(self) -> float:
        return self.nonmeasured_fraction - (self.pb_cost - self.bpm_savings) - self.residual_breeding_cost

    def as_dict(self) -> dict[str, float | int | str | None]:
        return {
            "protocol": self.protocol,
            "q": self.qdepth,
            "trunc": self.trunc,
            "pb_cost": float(self.pb_cost),
            "bpm_savings": float(self.bpm_savings),
            "residual": float(self.residual_breeding_cost),
            "nonmeasured_fraction": float(self.nonmeasured_fraction),
            "yield_raw": float(self.raw_yield),
            "yield": float(self.floored_yield),
        }


def breeding_report(rho: BellDiagonal) -> YieldReport:
    """Breeding written as partial breeding of ``11`` followed by breeding of the conditionals."""
    s2 = shannon_entropy([rho.p00 + rho.p11, rho.p01 + rho.p10])
    total = state_entropy(rho)
    return YieldReport(
        protocol="breeding",
        pb_cost=s2,
        bpm_savings=0.0,
        residual_breeding_cost=total - s2,
        nonmeasured_fraction=1.0,
        raw_yield=1.0 - total,
    )


def breeding_yield(rho: BellDiagonal) -> float:
    """``max(1 - S(rho), 0)``."""
    return max(1.0 - state_entropy(rho), 0.0)


def vv_report(rho: BellDiagonal) -> YieldReport:
    """Partial breeding of ``1010`` on two-pair blocks; odd blocks spend their first pair on a BPM ``10``.

    Even blocks keep both pairs and are bred.  On odd blocks the BPM reveals
    the phase bit of pair one, which fixes the phase bit of pair two; pair
    two is then bred at the entropy of its amplitude bit.
    """
    p = rho.probs
    phase0 = p[0] + p[1]
    phase1 = p[2] + p[3]
    p_even = phase0 ** 2 + phase1 ** 2
    p_odd = 2 * phase0 * phase1
    joint = np.outer(p, p)
    phase = np.array([0, 0, 1, 1])
    same = phase[:, None] == phase[None, :]
    h_even = shannon_entropy(joint[same] / p_even) if p_even > 0 else 0.0
    amp_given_phase0 = binary_entropy(p[0] / phase0) if phase0 > 0 else 0.0
    amp_given_phase1 = binary_entropy(p[2] / phase1) if phase1 > 0 else 0.0
    # the BPM outcome is equiprobable on odd blocks, so pair two's phase is 0 or 1 with weight 1/2
    h_odd = 0.5 * (amp_given_phase0 + amp_given_phase1)
    s_a = shannon_entropy([p_even, p_odd])
    pb_cost = (s_a + p_odd) / 2
    savings = p_odd / 2
    residual = (p_even * h_even + p_odd * h_odd) / 2
    nonmeasured = 1.0 - p_odd / 2
    raw = (2 * p_even + p_odd - s_a - p_even * h_even - p_odd * h_odd) / 2
    return YieldReport("vv", pb_cost, savings, residual, nonmeasured, raw)


def vv_yield(rho: BellDiagonal) -> float:
    return vv_report(rho).floored_yield


def cascade_yield(
    rho: BellDiagonal, qdepth: int, mode: Mode = "uniform", trunc: int = DEFAULT_TRUNC
) -> YieldReport:
    """Full ledger of the BPM cascade on blocks of ``2^qdepth`` pairs."""
    final = cascade_tables(rho, qdepth, mode, trunc)[-1]
    cond = rho.conditionals()
    scale = 2.0 ** -qdepth
    s2 = shannon_entropy([rho.p00 + rho.p11, rho.p01 + rho.p10])
    brackets = final.bracket_count()
    residual = scale * math.fsum(f * class_entropy(cls, cond) for cls, f in final.items() if f > 0)
    return YieldReport(
        protocol="cascade" if mode == "uniform" else "cascade-ordered",
        pb_cost=s2,
        bpm_savings=scale * brackets,
        residual_breeding_cost=residual,
        nonmeasured_fraction=1.0 - scale * brackets,
        raw_yield=1.0 - s2 - residual,
        qdepth=int(qdepth),
        trunc=int(trunc),
    )


PROTOCOLS = ("breeding", "vv", "cascade", "cascade-ordered")


def protocol_report(
    protocol: str, rho: BellDiagonal, qdepth: int = 6, trunc: int = DEFAULT_TRUNC
) -> YieldReport:
    """Dispatch by protocol name; ``qdepth`` and ``trunc`` only matter for the cascades."""
    if protocol == "breeding":
        return breeding_report(rho)
    if protocol == "vv":
        return vv_report(rho)
    if protocol == "cascade":
        return cascade_yield(rho, qdepth, "uniform", trunc)
    if protocol == "cascade-ordered":
        return cascade_yield(rho, qdepth, "ordered", trunc)
    raise ValueError(f"unknown protocol {protocol!r}; choose from {', '.join(PROTOCOLS)}")
