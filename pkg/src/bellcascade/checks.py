"""Comparisons between the closed-form machinery and the enumeration oracle.

Each check returns a :class:`CheckResult` with the largest deviation seen and
the instance that produced it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracle
from .bellspace import (
    BellDiagonal,
    ConditionalPairDist,
    entropy_reduction,
    grouped_entropy,
    merged_pair_distribution,
    product_distribution,
    shannon_entropy,
)
from .engine import (
    LOOSE0,
    FrequencyTable,
    StateClass,
    bracket_entropy,
    class_ordering_fractions,
    eta_ordered,
    eta_uniform,
)
from .gf2core import BitVec, symplectic_product
from .recurrence import recurrence_step

__all__ = [
    "CheckResult",
    "CHECKS",
    "random_bell_diagonal",
    "random_frequency_table",
    "check_bpm_merge",
    "check_bracket_entropy",
    "check_eta",
    "check_recurrence",
    "check_chain_rule",
    "check_entropy_reduction",
    "check_commutation",
    "eta_population_average",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_deviation: float
    tolerance: float
    instances: int
    worst: str = ""

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: max_dev={self.max_deviation:.3e} tol={self.tolerance:.1e} n={self.instances}"
        if not self.passed and self.worst:
            text += f" worst={self.worst}"
        return text


class _Tracker:
    def __init__(self) -> None:
        self.max_dev = 0.0
        self.worst = ""
        self.count = 0

    def add(self, dev: float, label: Callable[[], str]) -> None:
        self.count += 1
        if not dev <= self.max_dev:  # also catches NaN
            self.max_dev = dev if not math.isnan(dev) else math.inf
            self.worst = label()


def random_bell_diagonal(rng: np.random.Generator) -> BellDiagonal:
    probs = rng.dirichlet(np.ones(4))
    return BellDiagonal.from_probs(probs / probs.sum())


def random_frequency_table(rng: np.random.Generator, level: int = 8, qdepth: int = 4) -> FrequencyTable:
    entries: dict[StateClass, float] = {LOOSE0: float(rng.uniform(0.1, 3.0))}
    for _ in range(int(rng.integers(1, 8))):
        n0, n1 = (int(x) for x in rng.integers(0, 5, size=2))
        if n0 + n1 == 0:
            continue
        entries[StateClass.bracket(n0, n1)] = float(rng.uniform(0.0, 1.0))
    return FrequencyTable(level, qdepth, entries)


def check_bpm_merge(trials: int = 50, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """Merged-pair weights and BPM entropy deficits against direct ensemble enumeration."""
    rng = np.random.default_rng(seed)
    track = _Tracker()
    for _ in range(trials):
        rho = random_bell_diagonal(rng)
        weights = product_distribution(rho, 2)
        base = oracle.EnsembleState(2, weights.copy())
        for _ in range(3):
            a = BitVec(int(rng.integers(1, 16)), 4)
            for outcome in (0, 1):
                if base.parity_probability(a, outcome) <= 1e-300:
                    continue
                merged = merged_pair_distribution(weights, a, outcome)
                state = oracle.apply_bpm(base, a, outcome)
                classes = state.class_weights()
                dev = abs(len(classes) - len(merged))
                for (g, _), w in merged.items():
                    rep = min(g.value, g.value ^ a.swap_pairs().value)
                    dev = max(dev, abs(classes.get(rep, 0.0) - w))
                aem = oracle.apply_aem(base, a, outcome)
                deficit = math.fsum(
                    entropy_reduction(aem.weights[g.value], aem.weights[h.value]) for g, h in merged
                )
                dev = max(dev, abs(aem.entropy() - deficit - state.entropy()))
                track.add(dev, lambda: f"rho={rho} a={a} outcome={outcome}")
    return CheckResult("bpm-merge", track.max_dev, tol, track.count, track.worst)


def check_bracket_entropy(
    max_blocks: int = 6, trials: int = 20, seed: int = 0, tol: float = 1e-10
) -> CheckResult:
    rng = np.random.default_rng(seed)
    track = _Tracker()
    for _ in range(trials):
        q00, q01 = rng.uniform(0, 1, size=2)
        cond = ConditionalPairDist.from_halves(float(q00), float(q01))
        for n in range(1, max_blocks + 1):
            for n0 in range(n + 1):
                n1 = n - n0
                dev = abs(bracket_entropy(n0, n1, cond) - oracle.exact_bracket_entropy(n0, n1, cond))
                track.add(dev, lambda: f"n0={n0} n1={n1} cond={cond}")
    return CheckResult("bracket-entropy", track.max_dev, tol, track.count, track.worst)


def eta_population_average(table: FrequencyTable, p0: float, p1: float, trunc: int) -> float:
    """``sum_A eta(A) (U(A) - L(A))`` over the classes of ``table``."""
    return math.fsum(
        eta_ordered(p0, p1, L, U, trunc) * (U - L) for L, U in class_ordering_fractions(table).values()
    )


def check_eta(trunc: int = 20, trials: int = 100, seed: int = 0, tol: float = 1e-9) -> CheckResult:
    """Geometric-series value at ``p0 = p1 = 1/2`` plus class-average consistency on random tables."""
    rng = np.random.default_rng(seed)
    track = _Tracker()
    track.add(abs(eta_uniform(0.5, 0.5, trunc) - 1.0 / 3.0), lambda: f"eta_uniform(1/2, 1/2, {trunc})")
    for _ in range(trials):
        p0 = float(rng.uniform(0.5, 1.0))
        table = random_frequency_table(rng)
        dev = abs(eta_population_average(table, p0, 1 - p0, trunc) - eta_uniform(p0, 1 - p0, trunc))
        track.add(dev, lambda: f"p0={p0} table={dict((str(k), v) for k, v in table.items())}")
    return CheckResult("eta", track.max_dev, tol, track.count, track.worst)


def check_recurrence(trials: int = 50, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """Kept distribution and success probability against the oracle's independent round.

    The two sides use different symplectic completions, which may relabel the
    three non-identity Bell states; the kept fidelity is compared directly and
    the full distribution after sorting.
    """
    rng = np.random.default_rng(seed)
    track = _Tracker()
    samples = [BellDiagonal.werner(f) for f in (0.5, 0.7, 0.9, 1.0)]
    samples += [random_bell_diagonal(rng) for _ in range(trials)]
    for rho in samples:
        step = recurrence_step(rho)
        kept, success = oracle.recurrence_bruteforce(rho.probs)
        dev = max(
            abs(step.success_prob - success),
            abs(step.kept.p00 - kept[0]),
            float(np.max(np.abs(np.sort(step.kept.probs) - np.sort(kept)))),
        )
        track.add(dev, lambda: f"rho={rho}")
    return CheckResult("recurrence", track.max_dev, tol, track.count, track.worst)


def check_chain_rule(trials: int = 100, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """``S(two pairs) = S^(a) + sum_o p_o S(two pairs | a-parity o)`` for random ``rho`` and ``a``."""
    rng = np.random.default_rng(seed)
    track = _Tracker()
    for _ in range(trials):
        rho = random_bell_diagonal(rng)
        a = BitVec(int(rng.integers(1, 16)), 4)
        state = oracle.EnsembleState.product(rho.probs, 2)
        rhs = grouped_entropy(rho, a)
        for outcome in (0, 1):
            p = state.parity_probability(a, outcome)
            if p > 0:
                rhs += p * oracle.apply_aem(state, a, outcome).entropy()
        lhs = shannon_entropy(product_distribution(rho, 2))
        track.add(abs(lhs - rhs), lambda: f"rho={rho} a={a}")
    return CheckResult("chain-rule", track.max_dev, tol, track.count, track.worst)


def check_entropy_reduction(trials: int = 1000, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """Merging weights ``x, y`` removes ``-x log x - y log y + (x+y) log(x+y)`` bits."""
    rng = np.random.default_rng(seed)
    track = _Tracker()
    for _ in range(trials):
        x, y = (float(v) for v in rng.uniform(0, 1, size=2) * rng.uniform(0, 1))
        direct = shannon_entropy([x, y]) - shannon_entropy([x + y])
        track.add(abs(entropy_reduction(x, y) - direct), lambda: f"x={x} y={y}")
    return CheckResult("entropy-reduction", track.max_dev, tol, track.count, track.worst)


def check_commutation(max_pairs: int = 3) -> CheckResult:
    """After a BPM of ``r``, exactly the parities ``q`` with ``q^T P r = 0`` remain learnable."""
    track = _Tracker()
    for n_pairs in range(1, max_pairs + 1):
        length = 2 * n_pairs
        uniform = np.full(1 << length, 1.0 / (1 << length))
        for r in range(1, 1 << length):
            rv = BitVec(r, length)
            state = oracle.apply_bpm(oracle.EnsembleState(n_pairs, uniform), rv, 0)
            for q in range(1, 1 << length):
                qv = BitVec(q, length)
                expected = symplectic_product(qv, rv) == 0
                track.add(float(state.accessible(qv) != expected), lambda: f"r={rv} q={qv}")
    return CheckResult("commutation", track.max_dev, 0.0, track.count, track.worst)


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "bpm-merge": check_bpm_merge,
    "bracket-entropy": check_bracket_entropy,
    "eta": check_eta,
    "recurrence": check_recurrence,
    "chain-rule": check_chain_rule,
    "entropy-reduction": check_entropy_reduction,
    "commutation": check_commutation,
}
