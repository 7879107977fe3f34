"""Two-pair recurrence rounds used to lift low fidelities before an asymptotic protocol.

A round applies a BPM of ``1111`` to two pairs and keeps the surviving pair
only on outcome 0.  The surviving label is ``C' g`` where ``C'`` is the
completion of ``1111`` to a symplectic matrix with its last two rows dropped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .bellspace import NORM_TOL, BellDiagonal, product_distribution
from .gf2core import BitVec, complete_symplectic

__all__ = [
    "DEFAULT_KMAX",
    "RECURRENCE_CHECK",
    "DegenerateInputError",
    "RecurrenceStep",
    "ScheduleResult",
    "normalize_bell_order",
    "recurrence_step",
    "recurrence_chain",
    "optimal_recurrence_schedule",
]

DEFAULT_KMAX = 20
RECURRENCE_CHECK = BitVec.ones(4)


class DegenerateInputError(ValueError):
    """The recurrence round can never succeed on this input."""


@dataclass(frozen=True)
class RecurrenceStep:
    input: BellDiagonal
    kept: BellDiagonal
    success_prob: float
    pair_cost: int = 2

    @property
    def weight(self) -> float:
        """Surviving pairs per input pair."""
        return self.success_prob / self.pair_cost


def normalize_bell_order(rho: BellDiagonal) -> BellDiagonal:
    """Relabel by a local Clifford so that ``p00 >= p01 >= p10 >= p11``."""
    return BellDiagonal.from_probs(sorted(rho.probs, reverse=True))


def _kept_label_map() -> np.ndarray:
    reduced = complete_symplectic(RECURRENCE_CHECK).reduced.astype(np.int64)
    labels = np.arange(16)
    bits = (labels[:, None] >> np.arange(3, -1, -1)[None, :]) & 1
    image = (bits @ reduced.T) % 2
    return 2 * image[:, 0] + image[:, 1]


_KEPT = _kept_label_map()
_EVEN = (np.bitwise_count(np.arange(16) & RECURRENCE_CHECK.value) & 1) == 0


def recurrence_step(rho: BellDiagonal) -> RecurrenceStep:
    weights = product_distribution(rho, 2)
    success = float(weights[_EVEN].sum())
    if success <= 0:
        raise DegenerateInputError(f"recurrence never succeeds on {rho}")
    # the merge g ~ g + 1111 is invisible here: both labels map to the same kept label
    kept = np.bincount(_KEPT[_EVEN], weights=weights[_EVEN], minlength=4) / success
    kept = kept / kept.sum()
    if abs(kept.sum() - 1.0) > NORM_TOL:
        raise DegenerateInputError("kept distribution failed to normalize")
    return RecurrenceStep(rho, BellDiagonal.from_probs(kept), min(success, 1.0))


def recurrence_chain(rho: BellDiagonal, iterations: int) -> list[RecurrenceStep]:
    """Run ``iterations`` rounds, sorting the labels before each one."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    steps = []
    state = rho
    for _ in range(iterations):
        step = recurrence_step(normalize_bell_order(state))
        steps.append(step)
        state = step.kept
    return steps


class ScheduleResult(NamedTuple):
    iterations: int
    total_yield: float
    success_weight: float
    state: BellDiagonal


def optimal_recurrence_schedule(
    rho: BellDiagonal,
    backend: Callable[[BellDiagonal], float],
    kmax: int = DEFAULT_KMAX,
) -> ScheduleResult:
    """Pick the number of rounds ``k`` in ``0..kmax`` maximizing ``backend(rho_k) * prod(success/2)``.

    ``rho_k`` is passed to the backend after sorting.  Ties go to the smaller
    ``k``.  Since no backend yields more than 1 per pair, the search stops
    once the accumulated weight cannot beat the best total found.
    """
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    state = rho
    weight = 1.0
    best = ScheduleResult(0, weight * backend(state), weight, state)
    for k in range(1, kmax + 1):
        try:
            step = recurrence_step(normalize_bell_order(state))
        except DegenerateInputError:
            break
        weight *= step.weight
        state = normalize_bell_order(step.kept)
        if weight <= best.total_yield:
            break
        total = weight * backend(state)
        if total > best.total_yield:
            best = ScheduleResult(k, total, weight, state)
    return best
