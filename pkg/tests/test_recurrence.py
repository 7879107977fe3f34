import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcascade.bellspace import BellDiagonal, class_probs_ladder, product_distribution, state_entropy
from bellcascade.engine import breeding_yield
from bellcascade.gf2core import BitVec, SymplecticMatrix, complete_symplectic
from bellcascade.oracle import recurrence_bruteforce
from bellcascade.recurrence import (
    normalize_bell_order,
    optimal_recurrence_schedule,
    recurrence_chain,
    recurrence_step,
)


@st.composite
def bell_states(draw):
    raw = np.array([draw(st.floats(0.01, 1.0)) for _ in range(4)])
    return BellDiagonal.from_probs(raw / raw.sum())


def test_normalize_sorts_descending():
    assert normalize_bell_order(BellDiagonal(0.1, 0.2, 0.3, 0.4)).probs.tolist() == [0.4, 0.3, 0.2, 0.1]
    rho = BellDiagonal.werner(0.7)
    assert normalize_bell_order(rho) == rho


@given(bell_states())
def test_normalize_preserves_entropy(rho):
    assert state_entropy(normalize_bell_order(rho)) == pytest.approx(state_entropy(rho), abs=1e-12)


def test_pure_input():
    step = recurrence_step(BellDiagonal.werner(1.0))
    assert step.kept.probs.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert step.success_prob == 1.0
    assert step.pair_cost == 2


def test_uniform_input():
    step = recurrence_step(BellDiagonal(0.25, 0.25, 0.25, 0.25))
    assert step.success_prob == pytest.approx(0.5)
    assert step.kept.probs == pytest.approx([0.25] * 4)


def test_werner_07():
    step = recurrence_step(BellDiagonal.werner(0.7))
    assert step.success_prob == pytest.approx(0.68)
    assert step.kept.fidelity == pytest.approx(0.5 / 0.68)


@pytest.mark.parametrize("f", np.linspace(0.51, 0.99, 13))
def test_raises_werner_fidelity(f):
    assert recurrence_step(BellDiagonal.werner(f)).kept.fidelity > f


@given(bell_states())
def test_success_at_least_half(rho):
    # (a + b)^2 with a + b = 1 split in two squares never drops below 1/2
    assert recurrence_step(rho).success_prob >= 0.5 - 1e-12


@settings(max_examples=60)
@given(bell_states())
def test_success_is_even_class_probability(rho):
    step = recurrence_step(rho)
    assert step.success_prob == pytest.approx(class_probs_ladder(rho, 1)[1].p0, abs=1e-12)
    assert step.success_prob == pytest.approx((rho.p00 + rho.p11) ** 2 + (rho.p01 + rho.p10) ** 2, abs=1e-12)


@settings(max_examples=60)
@given(bell_states())
def test_matches_independent_bruteforce(rho):
    step = recurrence_step(rho)
    kept, success = recurrence_bruteforce(rho.probs)
    assert step.success_prob == pytest.approx(success, abs=1e-12)
    assert step.kept.p00 == pytest.approx(kept[0], abs=1e-12)
    assert np.sort(step.kept.probs) == pytest.approx(np.sort(kept), abs=1e-12)


def _kept_with(C: SymplecticMatrix, rho: BellDiagonal) -> np.ndarray:
    w = product_distribution(rho, 2)
    reduced = C.reduced.astype(int)
    out = np.zeros(4)
    for g in range(16):
        if bin(g & 0b1111).count("1") % 2:
            continue
        img = (reduced @ BitVec(g, 4).to_array()) % 2
        out[2 * img[0] + img[1]] += w[g]
    return out / out.sum()


def test_kept_distribution_independent_of_consumed_pair():
    # a completion whose kept pair sits on the second pair instead of the first
    rho = BellDiagonal(0.55, 0.25, 0.15, 0.05)
    C = complete_symplectic("1111")
    swap = SymplecticMatrix(np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]]))
    a = _kept_with(C, rho)
    b = _kept_with(C @ swap, rho)
    assert a[0] == pytest.approx(b[0], abs=1e-15)
    assert np.sort(a) == pytest.approx(np.sort(b), abs=1e-15)


def test_chain_lengths_and_weights():
    steps = recurrence_chain(BellDiagonal.werner(0.6), 3)
    assert len(steps) == 3
    assert all(0 < s.weight <= 0.5 for s in steps)
    assert recurrence_chain(BellDiagonal.werner(0.6), 0) == []
    with pytest.raises(ValueError):
        recurrence_chain(BellDiagonal.werner(0.6), -1)


def test_schedule_high_fidelity_skips_recurrence():
    best = optimal_recurrence_schedule(BellDiagonal.werner(0.95), breeding_yield)
    assert best.iterations == 0
    assert best.total_yield == pytest.approx(breeding_yield(BellDiagonal.werner(0.95)))


def test_schedule_low_fidelity_needs_recurrence():
    best = optimal_recurrence_schedule(BellDiagonal.werner(0.60), breeding_yield)
    assert breeding_yield(BellDiagonal.werner(0.60)) == 0
    assert best.iterations >= 1
    assert best.total_yield > 0
    assert best.state.fidelity > 0.8107


def test_schedule_is_exhaustive_maximum():
    rho = BellDiagonal.werner(0.7)
    best = optimal_recurrence_schedule(rho, breeding_yield, kmax=12)
    totals = []
    state, weight = rho, 1.0
    for k in range(13):
        totals.append(weight * breeding_yield(state))
        step = recurrence_step(normalize_bell_order(state))
        weight *= step.weight
        state = normalize_bell_order(step.kept)
    assert best.total_yield == pytest.approx(max(totals))
    assert best.iterations == int(np.argmax(totals))


def test_schedule_ties_prefer_fewer_rounds():
    best = optimal_recurrence_schedule(BellDiagonal.werner(0.3), lambda r: 0.0)
    assert best.iterations == 0
    assert optimal_recurrence_schedule(BellDiagonal.werner(0.6), breeding_yield, kmax=0).iterations == 0
    with pytest.raises(ValueError):
        optimal_recurrence_schedule(BellDiagonal.werner(0.6), breeding_yield, kmax=-1)


def test_schedule_switch_points_are_slope_kinks():
    grid = np.linspace(0.6, 0.9, 61)
    results = [optimal_recurrence_schedule(BellDiagonal.werner(f), breeding_yield) for f in grid]
    ks = [r.iterations for r in results]
    assert ks == sorted(ks, reverse=True)
    totals = np.array([r.total_yield for r in results])
    # continuity: no jumps larger than the local slope allows
    assert np.max(np.abs(np.diff(totals))) < 0.05
