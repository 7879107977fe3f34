import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcascade.bellspace import BellDiagonal, ClassProbs, ConditionalPairDist, class_probs_ladder
from bellcascade.engine import (
    LOOSE0,
    LOOSE1,
    FrequencyTable,
    StateClass,
    YieldReport,
    bracket_entropy,
    breeding_report,
    breeding_yield,
    cascade_tables,
    cascade_yield,
    class_ordering_fractions,
    eta_ordered,
    eta_states,
    eta_uniform,
    protocol_report,
    propagate_frequencies,
    vv_report,
)
from bellcascade.oracle import exact_bracket_entropy, vv_ledger

# cross-checked against a 1e6-sample Monte Carlo run of the pairing procedure (|z| < 1)
CASCADE_Q3_F085 = {"uniform": 0.26139146976453137, "ordered": 0.2617095470516707}
# cross-checked against direct enumeration of the two-pair ledger
VV_F085 = 0.2113447744871908


def test_state_class_validation_and_order():
    with pytest.raises(ValueError):
        StateClass.bracket(0, 0)
    classes = [LOOSE0, StateClass.bracket(2, 0), StateClass.bracket(0, 1), StateClass.bracket(1, 0)]
    ordered = sorted(classes, key=StateClass.order_key)
    assert [str(c) for c in ordered] == ["[0,1]", "[1,0]", "[2,0]", "loose0"]
    assert LOOSE1.zeros == 0 and LOOSE1.ones == 1


def test_eta_uniform_geometric_series():
    assert eta_uniform(0.5, 0.5, 20) == pytest.approx(1 / 3, abs=1e-6)
    # one step only: 2 * (1/2)(1/2) / 2
    assert eta_uniform(0.5, 0.5, 1) == pytest.approx(0.25)


def test_eta_vanishes_for_pure_classes():
    assert eta_uniform(1.0, 0.0) == 0.0
    assert eta_ordered(1.0, 0.0, 0.0, 1.0) == 0.0


def test_eta_states_probability_flow():
    states = eta_states(0.8, 0.2, 5)
    assert [s.k for s in states] == [2, 4, 8, 16, 32]
    for s in states:
        assert s.px + s.py == pytest.approx(1.0)
        assert 0 <= s.t <= 1


def test_eta_ordered_domain():
    with pytest.raises(ValueError):
        eta_ordered(0.7, 0.3, 0.5, 0.5)
    with pytest.raises(ValueError):
        eta_ordered(0.7, 0.3, -0.1, 0.5)


def test_eta_ordered_full_range_matches_uniform_weighting():
    # the whole population as one class: every step is a partial step with weight 2^-i
    p0, p1 = 0.7, 0.3
    assert eta_ordered(p0, p1, 0.0, 1.0, 12) == pytest.approx(eta_uniform(p0, p1, 12), abs=1e-15)


def test_eta_ordered_prefers_front_classes():
    front = eta_ordered(0.7, 0.3, 0.0, 0.1)
    back = eta_ordered(0.7, 0.3, 0.9, 1.0)
    assert front > eta_uniform(0.7, 0.3) > back >= 0


@settings(max_examples=60)
@given(st.floats(0.5, 1.0), st.lists(st.floats(0.0, 2.0), min_size=1, max_size=6))
def test_eta_population_average(p0, weights):
    entries = {LOOSE0: 1.0}
    for n, w in enumerate(weights, start=1):
        entries[StateClass.bracket(n, n % 2)] = w
    table = FrequencyTable(8, 3, entries)
    avg = math.fsum(eta_ordered(p0, 1 - p0, L, U) * (U - L) for L, U in class_ordering_fractions(table).values())
    assert avg == pytest.approx(eta_uniform(p0, 1 - p0), abs=1e-9)


def test_class_ordering_fractions_layout():
    table = FrequencyTable(8, 3, {LOOSE0: 2.0, StateClass.bracket(1, 0): 1.0, LOOSE1: 0.5, StateClass.bracket(0, 2): 3.0})
    fr = class_ordering_fractions(table)
    assert set(fr) == {StateClass.bracket(1, 0), LOOSE0}
    assert fr[StateClass.bracket(1, 0)] == pytest.approx((0.0, 1 / 3))
    assert fr[LOOSE0] == pytest.approx((1 / 3, 1.0))


def test_propagate_checks_levels():
    rho = BellDiagonal.werner(0.8)
    table = FrequencyTable(2, 1, {LOOSE0: 1.0})
    with pytest.raises(ValueError):
        propagate_frequencies(table, ClassProbs(2, 0.9, 0.1))
    table = FrequencyTable(8, 2, {LOOSE0: 1.0})
    with pytest.raises(ValueError):
        propagate_frequencies(table, class_probs_ladder(rho, 2)[0])
    with pytest.raises(ValueError):
        propagate_frequencies(table, class_probs_ladder(rho, 2)[1], mode="sorted")


def test_odd_block_splits_evenly():
    halves = ClassProbs(4, 0.7, 0.3)
    out = propagate_frequencies(FrequencyTable(8, 2, {LOOSE1: 1.0}), halves)
    assert out[StateClass.bracket(1, 0)] == pytest.approx(0.5)
    assert out[StateClass.bracket(0, 1)] == pytest.approx(0.5)
    assert out[LOOSE0] == pytest.approx(0.5)
    assert out[LOOSE1] == pytest.approx(0.5)


@pytest.mark.parametrize("mode", ["uniform", "ordered"])
@pytest.mark.parametrize("q", [1, 3, 6])
def test_pair_count_conserved(mode, q):
    for table in cascade_tables(BellDiagonal.werner(0.83), q, mode):
        assert table.pair_count() == pytest.approx(2 ** q, abs=1e-9)


def test_cascade_tables_levels():
    tables = cascade_tables(BellDiagonal.werner(0.9), 3)
    assert [t.level for t in tables] == [16, 8, 4, 2]
    with pytest.raises(ValueError):
        cascade_tables(BellDiagonal.werner(0.9), 0)
    with pytest.raises(ValueError):
        cascade_tables(BellDiagonal.werner(0.9), 2, trunc=0)


def test_bracket_entropy_small_cases():
    cond = ConditionalPairDist.from_halves(0.5, 0.5)
    assert bracket_entropy(1, 0, cond) == 0.0
    assert bracket_entropy(2, 0, cond) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bracket_entropy(0, 0, cond)


@settings(max_examples=40)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 5), st.integers(0, 5))
def test_bracket_entropy_matches_enumeration(q00, q01, n0, n1):
    if n0 + n1 == 0:
        n0 = 1
    cond = ConditionalPairDist.from_halves(q00, q01)
    assert bracket_entropy(n0, n1, cond) == pytest.approx(exact_bracket_entropy(n0, n1, cond), abs=1e-10)


def test_bracket_entropy_no_underflow_for_large_brackets():
    cond = BellDiagonal.werner(0.75).conditionals()
    s = bracket_entropy(40, 24, cond)
    assert math.isfinite(s) and s > 0


def test_breeding_report():
    rho = BellDiagonal.werner(0.9)
    r = breeding_report(rho)
    assert r.raw_yield == pytest.approx(0.3725, abs=1e-4)
    assert r.ledger_yield() == pytest.approx(r.raw_yield)
    assert breeding_yield(BellDiagonal.werner(0.7)) == 0.0


def test_vv_report_matches_enumeration():
    for rho in (BellDiagonal.werner(0.85), BellDiagonal(0.6, 0.2, 0.15, 0.05), BellDiagonal.werner(1.0)):
        report = vv_report(rho)
        ledger = vv_ledger(rho.probs)
        assert report.raw_yield == pytest.approx(ledger["yield"], abs=1e-12)
        assert report.pb_cost == pytest.approx(ledger["pb_cost"], abs=1e-12)
        assert report.residual_breeding_cost == pytest.approx(ledger["residual"], abs=1e-12)
        assert report.ledger_yield() == pytest.approx(report.raw_yield, abs=1e-12)


def test_vv_frozen_value():
    assert vv_report(BellDiagonal.werner(0.85)).raw_yield == pytest.approx(VV_F085, abs=1e-12)


@pytest.mark.parametrize("mode", ["uniform", "ordered"])
def test_cascade_frozen_values(mode):
    assert cascade_yield(BellDiagonal.werner(0.85), 3, mode).raw_yield == pytest.approx(CASCADE_Q3_F085[mode], abs=1e-12)


@pytest.mark.parametrize("mode", ["uniform", "ordered"])
def test_cascade_ledger_consistent(mode):
    r = cascade_yield(BellDiagonal.werner(0.8), 4, mode)
    assert r.ledger_yield() == pytest.approx(r.raw_yield, abs=1e-12)
    assert 0 < r.bpm_savings < 1
    assert r.nonmeasured_fraction == pytest.approx(1 - r.bpm_savings)


def test_cascade_pure_state():
    for mode in ("uniform", "ordered"):
        assert cascade_yield(BellDiagonal.werner(1.0), 6, mode).raw_yield == pytest.approx(1.0)


def test_q1_modes_agree():
    # one level down: a single even class, so ordering changes nothing
    rho = BellDiagonal.werner(0.8)
    assert cascade_yield(rho, 1, "ordered").raw_yield == pytest.approx(cascade_yield(rho, 1, "uniform").raw_yield)


def test_protocol_dispatch():
    rho = BellDiagonal.werner(0.9)
    assert protocol_report("breeding", rho).protocol == "breeding"
    assert protocol_report("cascade-ordered", rho, 2).qdepth == 2
    with pytest.raises(ValueError):
        protocol_report("hashing", rho)


def test_report_dict():
    d = breeding_report(BellDiagonal.werner(0.6)).as_dict()
    assert d["yield"] == 0.0 and d["yield_raw"] < 0
    assert all(type(d[k]) is float for k in ("pb_cost", "residual", "yield"))
    assert isinstance(YieldReport("x", 0, 0, 0, 1, 1).floored_yield, (int, float))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_cascade_never_below_breeding(f, a, b):
    rest = 1 - f
    probs = np.array([f, rest * a, rest * (1 - a) * b, rest * (1 - a) * (1 - b)])
    rho = BellDiagonal.from_probs(probs / probs.sum())
    base = breeding_report(rho).raw_yield
    for mode in ("uniform", "ordered"):
        assert cascade_yield(rho, 3, mode).raw_yield >= base - 1e-9
