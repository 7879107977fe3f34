import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcascade.gf2core import (
    BitVec,
    SymplecticMatrix,
    accessible_after_bpm,
    aem_embedding,
    bpm_outcome_sign,
    complete_symplectic,
    structure_matrices,
    symplectic_product,
)


def bitvecs(min_pairs=1, max_pairs=4, nonzero=False):
    return st.integers(min_pairs, max_pairs).flatmap(
        lambda n: st.integers(1 if nonzero else 0, (1 << (2 * n)) - 1).map(lambda v: BitVec(v, 2 * n))
    )


def same_length_pair(max_pairs=4):
    return st.integers(1, max_pairs).flatmap(
        lambda n: st.tuples(
            st.integers(0, (1 << (2 * n)) - 1).map(lambda v: BitVec(v, 2 * n)),
            st.integers(0, (1 << (2 * n)) - 1).map(lambda v: BitVec(v, 2 * n)),
        )
    )


def test_string_roundtrip_and_bit_order():
    v = BitVec.from_string("1000")
    assert v.value == 8
    assert str(v) == "1000"
    assert v[0] == 1 and v[3] == 0
    assert list(BitVec.from_string("0110")) == [0, 1, 1, 0]


@pytest.mark.parametrize("bad", ["", "012", "1 0 2", "abc"])
def test_from_string_rejects_garbage(bad):
    with pytest.raises(ValueError):
        BitVec.from_string(bad)


def test_odd_length_rejected():
    with pytest.raises(ValueError):
        BitVec(0, 3)
    with pytest.raises(ValueError):
        BitVec(16, 4)


def test_length_mismatch():
    with pytest.raises(ValueError):
        BitVec.ones(2) + BitVec.ones(4)


def test_swap_pairs_examples():
    assert str(BitVec.from_string("1000").swap_pairs()) == "0100"
    assert str(BitVec.from_string("1101").swap_pairs()) == "1110"


def test_symplectic_product_single_pair():
    # X and Z anticommute, Y commutes with itself
    assert symplectic_product("10", "01") == 1
    assert symplectic_product("11", "11") == 0
    assert symplectic_product("1111", "1100") == 0
    assert symplectic_product("1000", "0100") == 1


def test_structure_matrices():
    P, U = structure_matrices(2)
    assert P.tolist() == [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]
    assert U.tolist() == [[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 0, 0]]
    assert np.array_equal(U + U.T, P)
    with pytest.raises(ValueError):
        P[0, 0] = 1


@given(same_length_pair())
def test_symplectic_product_symmetric(pair):
    a, b = pair
    assert symplectic_product(a, b) == symplectic_product(b, a)
    assert symplectic_product(a, a) == 0


@given(same_length_pair())
def test_symplectic_product_matches_matrix(pair):
    a, b = pair
    P = structure_matrices(a.n_pairs).P.astype(int)
    assert symplectic_product(a, b) == int(a.to_array() @ P @ b.to_array()) % 2


def test_bpm_sign_examples():
    # sigma_y on each side of |B_00> gives -1 overall
    assert bpm_outcome_sign("11", "00") == 1
    assert bpm_outcome_sign("10", "00") == 0
    assert bpm_outcome_sign("10", "10") == 1
    with pytest.raises(ValueError):
        bpm_outcome_sign("00", "10")


@given(bitvecs(nonzero=True))
def test_complete_symplectic_last_row(r):
    C = complete_symplectic(r)
    assert C.is_symplectic()
    assert C.rows[-1] == r
    assert symplectic_product(C.rows[-2], r) == 1


def test_complete_symplectic_deterministic():
    r = BitVec.from_string("1111")
    assert complete_symplectic(r) == complete_symplectic(r)
    with pytest.raises(ValueError):
        complete_symplectic(BitVec.zeros(4))


@settings(max_examples=50)
@given(bitvecs(max_pairs=3, nonzero=True))
def test_reduced_map_constant_on_merged_labels(r):
    C = complete_symplectic(r)
    reduced = C.reduced.astype(int)
    pr = r.swap_pairs().to_array()
    assert not ((reduced @ pr) % 2).any()


def test_symplectic_matrix_rejects_non_symplectic():
    with pytest.raises(ValueError):
        SymplecticMatrix([[1, 0], [1, 0]])
    with pytest.raises(ValueError):
        SymplecticMatrix(np.eye(3))


def test_symplectic_group_closure():
    A = complete_symplectic("1111")
    B = complete_symplectic("0110")
    assert (A @ B).is_symplectic()
    assert (A @ SymplecticMatrix.identity(2)) == A


@given(bitvecs(max_pairs=3, nonzero=True))
def test_aem_embedding_copies_parity(r):
    E = aem_embedding(r)
    assert E.is_symplectic()
    for s in (0, 1, (1 << r.length) - 1, r.value):
        sv = BitVec(s, r.length)
        out = E.apply(sv.concat(BitVec.zeros(2)))
        assert out == sv.concat(BitVec.from_bits([0, r.dot(sv)]))


def test_accessible_after_bpm():
    assert accessible_after_bpm("1111", "1100")
    assert not accessible_after_bpm("1000", "0100")
    with pytest.raises(ValueError):
        accessible_after_bpm("0000", "1100")


def test_kron_and_concat():
    a = BitVec.from_string("10")
    assert str(a.kron(BitVec.from_string("11"))) == "1100"
    assert str(a.concat(BitVec.from_string("01"))) == "1001"
    assert str(BitVec.from_string("0110").complement()) == "1001"
