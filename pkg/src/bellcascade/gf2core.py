"""Binary symplectic algebra for Bell labels, Pauli labels and Clifford actions.

A string of ``n`` Bell pairs is labelled by a ``2n``-bit vector, two bits per
pair with the phase bit first (``|B_10>`` is the phase-flipped ``|B_00>``).
The same labels index Pauli operators, and a local Clifford acting as
``Q (x) Q*`` maps the label ``s`` to ``C s`` for a symplectic matrix ``C``.
Overall phases are never tracked.

Vectors are packed into Python integers; bit index 0 is the leftmost
character of the string form, so ``BitVec.from_string("10").value == 2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

__all__ = [
    "BitVec",
    "SymplecticMatrix",
    "StructureMatrices",
    "structure_matrices",
    "symplectic_product",
    "bpm_outcome_sign",
    "complete_symplectic",
    "aem_embedding",
    "accessible_after_bpm",
]


def _swap_pairs(value: int, length: int) -> int:
    # P acts on each pair by exchanging its two bits
    out = 0
    for k in range(0, length, 2):
        hi = (value >> (length - 1 - k)) & 1
        lo = (value >> (length - 2 - k)) & 1
        out |= lo << (length - 1 - k)
        out |= hi << (length - 2 - k)
    return out


@dataclass(frozen=True, slots=True)
class BitVec:
    """Immutable binary vector of even length (two bits per Bell pair)."""

    value: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 2 or self.length % 2:
            raise ValueError(f"BitVec length must be even and >= 2, got {self.length}")
        if self.value < 0 or self.value >> self.length:
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_string(cls, text: str) -> BitVec:
        text = text.strip().replace(" ", "")
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a binary string: {text!r}")
        return cls(int(text, 2), len(text))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> BitVec:
        bits = [int(b) & 1 for b in bits]
        value = 0
        for b in bits:
            value = (value << 1) | b
        return cls(value, len(bits))

    @classmethod
    def zeros(cls, length: int) -> BitVec:
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> BitVec:
        return cls((1 << length) - 1, length)

    @classmethod
    def unit(cls, index: int, length: int) -> BitVec:
        return cls(1 << (length - 1 - index), length)

    @property
    def n_pairs(self) -> int:
        return self.length // 2

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b")

    def __repr__(self) -> str:
        return f"BitVec('{self}')"

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, index: int) -> int:
        if not -self.length <= index < self.length:
            raise IndexError(index)
        index %= self.length
        return (self.value >> (self.length - 1 - index)) & 1

    def __iter__(self) -> Iterator[int]:
        for i in range(self.length):
            yield self[i]

    def __bool__(self) -> bool:
        return self.value != 0

    def _check(self, other: BitVec) -> None:
        if not isinstance(other, BitVec):
            raise TypeError(f"expected BitVec, got {type(other).__name__}")
        if other.length != self.length:
            raise ValueError(f"length mismatch: {self.length} vs {other.length}")

    def __add__(self, other: BitVec) -> BitVec:
        self._check(other)
        return BitVec(self.value ^ other.value, self.length)

    __xor__ = __add__
    __sub__ = __add__

    def dot(self, other: BitVec) -> int:
        """Plain inner product ``self^T other`` mod 2."""
        self._check(other)
        return (self.value & other.value).bit_count() & 1

    def swap_pairs(self) -> BitVec:
        """Return ``P self``."""
        return BitVec(_swap_pairs(self.value, self.length), self.length)

    def complement(self) -> BitVec:
        return BitVec(self.value ^ ((1 << self.length) - 1), self.length)

    def concat(self, other: BitVec) -> BitVec:
        return BitVec((self.value << other.length) | other.value, self.length + other.length)

    def kron(self, block: BitVec) -> BitVec:
        """Kronecker product ``self (x) block`` (each bit replaced by a scaled copy of ``block``)."""
        value = 0
        for b in self:
            value = (value << block.length) | (block.value if b else 0)
        return BitVec(value, self.length * block.length)

    def to_array(self) -> np.ndarray:
        return np.fromiter(self, dtype=np.uint8, count=self.length)

    @classmethod
    def from_array(cls, arr) -> BitVec:
        return cls.from_bits(np.asarray(arr).ravel().tolist())


def _as_bitvec(v) -> BitVec:
    if isinstance(v, BitVec):
        return v
    if isinstance(v, str):
        return BitVec.from_string(v)
    return BitVec.from_bits(v)


def symplectic_product(a, b) -> int:
    """Symplectic inner product ``a^T P b`` mod 2.

    Zero exactly when the Pauli operators labelled by ``a`` and ``b`` commute.
    """
    a, b = _as_bitvec(a), _as_bitvec(b)
    a._check(b)
    return a.dot(b.swap_pairs())


class StructureMatrices(NamedTuple):
    P: np.ndarray
    U: np.ndarray


def structure_matrices(n_pairs: int) -> StructureMatrices:
    """``P = I_n (x) [[0,1],[1,0]]`` and ``U = I_n (x) [[0,1],[0,0]]`` as uint8 arrays."""
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    eye = np.eye(n_pairs, dtype=np.uint8)
    P = np.kron(eye, np.array([[0, 1], [1, 0]], dtype=np.uint8))
    U = np.kron(eye, np.array([[0, 1], [0, 0]], dtype=np.uint8))
    P.setflags(write=False)
    U.setflags(write=False)
    return StructureMatrices(P, U)


def bpm_outcome_sign(r, s) -> int:
    """Exponent ``alpha`` of the product ``(-1)^alpha`` of bilateral outcomes of ``sigma_{Pr}`` on ``|B_s>``.

    ``alpha = r^T s + r^T U r``; the second term counts pairs on which ``r``
    is ``11`` (a bilateral ``sigma_y`` contributes an extra sign).
    """
    r, s = _as_bitvec(r), _as_bitvec(s)
    r._check(s)
    if not r:
        raise ValueError("parity vector r must be nonzero")
    rUr = sum(r[2 * k] & r[2 * k + 1] for k in range(r.n_pairs)) & 1
    return r.dot(s) ^ rUr


class SymplecticMatrix:
    """Square binary matrix ``C`` with ``C^T P C = P``, acting on labels as ``s -> C s``."""

    __slots__ = ("_array",)

    def __init__(self, array) -> None:
        arr = np.array(array, dtype=np.uint8) & 1
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % 2:
            raise ValueError(f"expected an even square matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        self._array = arr
        if not self.is_symplectic():
            raise ValueError("matrix is not symplectic (C^T P C != P)")

    @classmethod
    def from_rows(cls, rows: Iterable) -> SymplecticMatrix:
        return cls(np.array([_as_bitvec(r).to_array() for r in rows], dtype=np.uint8))

    @classmethod
    def identity(cls, n_pairs: int) -> SymplecticMatrix:
        return cls(np.eye(2 * n_pairs, dtype=np.uint8))

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def size(self) -> int:
        return self._array.shape[0]

    @property
    def rows(self) -> tuple[BitVec, ...]:
        return tuple(BitVec.from_array(row) for row in self._array)

    @property
    def reduced(self) -> np.ndarray:
        """``C`` without its last two rows: the label map onto the pairs that survive a BPM."""
        return self._array[:-2]

    def is_symplectic(self) -> bool:
        P = structure_matrices(self.size // 2).P.astype(np.int64)
        C = self._array.astype(np.int64)
        return bool(np.array_equal((C.T @ P @ C) % 2, P))

    def apply(self, s) -> BitVec:
        s = _as_bitvec(s)
        if s.length != self.size:
            raise ValueError(f"length mismatch: {s.length} vs {self.size}")
        return BitVec.from_array((self._array.astype(np.int64) @ s.to_array()) % 2)

    def __matmul__(self, other: SymplecticMatrix) -> SymplecticMatrix:
        return SymplecticMatrix((self._array.astype(np.int64) @ other._array) % 2)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SymplecticMatrix) and np.array_equal(self._array, other._array)

    def __hash__(self) -> int:
        return hash(self._array.tobytes())

    def __repr__(self) -> str:
        body = ", ".join(str(r) for r in self.rows)
        return f"SymplecticMatrix([{body}])"


def complete_symplectic(r) -> SymplecticMatrix:
    """Return a symplectic ``C`` whose last row is ``r``.

    The second-to-last row is the lowest-index unit vector ``b`` with
    ``b^T P r = 1``; the remaining rows come from symplectic Gram-Schmidt over
    the standard basis in index order, so the output is reproducible.
    """
    r = _as_bitvec(r)
    if not r:
        raise ValueError("parity vector r must be nonzero")
    length = r.length
    pr = r.swap_pairs()
    b = next(BitVec.unit(i, length) for i in range(length) if pr[i])

    def omega(x: BitVec, y: BitVec) -> int:
        return x.dot(y.swap_pairs())

    def project(v: BitVec, pairs: list[tuple[BitVec, BitVec]]) -> BitVec:
        for e, f in pairs:
            if omega(v, f):
                v = v + e
            if omega(v, e):
                v = v + f
        return v

    pairs: list[tuple[BitVec, BitVec]] = [(b, r)]
    pool = [BitVec.unit(i, length) for i in range(length)]
    found: list[tuple[BitVec, BitVec]] = []
    while len(found) < r.n_pairs - 1:
        pool = [p for p in (project(v, pairs) for v in pool) if p]
        e = pool.pop(0)
        idx = next(i for i, v in enumerate(pool) if omega(e, v))
        f = pool.pop(idx)
        pairs.append((e, f))
        found.append((e, f))
    rows = [v for e, f in found for v in (e, f)] + [b, r]
    return SymplecticMatrix.from_rows(rows)


def aem_embedding(r) -> SymplecticMatrix:
    """Clifford action that copies the parity ``r^T s`` onto an appended ebit.

    Acting on ``s`` followed by ``00`` it yields ``s`` followed by ``(0, r^T s)``.
    """
    r = _as_bitvec(r)
    if not r:
        raise ValueError("parity vector r must be nonzero")
    n = r.length
    C = np.zeros((n + 2, n + 2), dtype=np.uint8)
    C[:n, :n] = np.eye(n, dtype=np.uint8)
    C[:n, n] = r.swap_pairs().to_array()
    C[n, n] = 1
    C[n + 1, :n] = r.to_array()
    C[n + 1, n + 1] = 1
    return SymplecticMatrix(C)


def accessible_after_bpm(r, q) -> bool:
    """Whether the parity ``q^T s`` can still be learned after a BPM of ``r``."""
    r, q = _as_bitvec(r), _as_bitvec(q)
    r._check(q)
    if not r:
        raise ValueError("parity vector r must be nonzero")
    return symplectic_product(q, r) == 0
