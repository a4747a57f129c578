"""Linear algebra over GF(2) on bit-packed matrices.

Matrices are stored row-major as ``uint64`` words, column ``j`` living in bit
``j % 64`` of word ``j // 64``.  Vectors are plain 1-D ``uint8`` numpy arrays
of zeros and ones; conversion helpers to Python integers (used as bitsets in
the combinatorial code) live at the bottom of this module.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from itertools import combinations

import numpy as np

WORD = 64
_ONE = np.uint64(1)


def _nwords(cols: int) -> int:
    return max(1, (cols + WORD - 1) // WORD)


def _pack(dense: np.ndarray) -> np.ndarray:
    rows, cols = dense.shape
    nw = _nwords(cols)
    padded = np.zeros((rows, nw * WORD), dtype=np.uint8)
    padded[:, :cols] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64).reshape(rows, nw)


def _unpack(words: np.ndarray, cols: int) -> np.ndarray:
    rows = words.shape[0]
    if rows == 0:
        return np.zeros((0, cols), dtype=np.uint8)
    as_bytes = np.ascontiguousarray(words.astype("<u8")).view(np.uint8).reshape(rows, -1)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :cols].copy()


class BinaryMatrix:
    """Immutable bit-packed matrix over GF(2)."""

    __slots__ = ("rows", "cols", "words")

    def __init__(self, words: np.ndarray, cols: int):
        words = np.asarray(words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[1] != _nwords(cols):
            raise ValueError(f"packed shape {words.shape} does not fit {cols} columns")
        if cols % WORD and words.shape[0]:
            tail = (_ONE << np.uint64(cols % WORD)) - _ONE
            if np.any(words[:, -1] & ~tail):
                raise ValueError("bits set beyond the last column")
        words = words.copy()
        words.flags.writeable = False
        self.rows = int(words.shape[0])
        self.cols = int(cols)
        self.words = words

    # construction -----------------------------------------------------------

    @classmethod
    def from_dense(cls, array) -> BinaryMatrix:
        dense = np.asarray(array)
        if dense.ndim == 1:
            dense = dense.reshape(1, -1)
        if dense.ndim != 2:
            raise ValueError("expected a 2-D array")
        dense = (dense.astype(np.int64) & 1).astype(np.uint8)
        return cls(_pack(dense), dense.shape[1])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> BinaryMatrix:
        return cls(np.zeros((rows, _nwords(cols)), dtype=np.uint64), cols)

    @classmethod
    def identity(cls, n: int) -> BinaryMatrix:
        return cls.from_dense(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_row_ints(cls, rows: Sequence[int], cols: int) -> BinaryMatrix:
        dense = np.zeros((len(rows), cols), dtype=np.uint8)
        for i, r in enumerate(rows):
            dense[i] = int_to_vec(r, cols)
        return cls.from_dense(dense) if len(rows) else cls.zeros(0, cols)

    @classmethod
    def from_supports(cls, supports: Iterable[Iterable[int]], cols: int) -> BinaryMatrix:
        supports = [list(s) for s in supports]
        dense = np.zeros((len(supports), cols), dtype=np.uint8)
        for i, s in enumerate(supports):
            dense[i, s] ^= 1
        return cls.from_dense(dense) if supports else cls.zeros(0, cols)

    # views --------------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_dense(self) -> np.ndarray:
        return _unpack(self.words, self.cols)

    def row(self, i: int) -> np.ndarray:
        return _unpack(self.words[i : i + 1], self.cols)[0]

    def row_ints(self) -> list[int]:
        """Rows as Python integers, bit ``j`` holding column ``j``."""
        out = []
        for r in self.words:
            out.append(int.from_bytes(r.astype("<u8").tobytes(), "little"))
        return out

    def row_weights(self) -> np.ndarray:
        return np.bitwise_count(self.words).sum(axis=1).astype(np.int64)

    def col_weights(self) -> np.ndarray:
        return self.to_dense().sum(axis=0).astype(np.int64)

    def row_supports(self) -> list[np.ndarray]:
        dense = self.to_dense()
        return [np.flatnonzero(r) for r in dense]

    def col_supports(self) -> list[np.ndarray]:
        dense = self.to_dense()
        return [np.flatnonzero(c) for c in dense.T]

    @property
    def T(self) -> BinaryMatrix:
        return BinaryMatrix.from_dense(self.to_dense().T)

    # algebra --------------------------------------------------------------------

    def __matmul__(self, other: BinaryMatrix) -> BinaryMatrix:
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        prod = self.to_dense().astype(np.int64) @ other.to_dense().astype(np.int64)
        return BinaryMatrix.from_dense(prod & 1)

    def mul_vec(self, v: np.ndarray) -> np.ndarray:
        """Return ``M v^T`` as a length-``rows`` vector."""
        v = np.asarray(v, dtype=np.uint8)
        if v.shape != (self.cols,):
            raise ValueError(f"vector length {v.shape} does not match {self.cols} columns")
        vw = _pack(v.reshape(1, -1))[0]
        par = np.bitwise_count(self.words & vw).sum(axis=1) & 1
        return par.astype(np.uint8)

    def hstack(self, other: BinaryMatrix) -> BinaryMatrix:
        return BinaryMatrix.from_dense(np.hstack([self.to_dense(), other.to_dense()]))

    def vstack(self, other: BinaryMatrix) -> BinaryMatrix:
        if self.cols != other.cols:
            raise ValueError("column counts differ")
        return BinaryMatrix(np.vstack([self.words, other.words]), self.cols)

    def take_rows(self, idx) -> BinaryMatrix:
        return BinaryMatrix(self.words[np.asarray(idx, dtype=np.int64)], self.cols)

    def is_zero(self) -> bool:
        return not np.any(self.words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMatrix({self.rows}x{self.cols})"


# ---------------------------------------------------------------------------
# elimination


def _rref_words(words: np.ndarray, cols: int) -> tuple[np.ndarray, list[int]]:
    A = np.array(words, dtype=np.uint64, copy=True)
    nrows = A.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == nrows:
            break
        w = c // WORD
        bit = _ONE << np.uint64(c % WORD)
        hits = np.flatnonzero(A[r:, w] & bit)
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            A[[r, p]] = A[[p, r]]
        mask = (A[:, w] & bit) != 0
        mask[r] = False
        if mask.any():
            A[mask] ^= A[r]
        pivots.append(c)
        r += 1
    return A, pivots


def row_reduce(M: BinaryMatrix) -> tuple[BinaryMatrix, list[int]]:
    """Reduced row-echelon form and pivot columns.

    Zero rows are kept at the bottom so the result has the same shape as ``M``.
    """
    A, pivots = _rref_words(M.words, M.cols)
    return BinaryMatrix(A, M.cols), pivots


def rank(M: BinaryMatrix) -> int:
    return len(_rref_words(M.words, M.cols)[1])


def dual(M: BinaryMatrix) -> BinaryMatrix:
    """Full-row-rank basis ``P`` of the orthogonal complement: ``M P^T = 0``."""
    R, pivots = _rref_words(M.words, M.cols)
    n = M.cols
    dense = _unpack(R[: len(pivots)], n)
    pivot_set = set(pivots)
    free = [c for c in range(n) if c not in pivot_set]
    P = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        P[i, f] = 1
        if pivots:
            P[i, pivots] = dense[:, f]
    return BinaryMatrix.from_dense(P) if free else BinaryMatrix.zeros(0, n)


def drop_dependent_rows(M: BinaryMatrix) -> BinaryMatrix:
    """Keep the earliest rows that are linearly independent of their predecessors."""
    space = RowSpace(BinaryMatrix.zeros(0, M.cols))
    keep = []
    for i, r in enumerate(M.row_ints()):
        if space.add(r):
            keep.append(i)
    return M.take_rows(keep)


def kronecker(A: BinaryMatrix, B: BinaryMatrix) -> BinaryMatrix:
    return BinaryMatrix.from_dense(np.kron(A.to_dense(), B.to_dense()))


def in_rowspace(M: BinaryMatrix, v: np.ndarray) -> np.ndarray | None:
    """Coefficients ``a`` with ``a M = v``, or ``None`` when ``v`` is outside the span."""
    v = np.asarray(v, dtype=np.uint8)
    if v.shape != (M.cols,):
        raise ValueError(f"vector length {v.shape[0] if v.ndim else 0} != {M.cols} columns")
    coeff = RowSpace(M).coefficients(vec_to_int(v))
    if coeff is None:
        return None
    return int_to_vec(coeff, M.rows)


class RowSpace:
    """Incremental echelon basis of a row space, kept as Python-integer bitsets.

    Each basis row remembers which original rows were combined to produce it,
    so membership queries can also return coefficient vectors.
    """

    def __init__(self, M: BinaryMatrix):
        self.cols = M.cols
        self._rows: list[int] = []  # echelon rows, each with a distinct leading bit
        self._lead: list[int] = []
        self._combo: list[int] = []
        self._by_lead: dict[int, int] = {}
        self._nadded = 0
        for r in M.row_ints():
            self.add(r)

    @property
    def rank(self) -> int:
        return len(self._rows)

    def _reduce(self, v: int) -> tuple[int, int]:
        combo = 0
        while v:
            lead = v.bit_length() - 1
            j = self._by_lead.get(lead)
            if j is None:
                return v, combo
            v ^= self._rows[j]
            combo ^= self._combo[j]
        return 0, combo

    def add(self, v: int) -> bool:
        """Append a row; return True if it increased the rank."""
        idx = self._nadded
        self._nadded += 1
        red, combo = self._reduce(v)
        if red == 0:
            return False
        lead = red.bit_length() - 1
        self._by_lead[lead] = len(self._rows)
        self._rows.append(red)
        self._lead.append(lead)
        self._combo.append(combo ^ (1 << idx))
        return True

    def contains(self, v: int) -> bool:
        return self._reduce(v)[0] == 0

    def coefficients(self, v: int) -> int | None:
        red, combo = self._reduce(v)
        return combo if red == 0 else None

    def reduce(self, v: int) -> int:
        return self._reduce(v)[0]


# ---------------------------------------------------------------------------
# weight-bounded codeword search


def min_weight_nontrivial(
    A: BinaryMatrix,
    B: BinaryMatrix,
    w_cap: int | None = None,
    exhaustive: bool = False,
) -> int | None:
    """Minimum weight of ``c`` with ``A c^T = 0`` and ``c`` outside rowspace(``B``).

    The default search grows zero-syndrome supports check by check (see
    :func:`qhpcodes._search.enumerate_codewords`); it is exact because a
    minimum-weight nontrivial vector is always irreducible.  ``exhaustive=True``
    scans every support of each weight instead, which is only sensible for
    tiny codes and serves as an oracle.

    Returns ``None`` when no such vector exists with weight at most ``w_cap``.
    """
    n = A.cols
    if B.cols != n:
        raise ValueError("A and B must have the same number of columns")
    w_cap = n if w_cap is None else min(w_cap, n)
    space = RowSpace(B)
    if exhaustive:
        Ad = A.to_dense().astype(np.int64)
        for w in range(1, w_cap + 1):
            for supp in combinations(range(n), w):
                if np.any(Ad[:, supp].sum(axis=1) & 1):
                    continue
                if not space.contains(sum(1 << j for j in supp)):
                    return w
        return None

    from ._search import enumerate_codewords

    for w in range(1, w_cap + 1):
        for supp in enumerate_codewords(A, w, w_min=w, irreducible_only=False):
            if not space.contains(support_to_int(supp)):
                return w
    return None


def find_nontrivial(
    A: BinaryMatrix, B: BinaryMatrix, w_cap: int, avoid: RowSpace | None = None
) -> list[np.ndarray]:
    """All minimum-weight zero-syndrome supports of ``A`` outside ``avoid`` (default rowspace(B)).

    Returns the supports of the lightest weight found (sorted lexicographically),
    or an empty list if nothing exists up to ``w_cap``.
    """
    from ._search import enumerate_codewords

    space = avoid if avoid is not None else RowSpace(B)
    for w in range(1, w_cap + 1):
        found = [
            supp
            for supp in enumerate_codewords(A, w, w_min=w, irreducible_only=False)
            if not space.contains(support_to_int(supp))
        ]
        if found:
            found.sort(key=lambda s: tuple(s.tolist()))
            return found
    return []


# ---------------------------------------------------------------------------
# conversions


def vec_to_int(v: np.ndarray) -> int:
    v = np.asarray(v, dtype=np.uint8)
    return int.from_bytes(np.packbits(v, bitorder="little").tobytes(), "little")


def int_to_vec(x: int, n: int) -> np.ndarray:
    nbytes = max(1, (n + 7) // 8)
    raw = np.frombuffer(x.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].copy()


def support_to_int(support: Iterable[int]) -> int:
    x = 0
    for j in support:
        x ^= 1 << int(j)
    return x


def int_to_support(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def weight(v) -> int:
    if isinstance(v, int):
        return v.bit_count()
    return int(np.count_nonzero(v))
