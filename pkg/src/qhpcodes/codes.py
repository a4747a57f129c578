"""Classical seed codes and CSS code constructions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import gf2
from .gf2 import BinaryMatrix, RowSpace

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GallagerSpec:
    """Parameters of one draw from the regular (ell, m) Gallager ensemble."""

    ell: int
    m: int
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.ell < 2:
            raise ValueError("column weight ell must be at least 2")
        if self.m <= self.ell:
            raise ValueError("row weight m must exceed ell")
        if self.n % self.m:
            raise ValueError(f"n={self.n} must be a multiple of m={self.m}")


@dataclass(frozen=True)
class CssCode:
    """A CSS code given by X-type checks ``Gx`` and Z-type checks ``Gz``.

    ``hstar``, when present, is ``Gx`` with ``k`` logical rows appended.
    """

    Gx: BinaryMatrix
    Gz: BinaryMatrix
    label: str = ""
    d_x: int | None = None
    d_z: int | None = None
    hstar: BinaryMatrix | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.Gx.cols != self.Gz.cols:
            raise ValueError("Gx and Gz must have the same number of columns")
        if not (self.Gx @ self.Gz.T).is_zero():
            raise ValueError("rows of Gx and Gz are not orthogonal")

    @property
    def n(self) -> int:
        return self.Gx.cols

    @property
    def k(self) -> int:
        return self.n - gf2.rank(self.Gx) - gf2.rank(self.Gz)

    @property
    def d(self) -> int | None:
        if self.d_x is None or self.d_z is None:
            return None
        return min(self.d_x, self.d_z)

    def swapped(self) -> CssCode:
        """The same code with the roles of X and Z exchanged."""
        return CssCode(self.Gz, self.Gx, self.label, self.d_z, self.d_x, None, dict(self.meta))

    def with_hstar(self, weight_cap: int | None = None) -> CssCode:
        return replace(self, hstar=build_hstar(self, weight_cap))

    def params(self) -> tuple[int, int, int | None, int | None]:
        return (self.n, self.k, self.d_x, self.d_z)


# ---------------------------------------------------------------------------
# classical seeds


def gallager_sample(spec: GallagerSpec) -> BinaryMatrix:
    """Draw a check matrix from the Gallager ensemble.

    The first horizontal block is ``m`` identities of size ``n/m`` placed side
    by side; each of the remaining ``ell - 1`` blocks is a uniformly random
    column permutation of the first.
    """
    b = spec.n // spec.m
    block = np.hstack([np.eye(b, dtype=np.uint8)] * spec.m)
    rng = np.random.default_rng(spec.seed)
    blocks = [block]
    for _ in range(spec.ell - 1):
        blocks.append(block[:, rng.permutation(spec.n)])
    return BinaryMatrix.from_dense(np.vstack(blocks))


drop_dependent_rows = gf2.drop_dependent_rows


def classical_distance(H: BinaryMatrix) -> int | None:
    """Minimum weight of a nonzero vector in the kernel of ``H`` (None if the kernel is trivial).

    Enumerates all ``2^k`` codewords, so only suitable for small dimension.
    """
    P = gf2.dual(H)
    k = P.rows
    if k == 0:
        return None
    if k > 24:
        raise ValueError(f"code dimension {k} too large for enumeration")
    rows = P.row_ints()
    best = None
    # gray-code walk over the 2^k codewords
    cur = 0
    for i in range(1, 1 << k):
        j = (i & -i).bit_length() - 1
        cur ^= rows[j]
        w = cur.bit_count()
        if best is None or w < best:
            best = w
    return best


def sample_seed(
    ell: int, m: int, n: int, min_d1: int | None = None, seed: int = 0, max_tries: int = 100_000
) -> tuple[BinaryMatrix, GallagerSpec, int | None]:
    """Rejection-sample a full-rank Gallager check matrix with distance at least ``min_d1``.

    Seeds ``seed, seed+1, ...`` are tried in order, so the result is a
    deterministic function of the arguments.  Returns the reduced matrix, the
    spec that produced it and its classical distance.
    """
    for t in range(max_tries):
        spec = GallagerSpec(ell, m, n, seed + t)
        H = drop_dependent_rows(gallager_sample(spec))
        d1 = classical_distance(H)
        if min_d1 is None or (d1 is not None and d1 >= min_d1):
            return H, spec, d1
    raise RuntimeError(f"no ({ell},{m}) seed of length {n} with d >= {min_d1} in {max_tries} tries")


# ---------------------------------------------------------------------------
# quantum constructions


def hypergraph_product(H1: BinaryMatrix, H2: BinaryMatrix) -> tuple[BinaryMatrix, BinaryMatrix]:
    """Kronecker-product blocks ``(Gx, Gz)`` of the hypergraph product of ``H1`` and ``H2``."""
    r1, n1 = H1.shape
    r2, n2 = H2.shape
    E1, E2 = BinaryMatrix.identity(r1), BinaryMatrix.identity(r2)
    Et1, Et2 = BinaryMatrix.identity(n1), BinaryMatrix.identity(n2)
    Gx = gf2.kronecker(E2, H1).hstack(gf2.kronecker(H2, E1))
    Gz = gf2.kronecker(H2.T, Et1).hstack(gf2.kronecker(Et2, H1.T))
    return Gx, Gz


def qhp_from(H1: BinaryMatrix, label: str = "") -> CssCode:
    """Hypergraph-product code of ``H1`` with its own transpose.

    ``H1`` must have full row rank; then ``n = n1^2 + r1^2`` and ``k = k1^2``.
    """
    r1, n1 = H1.shape
    if gf2.rank(H1) != r1:
        raise ValueError("H1 must have full row rank (drop dependent rows first)")
    Gx, Gz = hypergraph_product(H1, H1.T)
    k1 = n1 - r1
    code = CssCode(Gx, Gz, label=label or f"qhp-{n1 * n1 + r1 * r1}-{k1 * k1}")
    return code


def rotated_toric(d: int) -> CssCode:
    """Rotated toric code ``[[d^2, 2, d]]`` for even ``d``.

    Qubits sit on the vertices ``(i, j)`` of a ``d x d`` periodic grid.  Each
    face with lower-left corner ``(i, j)`` holds a weight-4 check on its four
    corners; faces with ``i + j`` even are X-type, odd faces are Z-type.
    """
    if d < 2 or d % 2:
        raise ValueError("rotated toric code needs an even d >= 2")

    def q(i, j):
        return (i % d) * d + (j % d)

    xs, zs = [], []
    for i in range(d):
        for j in range(d):
            face = [q(i, j), q(i + 1, j), q(i, j + 1), q(i + 1, j + 1)]
            (xs if (i + j) % 2 == 0 else zs).append(face)
    Gx = gf2.drop_dependent_rows(BinaryMatrix.from_supports(xs, d * d))
    Gz = gf2.drop_dependent_rows(BinaryMatrix.from_supports(zs, d * d))
    return CssCode(Gx, Gz, label=f"toric-{d}", meta={"family": "rotated_toric", "d": d})


def build_hstar(code: CssCode, weight_cap: int | None = None) -> BinaryMatrix:
    """Extend ``Gx`` by ``k`` light logical rows, one at a time.

    Each added row is a minimum-weight vector orthogonal to ``Gz`` that lies
    outside the span of the matrix built so far; ties go to the
    lexicographically smallest support.
    """
    k = code.k
    cap = code.n if weight_cap is None else weight_cap
    space = RowSpace(code.Gx)
    rows = code.Gx.row_ints()
    w = 1
    for _ in range(k):
        found = None
        while w <= cap and found is None:
            cands = [
                s
                for s in _codeword_supports(code.Gz, w)
                if not space.contains(gf2.support_to_int(s))
            ]
            if cands:
                found = min(cands, key=lambda s: tuple(s.tolist()))
            else:
                w += 1
        if found is None:
            raise RuntimeError(f"weight cap {cap} exhausted before {k} logical rows were found")
        v = gf2.support_to_int(found)
        space.add(v)
        rows.append(v)
    return BinaryMatrix.from_row_ints(rows, code.n)


_CW_CACHE: dict = {}


def _codeword_supports(H: BinaryMatrix, w: int) -> list[np.ndarray]:
    key = (H, w)
    if key not in _CW_CACHE:
        from ._search import enumerate_codewords

        _CW_CACHE[key] = enumerate_codewords(H, w, w_min=w, irreducible_only=False)
    return _CW_CACHE[key]


def css_params(code: CssCode, w_cap: int | None = None) -> tuple[int, int, int | None, int | None]:
    """``(n, k, d_x, d_z)`` with distances found by exact search up to ``w_cap``."""
    d_x = gf2.min_weight_nontrivial(code.Gz, code.Gx, w_cap)
    d_z = gf2.min_weight_nontrivial(code.Gx, code.Gz, w_cap)
    return (code.n, code.k, d_x, d_z)


def canonical_form(M: BinaryMatrix) -> tuple:
    """Permutation-invariant fingerprint: the sorted multiset of (row weight, column-weight profile)."""
    dense = M.to_dense().astype(np.int64)
    cw = dense.sum(axis=0)
    rw = dense.sum(axis=1)
    rows = sorted((int(rw[i]), tuple(sorted(cw[dense[i] == 1].tolist()))) for i in range(M.rows))
    cols = sorted((int(cw[j]), tuple(sorted(rw[dense[:, j] == 1].tolist()))) for j in range(M.cols))
    return (tuple(rows), tuple(cols))


def qhp_swap_permutation(r1: int, n1: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column permutations taking ``Gz`` of a self-transposed QHP code to ``Gx``.

    Returns ``(row_perm, col_perm)`` with ``Gx == Gz[row_perm][:, col_perm]``.
    """
    # Gx rows (a, i): a < n1 (E2 index), i < r1.   Gz rows (i', a'): i' < r1, a' < n1.
    row_perm = np.array([i * n1 + a for a in range(n1) for i in range(r1)], dtype=np.int64)
    # Gx columns: block 1 (a, b) a<n1, b<n1; block 2 (i, j) i<r1, j<r1.
    # Gz columns: block 1 (i, a) i<r1... see the Kronecker layout in hypergraph_product.
    col_perm = []
    for a in range(n1):
        for b in range(n1):
            col_perm.append(b * n1 + a)
    for i in range(r1):
        for j in range(r1):
            col_perm.append(n1 * n1 + j * r1 + i)
    return row_perm, np.array(col_perm, dtype=np.int64)


def is_weakly_self_dual(code: CssCode, r1: int, n1: int) -> bool:
    row_perm, col_perm = qhp_swap_permutation(r1, n1)
    Gz = code.Gz.to_dense()[row_perm][:, col_perm]
    return np.array_equal(Gz, code.Gx.to_dense())


def all_codes_equal(a: CssCode, b: CssCode) -> bool:
    return a.Gx == b.Gx and a.Gz == b.Gz


__all__ = [
    "CssCode",
    "GallagerSpec",
    "all_codes_equal",
    "build_hstar",
    "canonical_form",
    "classical_distance",
    "css_params",
    "drop_dependent_rows",
    "gallager_sample",
    "hypergraph_product",
    "is_weakly_self_dual",
    "qhp_from",
    "rotated_toric",
    "sample_seed",
]
