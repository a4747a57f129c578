"""Cluster-based approximate minimum-weight decoding.

Pipeline for one syndrome:

1. list the irreducible clusters of weight at most ``w1``;
2. choose a subset of clusters whose syndromes partition the syndrome,
   with minimum total weight (branch and bound);
3. lower the weight further by greedily adding nontrivial irreducible
   codewords of weight at most ``w2`` from a precomputed table.

Only X errors are simulated: ``H = Gz`` measures the syndrome and rows of
``G = Gx`` generate the degeneracy group.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from . import gf2
from ._search import SearchTruncated, enumerate_cluster_supports, enumerate_codewords, lightest_clusters
from .codes import CssCode
from .gf2 import BinaryMatrix, RowSpace

Status = Literal["success", "logical_failure", "timeout"]


@dataclass(frozen=True)
class Cluster:
    support: np.ndarray
    syndrome_bits: tuple[int, ...]
    weight: int


@dataclass(frozen=True)
class IrreducibleCodeword:
    support: np.ndarray
    weight: int
    nontrivial: bool


@dataclass
class DecodeOutcome:
    correction: np.ndarray
    weight: int
    status: Status
    wall_time: float
    optimal_cover: bool = True
    n_clusters: int = 0


@dataclass
class CoverResult:
    chosen: list[int]
    weight: int
    optimal: bool


# ---------------------------------------------------------------------------
# graphs and enumeration


def connectivity_graph(H: BinaryMatrix) -> list[set[int]]:
    """Adjacency sets of the qubit graph: two qubits are adjacent when some check contains both."""
    adj: list[set[int]] = [set() for _ in range(H.cols)]
    for supp in H.row_supports():
        s = supp.tolist()
        for q in s:
            adj[q].update(s)
    for q, nb in enumerate(adj):
        nb.discard(q)
    return adj


def max_degree(H: BinaryMatrix) -> int:
    return max((len(a) for a in connectivity_graph(H)), default=0)


def enumerate_clusters(
    H: BinaryMatrix, s: np.ndarray, w1: int, max_nodes: int = 0, dedupe: bool = True
) -> list[Cluster]:
    """Irreducible clusters of weight at most ``w1`` for the syndrome ``s``.

    With ``dedupe`` only the lightest cluster per syndrome set is kept (ties go
    to the lexicographically smaller support); this is all the cover solver
    needs.  The result is sorted by (weight, support).
    """
    s = np.asarray(s, dtype=np.uint8)
    if dedupe:
        hot = np.flatnonzero(s)
        supports, bits = lightest_clusters(H, s, w1, max_nodes=max_nodes)
        out = [Cluster(supp, tuple(hot[b].tolist()), int(supp.size)) for supp, b in zip(supports, bits)]
    else:
        dense = H.to_dense()
        out = []
        for supp in enumerate_cluster_supports(H, s, w1, max_nodes=max_nodes):
            syn = dense[:, supp].sum(axis=1) & 1
            out.append(Cluster(supp, tuple(np.flatnonzero(syn).tolist()), int(supp.size)))
    return sorted(out, key=lambda c: (c.weight, tuple(c.support.tolist())))


def enumerate_irreducible_codewords(
    H: BinaryMatrix, G: BinaryMatrix, w2: int, max_nodes: int = 0
) -> list[IrreducibleCodeword]:
    """Irreducible zero-syndrome vectors of ``H`` up to weight ``w2``, flagged nontrivial when outside rowspace(``G``)."""
    space = RowSpace(G)
    return [
        IrreducibleCodeword(s, int(s.size), not space.contains(gf2.support_to_int(s)))
        for s in enumerate_codewords(H, w2, irreducible_only=True, max_nodes=max_nodes)
    ]


class CodewordTable:
    """Sparse incidence matrix of codewords, used by :func:`reduce_weight`.

    Rows are ordered by (weight, support), which fixes the tie-breaking order.
    """

    def __init__(self, supports: list[np.ndarray], n: int):
        supports = sorted(supports, key=lambda s: (s.size, tuple(s.tolist())))
        self.n = n
        self.supports = supports
        lens = np.array([s.size for s in supports], dtype=np.int64)
        self.weights = lens
        indptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        indices = np.concatenate(supports).astype(np.int64) if supports else np.zeros(0, np.int64)
        data = np.ones(indices.size, dtype=np.int32)
        self.matrix = sp.csr_matrix((data, indices, indptr), shape=(len(supports), n))

    def __len__(self) -> int:
        return len(self.supports)

    @classmethod
    def for_code(cls, code: CssCode, w2: int, nontrivial_only: bool = True, max_nodes: int = 0):
        words = enumerate_irreducible_codewords(code.Gz, code.Gx, w2, max_nodes=max_nodes)
        keep = [c.support for c in words if c.nontrivial or not nontrivial_only]
        return cls(keep, code.n)


# ---------------------------------------------------------------------------
# set cover


def solve_exact_cover(
    clusters: list[Cluster],
    s: np.ndarray,
    timeout: float | None = 60.0,
    max_nodes: int = 0,
    method: str = "lp",
    proof_columns: int = 2000,
) -> CoverResult | None:
    """Minimum-weight subset of clusters whose syndrome sets partition ``support(s)``.

    Independent groups of syndrome bits (no cluster straddles two groups) are
    solved separately.

    ``method="bnb"`` runs a plain depth-first branch and bound: branch on the
    uncovered bit with the fewest fitting clusters and prune with
    ``sum over uncovered bits of min(weight / |syndrome|)``; a greedy pass gives
    the first incumbent.  ``method="lp"`` (default) uses the LP relaxation:
    an incumbent from the integer program restricted to clusters of small
    reduced cost, then an exact solve over every cluster whose reduced cost
    leaves room for improvement, provided there are at most ``proof_columns``
    of them.  Small groups always go to ``bnb``.

    On timeout (or when the proof step is skipped) the best cover found so far
    is returned with ``optimal=False``; ``None`` means no cover was found.
    """
    if method not in ("lp", "bnb"):
        raise ValueError(f"unknown method {method!r}")
    s = np.asarray(s, dtype=np.uint8)
    items = np.flatnonzero(s).tolist()
    if not items:
        return CoverResult([], 0, True)
    pos = {b: i for i, b in enumerate(items)}
    masks: list[int] = []
    weights: list[int] = []
    index: list[int] = []
    for i, cl in enumerate(clusters):
        mask = 0
        ok = True
        for b in cl.syndrome_bits:
            j = pos.get(b)
            if j is None:
                ok = False
                break
            mask |= 1 << j
        if ok and mask:
            masks.append(mask)
            weights.append(cl.weight)
            index.append(i)

    # union-find over syndrome bits
    parent = list(range(len(items)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for mask in masks:
        bits = gf2.int_to_support(mask)
        r0 = find(bits[0])
        for b in bits[1:]:
            rb = find(b)
            if rb != r0:
                parent[rb] = r0
    groups: dict[int, int] = {}
    for i in range(len(items)):
        groups[find(i)] = groups.get(find(i), 0) | (1 << i)
    opts_by_group: dict[int, list[int]] = {g: [] for g in groups}
    for o, mask in enumerate(masks):
        opts_by_group[find((mask & -mask).bit_length() - 1)].append(o)

    deadline = None if timeout is None else time.perf_counter() + timeout
    chosen: list[int] = []
    total = 0
    optimal = True
    budget = [max_nodes]
    for g in sorted(groups, key=lambda g: groups[g] & -groups[g]):
        opts = opts_by_group[g]
        if method == "lp" and len(opts) > _SMALL_GROUP:
            res = _solve_group_lp(groups[g], opts, masks, weights, deadline, proof_columns)
        else:
            res = _solve_group(groups[g], opts, masks, weights, deadline, budget)
        if res is None:
            return None
        picked, w, opt = res
        chosen.extend(index[o] for o in picked)
        total += w
        optimal &= opt
    return CoverResult(sorted(chosen), total, optimal)


_SMALL_GROUP = 24


def _remaining(deadline) -> float | None:
    if deadline is None:
        return None
    return max(deadline - time.perf_counter(), 1e-3)


def _solve_group_lp(universe, opts, masks, weights, deadline, proof_columns):
    bits = gf2.int_to_support(universe)
    row_of = {b: i for i, b in enumerate(bits)}
    indptr = [0]
    indices: list[int] = []
    for o in opts:
        indices.extend(row_of[b] for b in gf2.int_to_support(masks[o]))
        indptr.append(len(indices))
    A = sp.csc_matrix(
        (np.ones(len(indices)), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(bits), len(opts)),
    )
    w = np.array([weights[o] for o in opts], dtype=float)
    ones = np.ones(len(bits))
    lp_opts = {}
    t = _remaining(deadline)
    if t is not None:
        lp_opts["time_limit"] = t
    lp = linprog(w, A_eq=A, b_eq=ones, bounds=(0, 1), method="highs", options=lp_opts)
    if lp.status == 2:
        return None
    if lp.status != 0:
        return _fallback_incumbent(universe, opts, masks, weights)
    x = lp.x
    if np.all((x < 1e-9) | (x > 1 - 1e-9)):
        sel = np.flatnonzero(x > 0.5)
        return [opts[j] for j in sel], int(round(w[sel].sum())), True
    rc = w - A.T @ lp.eqlin.marginals
    lower = math.ceil(lp.fun - 1e-6)

    def restricted(cols):
        if cols.size == 0:
            return None
        o = {}
        t = _remaining(deadline)
        if t is not None:
            o["time_limit"] = t
        res = milp(
            w[cols],
            constraints=LinearConstraint(A[:, cols], ones, ones),
            integrality=np.ones(cols.size),
            bounds=Bounds(0, 1),
            options=o,
        )
        if res.x is None:
            return None
        sel = cols[res.x > 0.5]
        return sel, int(round(w[sel].sum())), res.status == 0

    best = None
    tau = 0.5
    top = float(rc.max())
    while best is None:
        cols = np.flatnonzero(rc <= tau + 1e-9)
        out = restricted(cols)
        if out is not None:
            best = out
        elif tau > top or (deadline is not None and time.perf_counter() > deadline):
            break
        tau *= 2
    if best is None:
        return _fallback_incumbent(universe, opts, masks, weights)
    sel, cost, _ = best
    if cost <= lower:
        return [opts[j] for j in sel], cost, True
    keep = np.flatnonzero(rc <= cost - 1 - lp.fun + 1e-6)
    if keep.size > proof_columns or (deadline is not None and time.perf_counter() > deadline):
        return [opts[j] for j in sel], cost, False
    out = restricted(keep)
    if out is None:
        # nothing cheaper exists, unless the solve was cut short
        done = deadline is None or time.perf_counter() <= deadline
        return [opts[j] for j in sel], cost, done
    sel2, cost2, done = out
    if cost2 < cost:
        return [opts[j] for j in sel2], cost2, done
    return [opts[j] for j in sel], cost, done


def _fallback_incumbent(universe, opts, masks, weights):
    res = _solve_group(universe, opts, masks, weights, time.perf_counter(), [1])
    return res


class _Stop(Exception):
    pass


def _solve_group(universe, opts, masks, weights, deadline, budget):
    nbits = universe.bit_length()
    per_bit: dict[int, list[int]] = {}
    for o in opts:
        for b in gf2.int_to_support(masks[o]):
            per_bit.setdefault(b, []).append(o)
    for b in gf2.int_to_support(universe):
        if b not in per_bit:
            return None
    for b in per_bit:
        per_bit[b].sort(key=lambda o: (weights[o], o))
    ratio = [0.0] * nbits
    for b, lst in per_bit.items():
        ratio[b] = min(weights[o] / masks[o].bit_count() for o in lst)

    best_w = math.inf
    best: list[int] | None = None

    # greedy incumbent
    unc = universe
    pick: list[int] = []
    w = 0
    while unc:
        b_sel, fits_sel = None, None
        for b in gf2.int_to_support(unc):
            fits = [o for o in per_bit[b] if masks[o] & ~unc == 0]
            if fits_sel is None or len(fits) < len(fits_sel):
                b_sel, fits_sel = b, fits
                if not fits:
                    break
        if not fits_sel:
            break
        o = min(fits_sel, key=lambda o: (weights[o] / masks[o].bit_count(), weights[o], o))
        pick.append(o)
        w += weights[o]
        unc &= ~masks[o]
    if unc == 0:
        best_w, best = w, pick

    nodes = [0]
    optimal = [True]

    def lower_bound(unc):
        lb = 0.0
        while unc:
            low = unc & -unc
            lb += ratio[low.bit_length() - 1]
            unc ^= low
        return math.ceil(lb - 1e-9)

    def rec(unc, cost, picked):
        nonlocal best_w, best
        if unc == 0:
            if cost < best_w:
                best_w, best = cost, list(picked)
            return
        nodes[0] += 1
        if budget[0] and nodes[0] > budget[0]:
            raise _Stop
        if deadline is not None and (nodes[0] & 255) == 0 and time.perf_counter() > deadline:
            raise _Stop
        if cost + lower_bound(unc) >= best_w:
            return
        b_sel, fits_sel = None, None
        x = unc
        while x:
            low = x & -x
            b = low.bit_length() - 1
            x ^= low
            fits = [o for o in per_bit[b] if masks[o] & ~unc == 0]
            if fits_sel is None or len(fits) < len(fits_sel):
                b_sel, fits_sel = b, fits
                if len(fits) <= 1:
                    break
        for o in fits_sel:
            picked.append(o)
            rec(unc & ~masks[o], cost + weights[o], picked)
            picked.pop()

    try:
        rec(universe, 0, [])
    except _Stop:
        optimal[0] = False
    if budget[0]:
        budget[0] = max(1, budget[0] - nodes[0])
    if best is None:
        return None
    return best, int(best_w), optimal[0]


# ---------------------------------------------------------------------------
# post-processing and classification


def reduce_weight(e: np.ndarray, codewords) -> np.ndarray:
    """Greedily add codewords that lower the weight of ``e`` until none does.

    At each step the codeword with the largest weight drop is added; ties go to
    the earliest codeword of the table.  ``codewords`` is a
    :class:`CodewordTable` or a list of supports / :class:`IrreducibleCodeword`.
    """
    e = np.asarray(e, dtype=np.uint8).copy()
    if not isinstance(codewords, CodewordTable):
        supports = [c.support if isinstance(c, IrreducibleCodeword) else np.asarray(c) for c in codewords]
        codewords = CodewordTable(supports, e.size) if supports else None
    if codewords is None or len(codewords) == 0:
        return e
    M = codewords.matrix
    while True:
        overlap = M @ e.astype(np.int32)
        gain = 2 * overlap - codewords.weights
        j = int(np.argmax(gain))
        if gain[j] <= 0:
            return e
        e[codewords.supports[j]] ^= 1


def classify(e_total: np.ndarray, G: BinaryMatrix | RowSpace, H: BinaryMatrix | None = None) -> Status:
    """``success`` iff the residual error is a combination of rows of ``G``."""
    e_total = np.asarray(e_total, dtype=np.uint8)
    if H is not None:
        assert not H.mul_vec(e_total).any(), "residual error has a nonzero syndrome"
    space = G if isinstance(G, RowSpace) else RowSpace(G)
    return "success" if space.contains(gf2.vec_to_int(e_total)) else "logical_failure"


@dataclass
class Decoder:
    """Decoder bound to one code with a precomputed codeword table."""

    code: CssCode
    w1: int = 10
    w2: int = 19
    timeout: float | None = 60.0
    max_nodes: int = 0
    codewords: CodewordTable | None = None
    method: str = "lp"
    proof_columns: int = 2000
    _space: RowSpace = field(init=False, repr=False)

    def __post_init__(self):
        if self.codewords is None:
            self.codewords = CodewordTable.for_code(self.code, self.w2)
        self._space = RowSpace(self.code.Gx)

    def decode(self, s: np.ndarray, error: np.ndarray | None = None) -> DecodeOutcome:
        t0 = time.perf_counter()
        H = self.code.Gz
        s = np.asarray(s, dtype=np.uint8)
        n = self.code.n
        if not s.any():
            corr = np.zeros(n, dtype=np.uint8)
        else:
            try:
                clusters = enumerate_clusters(H, s, self.w1, max_nodes=self.max_nodes)
            except SearchTruncated:
                return DecodeOutcome(np.zeros(n, np.uint8), 0, "timeout", time.perf_counter() - t0)
            cover = solve_exact_cover(
                clusters, s, self.timeout, self.max_nodes, self.method, self.proof_columns
            )
            if cover is None:
                return DecodeOutcome(
                    np.zeros(n, np.uint8), 0, "timeout", time.perf_counter() - t0, False, len(clusters)
                )
            corr = np.zeros(n, dtype=np.uint8)
            for i in cover.chosen:
                corr[clusters[i].support] ^= 1
            corr = reduce_weight(corr, self.codewords)
        status: Status = "success"
        if error is not None:
            status = classify(corr ^ np.asarray(error, dtype=np.uint8), self._space)
        out = DecodeOutcome(corr, int(corr.sum()), status, time.perf_counter() - t0)
        if s.any():
            out.optimal_cover = cover.optimal
            out.n_clusters = len(clusters)
        return out


def decode(
    code: CssCode,
    s: np.ndarray,
    w1: int = 10,
    w2: int = 19,
    timeout: float | None = 60.0,
    error: np.ndarray | None = None,
    codewords: CodewordTable | None = None,
) -> DecodeOutcome:
    """Decode one syndrome; pass ``error`` to classify the result against the truth."""
    return Decoder(code, w1, w2, timeout, codewords=codewords).decode(s, error)


# ---------------------------------------------------------------------------
# threshold trials


@dataclass
class TrialResult:
    p: float
    trials: int
    failures: int
    timeouts: int

    @property
    def rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.trials)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ph = k / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return (max(0.0, centre - half), min(1.0, centre + half))


def sample_error(n: int, p: float, seed: int, trial: int) -> np.ndarray:
    """Bit-flip pattern for one trial.

    The uniforms depend only on ``(seed, trial)``, so patterns at different
    ``p`` are nested: raising ``p`` only adds flips.
    """
    u = np.random.default_rng([seed, trial]).random(n)
    return (u < p).astype(np.uint8)


def run_trials(
    code: CssCode,
    p: float,
    N: int,
    seed: int,
    w1: int = 10,
    w2: int = 19,
    timeout: float | None = 60.0,
    decoder: Decoder | None = None,
    start: int = 0,
) -> TrialResult:
    """Decode ``N`` independent bit-flip patterns and count failures (timeouts included).

    Trial ``t`` uses the stream ``(seed, t)``, so the trials ``start .. start+N-1``
    can be split across workers and summed.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    dec = decoder or Decoder(code, w1, w2, timeout)
    fails = 0
    touts = 0
    for t in range(start, start + N):
        e = sample_error(code.n, p, seed, t)
        s = code.Gz.mul_vec(e)
        out = dec.decode(s, e)
        if out.status != "success":
            fails += 1
            touts += out.status == "timeout"
    return TrialResult(p, N, fails, touts)


def estimate_crossing(curves: list[tuple[str, np.ndarray, np.ndarray]]) -> tuple[float, float] | None:
    """Average crossing point of failure-rate curves, with the spread over code pairs.

    ``curves`` holds ``(label, p_values, rates)``.  For every pair of curves the
    difference is interpolated linearly on the shared ``p`` grid and the first
    sign change gives that pair's crossing.
    """
    pts = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            _, pa, ra = curves[i]
            _, pb, rb = curves[j]
            grid = np.intersect1d(np.asarray(pa, float), np.asarray(pb, float))
            if grid.size < 2:
                continue
            fa = np.interp(grid, pa, ra)
            fb = np.interp(grid, pb, rb)
            diff = fa - fb
            for t in range(grid.size - 1):
                if diff[t] == 0.0:
                    pts.append(float(grid[t]))
                    break
                if diff[t] * diff[t + 1] < 0:
                    x0, x1 = grid[t], grid[t + 1]
                    pts.append(float(x0 - diff[t] * (x1 - x0) / (diff[t + 1] - diff[t])))
                    break
    if not pts:
        return None
    return float(np.mean(pts)), float(np.std(pts))
