"""Check-driven enumeration of connected supports on a Tanner graph.

A support ``S`` is grown from a start qubit by repeatedly picking a violated
check that is not part of the target syndrome and branching over the qubits
of that check.  Sibling branches exclude the qubits tried before them, so
every support is produced at most once.  Growth stops as soon as no
off-target check is violated; such a support is emitted when its weight is
in range (and, optionally, when it is irreducible).

With an empty target this enumerates zero-syndrome supports (codewords); with
a syndrome as target it enumerates the decoder's clusters.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numba as nb
import numpy as np

from .gf2 import BinaryMatrix


@dataclass(frozen=True)
class TannerGraph:
    n_checks: int
    n_qubits: int
    col_ptr: np.ndarray
    col_idx: np.ndarray
    row_ptr: np.ndarray
    row_idx: np.ndarray
    max_col_weight: int


@functools.lru_cache(maxsize=64)
def tanner_graph(H: BinaryMatrix) -> TannerGraph:
    dense = H.to_dense()
    rows, cols = np.nonzero(dense)
    order = np.lexsort((rows, cols))
    col_idx = rows[order].astype(np.int32)
    col_ptr = np.zeros(H.cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=H.cols), out=col_ptr[1:])
    order = np.lexsort((cols, rows))
    row_idx = cols[order].astype(np.int32)
    row_ptr = np.zeros(H.rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=H.rows), out=row_ptr[1:])
    maxcol = int(np.diff(col_ptr).max()) if H.cols else 0
    return TannerGraph(H.rows, H.cols, col_ptr, col_idx, row_ptr, row_idx, maxcol)


@nb.njit(cache=True)
def _small_rank(mat):
    a = mat.copy()
    nr, nc = a.shape
    r = 0
    for c in range(nc):
        p = -1
        for i in range(r, nr):
            if a[i, c]:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for j in range(nc):
                t = a[r, j]
                a[r, j] = a[p, j]
                a[p, j] = t
        for i in range(nr):
            if i != r and a[i, c]:
                for j in range(nc):
                    a[i, j] ^= a[r, j]
        r += 1
        if r == nr:
            break
    return r


@nb.njit(cache=True)
def _is_irreducible(sel, size, col_ptr, col_idx, target, mark):
    # irreducible iff rank of the off-target check columns on S equals |S| - 1
    nloc = 0
    touched = np.empty(size * 8 + 1, dtype=np.int64)
    for i in range(size):
        q = sel[i]
        for k in range(col_ptr[q], col_ptr[q + 1]):
            c = col_idx[k]
            if target[c] == 0 and mark[c] == 0:
                if nloc == touched.shape[0]:
                    grown = np.empty(touched.shape[0] * 2, dtype=np.int64)
                    grown[:nloc] = touched[:nloc]
                    touched = grown
                touched[nloc] = c
                nloc += 1
                mark[c] = nloc
    sub = np.zeros((size, max(nloc, 1)), dtype=np.uint8)
    for i in range(size):
        q = sel[i]
        for k in range(col_ptr[q], col_ptr[q + 1]):
            c = col_idx[k]
            if mark[c] > 0:
                sub[i, mark[c] - 1] = 1
    for i in range(nloc):
        mark[touched[i]] = 0
    return _small_rank(sub) == size - 1


@nb.njit(cache=True)
def _toggle(q, col_ptr, col_idx, target, par, bad_list, bad_pos, state):
    # state[0] = number of violated off-target checks, state[1] = violated target checks
    for k in range(col_ptr[q], col_ptr[q + 1]):
        c = col_idx[k]
        par[c] ^= 1
        if target[c]:
            if par[c]:
                state[1] += 1
            else:
                state[1] -= 1
        elif par[c]:
            bad_pos[c] = state[0]
            bad_list[state[0]] = c
            state[0] += 1
        else:
            i = bad_pos[c]
            last = bad_list[state[0] - 1]
            bad_list[i] = last
            bad_pos[last] = i
            bad_pos[c] = -1
            state[0] -= 1


@nb.njit(cache=True)
def _grow(
    col_ptr,
    col_idx,
    row_ptr,
    row_idx,
    target,
    starts,
    w_min,
    w_max,
    maxcol,
    require_syndrome,
    irreducible_only,
    max_nodes,
    tpos,
    nw,
):
    n = col_ptr.shape[0] - 1
    m = row_ptr.shape[0] - 1
    in_set = np.zeros(n, dtype=np.uint8)
    blocked = np.zeros(n, dtype=np.int32)
    par = np.zeros(m, dtype=np.uint8)
    bad_list = np.zeros(m + 1, dtype=np.int64)
    bad_pos = -np.ones(m, dtype=np.int64)
    mark = np.zeros(m, dtype=np.int64)
    state = np.zeros(2, dtype=np.int64)
    sel = np.zeros(w_max + 1, dtype=np.int64)
    fr_check = np.zeros(w_max + 1, dtype=np.int64)
    fr_pos = np.zeros(w_max + 1, dtype=np.int64)
    fr_last = np.zeros(w_max + 1, dtype=np.int64)
    fr_excl = np.zeros(w_max + 1, dtype=np.int64)
    maxrow = 1
    for c in range(m):
        maxrow = max(maxrow, row_ptr[c + 1] - row_ptr[c])
    excl = np.zeros((w_max + 1) * maxrow + 1, dtype=np.int64)

    out = np.empty(1024, dtype=np.int32)
    lens = np.empty(64, dtype=np.int32)
    masks = np.zeros((64, max(nw, 1)), dtype=np.uint64)
    npos = 0
    nout = 0
    nodes = 0
    truncated = False

    for si in range(starts.shape[0]):
        q0 = starts[si]
        if blocked[q0] > 0:
            continue
        in_set[q0] = 1
        _toggle(q0, col_ptr, col_idx, target, par, bad_list, bad_pos, state)
        sel[0] = q0
        size = 1
        nf = 0
        nexcl = 0
        evaluate = True
        while True:
            if evaluate:
                evaluate = False
                nodes += 1
                if max_nodes > 0 and nodes > max_nodes:
                    truncated = True
                    break
                if state[0] == 0:
                    if size >= w_min and (require_syndrome == 0 or state[1] > 0):
                        ok = True
                        if irreducible_only:
                            ok = _is_irreducible(sel, size, col_ptr, col_idx, target, mark)
                        if ok:
                            if npos + size > out.shape[0]:
                                grown = np.empty(2 * out.shape[0] + size, dtype=np.int32)
                                grown[:npos] = out[:npos]
                                out = grown
                            if nout == lens.shape[0]:
                                grown2 = np.empty(2 * lens.shape[0], dtype=np.int32)
                                grown2[:nout] = lens[:nout]
                                lens = grown2
                            srt = np.sort(sel[:size])
                            for i in range(size):
                                out[npos + i] = srt[i]
                            npos += size
                            lens[nout] = size
                            if nw > 0:
                                if nout == masks.shape[0]:
                                    grown3 = np.zeros((2 * masks.shape[0], nw), dtype=np.uint64)
                                    grown3[:nout] = masks[:nout]
                                    masks = grown3
                                for i in range(size):
                                    q = sel[i]
                                    for k in range(col_ptr[q], col_ptr[q + 1]):
                                        c = col_idx[k]
                                        if target[c] and par[c]:
                                            b = tpos[c]
                                            masks[nout, b >> 6] |= np.uint64(1) << np.uint64(b & 63)
                            nout += 1
                elif size < w_max and state[0] <= (w_max - size) * maxcol:
                    best_c = -1
                    best_av = 1 << 30
                    for i in range(state[0]):
                        c = bad_list[i]
                        av = 0
                        for k in range(row_ptr[c], row_ptr[c + 1]):
                            q = row_idx[k]
                            if in_set[q] == 0 and blocked[q] == 0:
                                av += 1
                        if av < best_av:
                            best_av = av
                            best_c = c
                            if av <= 1:
                                break
                    if best_av > 0:
                        fr_check[nf] = best_c
                        fr_pos[nf] = row_ptr[best_c]
                        fr_last[nf] = -1
                        fr_excl[nf] = nexcl
                        nf += 1
            if nf == 0:
                break
            f = nf - 1
            q = fr_last[f]
            if q >= 0:
                in_set[q] = 0
                _toggle(q, col_ptr, col_idx, target, par, bad_list, bad_pos, state)
                size -= 1
                blocked[q] += 1
                excl[nexcl] = q
                nexcl += 1
                fr_last[f] = -1
            c = fr_check[f]
            k = fr_pos[f]
            found = -1
            while k < row_ptr[c + 1]:
                q = row_idx[k]
                k += 1
                if in_set[q] == 0 and blocked[q] == 0:
                    found = q
                    break
            fr_pos[f] = k
            if found < 0:
                while nexcl > fr_excl[f]:
                    nexcl -= 1
                    blocked[excl[nexcl]] -= 1
                nf -= 1
                continue
            in_set[found] = 1
            _toggle(found, col_ptr, col_idx, target, par, bad_list, bad_pos, state)
            fr_last[f] = found
            sel[size] = found
            size += 1
            evaluate = True
        # unwind whatever is left (only non-empty after truncation)
        while nf > 0:
            f = nf - 1
            q = fr_last[f]
            if q >= 0:
                in_set[q] = 0
                _toggle(q, col_ptr, col_idx, target, par, bad_list, bad_pos, state)
                size -= 1
            while nexcl > fr_excl[f]:
                nexcl -= 1
                blocked[excl[nexcl]] -= 1
            nf -= 1
        in_set[q0] = 0
        _toggle(q0, col_ptr, col_idx, target, par, bad_list, bad_pos, state)
        blocked[q0] += 1
        if truncated:
            break
    return out[:npos].copy(), lens[:nout].copy(), masks[:nout].copy(), truncated, nodes


class SearchTruncated(RuntimeError):
    """Raised when an enumeration exceeds its node budget."""


def _split(flat: np.ndarray, lens: np.ndarray) -> list[np.ndarray]:
    offs = np.concatenate([[0], np.cumsum(lens)])
    return [flat[offs[i] : offs[i + 1]].astype(np.int64) for i in range(len(lens))]


def enumerate_codewords(
    H: BinaryMatrix,
    w_max: int,
    w_min: int = 1,
    irreducible_only: bool = True,
    max_nodes: int = 0,
) -> list[np.ndarray]:
    """Supports of zero-syndrome vectors of ``H`` with weight in ``[w_min, w_max]``.

    Every irreducible codeword in range is returned exactly once.  With
    ``irreducible_only=False`` some reducible supports can appear as well
    (those first reaching zero syndrome along a growth path).
    """
    g = tanner_graph(H)
    target = np.zeros(g.n_checks, dtype=np.uint8)
    starts = np.arange(g.n_qubits, dtype=np.int64)
    flat, lens, _, truncated, _ = _grow(
        g.col_ptr, g.col_idx, g.row_ptr, g.row_idx, target, starts,
        w_min, w_max, g.max_col_weight, 0, irreducible_only, max_nodes,
        np.zeros(1, np.int64), 0,
    )
    if truncated:
        raise SearchTruncated(f"codeword search exceeded {max_nodes} nodes")
    return _split(flat, lens)


def _cluster_starts(g: TannerGraph, target: np.ndarray) -> np.ndarray:
    adj = np.zeros(g.n_qubits, dtype=bool)
    for c in np.flatnonzero(target):
        adj[g.row_idx[g.row_ptr[c] : g.row_ptr[c + 1]]] = True
    return np.flatnonzero(adj).astype(np.int64)


def _check_target(g: TannerGraph, syndrome) -> np.ndarray:
    target = np.asarray(syndrome, dtype=np.uint8)
    if target.shape != (g.n_checks,):
        raise ValueError("syndrome length does not match the number of checks")
    return target


def enumerate_cluster_supports(
    H: BinaryMatrix,
    syndrome: np.ndarray,
    w_max: int,
    max_nodes: int = 0,
) -> list[np.ndarray]:
    """Irreducible clusters: connected supports whose syndrome is a nonempty subset of ``syndrome``."""
    g = tanner_graph(H)
    target = _check_target(g, syndrome)
    if not target.any():
        return []
    flat, lens, _, truncated, _ = _grow(
        g.col_ptr, g.col_idx, g.row_ptr, g.row_idx, target, _cluster_starts(g, target),
        1, w_max, g.max_col_weight, 1, True, max_nodes,
        np.zeros(1, np.int64), 0,
    )
    if truncated:
        raise SearchTruncated(f"cluster search exceeded {max_nodes} nodes")
    return _split(flat, lens)


@nb.njit(cache=True)
def _pick_irreducible(flat, offs, order, bounds, col_ptr, col_idx, target, n_checks):
    mark = np.zeros(n_checks, dtype=np.int64)
    chosen = -np.ones(bounds.shape[0] - 1, dtype=np.int64)
    for g in range(bounds.shape[0] - 1):
        for t in range(bounds[g], bounds[g + 1]):
            i = order[t]
            sel = flat[offs[i] : offs[i + 1]].astype(np.int64)
            if _is_irreducible(sel, sel.shape[0], col_ptr, col_idx, target, mark):
                chosen[g] = i
                break
    return chosen


def lightest_clusters(
    H: BinaryMatrix,
    syndrome: np.ndarray,
    w_max: int,
    max_nodes: int = 0,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Lightest irreducible cluster for every reachable syndrome subset.

    Returns the supports and, for each, its syndrome as a boolean mask over the
    set bits of ``syndrome`` (in increasing check order).  Ties in weight go to
    the lexicographically smaller support.  Irreducibility is only tested until
    the first passing candidate of each group, which is much cheaper than
    filtering every candidate.
    """
    g = tanner_graph(H)
    target = _check_target(g, syndrome)
    hot = np.flatnonzero(target)
    if hot.size == 0:
        return [], np.zeros((0, 0), dtype=bool)
    tpos = -np.ones(g.n_checks, dtype=np.int64)
    tpos[hot] = np.arange(hot.size)
    nw = (hot.size + 63) // 64
    flat, lens, masks, truncated, _ = _grow(
        g.col_ptr, g.col_idx, g.row_ptr, g.row_idx, target, _cluster_starts(g, target),
        1, w_max, g.max_col_weight, 1, False, max_nodes, tpos, nw,
    )
    if truncated:
        raise SearchTruncated(f"cluster search exceeded {max_nodes} nodes")
    if lens.size == 0:
        return [], np.zeros((0, hot.size), dtype=bool)
    offs = np.zeros(lens.size + 1, dtype=np.int64)
    np.cumsum(lens, out=offs[1:])
    pad = np.full((lens.size, w_max), g.n_qubits, dtype=np.int64)
    rows = np.repeat(np.arange(lens.size), lens)
    pad[rows, np.arange(flat.size) - offs[rows]] = flat
    keys = [pad[:, j] for j in range(w_max - 1, -1, -1)] + [lens]
    keys += [masks[:, j] for j in range(nw - 1, -1, -1)]
    order = np.lexsort(keys)
    sm = masks[order]
    change = np.any(sm[1:] != sm[:-1], axis=1)
    bounds = np.concatenate([[0], np.flatnonzero(change) + 1, [lens.size]]).astype(np.int64)
    chosen = _pick_irreducible(flat, offs, order, bounds, g.col_ptr, g.col_idx, target, g.n_checks)
    chosen = chosen[chosen >= 0]
    supports = [flat[offs[i] : offs[i + 1]].astype(np.int64) for i in chosen]
    bits = np.unpackbits(masks[chosen].view(np.uint8), axis=1, bitorder="little")[:, : hot.size]
    return supports, bits.astype(bool)
