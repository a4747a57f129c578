"""Random-bond Ising models in Wegner form.

A binary ``r x n`` matrix ``M`` defines ``r`` spins and ``n`` bonds; bond ``b``
couples the spins in column ``b``, ``R_b = prod_j S_j^{M_jb}``.  With bond
signs ``(-1)^{e_b}`` the dimensionless energy is ``E = -sum_b (-1)^{e_b} R_b``.

Exact results come from enumerating all ``2^r`` spin states (as the
vectors ``alpha M``) into a signed weight histogram, after which the
partition function at any coupling is a short sum.  Sampling uses
Metropolis sweeps and parallel tempering compiled with numba.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numba as nb
import numpy as np

from . import gf2
from .codes import CssCode, build_hstar
from .gf2 import BinaryMatrix

MAX_EXACT_SPINS = 26


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class IsingModel:
    """Spins and multi-spin bonds read off a binary matrix (bond ``b`` = column ``b``)."""

    matrix: BinaryMatrix
    bond_ptr: np.ndarray
    bond_idx: np.ndarray
    spin_ptr: np.ndarray
    spin_idx: np.ndarray

    @property
    def n_spins(self) -> int:
        return self.matrix.rows

    @property
    def n_bonds(self) -> int:
        return self.matrix.cols

    @property
    def bonds(self) -> list[np.ndarray]:
        return [self.bond_idx[self.bond_ptr[b] : self.bond_ptr[b + 1]] for b in range(self.n_bonds)]


@dataclass(frozen=True)
class Disorder:
    e: np.ndarray
    p: float = 0.0


@dataclass(frozen=True)
class ChargePair:
    """Electric charges ``e`` flip bond signs; magnetic charges ``m`` insert ``R_b`` factors."""

    e: np.ndarray
    m: np.ndarray

    @classmethod
    def zero(cls, n: int) -> ChargePair:
        z = np.zeros(n, dtype=np.uint8)
        return cls(z, z)


@dataclass
class SpinState:
    spins: np.ndarray
    energy: float


@dataclass
class TemperingEnsemble:
    """Replica-exchange state for one start (cold or hot)."""

    temps: np.ndarray
    spins: np.ndarray  # (replicas, n_spins) int8, row i is replica i
    bond_vals: np.ndarray  # (replicas, n_bonds) int8
    energies: np.ndarray  # (replicas,) int64
    replica_at: np.ndarray  # temperature slot -> replica
    labels: np.ndarray  # +1 last visited coldest, -1 hottest, 0 neither yet
    swap_attempts: np.ndarray = field(default=None)
    swap_accepts: np.ndarray = field(default=None)
    n_up: np.ndarray = field(default=None)
    n_down: np.ndarray = field(default=None)

    def __post_init__(self):
        if np.any(np.diff(self.temps) <= 0):
            raise ValueError("temperature grid must be strictly increasing")
        if self.spins.shape[0] != self.temps.size:
            raise ValueError("one replica per temperature required")
        nT = self.temps.size
        if self.swap_attempts is None:
            self.swap_attempts = np.zeros(max(nT - 1, 0), dtype=np.int64)
            self.swap_accepts = np.zeros(max(nT - 1, 0), dtype=np.int64)
            self.n_up = np.zeros(nT, dtype=np.int64)
            self.n_down = np.zeros(nT, dtype=np.int64)

    def state(self, slot: int) -> SpinState:
        rep = self.replica_at[slot]
        return SpinState(self.spins[rep].copy(), float(self.energies[rep]))


def model_from_matrix(M: BinaryMatrix) -> IsingModel:
    if np.any(M.col_weights() == 0):
        raise ValueError("matrix has a zero column (empty bond)")
    cols = M.col_supports()
    bond_ptr = np.zeros(M.cols + 1, dtype=np.int64)
    bond_ptr[1:] = np.cumsum([c.size for c in cols])
    bond_idx = np.concatenate(cols).astype(np.int64) if cols else np.zeros(0, np.int64)
    rows = M.row_supports()
    spin_ptr = np.zeros(M.rows + 1, dtype=np.int64)
    spin_ptr[1:] = np.cumsum([r.size for r in rows])
    spin_idx = np.concatenate(rows).astype(np.int64) if rows else np.zeros(0, np.int64)
    return IsingModel(M, bond_ptr, bond_idx, spin_ptr, spin_idx)


def bond_values(model: IsingModel, spins: np.ndarray) -> np.ndarray:
    spins = np.asarray(spins, dtype=np.int64)
    out = np.ones(model.n_bonds, dtype=np.int64)
    for b in range(model.n_bonds):
        out[b] = np.prod(spins[model.bond_idx[model.bond_ptr[b] : model.bond_ptr[b + 1]]])
    return out


def energy(model: IsingModel, e, state) -> float:
    """``-sum_b (-1)^{e_b} R_b`` for the spins in ``state`` (a SpinState or a +-1 array)."""
    e = np.asarray(e.e if isinstance(e, Disorder) else e, dtype=np.int64)
    spins = state.spins if isinstance(state, SpinState) else state
    if e.shape != (model.n_bonds,) or np.shape(spins) != (model.n_spins,):
        raise ValueError("dimension mismatch between model, disorder and state")
    J = 1 - 2 * e
    return float(-np.sum(J * bond_values(model, spins)))


# ---------------------------------------------------------------------------
# exact enumeration


@dataclass(frozen=True)
class WeightHistogram:
    """Signed counts ``c_w`` of ``alpha`` with ``wgt(alpha M + e) = w``, sign ``(-1)^{(alpha M).m}``.

    ``Z_{e,m}(M;K) = sum_w c_w exp(K (n - 2w))``.
    """

    n: int
    counts: np.ndarray

    def log_terms(self, K: float) -> tuple[np.ndarray, np.ndarray]:
        w = np.flatnonzero(self.counts)
        c = self.counts[w]
        return np.log(np.abs(c).astype(float)) + K * (self.n - 2 * w), np.sign(c)

    def log_z(self, K: float, precise: bool = False) -> tuple[float, int]:
        """``(log|Z|, sign Z)``; sign 0 means the sum vanished.

        ``precise`` evaluates the signed sum with 50-digit arithmetic, which
        matters when the terms nearly cancel.
        """
        a, sgn = self.log_terms(K)
        if a.size == 0:
            return -math.inf, 0
        if precise:
            with mpmath.workdps(50):
                K_ = mpmath.mpf(K)
                z = mpmath.fsum(
                    int(c) * mpmath.exp(K_ * (self.n - 2 * int(w)))
                    for w, c in zip(np.flatnonzero(self.counts), self.counts[self.counts != 0])
                )
                if z == 0:
                    return -math.inf, 0
                return float(mpmath.log(abs(z))), (1 if z > 0 else -1)
        shift = float(a.max())
        s = math.fsum((sgn * np.exp(a - shift)).tolist())
        if s == 0.0:
            return -math.inf, 0
        return shift + math.log(abs(s)), (1 if s > 0 else -1)

    def log_abs_sum(self, K: float) -> float:
        """Log of ``sum_w |c_w| exp(K(n-2w))``, the scale against which cancellations are judged."""
        a, _ = self.log_terms(K)
        if a.size == 0:
            return -math.inf
        shift = float(a.max())
        return shift + math.log(math.fsum(np.exp(a - shift).tolist()))

    def energy_moments(self, K: float) -> tuple[float, float]:
        """Thermal ``<E>`` and ``<E^2>`` with ``E = 2w - n`` (requires nonnegative counts)."""
        if np.any(self.counts < 0):
            raise ValueError("energy moments need m = 0")
        a, _ = self.log_terms(K)
        w = np.flatnonzero(self.counts)
        p = np.exp(a - a.max())
        p /= p.sum()
        E = 2.0 * w - self.n
        return float(p @ E), float(p @ (E * E))

    def specific_heat(self, T: float) -> float:
        K = 1.0 / T
        m1, m2 = self.energy_moments(K)
        return (m2 - m1 * m1) * K * K / self.n


def _pack_rows(M: BinaryMatrix) -> np.ndarray:
    return np.ascontiguousarray(M.words)


def _pack_vec(v: np.ndarray, nw: int) -> np.ndarray:
    return BinaryMatrix.from_dense(np.asarray(v, dtype=np.uint8).reshape(1, -1)).words[0][:nw].copy()


def weight_histogram(M: BinaryMatrix, e=None, m=None, block_bits: int = 20) -> WeightHistogram:
    """Enumerate ``alpha M`` over all ``alpha`` in ``F_2^r`` into a :class:`WeightHistogram`."""
    r, n = M.shape
    if r > MAX_EXACT_SPINS:
        raise ValueError(f"{r} spins exceed the enumeration limit of {MAX_EXACT_SPINS}")
    rows = _pack_rows(M)
    nw = rows.shape[1] if r else max(1, (n + 63) // 64)
    ev = _pack_vec(np.zeros(n) if e is None else e, nw)
    mv = _pack_vec(np.zeros(n) if m is None else m, nw)
    low = min(r, block_bits)
    block = np.zeros((1, nw), dtype=np.uint64)
    for i in range(low):
        block = np.concatenate([block, block ^ rows[i]])
    counts = np.zeros(2 * (n + 1), dtype=np.int64)
    off = np.zeros(nw, dtype=np.uint64)
    high = r - low
    for t in range(1 << high):
        if t:
            j = (t & -t).bit_length() - 1
            off ^= rows[low + j]
        vecs = block ^ off
        w = np.bitwise_count(vecs ^ ev).sum(axis=1, dtype=np.int64)
        sg = np.bitwise_count(vecs & mv).sum(axis=1, dtype=np.int64) & 1
        counts += np.bincount(w + (n + 1) * sg, minlength=2 * (n + 1))
    return WeightHistogram(n, counts[: n + 1] - counts[n + 1 :])


def exact_logZ(model: IsingModel | BinaryMatrix, charges: ChargePair | None, K: float, return_sign: bool = False):
    """Log of ``Z_{e,m}`` by full enumeration of the spins.

    Returns ``log|Z|``, or ``(log|Z|, sign)`` with ``return_sign`` (the sum can be
    negative or zero once magnetic charges are present).
    """
    M = model.matrix if isinstance(model, IsingModel) else model
    e = m = None
    if charges is not None:
        e, m = charges.e, charges.m
    val, sign = weight_histogram(M, e, m).log_z(K)
    return (val, sign) if return_sign else val


def kw_dual_coupling(K: float) -> float:
    """``K*`` with ``tanh K* = exp(-2K)``."""
    return math.atanh(math.exp(-2.0 * K))


def duality_log_scale(G: BinaryMatrix, Gstar: BinaryMatrix, K: float) -> float:
    r, n = G.shape
    return (r - Gstar.rows + gf2.rank(Gstar)) * math.log(2.0) + 0.5 * n * math.log(math.sinh(K) * math.cosh(K))


def verify_duality(G: BinaryMatrix, charges: ChargePair, K: float, Gstar: BinaryMatrix | None = None) -> float:
    """Residual of ``Z_{e,m}(G;K) = (-1)^{e.m} Z_{m,e}(G*;K*) A(K)``.

    The residual is ``|LHS - RHS|`` divided by the unsigned sum ``sum |terms|``
    of the left side, so it stays meaningful when charges make the sum cancel.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    Gs = gf2.dual(G) if Gstar is None else Gstar
    Ks = kw_dual_coupling(K)
    e = np.asarray(charges.e, dtype=np.uint8)
    m = np.asarray(charges.m, dtype=np.uint8)
    left = weight_histogram(G, e, m)
    right = weight_histogram(Gs, m, e)
    lL, sL = left.log_z(K, precise=True)
    lR, sR = right.log_z(Ks, precise=True)
    lR += duality_log_scale(G, Gs, K)
    if int(e.astype(np.int64) @ m.astype(np.int64)) % 2:
        sR = -sR
    scale = left.log_abs_sum(K)
    return abs(sL * math.exp(lL - scale) - sR * math.exp(lR - scale))


def homological_difference_exact(G: BinaryMatrix, Hstar: BinaryMatrix, e, K: float) -> float:
    """``F_e(G;K) - F_e(H*;K)`` with ``F = -log Z``."""
    e = None if e is None else np.asarray(e, dtype=np.uint8)
    return exact_logZ(Hstar, ChargePair(e, np.zeros(G.cols, np.uint8)) if e is not None else None, K) - exact_logZ(
        G, ChargePair(e, np.zeros(G.cols, np.uint8)) if e is not None else None, K
    )


def logical_rows(code: CssCode) -> BinaryMatrix:
    H = code.hstar if code.hstar is not None else build_hstar(code)
    return H.take_rows(range(code.Gx.rows, H.rows))


@dataclass(frozen=True)
class MLResult:
    class_index: int
    correction: np.ndarray
    probability: float
    log_weights: np.ndarray


def exact_ml_decode(code: CssCode, s: np.ndarray, K: float) -> MLResult:
    """Most likely degeneracy class for syndrome ``s`` (X errors, ``H = Gz``) at coupling ``K``.

    Classes are labelled by the combination of logical rows added to a fixed
    preimage of ``s``; ``probability`` is that class's share of the total.
    """
    if code.k > 12:
        raise ValueError("too many classes for exhaustive ML decoding")
    s = np.asarray(s, dtype=np.uint8)
    e0 = gf2.in_rowspace(code.Gz.T, s)
    if e0 is None:
        raise ValueError("syndrome has no preimage")
    L = logical_rows(code).to_dense()
    k = L.shape[0]
    logs = np.empty(1 << k)
    cands = []
    for c in range(1 << k):
        v = e0.copy()
        for j in range(k):
            if (c >> j) & 1:
                v ^= L[j]
        cands.append(v)
        logs[c] = exact_logZ(code.Gx, ChargePair(v, np.zeros(code.n, np.uint8)), K)
    best = int(np.argmax(logs))
    prob = float(1.0 / np.exp(logs - logs[best]).sum())
    return MLResult(best, cands[best], prob, logs)


def conditional_log_probability(code: CssCode, e: np.ndarray, K: float, hstar: BinaryMatrix | None = None) -> float:
    """``log P(e|s) = log Z_e(G;K) - log Z_e(H*;K)``."""
    H = hstar if hstar is not None else (code.hstar if code.hstar is not None else build_hstar(code))
    return -homological_difference_exact(code.Gx, H, e, K)


def log_probability_floor(n: int, k: int, K: float) -> float:
    """Lower bound ``-n (2K + k/n) ln 2`` on ``log P(e|s)``."""
    return -n * (2.0 * K + k / n) * math.log(2.0)


# ---------------------------------------------------------------------------
# Monte Carlo kernels


@nb.njit(cache=True)
def _seed(s):
    np.random.seed(s)


@nb.njit(cache=True)
def _sweep(spins, R, J, spin_ptr, spin_idx, K):
    dEtot = 0
    for j in range(spins.shape[0]):
        dE = 0
        for t in range(spin_ptr[j], spin_ptr[j + 1]):
            b = spin_idx[t]
            dE += J[b] * R[b]
        dE *= 2
        if dE <= 0 or np.random.random() < math.exp(-K * dE):
            spins[j] = -spins[j]
            for t in range(spin_ptr[j], spin_ptr[j + 1]):
                b = spin_idx[t]
                R[b] = -R[b]
            dEtot += dE
    return dEtot


@nb.njit(cache=True)
def _tempering(
    spins, R, E, rep_at, labels, Ks, J, spin_ptr, spin_idx,
    sweeps, burn, every, out_E, n_up, n_down, att, acc,
):
    nT = Ks.shape[0]
    nm = 0
    for sw in range(sweeps):
        for i in range(nT):
            a = rep_at[i]
            E[a] += _sweep(spins[a], R[a], J, spin_ptr, spin_idx, Ks[i])
        for i in range(nT - 1):
            a = rep_at[i]
            b = rep_at[i + 1]
            att[i] += 1
            d = (Ks[i] - Ks[i + 1]) * (E[a] - E[b])
            if d >= 0 or np.random.random() < math.exp(d):
                rep_at[i] = b
                rep_at[i + 1] = a
                acc[i] += 1
        # slot 0 is the coldest (largest K)
        labels[rep_at[0]] = 1
        labels[rep_at[nT - 1]] = -1
        for i in range(nT):
            lab = labels[rep_at[i]]
            if lab == 1:
                n_up[i] += 1
            elif lab == -1:
                n_down[i] += 1
        if sw >= burn and (sw - burn) % every == 0 and nm < out_E.shape[0]:
            for i in range(nT):
                out_E[nm, i] = E[rep_at[i]]
            nm += 1
    return nm


def _stream_seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1, dtype=np.uint32)[0])


def metropolis_sweep(model: IsingModel, e, state: SpinState, K: float, rng=None, check: bool = False) -> SpinState:
    """One Metropolis pass over all spins, in place; returns ``state``.

    ``rng`` (an int) reseeds the compiled generator first.
    """
    e = np.asarray(e.e if isinstance(e, Disorder) else e, dtype=np.int64)
    if rng is not None:
        _seed(int(rng))
    spins = np.ascontiguousarray(state.spins, dtype=np.int8)
    R = bond_values(model, spins).astype(np.int8)
    J = (1 - 2 * e).astype(np.int8)
    state.energy += float(_sweep(spins, R, J, model.spin_ptr, model.spin_idx, K))
    state.spins = spins
    if check:
        assert abs(state.energy - energy(model, e, state)) < 1e-12
    return state


@dataclass
class TemperingResult:
    temps: np.ndarray
    cold: np.ndarray  # (measurements, temps) energies from the ordered start
    hot: np.ndarray  # same, disordered start
    acceptance: np.ndarray
    up_fraction: np.ndarray
    n_bonds: int


def _new_ensemble(
    model: IsingModel, J: np.ndarray, temps: np.ndarray, hot: bool, key: tuple = (0,)
) -> TemperingEnsemble:
    nT = temps.size
    if hot:
        u = np.random.default_rng([*key, 2]).random((nT, model.n_spins))
        spins = np.where(u < 0.5, -1, 1).astype(np.int8)
    else:
        spins = np.ones((nT, model.n_spins), dtype=np.int8)
    R = np.stack([bond_values(model, s) for s in spins]).astype(np.int8) if nT else np.zeros((0, model.n_bonds), np.int8)
    E = -(R.astype(np.int64) * J.astype(np.int64)).sum(axis=1)
    # slot 0 coldest: temps ascending means slot i <-> temps[i]
    return TemperingEnsemble(
        temps, spins, R, E.astype(np.int64), np.arange(nT, dtype=np.int64), np.zeros(nT, dtype=np.int64)
    )


def _run_ensemble(model, J, ens: TemperingEnsemble, sweeps, burn, every):
    Ks = 1.0 / ens.temps
    n_meas = max(0, (sweeps - burn + every - 1) // every)
    out = np.zeros((n_meas, ens.temps.size), dtype=np.int64)
    nm = _tempering(
        ens.spins, ens.bond_vals, ens.energies, ens.replica_at, ens.labels, Ks, J,
        model.spin_ptr, model.spin_idx, sweeps, burn, every, out,
        ens.n_up, ens.n_down, ens.swap_attempts, ens.swap_accepts,
    )
    return out[:nm]


def tempering_run(
    model: IsingModel,
    e,
    grid,
    sweeps: int,
    measure_every: int = 10,
    seed: int = 0,
    burn_fraction: float = 0.2,
    realization: int = 0,
) -> TemperingResult:
    """Parallel tempering from an ordered and a disordered start.

    Each start runs its own replica ladder on ``grid`` (ascending temperatures)
    with neighbour swaps after every sweep.  Energies are recorded every
    ``measure_every`` sweeps after discarding the first ``burn_fraction``.
    """
    e = np.asarray(e.e if isinstance(e, Disorder) else e, dtype=np.int64)
    temps = np.asarray(grid, dtype=float)
    if temps.ndim != 1 or temps.size < 1 or np.any(temps <= 0) or np.any(np.diff(temps) <= 0):
        raise ValueError("grid must be a strictly increasing list of positive temperatures")
    J = (1 - 2 * e).astype(np.int8)
    burn = int(round(burn_fraction * sweeps))
    series = []
    acc = np.zeros(max(temps.size - 1, 0))
    up = np.zeros(temps.size)
    for start in (0, 1):
        _seed(_stream_seed(seed, realization, start))
        ens = _new_ensemble(model, J, temps, hot=bool(start), key=(seed, realization, start))
        series.append(_run_ensemble(model, J, ens, sweeps, burn, measure_every))
        acc += ens.swap_accepts / np.maximum(ens.swap_attempts, 1) / 2
        up += ens.n_up / np.maximum(ens.n_up + ens.n_down, 1) / 2
    return TemperingResult(temps, series[0], series[1], acc, up, model.n_bonds)


def geometric_grid(T_lo: float, T_hi: float, n: int) -> np.ndarray:
    if n == 1:
        return np.array([T_lo])
    return T_lo * (T_hi / T_lo) ** (np.arange(n) / (n - 1))


def feedback_optimize_temps(
    model: IsingModel,
    e,
    T_lo: float,
    T_hi: float,
    n_replicas: int,
    pilot_sweeps: int = 2000,
    iterations: int = 4,
    seed: int = 0,
) -> np.ndarray:
    """Temperature ladder from the round-trip feedback iteration.

    Starting from a geometric ladder, each pilot run measures the fraction
    ``f(T)`` of replicas that last visited the coldest slot.  The new ladder
    places equal shares of ``sum sqrt(|delta f|)`` between consecutive
    temperatures, which concentrates replicas where ``f`` drops fastest.
    Endpoints are kept.  Falls back to the geometric ladder (with a warning)
    when the pilot statistics are unusable.
    """
    if not T_lo < T_hi:
        raise ValueError("need T_lo < T_hi")
    if n_replicas < 2:
        raise ValueError("need at least two replicas")
    grid = geometric_grid(T_lo, T_hi, n_replicas)
    if n_replicas == 2:
        return grid
    e = np.asarray(e.e if isinstance(e, Disorder) else e, dtype=np.int64)
    J = (1 - 2 * e).astype(np.int8)
    for it in range(iterations):
        _seed(_stream_seed(seed, it, 7))
        ens = _new_ensemble(model, J, grid, hot=False)
        _run_ensemble(model, J, ens, pilot_sweeps, pilot_sweeps, 1)
        tot = ens.n_up + ens.n_down
        if np.any(tot == 0):
            warnings.warn("feedback iteration did not converge; using a geometric grid", RuntimeWarning)
            return geometric_grid(T_lo, T_hi, n_replicas)
        f = ens.n_up / tot
        mass = np.sqrt(np.abs(np.diff(f))) + 1e-3
        cum = np.concatenate([[0.0], np.cumsum(mass)])
        cum /= cum[-1]
        new = np.interp(np.linspace(0, 1, n_replicas), cum, grid)
        new[0], new[-1] = T_lo, T_hi
        if np.any(np.diff(new) <= 0):
            warnings.warn("feedback iteration produced a degenerate grid; using a geometric grid", RuntimeWarning)
            return geometric_grid(T_lo, T_hi, n_replicas)
        grid = new
    return grid


# ---------------------------------------------------------------------------
# observables


def _jackknife_blocks(x: np.ndarray, n_blocks: int) -> list[np.ndarray]:
    size = x.shape[0] // n_blocks
    return [x[i * size : (i + 1) * size] for i in range(n_blocks)]


def specific_heat(series, n_bonds: int, T: float, n_blocks: int = 10) -> tuple[float, float]:
    """``(C, stderr)`` with ``C = Var(E) / (n T^2)``; error by jackknife over blocks."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 100:
        raise ValueError("need at least 100 measurements")
    if n_blocks < 2:
        raise ValueError("need at least two blocks")
    c = float(np.var(x)) / (n_bonds * T * T)
    x = x[: (x.size // n_blocks) * n_blocks]
    blocks = x.reshape(n_blocks, -1)
    s1 = blocks.sum(axis=1)
    s2 = (blocks * blocks).sum(axis=1)
    tot1, tot2, N = s1.sum(), s2.sum(), x.size
    m = N - blocks.shape[1]
    jk = ((tot2 - s2) / m - ((tot1 - s1) / m) ** 2) / (n_bonds * T * T)
    err = math.sqrt((n_blocks - 1) / n_blocks * float(np.sum((jk - jk.mean()) ** 2)))
    return c, err


def heat_jackknife(series: np.ndarray, n_bonds: int, temps: np.ndarray, n_blocks: int = 10):
    """Specific heat per temperature plus the leave-one-block-out samples.

    Returns ``(C, C_err, C_jk)`` with ``C_jk`` of shape ``(n_blocks, n_temps)``.
    """
    x = np.asarray(series, dtype=float)
    nb_ = n_blocks
    x = x[: (x.shape[0] // nb_) * nb_]
    blocks = x.reshape(nb_, -1, x.shape[1])
    s1 = blocks.sum(axis=1)
    s2 = (blocks * blocks).sum(axis=1)
    N = x.shape[0]
    m = N - blocks.shape[1]
    scale = n_bonds * np.asarray(temps) ** 2
    jk = ((s2.sum(0) - s2) / m - ((s1.sum(0) - s1) / m) ** 2) / scale
    C = x.var(axis=0) / scale
    err = np.sqrt((nb_ - 1) / nb_ * ((jk - jk.mean(0)) ** 2).sum(0))
    return C, err, jk


def locate_peak(T: np.ndarray, C: np.ndarray) -> tuple[float, float]:
    """Vertex of the parabola through the discrete maximum and its neighbours.

    At an edge of the grid the edge point itself is returned.
    """
    T = np.asarray(T, dtype=float)
    C = np.asarray(C, dtype=float)
    i = int(np.argmax(C))
    if i == 0 or i == C.size - 1:
        return float(T[i]), float(C[i])
    x, y = T[i - 1 : i + 2], C[i - 1 : i + 2]
    a, b, c = np.polyfit(x, y, 2)
    if a >= 0:
        return float(T[i]), float(C[i])
    t = -b / (2 * a)
    t = min(max(t, x[0]), x[2])
    return float(t), float(np.polyval([a, b, c], t))


def peak_with_error(T: np.ndarray, C: np.ndarray, C_jk: np.ndarray) -> tuple[float, float]:
    t0, _ = locate_peak(T, C)
    tj = np.array([locate_peak(T, row)[0] for row in C_jk])
    nb_ = tj.size
    return t0, float(math.sqrt((nb_ - 1) / nb_ * np.sum((tj - tj.mean()) ** 2)))


@dataclass
class HeatCurve:
    temps: np.ndarray
    C: np.ndarray
    C_err: np.ndarray
    E_mean: np.ndarray
    hysteresis_gap: np.ndarray
    peak_T: float
    peak_T_err: float
    peak_cold: tuple[float, float] = (math.nan, math.nan)
    peak_hot: tuple[float, float] = (math.nan, math.nan)
    C_disorder_err: np.ndarray | None = None
    C_mc_err: np.ndarray | None = None


def heat_curve(res: TemperingResult, n_blocks: int = 10) -> HeatCurve:
    """Specific heat from the pooled cold and hot series, with each start's peak kept separately."""
    Cc, Ec, Jc = heat_jackknife(res.cold, res.n_bonds, res.temps, n_blocks)
    Ch, Eh, Jh = heat_jackknife(res.hot, res.n_bonds, res.temps, n_blocks)
    both = np.concatenate([res.cold, res.hot])
    C, err, jk = heat_jackknife(both, res.n_bonds, res.temps, 2 * n_blocks)
    pk, pk_err = peak_with_error(res.temps, C, jk)
    gap = np.abs(res.cold.mean(0) - res.hot.mean(0))
    return HeatCurve(
        res.temps, C, err, both.mean(0).astype(float), gap, pk, pk_err,
        peak_with_error(res.temps, Cc, Jc), peak_with_error(res.temps, Ch, Jh),
    )


def sample_disorder(n: int, p: float, seed: int, realization: int) -> np.ndarray:
    u = np.random.default_rng([seed, realization, 1]).random(n)
    return (u < p).astype(np.uint8)


def side_matrix(code: CssCode, side: str) -> BinaryMatrix:
    if side == "gx":
        return code.Gx
    if side == "hstar":
        return code.hstar if code.hstar is not None else build_hstar(code)
    raise ValueError(f"side must be 'gx' or 'hstar', not {side!r}")


def realization_curve(
    model: IsingModel, p: float, temps, sweeps: int, seed: int, realization: int,
    measure_every: int = 10, n_blocks: int = 10,
) -> HeatCurve:
    """Tempering scan of one disorder realization (its own RNG streams)."""
    e = sample_disorder(model.n_bonds, p, seed, realization)
    res = tempering_run(model, e, np.asarray(temps, float), sweeps, measure_every, seed, realization=realization)
    return heat_curve(res, n_blocks)


def combine_curves(curves: list[HeatCurve]) -> HeatCurve:
    """Disorder average of per-realization curves.

    Errors are combined from the disorder spread (standard error across
    realizations) and the Monte Carlo block errors.  The peak error comes from
    a leave-one-realization-out jackknife.
    """
    R = len(curves)
    temps = curves[0].temps
    if R == 1:
        return curves[0]
    Cs = np.array([c.C for c in curves])
    C = Cs.mean(0)
    mc = np.sqrt(np.sum([c.C_err**2 for c in curves], axis=0)) / R
    dis = Cs.std(0, ddof=1) / math.sqrt(R)
    jk = np.array([locate_peak(temps, (Cs.sum(0) - Cs[i]) / (R - 1))[0] for i in range(R)])
    pk = locate_peak(temps, C)[0]
    pk_err = math.sqrt((R - 1) / R * np.sum((jk - jk.mean()) ** 2))
    return HeatCurve(
        temps, C, np.sqrt(mc**2 + dis**2),
        np.mean([c.E_mean for c in curves], axis=0),
        np.mean([c.hysteresis_gap for c in curves], axis=0),
        pk, pk_err, C_disorder_err=dis, C_mc_err=mc,
    )


def disorder_scan(
    code: CssCode,
    side: str,
    p: float,
    grid,
    n_realizations: int,
    sweeps: int,
    seed: int = 0,
    measure_every: int = 10,
    n_blocks: int = 10,
) -> HeatCurve:
    """Disorder-averaged specific heat on one side (``gx`` or ``hstar``) of a code.

    At ``p = 0`` a single realization is used.
    """
    model = model_from_matrix(side_matrix(code, side))
    R = 1 if p == 0 else n_realizations
    curves = [realization_curve(model, p, grid, sweeps, seed, rz, measure_every, n_blocks) for rz in range(R)]
    return combine_curves(curves)


def exact_heat_curve(M: BinaryMatrix, p: float, temps, n_realizations: int = 16, seed: int = 0) -> HeatCurve:
    """Disorder-averaged specific heat by enumeration over spins.

    The average over disorder is exact (all ``2^n`` bond patterns, weighted by
    their probability) when ``n`` is at most 16; otherwise ``n_realizations``
    patterns are drawn as in :func:`disorder_scan`.
    """
    r, n = M.shape
    temps = np.asarray(temps, dtype=float)
    if p == 0:
        pats, probs = [np.zeros(n, np.uint8)], np.array([1.0])
    elif n <= 16:
        pats = [((i >> np.arange(n)) & 1).astype(np.uint8) for i in range(1 << n)]
        w = np.array([int(v.sum()) for v in pats])
        probs = p**w * (1 - p) ** (n - w)
    else:
        pats = [sample_disorder(n, p, seed, rz) for rz in range(n_realizations)]
        probs = np.full(len(pats), 1.0 / len(pats))
    C = np.zeros(temps.size)
    E = np.zeros(temps.size)
    for e, q in zip(pats, probs):
        h = weight_histogram(M, e)
        for i, T in enumerate(temps):
            m1, _ = h.energy_moments(1.0 / T)
            C[i] += q * h.specific_heat(T)
            E[i] += q * m1
    pk = locate_peak(temps, C)[0]
    zeros = np.zeros(temps.size)
    return HeatCurve(temps, C, zeros, E, zeros.copy(), pk, 0.0)
