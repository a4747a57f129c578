"""Closed-form maps, decodability bounds, finite-size fits and phase-diagram tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

LN2 = math.log(2.0)
SELF_DUAL_K = 0.5 * math.log(1.0 + math.sqrt(2.0))


class BoundInapplicable(ValueError):
    """The hypothesis of a bound is violated, so it yields no number."""


@dataclass(frozen=True)
class BoundParams:
    """Code-family parameters that enter the analytic bounds.

    Attributes:
        m: maximum stabilizer row weight.
        D: coefficient in ``d >= D ln n``; ``math.inf`` for power-law distance.
        R: asymptotic rate ``k/n``.
        Delta: maximum degree of the qubit connectivity graph.
    """

    m: int
    D: float = math.inf
    R: float = 0.0
    Delta: int | None = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if not self.D > 0:
            raise ValueError("D must be positive (or inf)")
        if not 0.0 <= self.R <= 1.0:
            raise ValueError("R must lie in [0, 1]")

    @property
    def edge(self) -> float:
        """``exp(-1/D)``, equal to 1 for ``D = inf``."""
        return 1.0 if math.isinf(self.D) else math.exp(-1.0 / self.D)


@dataclass(frozen=True)
class PhasePoint:
    p: float
    T: float
    tag: str
    value: float = math.nan
    error: float = math.nan

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.5:
            raise ValueError("p must lie in [0, 1/2]")
        if not self.T >= 0:
            raise ValueError("T must be nonnegative")


@dataclass
class FitResult:
    model: str
    Tc: float
    Tc_err: float
    coefficients: np.ndarray
    residual_norm: float
    covariance: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "Tc": self.Tc,
            "Tc_err": self.Tc_err,
            "coefficients": [float(c) for c in self.coefficients],
            "residual_norm": self.residual_norm,
            "covariance": [[float(x) for x in row] for row in self.covariance],
        }


# ---------------------------------------------------------------------------
# temperature maps


def nishimori_K(p: float) -> float:
    """Coupling on the Nishimori line, ``exp(-2K) = p / (1 - p)``."""
    if not 0.0 < p <= 0.5:
        raise ValueError("p must lie in (0, 1/2]")
    return -0.5 * math.log(p / (1.0 - p))


def nishimori_T(p: float) -> float:
    K = nishimori_K(p)
    return math.inf if K == 0 else 1.0 / K


def kw_dual(K: float) -> float:
    """Kramers-Wannier dual coupling, ``tanh K* = exp(-2K)``."""
    if not K > 0:
        raise ValueError("K must be positive")
    return math.atanh(math.exp(-2.0 * K))


# ---------------------------------------------------------------------------
# low-temperature decodable region


def _C(K: float, p: float) -> float:
    return math.exp(-2.0 * K) * (1.0 - p) + math.exp(2.0 * K) * p


def theorem1_contains(params: BoundParams, p: float, K: float) -> bool:
    """Whether ``(m-1)[exp(-2K)(1-p) + exp(2K)p] < exp(-1/D)``."""
    return (params.m - 1) * _C(K, p) < params.edge


def theorem1_interval(params: BoundParams, p: float) -> tuple[float, float] | None:
    """Open interval of couplings ``(K_lo, K_hi)`` inside the region at this ``p``.

    With ``x = exp(2K)`` the boundary solves ``p x^2 - a x + (1 - p) = 0`` where
    ``a = exp(-1/D) / (m - 1)``.  At ``p = 0`` the interval is unbounded above.
    """
    a = params.edge / (params.m - 1)
    if p == 0:
        return 0.5 * math.log(1.0 / a), math.inf
    disc = a * a - 4.0 * p * (1.0 - p)
    if disc <= 0:
        return None
    sq = math.sqrt(disc)
    # smaller root via the product of roots, which avoids cancellation at tiny p
    x_lo = 2.0 * (1.0 - p) / (a + sq)
    x_hi = (a + sq) / (2.0 * p)
    return 0.5 * math.log(x_lo), 0.5 * math.log(x_hi)


def p_bnd(params: BoundParams) -> float:
    """Largest ``p`` with a nonempty region: the smaller root of ``p(1-p) = [exp(-1/D) / (2(m-1))]^2``."""
    a = (params.edge / (2.0 * (params.m - 1))) ** 2
    if 4.0 * a > 1.0:
        raise BoundInapplicable("no real root: bound is vacuous")
    return 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * a))


def theorem1_boundary(params: BoundParams, p_values: Iterable[float]) -> list[tuple[float, float, float]]:
    """``(p, T_low, T_high)`` of the region for each ``p`` where it is nonempty (``T_low = 0`` at ``p = 0``)."""
    out = []
    for p in p_values:
        iv = theorem1_interval(params, p)
        if iv is None:
            continue
        K_lo, K_hi = iv
        out.append((float(p), 0.0 if math.isinf(K_hi) else 1.0 / K_hi, 1.0 / K_lo))
    return out


def cusp_temperature(params: BoundParams) -> float:
    """Temperature at ``p = p_bnd``, where the region shrinks to a point; twice the Nishimori temperature there."""
    return 2.0 * nishimori_T(p_bnd(params))


# ---------------------------------------------------------------------------
# high-temperature bound


def theorem2_Kmax(R: float, tol: float = 1e-15) -> tuple[float, float, float]:
    """``(K_max, T_max, T_max_dual)`` from ``K - K* = R ln 2``, solved by bisection."""
    if not 0.0 <= R <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    target = R * LN2
    lo, hi = 1e-6, 1.0
    while hi - kw_dual(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - kw_dual(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    K = 0.5 * (lo + hi)
    return K, 1.0 / K, 1.0 / kw_dual(K)


def theorem2_closed_form(R: float) -> float:
    """``K_max`` from ``exp(2K) = [(1+r) + sqrt((1+r)^2 + 4r)] / 2`` with ``r = 4^R``."""
    r = 2.0 ** (2.0 * R)
    return 0.5 * math.log(0.5 * ((1.0 + r) + math.sqrt((1.0 + r) ** 2 + 4.0 * r)))


# ---------------------------------------------------------------------------
# other bounds


def lemma2_bound(n: int, m: int, d_G: int, K: float, p: float, derived: bool = False) -> float:
    """Upper bound ``n (m-1)^d C^(d+1) / (1 - (m-1) C)`` on the averaged homological difference.

    With ``derived=True`` the geometric sum ``n sum_{w>=d} ((m-1) C)^w`` is
    returned instead, i.e. ``C^d`` in place of ``C^(d+1)``.  That form is the
    one that holds as ``p -> 0``: there the leading term of the difference is
    the count of minimum-weight defects times ``exp(-2 K d)``, which the
    default expression undercuts by a factor ``C``.

    Raises:
        BoundInapplicable: if ``(m - 1) C >= 1``.
    """
    C = _C(K, p)
    q = (m - 1) * C
    if q >= 1.0:
        raise BoundInapplicable(f"(m-1)C = {q:.6g} >= 1")
    return n * (m - 1) ** d_G * C ** (d_G + (0 if derived else 1)) / (1.0 - q)


def percolation_bound(Delta: int) -> float:
    """Site-percolation threshold lower bound ``1 / (Delta - 1)`` for max degree ``Delta``."""
    if Delta < 2:
        raise ValueError("Delta must be at least 2")
    return 1.0 / (Delta - 1)


# ---------------------------------------------------------------------------
# fits

FIT_MODELS = ("linear_inv_d2", "parabolic_inv_d2")


def fit_extrapolate(
    points: Sequence[tuple[float, float]],
    model: str = "linear_inv_d2",
    sigma: Sequence[float] | None = None,
) -> FitResult:
    """Least-squares extrapolation of peak temperatures in ``x = 1/d^2``.

    ``linear_inv_d2``: ``T = Tc + A x``; ``parabolic_inv_d2``: ``T = Tc + A x + B x^2``.
    Unweighted unless ``sigma`` is given.  With no residual degrees of freedom
    (and no ``sigma``) the covariance is reported as zero.
    """
    if model not in FIT_MODELS:
        raise ValueError(f"model must be one of {FIT_MODELS}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (d, T) pairs")
    deg = 1 if model == "linear_inv_d2" else 2
    if pts.shape[0] < deg + 1:
        raise ValueError(f"{model} needs at least {deg + 1} points")
    if np.unique(pts[:, 0]).size != pts.shape[0]:
        raise ValueError("distances must be distinct")
    x = 1.0 / pts[:, 0] ** 2
    X = np.vander(x, deg + 1, increasing=True)
    y = pts[:, 1]
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    Xw, yw = X * w[:, None], y * w
    if np.linalg.matrix_rank(Xw) < deg + 1:
        raise ValueError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ coef
    rnorm = float(np.linalg.norm(resid))
    XtX_inv = np.linalg.inv(Xw.T @ Xw)
    dof = pts.shape[0] - (deg + 1)
    if sigma is not None:
        cov = XtX_inv
    elif dof > 0:
        cov = XtX_inv * (rnorm**2 / dof)
    else:
        cov = np.zeros_like(XtX_inv)
    return FitResult(model, float(coef[0]), float(math.sqrt(cov[0, 0])), coef, rnorm, cov)


# ---------------------------------------------------------------------------
# phase diagram

PHASE_COLUMNS = ("source", "p", "T", "value", "error")


def square_lattice_reference() -> list[PhasePoint]:
    """Reference points of the square-lattice random-bond Ising model shipped with the package."""
    text = resources.files("qhpcodes.data").joinpath("square_lattice_rbim.csv").read_text()
    rows = csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))
    return [PhasePoint(float(r["p"]), float(r["T"]), "square_lattice_ref", math.nan, float(r["error"])) for r in rows]


def assemble_phase_diagram(
    heat_rows: Iterable[dict] = (),
    bounds: dict | None = None,
    decoder_rows: Iterable[dict] = (),
    p_grid: Sequence[float] = (),
    include_reference: bool = False,
) -> list[dict]:
    """Merge scan peaks, analytic curves and decoder thresholds into ``(source, p, T, value, error)`` rows.

    Args:
        heat_rows: dicts with keys ``side``, ``p``, ``T_peak`` and optionally ``T_peak_err``, ``d``.
        bounds: a bounds record as written by the ``bounds`` command (keys ``m``, ``D``,
            ``T_max``, ``T_max_dual``).
        decoder_rows: dicts with keys ``p_threshold`` and optionally ``spread``.
        p_grid: probabilities at which the Nishimori line is sampled; the low-T region is
            always sampled at 21 points on ``[0, p_bnd]`` plus any grid points inside it.
    """
    rows: list[dict] = []

    def add(source, p, T, value=math.nan, error=math.nan):
        rows.append({"source": source, "p": float(p), "T": float(T), "value": float(value), "error": float(error)})

    required = {"side", "p", "T_peak"}
    for r in heat_rows:
        if not required <= set(r):
            raise ValueError(f"heat row missing {sorted(required - set(r))}")
        add(f"peak_{r['side']}", r["p"], r["T_peak"], r.get("d", math.nan), r.get("T_peak_err", math.nan))
    for r in decoder_rows:
        if "p_threshold" not in r:
            raise ValueError("decoder row missing p_threshold")
        add("decoder_threshold", r["p_threshold"], 0.0, math.nan, r.get("spread", math.nan))
    for p in p_grid:
        if 0 < p <= 0.5:
            add("nishimori", p, nishimori_T(p))
    if bounds is not None:
        params = BoundParams(int(bounds["m"]), float(bounds.get("D", math.inf)), float(bounds.get("R", 0.0)))
        pb = p_bnd(params)
        ps = sorted({*np.linspace(0.0, pb, 21).tolist(), *(q for q in p_grid if 0 <= q <= pb)})
        for p, t_lo, t_hi in theorem1_boundary(params, ps):
            add("theorem1_lower", p, t_lo)
            add("theorem1_upper", p, t_hi)
        if "T_max" in bounds:
            add("tmax", 0.0, bounds["T_max"])
            add("tmax_dual", 0.0, bounds["T_max_dual"])
    if include_reference:
        for pt in square_lattice_reference():
            add(pt.tag, pt.p, pt.T, pt.value, pt.error)
    return rows
