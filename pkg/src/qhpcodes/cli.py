"""Command-line entry point: code generation, decoder benchmarks, MC scans, bounds, fits, reports.

Every subcommand that writes files also writes ``<output>.manifest.json`` with
the full parameter map, input and output hashes and timestamps.  ``replay``
re-runs a manifest.

Options may also come from ``--config FILE`` holding ``key = value`` lines
(keys are option names without dashes, ``-`` or ``_`` both accepted).
Explicit flags win over the file, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analysis, decoder, rbim
from .codes import CssCode, build_hstar, css_params, qhp_from, rotated_toric, sample_seed
from .io import FIXTURES, ParseError, dump_json, load_fixture, resolve_code, save_code, sha256_file

log = logging.getLogger("qhpcodes")

EXIT_OK, EXIT_ARGS, EXIT_INPUT, EXIT_TIMEOUT = 0, 2, 3, 4

CURVE_COLUMNS = ("code_label", "n", "k", "d", "p", "trials", "failures", "rate", "ci_lo", "ci_hi")
HEAT_COLUMNS = ("code_label", "side", "d", "p", "T", "C", "C_err", "E_mean", "hysteresis_gap")
PEAK_COLUMNS = ("code_label", "side", "d", "p", "T_peak", "T_peak_err", "T_cold", "T_cold_err", "T_hot", "T_hot_err")


class InputError(Exception):
    """Missing or malformed input; maps to exit code 3."""


# ---------------------------------------------------------------------------
# small helpers


def fmt(x) -> str:
    """Deterministic text for CSV cells."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in columns])


def read_csv(path, required) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{p}: no such file")
    with open(p, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(required) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{p}: missing columns {sorted(missing)}")
        return list(reader)


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive of ``b``) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, step = (float(t) for t in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 12) for i in range(n)]
        vals = [float(t) for t in text.split(",") if t.strip()]
        if not vals:
            raise ValueError
        return vals
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use a:b:step or a comma list") from None


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 0.5:
        raise argparse.ArgumentTypeError("probability must lie in [0, 0.5]")
    return v


def _float_or_inf(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive (or inf)")
    return v


def _json_float(x: float):
    return "inf" if math.isinf(x) else x


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    seed: int | None
    version: str = __version__
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    extra: dict = field(default_factory=dict)

    def write(self, path) -> None:
        dump_json(asdict(self), path)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _hash_inputs(paths) -> dict:
    out = {}
    for p in paths:
        p = Path(p)
        if p.exists() and p.is_file():
            out[str(p)] = sha256_file(p)
            if p.suffix == ".json":
                try:
                    files = json.loads(p.read_text()).get("files", {})
                except (ValueError, AttributeError):
                    files = {}
                for name in files.values():
                    q = p.parent / name
                    if q.exists():
                        out[str(q)] = sha256_file(q)
    return out


def _load(spec: str) -> CssCode:
    try:
        return resolve_code(spec)
    except KeyError as exc:
        raise InputError(exc.args[0]) from None


def _code_d(code: CssCode):
    return code.d if code.d is not None else ""


# ---------------------------------------------------------------------------
# code


def cmd_code(args) -> tuple[list[Path], dict]:
    out = Path(args.out)
    if args.fixture:
        try:
            code = load_fixture(args.fixture)
        except KeyError as exc:
            raise InputError(exc.args[0]) from None
    elif args.toric is not None:
        if args.toric < 2 or args.toric % 2:
            raise InputError("--toric needs an even distance >= 2")
        code = rotated_toric(args.toric)
        code = CssCode(code.Gx, code.Gz, code.label, args.toric, args.toric, None, dict(code.meta))
    else:
        ell, m, n1 = args.gallager
        try:
            H1, spec, d1 = sample_seed(ell, m, n1, args.min_d1, args.seed, args.max_tries)
        except (ValueError, RuntimeError) as exc:
            raise InputError(str(exc)) from None
        code = qhp_from(H1)
        ensemble = {"ell": spec.ell, "m": spec.m, "n1": spec.n, "seed": spec.seed}
        code = CssCode(code.Gx, code.Gz, code.label, d1, d1, None,
                       {"H1": H1, "ensemble": ensemble, "d1": d1, "family": "qhp"})
        log.info("seed code [%d,%d,%s] from ensemble seed %d", n1, n1 - H1.rows, d1, spec.seed)
    if args.verify_distance and code.d_x is None:
        n, k, dx, dz = css_params(code, args.w_cap)
        code = CssCode(code.Gx, code.Gz, code.label, dx, dz, code.hstar, code.meta)
    if args.hstar and code.hstar is None:
        code = CssCode(code.Gx, code.Gz, code.label, code.d_x, code.d_z, build_hstar(code, args.w_cap), code.meta)
    stem = args.name or code.label
    path = save_code(code, out, stem)
    files = [path] + [out / name for name in json.loads(path.read_text())["files"].values()]
    print(f"{code.label}: [[{code.n},{code.k},{code.d if code.d is not None else '?'}]] -> {path}")
    return files, {"params": list(code.params())}


# ---------------------------------------------------------------------------
# decode-bench

_WORKER_DECODERS: dict = {}


def _bench_chunk(code: CssCode, p, start, count, args_d) -> tuple[int, int]:
    key = (code.label, code.n, args_d["w1"], args_d["w2"], args_d["timeout"], args_d["method"])
    dec = _WORKER_DECODERS.get(key)
    if dec is None:
        dec = decoder.Decoder(code, args_d["w1"], args_d["w2"], args_d["timeout"], method=args_d["method"])
        _WORKER_DECODERS.clear()
        _WORKER_DECODERS[key] = dec
    res = decoder.run_trials(code, p, count, args_d["seed"], decoder=dec, start=start)
    return res.failures, res.timeouts


def cmd_decode_bench(args) -> tuple[list[Path], dict]:
    codes = [_load(c) for c in args.code]
    timeout = None if args.timeout <= 0 else args.timeout
    opts = {"w1": args.w1, "w2": args.w2, "timeout": timeout, "method": args.method, "seed": args.seed}
    rows, curves = [], []
    total, touts = 0, 0
    pool = ProcessPoolExecutor(args.jobs) if args.jobs > 1 else None
    try:
        for code in codes:
            rates = []
            for p in args.p_grid:
                if args.jobs > 1:
                    sizes = [args.trials // args.jobs + (i < args.trials % args.jobs) for i in range(args.jobs)]
                    starts = np.cumsum([0] + sizes[:-1])
                    futs = [pool.submit(_bench_chunk, code, p, int(s), n, opts) for s, n in zip(starts, sizes) if n]
                    parts = [f.result() for f in futs]
                else:
                    parts = [_bench_chunk(code, p, 0, args.trials, opts)]
                fails = sum(a for a, _ in parts)
                tout = sum(b for _, b in parts)
                total += args.trials
                touts += tout
                tr = decoder.TrialResult(p, args.trials, fails, tout)
                lo, hi = tr.ci
                rows.append({
                    "code_label": code.label, "n": code.n, "k": code.k, "d": _code_d(code), "p": p,
                    "trials": args.trials, "failures": fails, "rate": tr.rate, "ci_lo": lo, "ci_hi": hi,
                })
                rates.append(tr.rate)
                log.info("%s p=%.4g failures=%d/%d timeouts=%d", code.label, p, fails, args.trials, tout)
            curves.append((code.label, np.array(args.p_grid), np.array(rates)))
    finally:
        if pool is not None:
            pool.shutdown()
    write_csv(args.out, CURVE_COLUMNS, rows)
    extra = {"timeouts": touts, "trials_total": total}
    if len(curves) > 1:
        cross = decoder.estimate_crossing(curves)
        extra["crossing"] = None if cross is None else {"p": cross[0], "spread": cross[1]}
        print("crossing: " + ("none found" if cross is None else f"p = {cross[0]:.4f} (spread {cross[1]:.4f})"))
    if total and touts * 2 > total:
        extra["timeout_dominated"] = True
    return [Path(args.out)], extra


# ---------------------------------------------------------------------------
# mc-run


def _mc_task(code, side, p, temps, args_d, rz):
    model = rbim.model_from_matrix(rbim.side_matrix(code, side))
    return rbim.realization_curve(
        model, p, temps, args_d["sweeps"], args_d["seed"], rz, args_d["measure_every"], args_d["n_blocks"]
    )


def _ladder(args, code, side, p):
    lo, hi = min(args.t_grid), max(args.t_grid)
    if args.replicas is None:
        return np.array(sorted(args.t_grid))
    if args.feedback:
        model = rbim.model_from_matrix(rbim.side_matrix(code, side))
        e = rbim.sample_disorder(model.n_bonds, p, args.seed, 0)
        return rbim.feedback_optimize_temps(model, e, lo, hi, args.replicas, seed=args.seed)
    return rbim.geometric_grid(lo, hi, args.replicas)


def cmd_mc_run(args) -> tuple[list[Path], dict]:
    code = _load(args.code)
    sides = args.side or ["gx", "hstar"]
    if "hstar" in sides and code.hstar is None:
        code = CssCode(code.Gx, code.Gz, code.label, code.d_x, code.d_z, build_hstar(code), code.meta)
    opts = {"sweeps": args.sweeps, "seed": args.seed, "measure_every": args.measure_every, "n_blocks": args.blocks}
    rows, peaks = [], []
    pool = ProcessPoolExecutor(args.jobs) if args.jobs > 1 else None
    try:
        for side in sides:
            for p in args.p:
                temps = _ladder(args, code, side, p)
                if args.exact:
                    try:
                        hc = rbim.exact_heat_curve(rbim.side_matrix(code, side), p, temps, args.realizations, args.seed)
                    except ValueError as exc:
                        raise InputError(f"exact mode unavailable: {exc}") from None
                else:
                    R = 1 if p == 0 else args.realizations
                    if pool is not None:
                        futs = [pool.submit(_mc_task, code, side, p, temps, opts, rz) for rz in range(R)]
                        curves = [f.result() for f in futs]
                    else:
                        curves = [_mc_task(code, side, p, temps, opts, rz) for rz in range(R)]
                    hc = rbim.combine_curves(curves)
                for i, T in enumerate(hc.temps):
                    rows.append({
                        "code_label": code.label, "side": side, "d": _code_d(code), "p": p, "T": float(T),
                        "C": hc.C[i], "C_err": hc.C_err[i], "E_mean": hc.E_mean[i],
                        "hysteresis_gap": hc.hysteresis_gap[i],
                    })
                peaks.append({
                    "code_label": code.label, "side": side, "d": _code_d(code), "p": p,
                    "T_peak": hc.peak_T, "T_peak_err": hc.peak_T_err,
                    "T_cold": hc.peak_cold[0], "T_cold_err": hc.peak_cold[1],
                    "T_hot": hc.peak_hot[0], "T_hot_err": hc.peak_hot[1],
                })
                print(f"{code.label} {side} p={p:g}: C peak at T = {hc.peak_T:.4f} +- {hc.peak_T_err:.4f}")
    finally:
        if pool is not None:
            pool.shutdown()
    write_csv(args.out, HEAT_COLUMNS, rows)
    outs = [Path(args.out)]
    if args.peaks_out:
        write_csv(args.peaks_out, PEAK_COLUMNS, peaks)
        outs.append(Path(args.peaks_out))
    return outs, {}


# ---------------------------------------------------------------------------
# bounds, fit, report


def bounds_record(m: int, D: float, R: float, Delta: int | None = None, p_step: float = 0.0005) -> dict:
    params = analysis.BoundParams(m, D, R, Delta)
    pb = analysis.p_bnd(params)
    K, T, Td = analysis.theorem2_Kmax(R)
    n_steps = int(math.floor(pb / p_step))
    ps = [round(i * p_step, 12) for i in range(n_steps + 1)] + [pb]
    branch = analysis.theorem1_boundary(params, ps)
    curve = [[p, hi] for p, _, hi in branch] + [[p, lo] for p, lo, _ in reversed(branch[:-1])]
    rec = {
        "m": m, "D": _json_float(D), "R": R,
        "p_bnd": pb, "T_bnd": analysis.cusp_temperature(params),
        "K_max": K, "T_max": T, "T_max_dual": Td,
        "K_max_closed_form": analysis.theorem2_closed_form(R),
        "theorem1_boundary": curve,
    }
    if Delta is not None:
        rec["Delta"] = Delta
        rec["p_percolation"] = analysis.percolation_bound(Delta)
    return rec


def cmd_bounds(args) -> tuple[list[Path], dict]:
    try:
        rec = bounds_record(args.m, args.D, args.R, args.Delta, args.p_step)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    dump_json(rec, args.out)
    print(f"p_bnd = {rec['p_bnd']:.6g}  T_max = {rec['T_max']:.6g}  T_max_dual = {rec['T_max_dual']:.6g}")
    return [Path(args.out)], {}


def _model_name(name: str) -> str:
    return {"linear": "linear_inv_d2", "parabolic": "parabolic_inv_d2"}.get(name, name)


def _peak_points(rows, side=None, p=None):
    pts, sig = [], []
    for r in rows:
        if side is not None and r.get("side") != side:
            continue
        if p is not None and "p" in r and not math.isclose(float(r["p"]), p, abs_tol=1e-12):
            continue
        T = r.get("T_peak", r.get("T"))
        pts.append((float(r["d"]), float(T)))
        s = r.get("T_peak_err", r.get("sigma"))
        sig.append(float(s) if s not in (None, "", "nan") else math.nan)
    return pts, sig


def cmd_fit(args) -> tuple[list[Path], dict]:
    rows = read_csv(args.inp, ["d"])
    if rows and not ({"T_peak", "T"} & set(rows[0])):
        raise InputError(f"{args.inp}: need a T_peak or T column")
    pts, sig = _peak_points(rows, args.side, args.p)
    use_sigma = args.weighted and all(math.isfinite(s) and s > 0 for s in sig)
    if args.weighted and not use_sigma:
        raise InputError("weighted fit needs positive T_peak_err/sigma for every point")
    try:
        res = analysis.fit_extrapolate(pts, _model_name(args.model), sig if use_sigma else None)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = res.as_dict()
    out["n_points"] = len(pts)
    out["weighted"] = use_sigma
    dump_json(out, args.out)
    print(f"{res.model}: Tc = {res.Tc:.5f} +- {res.Tc_err:.5f}")
    return [Path(args.out)], {}


def _heat_peaks(rows: list[dict]) -> list[dict]:
    """Peak temperature of every (code, side, p) curve in a heat table.

    The error comes from a parametric resampling of ``C`` within ``C_err``
    (fixed stream, so the result is deterministic).
    """
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["code_label"], r["side"], r["d"], float(r["p"])), []).append(r)
    out = []
    for (label, side, d, p), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][3], kv[0][0])):
        rs = sorted(rs, key=lambda r: float(r["T"]))
        T = np.array([float(r["T"]) for r in rs])
        C = np.array([float(r["C"]) for r in rs])
        E = np.array([float(r["C_err"]) for r in rs])
        pk = rbim.locate_peak(T, C)[0]
        err = math.nan
        if np.all(np.isfinite(E)) and E.any():
            rng = np.random.default_rng([0, len(out)])
            samples = [rbim.locate_peak(T, C + rng.normal(0, 1, C.size) * E)[0] for _ in range(200)]
            err = float(np.std(samples))
        out.append({"code_label": label, "side": side, "d": d, "p": p, "T_peak": pk, "T_peak_err": err})
    return out


def cmd_report(args) -> tuple[list[Path], dict]:
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    heat = []
    for path in args.heat or []:
        heat += read_csv(path, HEAT_COLUMNS)
    peaks = _heat_peaks(heat)
    decoder_rows = []
    for path in args.curves or []:
        rows = read_csv(path, CURVE_COLUMNS)
        by_code: dict = {}
        for r in rows:
            by_code.setdefault(r["code_label"], []).append((float(r["p"]), float(r["rate"])))
        curves = [(lab, np.array([a for a, _ in sorted(v)]), np.array([b for _, b in sorted(v)]))
                  for lab, v in sorted(by_code.items())]
        cross = decoder.estimate_crossing(curves)
        if cross is not None:
            decoder_rows.append({"p_threshold": cross[0], "spread": cross[1]})
    if args.bounds:
        bp = Path(args.bounds)
        if not bp.exists():
            raise InputError(f"{bp}: no such file")
        try:
            bounds = json.loads(bp.read_text())
        except ValueError as exc:
            raise InputError(f"{bp}: invalid JSON ({exc})") from None
        if not {"m", "T_max", "T_max_dual", "p_bnd"} <= set(bounds):
            raise InputError(f"{bp}: not a bounds record")
    else:
        bounds = bounds_record(args.m, args.D, args.R)
    try:
        table = analysis.assemble_phase_diagram(
            peaks, bounds, decoder_rows, args.p_grid, include_reference=args.reference
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    table.sort(key=lambda r: (r["source"], r["p"], r["T"], r["value"] if math.isfinite(r["value"]) else -1.0))
    pd_path = outdir / "phase_diagram.csv"
    write_csv(pd_path, analysis.PHASE_COLUMNS, table)
    b_path = outdir / "bounds.json"
    dump_json(bounds, b_path)
    fits = []
    groups: dict = {}
    for r in peaks:
        groups.setdefault((r["side"], r["p"]), []).append(r)
    for (side, p), rs in sorted(groups.items()):
        pts = sorted({(float(r["d"]), r["T_peak"]) for r in rs if r["d"] not in ("", None)})
        for model in analysis.FIT_MODELS:
            try:
                res = analysis.fit_extrapolate(pts, model)
            except ValueError:
                continue
            fits.append({"side": side, "p": p, **res.as_dict()})
    f_path = outdir / "fits.json"
    dump_json(fits, f_path)
    print(f"wrote {len(table)} phase-diagram rows, {len(fits)} fits")
    return [pd_path, b_path, f_path], {}


# ---------------------------------------------------------------------------
# parser


def _add_common(sp, with_seed=True, with_jobs=False):
    sp.add_argument("--config", help="key = value file supplying defaults for this command")
    if with_seed:
        sp.add_argument("--seed", type=int, default=0, help="master seed for all random streams")
    if with_jobs:
        sp.add_argument("--jobs", type=_pos_int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qhpcodes", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("code", help="construct a code and write alist files plus a manifest")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=sorted(FIXTURES))
    src.add_argument("--gallager", type=lambda s: tuple(int(t) for t in s.split(",")), metavar="ELL,M,N1")
    src.add_argument("--toric", type=int, metavar="D")
    sp.add_argument("--min-d1", type=int, default=None, help="reject seeds with smaller classical distance")
    sp.add_argument("--max-tries", type=_pos_int, default=100_000)
    sp.add_argument("--hstar", action="store_true", help="also build and store the extended matrix")
    sp.add_argument("--verify-distance", action="store_true", help="compute distances by exact search")
    sp.add_argument("--w-cap", type=int, default=None)
    sp.add_argument("--name", default=None, help="file stem (defaults to the code label)")
    sp.add_argument("--out", default=".", help="output directory")
    _add_common(sp)
    sp.set_defaults(func=cmd_code)

    sp = sub.add_parser("decode-bench", help="failure rate of the cluster decoder on a p grid")
    sp.add_argument("--code", action="append", required=True, help="manifest path or fixture name (repeatable)")
    sp.add_argument("--p-grid", type=parse_grid, default=parse_grid("0.05:0.08:0.01"))
    sp.add_argument("--trials", type=_pos_int, default=1024)
    sp.add_argument("--w1", type=_pos_int, default=10, help="cluster weight cap")
    sp.add_argument("--w2", type=_pos_int, default=19, help="codeword weight cap")
    sp.add_argument("--timeout", type=float, default=60.0, help="seconds per syndrome (<= 0: none)")
    sp.add_argument("--method", choices=("lp", "bnb"), default="lp")
    sp.add_argument("--out", default="curves.csv")
    _add_common(sp, with_jobs=True)
    sp.set_defaults(func=cmd_decode_bench)

    sp = sub.add_parser("mc-run", help="specific-heat scan by parallel tempering")
    sp.add_argument("--code", required=True)
    sp.add_argument("--side", action="append", choices=("gx", "hstar"), help="repeatable; default both")
    sp.add_argument("--p", type=parse_grid, default=[0.0], help="disorder probability or list")
    sp.add_argument("--t-grid", type=parse_grid, default=parse_grid("1.0:3.5:0.05"))
    sp.add_argument("--replicas", type=_pos_int, default=None,
                    help="geometric ladder of this many temperatures spanning --t-grid")
    sp.add_argument("--feedback", action="store_true", help="optimise the ladder by round-trip feedback")
    sp.add_argument("--sweeps", type=_pos_int, default=100_000)
    sp.add_argument("--realizations", type=_pos_int, default=16)
    sp.add_argument("--measure-every", type=_pos_int, default=10)
    sp.add_argument("--blocks", type=_pos_int, default=10, help="jackknife blocks")
    sp.add_argument("--exact", action="store_true", help="enumerate spins instead of sampling")
    sp.add_argument("--out", default="heat.csv")
    sp.add_argument("--peaks-out", default=None, help="also write per-curve peak positions")
    _add_common(sp, with_jobs=True)
    sp.set_defaults(func=cmd_mc_run)

    sp = sub.add_parser("bounds", help="analytic decodability bounds")
    sp.add_argument("--m", type=int, default=7, help="maximum stabilizer weight")
    sp.add_argument("--D", type=_float_or_inf, default=math.inf, help="log-distance coefficient")
    sp.add_argument("--R", type=float, default=0.04, help="asymptotic rate")
    sp.add_argument("--Delta", type=int, default=None, help="max qubit-graph degree")
    sp.add_argument("--p-step", type=float, default=0.0005)
    sp.add_argument("--out", default="bounds.json")
    _add_common(sp, with_seed=False)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("fit", help="extrapolate peak temperatures in 1/d^2")
    sp.add_argument("--in", dest="inp", required=True, help="CSV with d and T_peak (or T) columns")
    sp.add_argument("--model", choices=("linear", "parabolic", *analysis.FIT_MODELS), default="linear")
    sp.add_argument("--side", default=None)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--weighted", action="store_true", help="weight by 1/sigma^2")
    sp.add_argument("--out", default="fit.json")
    _add_common(sp, with_seed=False)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("report", help="merge scans, curves and bounds into plot-ready tables")
    sp.add_argument("--heat", action="append")
    sp.add_argument("--curves", action="append")
    sp.add_argument("--bounds", default=None, help="bounds.json; computed from --m/--D/--R if absent")
    sp.add_argument("--m", type=int, default=7)
    sp.add_argument("--D", type=_float_or_inf, default=math.inf)
    sp.add_argument("--R", type=float, default=0.04)
    sp.add_argument("--p-grid", type=parse_grid, default=parse_grid("0.01:0.12:0.01"))
    sp.add_argument("--reference", action="store_true", help="include square-lattice reference points")
    sp.add_argument("--out-dir", default=".")
    _add_common(sp, with_seed=False)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("replay", help="re-run the command recorded in a run manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None, help="redirect the primary output")
    sp.set_defaults(func=None)
    return ap


def _read_config(path: str) -> dict:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    out = {}
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{no}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v.strip("\"'")
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    cfg_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
        elif tok.startswith("--config="):
            cfg_path = tok.split("=", 1)[1]
    command = next((t for t in argv if not t.startswith("-")), None)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if cfg_path is None or command not in sub.choices:
        return parser.parse_args(argv)
    cfg = _read_config(cfg_path)
    sp = sub.choices[command]
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for k, v in cfg.items():
        if k not in actions or k in ("config", "help"):
            raise InputError(f"{cfg_path}: unknown key {k!r} for {command}")
        act = actions[k]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        elif isinstance(act, argparse._AppendAction):
            defaults[k] = [act.type(t) if act.type else t for t in v.split()]
        else:
            defaults[k] = v
        act.required = False
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def _params(args) -> dict:
    skip = {"func", "config", "verbose"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        out[k] = v
    return out


def _argv_from_params(params: dict) -> list[str]:
    parser = build_parser()
    cmd = params["command"]
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[cmd]
    argv = [cmd]
    for act in sub._actions:
        if act.dest in ("help", "config") or act.dest not in params or not act.option_strings:
            continue
        v = params[act.dest]
        flag = act.option_strings[-1]
        if v is None:
            continue
        if isinstance(act, argparse._StoreTrueAction):
            if v:
                argv.append(flag)
        elif isinstance(act, argparse._AppendAction):
            for item in v:
                argv += [flag, str(item)]
        elif isinstance(v, (list, tuple)):
            argv += [flag, ",".join(map(repr, v)) if act.dest != "gallager" else ",".join(map(str, v))]
        else:
            argv += [flag, str(v)]
    return argv


def _primary_out_key(params: dict) -> str:
    return "out_dir" if params["command"] == "report" else "out"


def replay_argv(manifest_path: str, out: str | None = None) -> list[str]:
    try:
        man = json.loads(Path(manifest_path).read_text())
        params = dict(man["parameters"])
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"{manifest_path}: not a run manifest ({exc})") from None
    if out is not None:
        params[_primary_out_key(params)] = out
    return _argv_from_params(params)


def _manifest_path(args, outputs: list[Path]) -> Path:
    if args.command == "report":
        return Path(args.out_dir) / "report.manifest.json"
    return Path(str(outputs[0]) + ".manifest.json")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.command == "replay":
            args = _apply_config(parser, replay_argv(args.manifest, args.out))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    started = _now()
    inputs = []
    for key in ("code", "heat", "curves", "bounds", "inp", "config"):
        v = getattr(args, key, None)
        if v:
            inputs += v if isinstance(v, list) else [v]
    try:
        outputs, extra = args.func(args)
    except (InputError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    man = RunManifest(
        subcommand=args.command,
        parameters=_params(args),
        seed=getattr(args, "seed", None),
        inputs=_hash_inputs(inputs),
        outputs={str(p): sha256_file(p) for p in outputs},
        started=started,
        finished=_now(),
        extra=extra,
    )
    man.write(_manifest_path(args, outputs))
    if extra.get("timeout_dominated"):
        print("warning: more than half of all trials timed out", file=sys.stderr)
        return EXIT_TIMEOUT
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
