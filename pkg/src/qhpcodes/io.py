"""alist matrix files, code manifests and the shipped code fixtures."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .codes import CssCode, GallagerSpec, gallager_sample, qhp_from, rotated_toric
from .gf2 import BinaryMatrix, drop_dependent_rows

MANIFEST_VERSION = 1


class ParseError(ValueError):
    """Malformed or inconsistent input file.

    Attributes:
        path: offending file, if known.
        line: 1-based line number, if known.
    """

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:" + (f"{line}:" if line is not None else "") + " "
        super().__init__(where + message)


# ---------------------------------------------------------------------------
# alist


def alist_text(M: BinaryMatrix) -> str:
    """Serialise ``M`` (m rows, n columns) in alist form.

    Layout: ``n m``, max column and row weight, the n column weights, the m
    row weights, then n lines of 1-based row indices per column and m lines of
    1-based column indices per row.  Lines are zero-padded to the max weight,
    as MacKay's files do.
    """
    m, n = M.shape
    cols, rows = M.col_supports(), M.row_supports()
    cw = [len(c) for c in cols]
    rw = [len(r) for r in rows]
    mc, mr = max(cw, default=0), max(rw, default=0)

    def pad(idx, width):
        vals = [str(int(i) + 1) for i in idx] + ["0"] * (width - len(idx))
        return " ".join(vals)

    lines = [f"{n} {m}", f"{mc} {mr}", " ".join(map(str, cw)), " ".join(map(str, rw))]
    lines += [pad(c, mc) for c in cols]
    lines += [pad(r, mr) for r in rows]
    return "\n".join(lines) + "\n"


def parse_alist(text: str, path: str | Path | None = None) -> BinaryMatrix:
    """Inverse of :func:`alist_text`; the row lists must agree with the column lists."""
    lines = [ln.split() for ln in text.splitlines()]
    pos = 0

    def ints(expected: int | None, what: str) -> list[int]:
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of file reading {what}", path, pos + 1)
        try:
            vals = [int(t) for t in lines[pos]]
        except ValueError:
            raise ParseError(f"non-integer token in {what}", path, pos + 1) from None
        if expected is not None and len(vals) != expected:
            raise ParseError(f"{what}: expected {expected} values, got {len(vals)}", path, pos + 1)
        pos += 1
        return vals

    n, m = ints(2, "header")
    if n < 0 or m < 0:
        raise ParseError("negative dimensions", path, 1)
    mc, mr = ints(2, "max weights")
    cw = ints(n, "column weights")
    rw = ints(m, "row weights")
    dense = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        line = pos + 1
        idx = [v for v in ints(None, f"column {j + 1}") if v != 0]
        if len(idx) != cw[j] or len(idx) > mc:
            raise ParseError(f"column {j + 1} has {len(idx)} entries, header says {cw[j]}", path, line)
        for i in idx:
            if not 1 <= i <= m:
                raise ParseError(f"row index {i} out of range", path, line)
            dense[i - 1, j] = 1
    check = np.zeros_like(dense)
    for i in range(m):
        line = pos + 1
        idx = [v for v in ints(None, f"row {i + 1}") if v != 0]
        if len(idx) != rw[i] or len(idx) > mr:
            raise ParseError(f"row {i + 1} has {len(idx)} entries, header says {rw[i]}", path, line)
        for j in idx:
            if not 1 <= j <= n:
                raise ParseError(f"column index {j} out of range", path, line)
            check[i, j - 1] = 1
    if not np.array_equal(dense, check):
        raise ParseError("row and column lists disagree", path)
    return BinaryMatrix.from_dense(dense)


def write_alist(M: BinaryMatrix, path: str | Path) -> str:
    """Write ``M`` to ``path`` and return the sha256 of the bytes written."""
    data = alist_text(M).encode()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_alist(path: str | Path) -> BinaryMatrix:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read: {exc.strerror}", path) from None
    return parse_alist(text, path)


# ---------------------------------------------------------------------------
# manifests


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dump_json(obj, path: str | Path | None = None) -> str:
    """Stable JSON: sorted keys, two-space indent, trailing newline."""
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def save_code(code: CssCode, directory: str | Path, stem: str | None = None, extra: dict | None = None) -> Path:
    """Write the code's matrices as alist files plus ``<stem>.json``; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or code.label or "code"
    mats = {"Gx": code.Gx, "Gz": code.Gz}
    if code.hstar is not None:
        mats["hstar"] = code.hstar
    if "H1" in code.meta:
        mats["H1"] = code.meta["H1"]
    files, sums = {}, {}
    for key, M in mats.items():
        name = f"{stem}.{key}.alist"
        sums[name] = write_alist(M, directory / name)
        files[key] = name
    manifest = {
        "version": MANIFEST_VERSION,
        "label": code.label,
        "n": code.n,
        "k": code.k,
        "d_x": code.d_x,
        "d_z": code.d_z,
        "ensemble": code.meta.get("ensemble"),
        "files": files,
        "sha256": sums,
    }
    for key in ("family", "d", "d1"):
        if key in code.meta:
            manifest[key] = code.meta[key]
    if extra:
        manifest.update(extra)
    path = directory / f"{stem}.json"
    dump_json(manifest, path)
    return path


def _load_manifest(path: Path) -> dict:
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read: {exc.strerror}", path) from None
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(manifest, dict):
        raise ParseError("manifest must be a JSON object", path)
    for key in ("label", "files", "sha256"):
        if key not in manifest:
            raise ParseError(f"missing key {key!r}", path)
    for key in ("Gx", "Gz"):
        if key not in manifest["files"]:
            raise ParseError(f"files lacks {key!r}", path)
    return manifest


def load_code(path: str | Path, verify: bool = True) -> CssCode:
    """Load a code saved by :func:`save_code`.

    Raises:
        ParseError: malformed manifest or alist, checksum mismatch, or stated
            ``n``/``k`` that disagree with the matrices.
    """
    path = Path(path)
    manifest = _load_manifest(path)
    mats = {}
    for key, name in manifest["files"].items():
        fpath = path.parent / name
        if verify:
            want = manifest["sha256"].get(name)
            if want is None:
                raise ParseError(f"no checksum for {name}", path)
            if not fpath.exists():
                raise ParseError(f"missing file {name}", path)
            if sha256_file(fpath) != want:
                raise ParseError(f"checksum mismatch for {name}", path)
        mats[key] = read_alist(fpath)
    meta = {k: manifest[k] for k in ("ensemble", "family", "d", "d1") if manifest.get(k) is not None}
    if "H1" in mats:
        meta["H1"] = mats["H1"]
    try:
        code = CssCode(
            mats["Gx"],
            mats["Gz"],
            label=manifest["label"],
            d_x=manifest.get("d_x"),
            d_z=manifest.get("d_z"),
            hstar=mats.get("hstar"),
            meta=meta,
        )
    except ValueError as exc:
        raise ParseError(str(exc), path) from None
    for key in ("n", "k"):
        if key in manifest and manifest[key] != getattr(code, key):
            raise ParseError(f"manifest {key}={manifest[key]} but matrices give {getattr(code, key)}", path)
    return code


# ---------------------------------------------------------------------------
# fixtures


@dataclass(frozen=True)
class FixtureInfo:
    name: str
    params: tuple[int, int, int, int]
    ensemble: GallagerSpec | None = None
    toric: int | None = None


FIXTURES = {
    "toy-5-1-2": FixtureInfo("toy-5-1-2", (5, 1, 2, 2)),
    "qhp-80-16-4": FixtureInfo("qhp-80-16-4", (80, 16, 4, 4), GallagerSpec(3, 4, 8, 2)),
    "qhp-356-36-6": FixtureInfo("qhp-356-36-6", (356, 36, 6, 6), GallagerSpec(3, 4, 16, 542)),
    "qhp-832-64-8": FixtureInfo("qhp-832-64-8", (832, 64, 8, 8), GallagerSpec(3, 4, 24, 7130)),
    "qhp-1921-121-10": FixtureInfo("qhp-1921-121-10", (1921, 121, 10, 10), GallagerSpec(3, 4, 36, 5225)),
    "toric-6": FixtureInfo("toric-6", (36, 2, 6, 6), toric=6),
    "toric-8": FixtureInfo("toric-8", (64, 2, 8, 8), toric=8),
    "toric-12": FixtureInfo("toric-12", (144, 2, 12, 12), toric=12),
}


def toy_code() -> CssCode:
    """The ``[[5,1,2]]`` hypergraph product of ``H1 = [1 1]``."""
    H1 = BinaryMatrix.from_dense([[1, 1]])
    code = qhp_from(H1, label="toy-5-1-2")
    meta = {"H1": H1, "d1": 2}
    return CssCode(code.Gx, code.Gz, code.label, 2, 2, None, meta)


def build_fixture(name: str) -> CssCode:
    """Construct a named fixture from its recipe (no files involved)."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    info = FIXTURES[name]
    n, k, dx, dz = info.params
    if name.startswith("toy"):
        return toy_code()
    if info.toric is not None:
        code = rotated_toric(info.toric)
        return CssCode(code.Gx, code.Gz, name, dx, dz, None, dict(code.meta))
    spec = info.ensemble
    H1 = drop_dependent_rows(gallager_sample(spec))
    code = qhp_from(H1, label=name)
    ensemble = {"ell": spec.ell, "m": spec.m, "n1": spec.n, "seed": spec.seed}
    meta = {"H1": H1, "ensemble": ensemble, "d1": dx, "family": "qhp"}
    return CssCode(code.Gx, code.Gz, name, dx, dz, None, meta)


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return Path(str(resources.files("qhpcodes.data").joinpath("codes", f"{name}.json")))


def load_fixture(name: str) -> CssCode:
    """Load a shipped fixture from package data, falling back to construction."""
    path = fixture_path(name)
    if path.exists():
        return load_code(path)
    return build_fixture(name)


def resolve_code(spec: str) -> CssCode:
    """A manifest path, or a fixture name."""
    p = Path(spec)
    if p.suffix == ".json" or p.exists():
        if not p.exists():
            raise ParseError("no such file", p)
        return load_code(p)
    return load_fixture(spec)
