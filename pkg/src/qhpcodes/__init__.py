"""Quantum hypergraph-product codes: construction, cluster decoding and random-bond Ising models."""

__version__ = "0.1.0"

from .gf2 import BinaryMatrix, rank  # noqa: E402
from .codes import CssCode, GallagerSpec, build_hstar, css_params, qhp_from, rotated_toric  # noqa: E402
from .io import load_code, load_fixture, save_code  # noqa: E402

__all__ = [
    "BinaryMatrix",
    "CssCode",
    "GallagerSpec",
    "build_hstar",
    "css_params",
    "load_code",
    "load_fixture",
    "qhp_from",
    "rank",
    "rotated_toric",
    "save_code",
]
