import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qhpcodes import io
from qhpcodes.codes import css_params
from qhpcodes.gf2 import BinaryMatrix


@settings(max_examples=40)
@given(st.tuples(st.integers(0, 6), st.integers(0, 9)).flatmap(
    lambda s: arrays(np.uint8, s, elements=st.integers(0, 1))))
def test_alist_round_trip(A):
    M = BinaryMatrix.from_dense(A)
    assert io.parse_alist(io.alist_text(M)) == M


def test_alist_layout():
    M = BinaryMatrix.from_dense([[1, 1, 0], [0, 1, 1]])
    lines = io.alist_text(M).splitlines()
    assert lines[:4] == ["3 2", "2 2", "1 2 1", "2 2"]
    assert lines[4:7] == ["1 0", "1 2", "2 0"]
    assert lines[7:] == ["1 2", "2 3"]


def test_alist_unpadded_lines_accepted():
    text = "3 2\n2 2\n1 2 1\n2 2\n1\n1 2\n2\n1 2\n2 3\n"
    assert io.parse_alist(text).to_dense().tolist() == [[1, 1, 0], [0, 1, 1]]


@pytest.mark.parametrize("text,msg", [
    ("3 2\n2 2\n1 2 1\n", "unexpected end"),
    ("3 x\n", "non-integer"),
    ("3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n1 3\n", "disagree"),
    ("3 2\n2 2\n1 2 1\n2 2\n1 0\n1 5\n2 0\n1 2\n2 3\n", "out of range"),
])
def test_alist_errors(text, msg):
    with pytest.raises(io.ParseError, match=msg) as exc:
        io.parse_alist(text, "m.alist")
    assert exc.value.path == "m.alist"


def test_save_load_round_trip(tmp_path, code80):
    path = io.save_code(code80, tmp_path)
    back = io.load_code(path)
    assert back.Gx == code80.Gx and back.Gz == code80.Gz
    assert back.hstar == code80.hstar
    assert back.params() == code80.params()
    man = json.loads(path.read_text())
    assert man["ensemble"] == {"ell": 3, "m": 4, "n1": 8, "seed": 2}
    assert set(man) >= {"label", "n", "k", "d_x", "d_z", "ensemble", "files", "sha256"}


def test_manifest_regenerates_matrices(tmp_path, code80):
    man = json.loads(io.save_code(code80, tmp_path).read_text())
    rebuilt = io.build_fixture("qhp-80-16-4")
    assert man["ensemble"]["seed"] == rebuilt.meta["ensemble"]["seed"]
    assert rebuilt.Gx == code80.Gx


def test_truncated_alist_is_structured_error(tmp_path, toy):
    path = io.save_code(toy, tmp_path)
    gx = tmp_path / json.loads(path.read_text())["files"]["Gx"]
    gx.write_text("\n".join(gx.read_text().splitlines()[:3]) + "\n")
    with pytest.raises(io.ParseError, match="checksum"):
        io.load_code(path)
    with pytest.raises(io.ParseError, match="unexpected end") as exc:
        io.load_code(path, verify=False)
    assert exc.value.line == 4


def test_bad_manifest(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    with pytest.raises(io.ParseError, match="invalid JSON"):
        io.load_code(p)
    p.write_text(json.dumps({"label": "x", "files": {}, "sha256": {}}))
    with pytest.raises(io.ParseError, match="Gx"):
        io.load_code(p)


def test_stated_k_checked(tmp_path, toy):
    path = io.save_code(toy, tmp_path)
    man = json.loads(path.read_text())
    man["k"] = 3
    path.write_text(json.dumps(man))
    with pytest.raises(io.ParseError, match="k=3"):
        io.load_code(path)


@pytest.mark.parametrize("name", sorted(io.FIXTURES))
def test_shipped_fixtures_match_recipe(name):
    code = io.load_fixture(name)
    n, k, dx, dz = io.FIXTURES[name].params
    assert (code.n, code.k, code.d_x, code.d_z) == (n, k, dx, dz)
    if code.n <= 400:
        assert io.build_fixture(name).Gx == code.Gx


@pytest.mark.parametrize("name", ["toy-5-1-2", "qhp-80-16-4", "toric-6", "toric-8"])
def test_fixture_distances_exact(name):
    code = io.load_fixture(name)
    assert css_params(code) == io.FIXTURES[name].params


def test_unknown_fixture():
    with pytest.raises(KeyError):
        io.load_fixture("nope")


def test_dump_json_stable():
    assert io.dump_json({"b": 1, "a": [1, 2]}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'
