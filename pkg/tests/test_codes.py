import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import classical_distance as brute_d1
from oracles import css_distance, rank2
from qhpcodes import codes, gf2
from qhpcodes.codes import CssCode, GallagerSpec
from qhpcodes.gf2 import BinaryMatrix


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([(3, 4, 8), (3, 4, 12), (2, 3, 9), (3, 6, 12)]), st.integers(0, 10_000))
def test_gallager_regular_weights(shape, seed):
    ell, m, n = shape
    H = codes.gallager_sample(GallagerSpec(ell, m, n, seed))
    assert H.shape == (ell * n // m, n)
    assert np.all(H.row_weights() == m)
    assert np.all(H.col_weights() == ell)


def test_gallager_spec_validation():
    with pytest.raises(ValueError):
        GallagerSpec(3, 4, 10)
    with pytest.raises(ValueError):
        GallagerSpec(1, 4, 8)


def test_gallager_deterministic():
    a = codes.gallager_sample(GallagerSpec(3, 4, 16, 5))
    b = codes.gallager_sample(GallagerSpec(3, 4, 16, 5))
    assert a == b


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 500))
def test_classical_distance_matches_brute(seed):
    H = gf2.drop_dependent_rows(codes.gallager_sample(GallagerSpec(3, 4, 12, seed)))
    assert codes.classical_distance(H) == brute_d1(H.to_dense())


def test_toy_hypergraph_product(toy):
    assert toy.Gx.shape == (2, 5)
    assert toy.Gz.shape == (2, 5)
    assert toy.k == 1
    assert (toy.Gx @ toy.Gz.T).is_zero()
    assert codes.css_params(toy) == (5, 1, 2, 2)
    assert css_distance(toy.Gz.to_dense(), toy.Gx.to_dense()) == 2


@pytest.mark.parametrize("n1,seed", [(8, 2), (12, 3), (8, 11)])
def test_qhp_parameter_formulas(n1, seed):
    H1 = gf2.drop_dependent_rows(codes.gallager_sample(GallagerSpec(3, 4, n1, seed)))
    r1 = H1.rows
    code = codes.qhp_from(H1)
    assert code.n == n1 * n1 + r1 * r1
    assert code.k == (n1 - r1) ** 2
    assert (code.Gx @ code.Gz.T).is_zero()
    assert gf2.rank(code.Gx) == rank2(code.Gx.to_dense())


def test_qhp_rejects_rank_deficient():
    H = BinaryMatrix.from_dense([[1, 1, 0], [1, 1, 0]])
    with pytest.raises(ValueError):
        codes.qhp_from(H)


def test_qhp_80_parameters(code80):
    assert codes.css_params(code80) == (80, 16, 4, 4)


def test_weak_self_duality(toy, code80):
    for code in (toy, code80):
        H1 = code.meta["H1"]
        assert codes.is_weakly_self_dual(code, H1.rows, H1.cols)
        assert codes.canonical_form(code.Gx) == codes.canonical_form(code.Gz)


@pytest.mark.parametrize("d", [2, 4, 6])
def test_rotated_toric(d):
    code = codes.rotated_toric(d)
    assert code.n == d * d
    assert code.k == 2
    assert codes.css_params(code)[2:] == (d, d)
    assert np.all(code.Gx.row_weights() == 4)


def test_rotated_toric_rejects_odd():
    with pytest.raises(ValueError):
        codes.rotated_toric(5)


def test_hstar_toy(toy):
    Hs = codes.build_hstar(toy)
    assert Hs.shape == (3, 5)
    assert Hs.row_weights()[-1] == 2
    assert (Hs @ toy.Gz.T).is_zero()
    assert gf2.rank(Hs) == gf2.rank(toy.Gx) + toy.k


def test_hstar_80(code80):
    Hs = codes.build_hstar(code80)
    assert Hs.shape == (48, 80)
    assert Hs.row_weights().max() <= 7
    assert (Hs @ code80.Gz.T).is_zero()
    assert gf2.rank(Hs) == gf2.rank(code80.Gx) + 16


def test_hstar_rows_are_light_and_lexicographic(toy):
    Hs = codes.build_hstar(toy)
    row = Hs.row_supports()[-1].tolist()
    # every weight-2 logical candidate, smallest support wins
    cands = []
    Gz = toy.Gz.to_dense()
    space = gf2.RowSpace(toy.Gx)
    for i in range(5):
        for j in range(i + 1, 5):
            v = np.zeros(5, np.uint8)
            v[[i, j]] = 1
            if not ((Gz @ v) % 2).any() and not space.contains(gf2.vec_to_int(v)):
                cands.append([i, j])
    assert row == min(cands)


def test_css_code_rejects_nonorthogonal():
    with pytest.raises(ValueError):
        CssCode(BinaryMatrix.from_dense([[1, 0]]), BinaryMatrix.from_dense([[1, 0]]))


def test_swapped_exchanges_roles(toy):
    s = toy.swapped()
    assert s.Gx == toy.Gz and s.Gz == toy.Gx
