import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import rank2, span
from qhpcodes import gf2
from qhpcodes.gf2 import BinaryMatrix, RowSpace


def matrices(max_rows=8, max_cols=70):
    return st.tuples(st.integers(1, max_rows), st.integers(1, max_cols)).flatmap(
        lambda s: arrays(np.uint8, s, elements=st.integers(0, 1))
    )


@given(matrices())
def test_dense_round_trip(A):
    M = BinaryMatrix.from_dense(A)
    assert np.array_equal(M.to_dense(), A)
    assert M.shape == A.shape


@given(matrices())
def test_rank_matches_elimination(A):
    assert gf2.rank(BinaryMatrix.from_dense(A)) == rank2(A)


@given(matrices(6, 20))
def test_transpose_and_weights(A):
    M = BinaryMatrix.from_dense(A)
    assert np.array_equal(M.T.to_dense(), A.T)
    assert np.array_equal(M.row_weights(), A.sum(1))
    assert np.array_equal(M.col_weights(), A.sum(0))


@given(matrices(5, 9), st.data())
def test_product_matches_numpy(A, data):
    B = data.draw(arrays(np.uint8, (A.shape[1], data.draw(st.integers(1, 7))), elements=st.integers(0, 1)))
    got = (BinaryMatrix.from_dense(A) @ BinaryMatrix.from_dense(B)).to_dense()
    assert np.array_equal(got, (A.astype(int) @ B) % 2)


@given(matrices(6, 12))
def test_dual_is_orthogonal_complement(A):
    M = BinaryMatrix.from_dense(A)
    D = gf2.dual(M)
    assert (M @ D.T).is_zero()
    assert D.rows == A.shape[1] - rank2(A)
    assert gf2.rank(D) == D.rows


@settings(max_examples=50)
@given(matrices(5, 8), st.data())
def test_rowspace_membership_and_coefficients(A, data):
    v = data.draw(arrays(np.uint8, A.shape[1], elements=st.integers(0, 1)))
    inside = tuple(int(x) for x in v) in span(A)
    M = BinaryMatrix.from_dense(A)
    a = gf2.in_rowspace(M, v)
    assert (a is not None) == inside
    if a is not None:
        assert np.array_equal((a.astype(int) @ A) % 2, v)


def test_kronecker_blocks():
    A = BinaryMatrix.from_dense([[1, 1, 0]])
    B = BinaryMatrix.from_dense([[1, 0], [1, 1]])
    assert np.array_equal(gf2.kronecker(A, B).to_dense(), np.kron(A.to_dense(), B.to_dense()))


def test_drop_dependent_rows_keeps_span():
    A = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [1, 0, 1, 0], [0, 0, 0, 1]], dtype=np.uint8)
    R = gf2.drop_dependent_rows(BinaryMatrix.from_dense(A))
    assert R.rows == 3
    assert span(R.to_dense()) == span(A)


def test_int_vector_conversions():
    v = np.zeros(130, np.uint8)
    v[[0, 64, 129]] = 1
    x = gf2.vec_to_int(v)
    assert gf2.int_to_support(x) == [0, 64, 129]
    assert np.array_equal(gf2.int_to_vec(x, 130), v)
    assert gf2.support_to_int([0, 64, 129]) == x


def test_rowspace_incremental_rank():
    rs = RowSpace(BinaryMatrix.zeros(0, 5))
    assert rs.add(0b00011)
    assert rs.add(0b00110)
    assert not rs.add(0b00101)
    assert rs.rank == 2


def test_in_rowspace_shape_error():
    with pytest.raises(ValueError):
        gf2.in_rowspace(BinaryMatrix.identity(3), np.zeros(4, np.uint8))


@pytest.mark.parametrize("exhaustive", [False, True])
def test_min_weight_nontrivial_toy(toy, exhaustive):
    assert gf2.min_weight_nontrivial(toy.Gz, toy.Gx, exhaustive=exhaustive) == 2
    assert gf2.min_weight_nontrivial(toy.Gx, toy.Gz, exhaustive=exhaustive) == 2
