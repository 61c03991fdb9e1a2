import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from symqp.add import AddManager
from symqp.linalg import (
    DiagF,
    MatF,
    alloc_bits,
    alloc_matrix_bits,
    argmax,
    col_extract,
    diagonal,
    dot,
    element_sum,
    entry,
    from_dense,
    identity,
    load_dense,
    map_elements,
    matvec,
    matvec_t,
    max_abs,
    nnz,
    norm2,
    row_extract,
    save_dense,
    to_dense,
    transpose,
    unit,
    vector_from_dense,
    walsh,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def shared(M):
    m = AddManager()
    A = from_dense(M, m)
    return m, A


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_matvec_matches_dense(r, c, data):
    M = data.draw(arrays(np.float64, (r, c), elements=finite))
    x = data.draw(arrays(np.float64, c, elements=finite))
    y = data.draw(arrays(np.float64, r, elements=finite))
    m, A = shared(M)
    got = to_dense(matvec(A, vector_from_dense(x, m, A.col_bits)))
    np.testing.assert_allclose(got, M @ x, rtol=1e-12, atol=1e-9)
    got_t = to_dense(matvec_t(A, vector_from_dense(y, m, A.row_bits)))
    np.testing.assert_allclose(got_t, M.T @ y, rtol=1e-12, atol=1e-9)
    assert np.array_equal(to_dense(A), M)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40).flatmap(lambda n: st.tuples(arrays(np.float64, n, elements=finite), arrays(np.float64, n, elements=finite))))
def test_vector_reductions(uv):
    u, v = uv
    m = AddManager()
    bits = alloc_bits(m, max(0, int(np.ceil(np.log2(len(u))))))
    U, V = vector_from_dense(u, m, bits), vector_from_dense(v, m, bits)
    assert dot(U, V) == pytest.approx(u @ v, rel=1e-12, abs=1e-9)
    assert norm2(U) == pytest.approx(np.linalg.norm(u), rel=1e-12, abs=1e-12)
    assert element_sum(U) == pytest.approx(u.sum(), rel=1e-12, abs=1e-9)
    assert max_abs(U) == np.abs(u).max()
    assert np.array_equal(to_dense(U + V), u + v)
    assert np.array_equal(to_dense(U * V), u * v)
    assert np.array_equal(to_dense(map_elements(U, np.abs)), np.abs(u))


def test_walsh_matches_hadamard():
    for n in range(0, 7):
        np.testing.assert_array_equal(to_dense(walsh(n)), scipy.linalg.hadamard(1 << n))


def test_walsh_is_small():
    counts = [walsh(n).node_count() for n in range(1, 15)]
    assert np.all(np.diff(counts) == counts[1] - counts[0])


def test_walsh_rejects_bad_bits():
    m = AddManager()
    rows, cols = alloc_matrix_bits(m, 2, 2)
    with pytest.raises(ValueError):
        walsh(2, m, cols, rows)
    with pytest.raises(ValueError):
        walsh(3, m, rows, cols)


def test_identity_and_diagonal():
    I = identity(3)
    np.testing.assert_array_equal(to_dense(I), np.eye(8))
    M = np.arange(16.0).reshape(4, 4)
    m, A = shared(M)
    np.testing.assert_array_equal(to_dense(diagonal(A)), np.diag(M))
    np.testing.assert_array_equal(to_dense(row_extract(A, 2)), M[2])
    np.testing.assert_array_equal(to_dense(col_extract(A, 1)), M[:, 1])
    np.testing.assert_array_equal(to_dense(transpose(A)), M.T)
    D = DiagF(diagonal(A))
    np.testing.assert_array_equal(D.to_dense(), np.diag(np.diag(M)))


def test_diagonal_needs_square():
    _, A = shared(np.ones((2, 4)))
    with pytest.raises(ValueError):
        diagonal(A)


def test_nnz_counts_entries():
    M = np.array([[0, 1, 0], [2, 0, 0], [0, 0, 3.5]])
    _, A = shared(M)
    assert nnz(A) == 3
    assert A.shape == (3, 3)


def test_unit_entry_argmax():
    m = AddManager()
    bits = alloc_bits(m, 4)
    e = unit(m, 11, bits, 2.5)
    assert entry(e, 11) == 2.5
    assert argmax(e) == 11
    assert element_sum(e) == 2.5


def test_dimension_mismatch():
    m = AddManager()
    u = vector_from_dense(np.ones(4), m)
    v = vector_from_dense(np.ones(4), m)
    with pytest.raises(ValueError):
        u + v


def test_matvec_operator_syntax():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    m, A = shared(M)
    x = vector_from_dense([1.0, -1.0], m, A.col_bits)
    np.testing.assert_array_equal(to_dense(A @ x), M @ [1, -1])
    y = vector_from_dense([1.0, 1.0], m, A.row_bits)
    np.testing.assert_array_equal(to_dense(A.T @ y), M.T @ [1, 1])


def test_dense_text_round_trip(tmp_path):
    M = np.array([[0.1, -2e-300], [3.0, 1 / 3]])
    save_dense(tmp_path / "m.txt", M)
    np.testing.assert_array_equal(load_dense(tmp_path / "m.txt"), M)


def test_matf_bits_must_be_disjoint():
    m = AddManager()
    bits = alloc_bits(m, 2)
    with pytest.raises(ValueError):
        MatF(m, 0, bits, bits)
