import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from progen import random_program
from symqp.baseline import SparseMatrix, ground_qp, matf_to_sparse, solve_ground, standard_form
from symqp.lang import compile, ground, parse
from symqp.linalg import from_dense, to_dense

sparse_entries = st.sampled_from([0.0, 0.0, 0.0, 1.0, -2.5, 1e-300, 3.25])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.data())
def test_sparse_matches_dense(r, c, data):
    M = data.draw(arrays(np.float64, (r, c), elements=sparse_entries))
    S = SparseMatrix.from_dense(M)
    assert S.nnz == np.count_nonzero(M)
    np.testing.assert_array_equal(S.to_dense(), M)
    x = np.arange(c, dtype=float)
    y = np.arange(r, dtype=float)
    np.testing.assert_allclose(S @ x, M @ x)
    np.testing.assert_allclose(S.rmatvec(y), M.T @ y)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.data())
def test_sparse_text_round_trip(tmp_path_factory, r, c, data):
    M = data.draw(arrays(np.float64, (r, c), elements=sparse_entries))
    path = tmp_path_factory.mktemp("s") / "m.txt"
    S = SparseMatrix.from_dense(M)
    S.save(path)
    assert SparseMatrix.load(path) == S


def test_duplicates_summed_and_zeros_dropped():
    S = SparseMatrix((2, 2), [0, 0, 1], [1, 1, 0], [1.0, 2.0, 0.0])
    assert S.nnz == 1
    assert S.to_dense().tolist() == [[0.0, 3.0], [0.0, 0.0]]


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 2 2\n0 0 1.0\n")
    with pytest.raises(ValueError, match="announces"):
        SparseMatrix.load(p)
    p.write_text("2 2 1\n5 0 1.0\n")
    with pytest.raises(ValueError, match="out of range"):
        SparseMatrix.load(p)
    p.write_text("2 2\n")
    with pytest.raises(ValueError, match="header"):
        SparseMatrix.load(p)


def test_matf_to_sparse():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((5, 7)) * (rng.random((5, 7)) < 0.4)
    S = matf_to_sparse(from_dense(M))
    np.testing.assert_array_equal(S.to_dense()[:5, :7], M)


@pytest.mark.parametrize("seed", range(15))
def test_ground_qp_matches_instantiation(seed):
    # the sparse copies read off the diagrams equal the direct instantiation
    f = random_program(seed)
    g = ground_qp(compile(f))
    ref = ground(f)
    np.testing.assert_array_equal(g.A.to_dense(), ref.A)
    np.testing.assert_array_equal(g.Q.to_dense(), ref.Q)
    np.testing.assert_array_equal(g.b, ref.b)


def test_ground_budget():
    src = "var x[14]; var y[14]; minimize sum{x : true} v(x); constraint {y : true}: sum{x : true} v(x) >= 1;"
    with pytest.raises(ValueError, match="budget"):
        ground_qp(compile(parse(src)), budget=20)


def test_standard_form_adds_slacks(models):
    q = compile(parse((models / "xy.foqp").read_text()))
    A_std, c_std, mask, Q_std, xpart = standard_form(ground_qp(q))
    A = A_std.toarray()
    np.testing.assert_array_equal(A[:, :2], to_dense(q.A))
    np.testing.assert_array_equal(A[:, 2:], -np.eye(4))
    np.testing.assert_array_equal(xpart, [1, 1, 0, 0, 0, 0])
    assert sp.issparse(Q_std) and Q_std.shape == (6, 6)
    np.testing.assert_array_equal(c_std, [1, 1, 0, 0, 0, 0])


@pytest.mark.parametrize("name", ["xy", "friends", "ridge", "coupled", "nonneg", "box"])
def test_direct_and_cg_inner_solves_agree(models, name):
    q = compile(parse((models / f"{name}.foqp").read_text()))
    d = solve_ground(q, inner="direct")
    c = solve_ground(q, inner="cg")
    assert d.status == c.status == "optimal"
    assert d.objective == pytest.approx(c.objective, rel=1e-4, abs=1e-6)
    assert d.backend == "ground-direct" and c.backend == "ground-cg"


def test_inner_must_be_known(models):
    q = compile(parse((models / "xy.foqp").read_text()))
    with pytest.raises(ValueError):
        solve_ground(q, inner="lu")
