import json

import numpy as np
import pytest
import scipy.optimize

from qpgen import add_problem, random_separable
from symqp.baseline import NumpyLinearAlgebra, ground_ipm_solve, solve_ground
from symqp.ipm import (
    CgBreakdown,
    IpmError,
    PartialCholesky,
    SolveOptions,
    UnsupportedStructure,
    cg_solve,
    ipm_solve,
)
from symqp.lang import compile, parse

LA = NumpyLinearAlgebra()


def spd(n, cond, seed=0):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return U @ np.diag(np.geomspace(1, cond, n)) @ U.T


class DenseOp:
    """Minimal operator interface for the preconditioner."""

    def __init__(self, N):
        self.N = N
        self.la = LA
        self.mask = np.ones(N.shape[0])

    def __call__(self, v):
        return self.N @ v

    def diagonal(self):
        return np.diag(self.N).copy()

    def row(self, i):
        return self.N[i].copy()

    def unit(self, i, value=1.0):
        e = np.zeros(self.N.shape[0])
        e[i] = value
        return e


# conjugate gradients


def test_cg_reaches_reduction():
    N = spd(30, 1e3)
    f = np.random.default_rng(1).standard_normal(30)
    z, st = cg_solve(lambda v: N @ v, f, LA, reduction=1e-8, max_iter=200)
    assert st.converged
    assert np.linalg.norm(N @ z - f) <= 1e-8 * np.linalg.norm(f) * 1.0001


def test_cg_absolute_target_is_tighter():
    N = spd(30, 1e3)
    f = np.random.default_rng(1).standard_normal(30)
    _, loose = cg_solve(lambda v: N @ v, f, LA, reduction=1e-2)
    z, tight = cg_solve(lambda v: N @ v, f, LA, reduction=1e-2, abs_target=1e-9)
    assert tight.iterations > loose.iterations
    assert np.linalg.norm(N @ z - f) <= 1e-9


def test_cg_zero_rhs():
    z, st = cg_solve(lambda v: v, np.zeros(4), LA)
    assert st.iterations == 0 and st.converged and not z.any()


def test_cg_breakdown():
    N = np.diag([1.0, -1.0, 2.0])
    f = np.array([0.0, 1.0, 0.0])
    _, st = cg_solve(lambda v: N @ v, f, LA)
    assert st.breakdown and not st.converged
    with pytest.raises(CgBreakdown):
        cg_solve(lambda v: N @ v, f, LA, raise_on_breakdown=True)


def test_cg_housekeeping_called():
    calls = []
    N = spd(10, 1e4)
    cg_solve(lambda v: N @ v, np.ones(10), LA, reduction=1e-10, housekeeping=lambda: calls.append(1))
    assert len(calls) > 0


# preconditioner


def test_full_pivoted_cholesky_is_exact():
    N = spd(12, 1e6, seed=3)
    P = PartialCholesky(DenseOp(N), 12)
    v = np.random.default_rng(0).standard_normal(12)
    np.testing.assert_allclose(P.solve(v), np.linalg.solve(N, v), rtol=1e-6)
    np.testing.assert_allclose(P.apply(v), N @ v, rtol=1e-8)


def test_partial_cholesky_structure():
    N = spd(20, 1e4, seed=4)
    P = PartialCholesky(DenseOp(N), 5)
    assert P.k == 5
    assert P.pivots[0] == int(np.argmax(np.diag(N)))
    # P = L L' + diag(d) is symmetric positive definite
    Pm = np.column_stack([P.apply(e) for e in np.eye(20)])
    np.testing.assert_allclose(Pm, Pm.T, atol=1e-10)
    assert np.linalg.eigvalsh(Pm).min() > 0
    v = np.random.default_rng(0).standard_normal(20)
    np.testing.assert_allclose(P.apply(P.solve(v)), v, rtol=1e-8)


def test_pivots_cut_iterations_on_spiky_spectrum():
    rng = np.random.default_rng(5)
    n = 60
    B = rng.standard_normal((n, 6)) * 1e3
    N = B @ B.T + np.diag(rng.random(n) + 1)
    f = rng.standard_normal(n)
    _, plain = cg_solve(lambda v: N @ v, f, LA, reduction=1e-8, max_iter=1000)
    P = PartialCholesky(DenseOp(N), 12)
    _, pre = cg_solve(lambda v: N @ v, f, LA, P, reduction=1e-8, max_iter=1000)
    assert pre.converged
    assert pre.iterations * 2 <= plain.iterations


# options and reports


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(tol=0)
    with pytest.raises(ValueError):
        SolveOptions(sigma=1.5)
    with pytest.raises(ValueError):
        SolveOptions(structure="dense")
    with pytest.raises(ValueError):
        SolveOptions(precond_k=-1)


def test_options_from_pairs():
    o = SolveOptions.from_pairs(["tol=1e-7", "precond-k=5", "cg_forcing=off", "structure=bounds", "quantize=none"])
    assert o.tol == 1e-7 and o.precond_k == 5 and o.cg_forcing is False and o.structure == "bounds"
    assert o.quantize is None
    with pytest.raises(ValueError):
        SolveOptions.from_pairs(["nope=1"])
    with pytest.raises(ValueError):
        SolveOptions.from_pairs(["tol"])


def test_default_pivots():
    assert SolveOptions().pivots_for(100) == 0
    assert SolveOptions().pivots_for(5000) == 50
    assert SolveOptions(precond_k=3).pivots_for(5000) == 3


def test_report_serialisation(models):
    r = ipm_solve(compile(parse((models / "xy.foqp").read_text())))
    text = r.to_text()
    for key in ("status: optimal", "objective:", "iterations:", "cg_total:", "structure: inequality", "backend: add"):
        assert key in text
    d = json.loads(r.to_json())
    assert d["status"] == "optimal" and len(d["x"]) == 2
    assert r.residual <= 1e-5


# structures


@pytest.mark.parametrize(
    "name, structure",
    [("xy", "inequality"), ("coupled", "inequality"), ("ridge", "separable"), ("friends", "separable"), ("nonneg", "bounds"), ("box", "box")],
)
def test_structure_detection(models, name, structure):
    q = compile(parse((models / f"{name}.foqp").read_text()))
    r = ipm_solve(q)
    assert r.structure == structure
    assert r.status == "optimal"
    assert solve_ground(q).structure == structure


UNSUPPORTED = """
var x[2];
var y[2];
var r[1];
minimize sum{x : true} v(x) * v(x) + sum{x, y : !(x[0] <-> y[0])} 0.5 * v(x) * v(y);
constraint {r : r}: sum{x : true} v(x) = 1;
"""


def test_unsupported_structure():
    q = compile(parse(UNSUPPORTED))
    with pytest.raises(UnsupportedStructure):
        ipm_solve(q)
    with pytest.raises(UnsupportedStructure):
        solve_ground(q)


def test_requested_structure_must_hold(models):
    q = compile(parse((models / "ridge.foqp").read_text()))
    with pytest.raises(UnsupportedStructure):
        ipm_solve(q, SolveOptions(structure="bounds"))
    assert ipm_solve(q, SolveOptions(structure="inequality")).status == "optimal"


def test_raise_on_failure(models):
    q = compile(parse((models / "xy.foqp").read_text()))
    r = ipm_solve(q, SolveOptions(max_iter=2))
    assert r.status == "max_iter"
    with pytest.raises(IpmError):
        ipm_solve(q, SolveOptions(max_iter=2, raise_on_failure=True))


# solutions against independent references


@pytest.mark.parametrize("seed", range(8))
def test_lp_matches_highs(seed):
    A, b, c, _ = random_separable(seed, lp=True)
    c = np.abs(c) + 0.1  # bounded below on x >= 0
    ref = scipy.optimize.linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert ref.status == 0
    r = ipm_solve(add_problem(A, b, c, np.zeros_like(c)))
    assert r.status == "optimal"
    assert r.objective == pytest.approx(ref.fun, rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_separable_qp_satisfies_kkt(seed):
    A, b, c, q = random_separable(100 + seed)
    r = ipm_solve(add_problem(A, b, c, q))
    assert r.status == "optimal"
    n, m = len(c), len(b)
    la = r.state
    x = np.asarray(r.x)[:n]
    y = add_to_numpy(la.y)[:m]
    s = add_to_numpy(la.s)[:n]
    scale = 1 + np.abs(c).max() + np.abs(b).max()
    assert x.min() >= 0 and s.min() >= 0
    assert np.linalg.norm(A @ x - b) <= 1e-4 * scale
    assert np.linalg.norm(c + q * x - A.T @ y - s) <= 1e-4 * scale
    assert x @ s <= 1e-4 * (1 + abs(r.objective))
    g = ground_ipm_solve(A, np.diag(q), b, c)
    assert r.objective == pytest.approx(g.objective, rel=1e-6)


def add_to_numpy(v):
    from symqp.linalg import to_dense

    return to_dense(v, logical=False)


def test_ground_cg_and_direct_agree():
    A, b, c, q = random_separable(7)
    d = ground_ipm_solve(A, np.diag(q), b, c, inner="direct")
    g = ground_ipm_solve(A, np.diag(q), b, c, inner="cg")
    assert d.status == g.status == "optimal"
    assert d.objective == pytest.approx(g.objective, rel=1e-5)
    assert d.cg_total == 0 < g.cg_total


def test_quantized_iterates_still_converge(models):
    q = compile(parse((models / "ridge.foqp").read_text()))
    r = ipm_solve(q, SolveOptions(quantize=8))
    assert r.status == "optimal"
    assert r.objective == pytest.approx(-29 / 3, rel=1e-4)


def test_callback_sees_every_direction(models):
    seen = []
    q = compile(parse((models / "coupled.foqp").read_text()))
    r = ipm_solve(q, SolveOptions(callback=lambda e: seen.append(e["iter"])))
    assert seen == list(range(r.iterations))
