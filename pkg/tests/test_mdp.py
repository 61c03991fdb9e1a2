import itertools

import numpy as np
import pytest

from symqp.apps.mdp import (
    Effect,
    FactoredMdp,
    MdpError,
    chain_mdp,
    factory_mdp,
    gen_mdp_lp,
    loop_mdp,
    transition_matrices,
    value_iteration,
)
from symqp.apps.mdp import check_stochastic
from symqp.baseline import ground_qp, solve_ground
from symqp.ipm import SolveOptions, ipm_solve
from symqp.lang import compile, parse, to_source


def brute_values(mdp, sweeps=2000):
    """Bellman iteration over explicit state tuples, one effect list at a time."""
    n = len(mdp.bit_names)
    states = list(itertools.product((0, 1), repeat=n))

    def next_probs(s, a):
        out = []
        for i in range(n):
            p = float(s[i])
            for e in mdp.effects.get(a, ()):
                if e.bit == i and all(s[b] == val for b, val in e.when):
                    p = e.prob
                    break
            out.append(p)
        return out

    def reward(s):
        return sum(v for v, lits in mdp.rewards if all(s[b] == val for b, val in lits))

    trans = {}
    for s in states:
        for a in mdp.actions:
            ps = next_probs(s, a)
            row = {}
            for t in states:
                pr = 1.0
                for i in range(n):
                    pr *= ps[i] if t[i] else 1.0 - ps[i]
                if pr:
                    row[t] = pr
            trans[s, a] = row
    v = {s: 0.0 for s in states}
    for _ in range(sweeps):
        v = {
            s: max(reward(s) + mdp.gamma * sum(p * v[t] for t, p in trans[s, a].items()) for a in mdp.actions)
            for s in states
        }
    return np.array([v[s] for s in states])


def test_loop_value():
    v = value_iteration(loop_mdp(2.0, 0.75))
    np.testing.assert_allclose(v, [8.0, 8.0], rtol=1e-10)


def test_loop_lp():
    rep = ipm_solve(compile(gen_mdp_lp(loop_mdp(1.0, 0.9))))
    assert rep.converged
    np.testing.assert_allclose(rep.x, [10.0, 10.0], rtol=1e-4)


def test_chain2_against_brute_force():
    mdp = chain_mdp(2, 0.8, 0.9)
    ref = brute_values(mdp)
    np.testing.assert_allclose(value_iteration(mdp), ref, atol=1e-8)
    rep = ipm_solve(compile(gen_mdp_lp(mdp)))
    assert rep.converged
    np.testing.assert_allclose(rep.x, ref, rtol=1e-4)


def test_factory_small_against_brute_force():
    mdp = factory_mdp(1, 2, 1)
    np.testing.assert_allclose(value_iteration(mdp), brute_values(mdp), atol=1e-6)


def test_transitions_are_stochastic():
    for mdp in (chain_mdp(3), factory_mdp(1, 3, 1), factory_mdp()):
        for P in transition_matrices(mdp):
            np.testing.assert_allclose(P.sum(axis=1).A.ravel(), 1.0, atol=1e-12)
        check_stochastic(mdp)


@pytest.mark.parametrize(
    "kwargs, bits",
    [({}, 8), ({"objects": 2, "features": 5, "tools": 1}, 12), ({"objects": 1, "features": 3, "tools": 0}, 4)],
)
def test_factory_bit_counts(kwargs, bits):
    assert len(factory_mdp(**kwargs).bit_names) == bits


def test_factory_seed_changes_probabilities():
    a, b = factory_mdp(seed=0), factory_mdp(seed=1)
    assert a.effects != b.effects
    assert factory_mdp(seed=0).effects == a.effects


@pytest.mark.parametrize(
    "build",
    [
        lambda: loop_mdp(1.0, 1.0),
        lambda: loop_mdp(1.0, 0.0),
        lambda: loop_mdp(-1.0, 0.5),
        lambda: FactoredMdp(("b",), ("a",), {"a": (Effect(0, 1.5),)}, (), 0.5),
        lambda: FactoredMdp(("b",), ("a",), {"a": (Effect(3, 0.5),)}, (), 0.5),
        lambda: FactoredMdp(("b",), ("a",), {"a": (Effect(0, 0.5, ((2, 1),)),)}, (), 0.5),
        lambda: factory_mdp(features=0),
        lambda: factory_mdp(tools=4),
        lambda: factory_mdp(objects=0),
    ],
)
def test_invalid_mdps(build):
    with pytest.raises(MdpError):
        build()


def test_non_stochastic_over_valid_states():
    from symqp.lang.syntax import Bit, Not

    # bit 0 may switch on, but only states with bit 0 off are valid
    mdp = FactoredMdp(("b",), ("a",), {"a": (Effect(0, 0.5),)}, ((1.0, ()),), 0.5, state=Not(Bit("s", 0)))
    with pytest.raises(MdpError, match="not stochastic"):
        check_stochastic(mdp)
    with pytest.raises(MdpError):
        gen_mdp_lp(mdp)


def test_lp_source_round_trip():
    prog = gen_mdp_lp(chain_mdp(2))
    again = parse(to_source(prog))
    a, b = compile(prog), compile(again)
    np.testing.assert_allclose(ground_qp(a).A.to_dense(), ground_qp(b).A.to_dense())


def test_symbolic_and_ground_agree():
    mdp = factory_mdp(1, 3, 1)
    qp = compile(gen_mdp_lp(mdp))
    sym = ipm_solve(qp, SolveOptions(precond_k=10))
    gr = solve_ground(ground_qp(qp), SolveOptions())
    assert sym.converged and gr.converged
    assert sym.objective == pytest.approx(gr.objective, rel=1e-4)
    np.testing.assert_allclose(sym.x, value_iteration(mdp), rtol=1e-4)
