"""Factored MDPs and their value-function LPs.

A :class:`FactoredMdp` lists, per action, effects of the form "if these
state bits hold, bit ``i`` becomes 1 with probability ``p``". Bits with no
matching effect keep their value, and next-state bits are independent
given ``(s, a)``, so the transition function is a product of per-bit
Bernoulli factors. The same description feeds two routes:

* :func:`gen_mdp_lp` writes the value LP as a FOQP, with every factor
  spelled out as indicator formulas;
* :func:`value_iteration` builds sparse transition matrices numerically
  and iterates the Bellman operator.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..lang.syntax import (
    TRUE,
    And,
    BinOp,
    Bit,
    Const,
    Constraint,
    Eq,
    Foqp,
    Iff,
    Ind,
    Not,
    Num,
    Or,
    Term,
    VecDecl,
)

__all__ = ["Effect", "FactoredMdp", "MdpError", "gen_mdp_lp", "value_iteration", "transition_matrices", "factory_mdp", "chain_mdp", "loop_mdp"]


class MdpError(ValueError):
    pass


@dataclass(frozen=True)
class Effect:
    """Bit ``bit`` becomes 1 with probability ``prob`` when all of ``when`` hold.

    ``when`` is a tuple of ``(bit, value)`` literals. Earlier effects on the
    same bit take precedence.
    """

    bit: int
    prob: float
    when: tuple = ()


@dataclass
class FactoredMdp:
    bit_names: tuple
    actions: tuple
    effects: dict
    rewards: tuple  # (value, literals) pairs, summed
    gamma: float
    state: object = TRUE  # formula over Bit("s", i)
    name: str = "mdp"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise MdpError(f"discount must lie in (0, 1), got {self.gamma}")
        n = len(self.bit_names)
        for a in self.actions:
            for e in self.effects.get(a, ()):
                if not 0 <= e.bit < n:
                    raise MdpError(f"effect of {a!r} targets bit {e.bit} of {n}")
                if not 0.0 <= e.prob <= 1.0:
                    raise MdpError(f"effect of {a!r} on bit {e.bit} has probability {e.prob}")
                for b, _ in e.when:
                    if not 0 <= b < n:
                        raise MdpError(f"effect of {a!r} tests bit {b} of {n}")
        if any(v < 0 for v, _ in self.rewards):
            raise MdpError("rewards must be non-negative (the LP keeps v >= 0)")

    @property
    def state_bits(self) -> int:
        return len(self.bit_names)

    @property
    def action_bits(self) -> int:
        return max(1, math.ceil(math.log2(len(self.actions))))

    def act_formula(self):
        if len(self.actions) == 1 << self.action_bits:
            return TRUE
        return Or(tuple(Eq("a", j) for j in range(len(self.actions))))


# ----------------------------------------------------------------------
# FOQP route


def _lits(vec: str, lits):
    out = []
    for b, val in lits:
        out.append(Bit(vec, b) if val else Not(Bit(vec, b)))
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def _rename(f, old: str, new: str):
    if isinstance(f, Bit):
        return Bit(new, f.index) if f.vec == old else f
    if isinstance(f, Eq):
        return Eq(new if f.left == old else f.left, new if f.right == old else f.right)
    if isinstance(f, Not):
        return Not(_rename(f.arg, old, new))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_rename(a, old, new) for a in f.args))
    if isinstance(f, Const):
        return f
    raise MdpError(f"state formula may only use bits of s, got {f!r}")


def _sum(parts):
    parts = list(parts)
    if not parts:
        return Num(0.0)
    out = parts[0]
    for p in parts[1:]:
        out = BinOp("+", out, p)
    return out


def _prod(parts):
    out = parts[0]
    for p in parts[1:]:
        out = BinOp("*", out, p)
    return out


def _bit_prob(mdp: FactoredMdp, bit: int):
    """Probability that next-state bit ``bit`` is 1, as an expression in s and a."""
    keep = Ind(Bit("s", bit))
    cases = []
    touched = []
    for j, a in enumerate(mdp.actions):
        effs = [e for e in mdp.effects.get(a, ()) if e.bit == bit]
        if not effs:
            continue
        touched.append(Eq("a", j))
        parts = []
        earlier = []
        for e in effs:
            cond = _lits("s", e.when)
            g = And(tuple([cond] + [Not(c) for c in earlier])) if earlier else cond
            if e.prob:
                parts.append(BinOp("*", Num(e.prob), Ind(g)))
            earlier.append(cond)
        none = And(tuple([Not(c) for c in earlier] + [Bit("s", bit)]))
        parts.append(Ind(none))
        cases.append(BinOp("*", Ind(Eq("a", j)), _sum(parts)))
    if not touched:
        return None
    others = Ind(And((Not(Or(tuple(touched))) if len(touched) > 1 else Not(touched[0]), Bit("s", bit))))
    return _sum(cases + [others])


def transition_expr(mdp: FactoredMdp):
    factors = []
    for i in range(mdp.state_bits):
        p = _bit_prob(mdp, i)
        if p is None:
            factors.append(Ind(Iff(Bit("s'", i), Bit("s", i))))
        else:
            factors.append(
                BinOp("+", BinOp("*", Ind(Bit("s'", i)), p), BinOp("*", Ind(Not(Bit("s'", i))), BinOp("-", Num(1.0), p)))
            )
    return _prod(factors)


def gen_mdp_lp(mdp: FactoredMdp) -> Foqp:
    """The value LP ``min sum_s v(s)`` s.t. ``v(s) - gamma E[v(s') | s, a] >= rew(s)``."""
    check_stochastic(mdp)
    S, A = mdp.state_bits, mdp.action_bits
    valid = mdp.state
    valid_next = _rename(valid, "s", "s'")
    rew = _sum(BinOp("*", Num(v), Ind(_lits("s", lits))) if lits else Num(v) for v, lits in mdp.rewards)
    body = (
        Term(Num(1.0), ("s",)),
        Term(BinOp("*", Num(-mdp.gamma), transition_expr(mdp)), ("s'",), bound=("s'",), guard=valid_next),
    )
    act = mdp.act_formula()
    guard = valid if act == TRUE else (act if valid == TRUE else And((valid, act)))
    return Foqp(
        vectors=(VecDecl("s", S), VecDecl("a", A)),
        objective=(Term(Num(1.0), ("s",), bound=("s",), guard=valid),),
        constraints=(Constraint(("s", "a"), guard, body, ">=", rew),),
    )


# ----------------------------------------------------------------------
# numeric route


def _state_table(n: int) -> np.ndarray:
    codes = np.arange(1 << n)
    return ((codes[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(bool)


def _holds(bits: np.ndarray, lits) -> np.ndarray:
    ok = np.ones(bits.shape[0], dtype=bool)
    for b, val in lits:
        ok &= bits[:, b] == bool(val)
    return ok


def _eval_state(f, bits: np.ndarray) -> np.ndarray:
    if isinstance(f, Const):
        return np.full(bits.shape[0], f.value)
    if isinstance(f, Bit):
        return bits[:, f.index].copy()
    if isinstance(f, Not):
        return ~_eval_state(f.arg, bits)
    if isinstance(f, And):
        return np.logical_and.reduce([_eval_state(a, bits) for a in f.args])
    if isinstance(f, Or):
        return np.logical_or.reduce([_eval_state(a, bits) for a in f.args])
    raise MdpError(f"unsupported state formula {f!r}")


def _next_bit_probs(mdp: FactoredMdp, action: str, bits: np.ndarray) -> np.ndarray:
    p = bits.astype(np.float64)
    for e in reversed(mdp.effects.get(action, ())):
        hit = _holds(bits, e.when)
        p[hit, e.bit] = e.prob
    return p


def transition_matrices(mdp: FactoredMdp) -> list:
    """One sparse ``2^S x 2^S`` matrix per action (rows: s, columns: s')."""
    S = mdp.state_bits
    N = 1 << S
    bits = _state_table(S)
    weights = 1 << (S - 1 - np.arange(S))
    out = []
    for a in mdp.actions:
        p = _next_bit_probs(mdp, a, bits)
        branches = [(np.zeros(N, dtype=np.int64), np.ones(N))]
        for i in range(S):
            pi = p[:, i]
            if np.all((pi == 0) | (pi == 1)):
                branches = [(code + weights[i] * (pi == 1), pr) for code, pr in branches]
                continue
            nxt = []
            for code, pr in branches:
                nxt.append((code + weights[i], pr * pi))
                nxt.append((code, pr * (1.0 - pi)))
            branches = nxt
        rows = np.concatenate([np.arange(N)] * len(branches))
        cols = np.concatenate([c for c, _ in branches])
        vals = np.concatenate([v for _, v in branches])
        keep = vals != 0
        out.append(sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(N, N)))
    return out


def check_stochastic(mdp: FactoredMdp, tol: float = 1e-9) -> None:
    """Every valid (s, a) must put all its mass on valid next states."""
    bits = _state_table(mdp.state_bits)
    valid = _eval_state(mdp.state, bits)
    for a, P in zip(mdp.actions, transition_matrices(mdp)):
        mass = P[valid][:, valid].sum(axis=1).A.ravel()
        bad = np.abs(mass - 1.0) > tol
        if np.any(bad):
            s = int(np.flatnonzero(valid)[np.argmax(bad)])
            raise MdpError(f"transition from state {s} under {a!r} is not stochastic over valid states (mass {mass[bad][0]})")


def rewards(mdp: FactoredMdp) -> np.ndarray:
    bits = _state_table(mdp.state_bits)
    r = np.zeros(bits.shape[0])
    for v, lits in mdp.rewards:
        r += v * _holds(bits, lits)
    return r


def value_iteration(mdp: FactoredMdp, tol: float = 1e-12, max_iter: int = 100_000):
    """Bellman fixpoint over valid states; invalid states get 0."""
    bits = _state_table(mdp.state_bits)
    valid = _eval_state(mdp.state, bits).astype(np.float64)
    r = rewards(mdp) * valid
    Ps = transition_matrices(mdp)
    v = np.zeros_like(r)
    for _ in range(max_iter):
        q = np.max([r + mdp.gamma * (P @ v) for P in Ps], axis=0) * valid
        # contraction: the error after this step is at most gamma/(1-gamma) times the change
        if np.max(np.abs(q - v)) * mdp.gamma / (1 - mdp.gamma) <= tol * max(1.0, np.max(np.abs(q))):
            return q
        v = q
    raise MdpError("value iteration did not converge")


# ----------------------------------------------------------------------
# instance families


FEATURES = ("shaped", "smooth", "painted", "drilled", "polished")
TOOLS = ("sprayer", "bolts", "glue")


def factory_mdp(objects: int = 2, features: int = 3, tools: int = 1, gamma: float = 0.9, seed: int = 0) -> FactoredMdp:
    """A parametric factory: objects are shaped, finished, painted and joined.

    State bits: ``objects * features`` per-object flags (taken in the order
    shaped, smooth, painted, drilled, polished), one ``connected`` flag and
    ``tools`` tool flags. With the defaults there are 8 state bits; 2
    objects with 5 features and 1 tool give 12; 4 objects with 4 features
    and 3 tools give 20. ``seed`` jitters the success probabilities.
    """
    if not 1 <= features <= len(FEATURES):
        raise MdpError(f"features must lie in 1..{len(FEATURES)}")
    if not 0 <= tools <= len(TOOLS):
        raise MdpError(f"tools must lie in 0..{len(TOOLS)}")
    if objects < 1:
        raise MdpError("need at least one object")
    rng = random.Random(seed)
    names = [f"{f}{o}" for o in range(objects) for f in FEATURES[:features]]
    names.append("connected")
    names += list(TOOLS[:tools])
    idx = {n: i for i, n in enumerate(names)}

    def jit(p):
        return round(min(1.0, max(0.0, p + rng.uniform(-0.05, 0.05))), 4)

    def has(n):
        return n in idx

    actions, effects = [], {}
    for o in range(objects):
        sh = f"shaped{o}"
        act = f"shape{o}"
        effs = [Effect(idx[sh], jit(0.9))]
        for f in ("smooth", "painted", "polished"):
            if has(f"{f}{o}"):
                effs.append(Effect(idx[f"{f}{o}"], 0.0))  # reshaping spoils the finish
        actions.append(act)
        effects[act] = tuple(effs)
        if has(f"smooth{o}"):
            actions.append(f"sand{o}")
            effects[f"sand{o}"] = (Effect(idx[f"smooth{o}"], jit(0.8), ((idx[sh], 1),)),)
        if has(f"painted{o}"):
            ready = ((idx[f"smooth{o}"], 1),) if has(f"smooth{o}") else ((idx[sh], 1),)
            effs = []
            if has("sprayer"):
                effs.append(Effect(idx[f"painted{o}"], jit(0.95), ready + ((idx["sprayer"], 1),)))
            effs.append(Effect(idx[f"painted{o}"], jit(0.6), ready))
            actions.append(f"paint{o}")
            effects[f"paint{o}"] = tuple(effs)
        if has(f"drilled{o}"):
            actions.append(f"drill{o}")
            effects[f"drill{o}"] = (Effect(idx[f"drilled{o}"], jit(0.9), ((idx[sh], 1),)),)
        if has(f"polished{o}"):
            need = ((idx[f"painted{o}"], 1),) if has(f"painted{o}") else ()
            actions.append(f"polish{o}")
            effects[f"polish{o}"] = (Effect(idx[f"polished{o}"], jit(0.7), need),)
    joint = tuple((idx[f"shaped{o}"], 1) for o in range(objects))
    effs = []
    if has("bolts") and has("drilled0"):
        drilled = tuple((idx[f"drilled{o}"], 1) for o in range(objects))
        effs.append(Effect(idx["connected"], jit(0.95), joint + drilled + ((idx["bolts"], 1),)))
    if has("glue"):
        effs.append(Effect(idx["connected"], jit(0.8), joint + ((idx["glue"], 1),)))
    effs.append(Effect(idx["connected"], jit(0.3), joint))
    actions.append("connect")
    effects["connect"] = tuple(effs)
    for t in TOOLS[:tools]:
        actions.append(f"fetch_{t}")
        effects[f"fetch_{t}"] = (Effect(idx[t], 1.0),)
    goal = [(idx["connected"], 1)]
    for o in range(objects):
        for f in ("painted", "polished"):
            if has(f"{f}{o}"):
                goal.append((idx[f"{f}{o}"], 1))
    rew = [(10.0, tuple(goal))]
    for o in range(objects):
        if has(f"painted{o}"):
            rew.append((1.0, ((idx[f"painted{o}"], 1),)))
    return FactoredMdp(
        tuple(names),
        tuple(actions),
        effects,
        tuple(rew),
        gamma,
        name=f"factory_o{objects}_f{features}_t{tools}",
        params={"objects": objects, "features": features, "tools": tools, "gamma": gamma, "seed": seed},
    )


def chain_mdp(bits: int = 2, p: float = 0.8, gamma: float = 0.9) -> FactoredMdp:
    """Bits fill up left to right under ``advance``; reward when all are set."""
    effs = tuple(Effect(i, p, ((i - 1, 1),) if i else ()) for i in range(bits))
    return FactoredMdp(
        tuple(f"b{i}" for i in range(bits)),
        ("advance", "stay"),
        {"advance": effs, "stay": ()},
        ((1.0, tuple((i, 1) for i in range(bits))),),
        gamma,
        name=f"chain{bits}",
    )


def loop_mdp(reward: float = 1.0, gamma: float = 0.9) -> FactoredMdp:
    """One bit, one action, every state loops to itself."""
    return FactoredMdp(("b",), ("stay",), {"stay": ()}, ((reward, ()),), gamma, name="loop")
