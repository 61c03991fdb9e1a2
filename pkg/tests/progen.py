"""Random small programs for the compile/ground identity checks."""

from __future__ import annotations

import random

from symqp.lang.syntax import (
    FALSE,
    TRUE,
    And,
    BinOp,
    Bit,
    Constraint,
    Eq,
    Foqp,
    Iff,
    Implies,
    Ind,
    Neg,
    Not,
    Num,
    Or,
    Param,
    ParamDecl,
    Term,
    VecDecl,
)


def _guard(rng: random.Random, scope: dict, depth: int = 2):
    names = list(scope)
    if depth == 0 or rng.random() < 0.3:
        k = rng.random()
        if k < 0.08:
            return rng.choice([TRUE, FALSE])
        name = rng.choice(names)
        w = scope[name]
        if k < 0.6:
            return Bit(name, rng.randrange(w))
        same = [n for n in names if scope[n] == w and n != name]
        if same and k < 0.8:
            return Eq(name, rng.choice(same))
        return Eq(name, rng.randrange(1 << w))
    k = rng.random()
    if k < 0.2:
        return Not(_guard(rng, scope, depth - 1))
    if k < 0.55:
        return And(tuple(_guard(rng, scope, depth - 1) for _ in range(rng.randint(2, 3))))
    if k < 0.85:
        return Or(tuple(_guard(rng, scope, depth - 1) for _ in range(rng.randint(2, 3))))
    if k < 0.93:
        return Implies(_guard(rng, scope, depth - 1), _guard(rng, scope, depth - 1))
    return Iff(_guard(rng, scope, depth - 1), _guard(rng, scope, depth - 1))


def _num(rng: random.Random) -> Num:
    if rng.random() < 0.5:
        return Num(float(rng.randint(-3, 3)))
    return Num(round(rng.uniform(-2.0, 2.0), rng.randint(1, 6)))


def _expr(rng: random.Random, scope: dict, params: dict, depth: int = 2):
    if depth == 0 or rng.random() < 0.35:
        k = rng.random()
        if k < 0.45:
            return _num(rng)
        if k < 0.75:
            return Ind(_guard(rng, scope, 1))
        usable = [p for p, arg in params.items() if arg in scope]
        if usable:
            p = rng.choice(usable)
            return Param(p, (params[p],))
        return _num(rng)
    k = rng.random()
    if k < 0.1:
        return Neg(_expr(rng, scope, params, depth - 1))
    op = rng.choice("+-**")
    return BinOp(op, _expr(rng, scope, params, depth - 1), _expr(rng, scope, params, depth - 1))


def random_program(seed: int, max_x: int = 4, max_y: int = 4) -> Foqp:
    """A random program with at most ``max_x`` column bits and ``max_y`` row bits."""
    rng = random.Random(seed)
    cx = rng.randint(1, max_x)
    ry = rng.randint(1, max(1, max_y - 2))
    rw = rng.randint(1, max(1, max_y - 1 - ry)) if max_y - 1 - ry >= 1 else 0
    vectors = [VecDecl("x", cx), VecDecl("y", ry), VecDecl("z", rng.randint(1, 2))]
    widths = {"x": cx, "x'": cx, "y": ry, "z": vectors[2].width}
    if rw:
        vectors.append(VecDecl("w", rw))
        widths["w"] = rw
    params = {}
    pdecls = []
    for name, arg in (("p", "x"), ("r", "y")):
        if rng.random() < 0.6:
            w = widths[arg]
            pdecls.append(ParamDecl(name, w, tuple(round(rng.uniform(-3, 3), 3) for _ in range(1 << w))))
            params[name] = arg

    def lin_term(rows: dict):
        scope = dict(rows)
        scope["x"] = cx
        bound = ("x",)
        if rng.random() < 0.3:
            bound = ("x", "z")
            scope["z"] = widths["z"]
        return Term(_expr(rng, scope, params), ("x",), None, bound, _guard(rng, scope))

    objective = [lin_term({}) for _ in range(rng.randint(1, 2))]
    if rng.random() < 0.5:
        scope = {"x": cx, "x'": cx}
        objective.append(Term(_expr(rng, scope, params, 1), ("x",), ("x'",), ("x", "x'"), _guard(rng, scope)))
    constraints = []
    for _ in range(rng.randint(0, 3)):
        rows = ("y", "w") if rw and rng.random() < 0.4 else ("y",)
        rscope = {r: widths[r] for r in rows}
        body = [lin_term(rscope) for _ in range(rng.randint(1, 2))]
        if ry == cx and rows == ("y",) and rng.random() < 0.3:
            body.append(Term(_num(rng), ("y",)))
        rhs = _expr(rng, rscope, params, 1)
        constraints.append(Constraint(rows, _guard(rng, rscope, 1), tuple(body), rng.choice([">=", "="]), rhs))
    return Foqp(
        vectors=tuple(vectors),
        params=tuple(pdecls),
        objective=tuple(objective),
        constraints=tuple(constraints),
    )
