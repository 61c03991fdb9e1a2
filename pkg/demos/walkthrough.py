"""Compile the two-vector example, look at its diagrams, then solve it.

    python demos/walkthrough.py
"""

from pathlib import Path

import numpy as np

from symqp.baseline import ground_qp, solve_ground
from symqp.ipm import ipm_solve
from symqp.lang import compile, ground, parse
from symqp.linalg import nnz, to_dense

MODEL = Path(__file__).resolve().parent.parent / "models" / "xy.foqp"

source = MODEL.read_text()
print(source)

prog = parse(source)
qp = compile(prog)
print("A =\n", to_dense(qp.A))
print("b =", to_dense(qp.b), " c =", to_dense(qp.c), " senses =", qp.senses)
print("nnz(A) =", nnz(qp.A), " diagram nodes =", qp.summary()["nodes"])

# the grounder instantiates every guard explicitly; it must agree entry for entry
g = ground(prog)
assert np.array_equal(to_dense(qp.A), g.A)
print("compile == ground: yes")

rep = ipm_solve(qp)
print()
print(rep.to_text())
print("x =", rep.x)

ref = solve_ground(ground_qp(qp))
print("ground objective:", ref.objective)
