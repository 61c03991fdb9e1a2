"""Walsh matrices: 4^p entries, a diagram that grows by a constant per bit.

    python demos/walsh_scaling.py
"""

import time

import numpy as np

from symqp.add import AddManager
from symqp.apps.bpdn import fwht
from symqp.linalg import alloc_matrix_bits, matvec, to_dense, vector_from_dense, walsh

print(f"{'p':>3} {'entries':>12} {'nodes':>6} {'matvec s':>9} {'max err':>9}")
for p in range(1, 15):
    m = AddManager()
    rows, cols = alloc_matrix_bits(m, p, p)
    W = walsh(p, m, rows, cols)
    x = np.random.default_rng(p).standard_normal(1 << p)
    t0 = time.perf_counter()
    y = to_dense(matvec(W, vector_from_dense(x, m, cols)))
    dt = time.perf_counter() - t0
    err = np.max(np.abs(y - fwht(x)))
    print(f"{p:>3} {4**p:>12} {W.node_count():>6} {dt:>9.4f} {err:>9.1e}")

# Stacking copies of W under selector bits the diagram never tests leaves
# the node count alone while the stored entries double.
from symqp.apps.bench import block_family, format_table  # noqa: E402

print()
print(format_table(block_family(p=10, steps=5)), end="")
