"""Numba kernels for the decision-diagram store.

All kernels operate on raw arrays owned by :class:`symqp.add.AddManager`::

    nodes  int32[N, 3]   (var, high, low); terminals have var == TERMINAL
    vals   float64[N]    terminal values
    utab   int32[U, 4]   open-addressing unique table (var, high, low, id)
    ctab   int32[C, 5]   computed table (op, a, b, c, result)
    meta   int64[16]     counters and flags (M_* indices)

Allocating kernels return FULL when the node store is out of room. The
manager then grows the arrays and repeats the call; finished sub-results
survive in the computed table so the retry is cheap. Non-finite
arithmetic returns ARITH.

Per-call memo tables use generation stamps: ``stamp[n] == gen`` marks a
valid entry in ``memo``/``fmemo`` for node ``n``.
"""

import numpy as np
from numba import njit

TERMINAL = 1 << 30
FULL = -1
ARITH = -2

# meta layout
M_NODES = 0
M_FULL = 1
M_CACHE = 2
M_CACHEFULL = 3
M_ARITH = 4
M_NOCACHE = 5
M_CACHE_LIMIT = 6
M_CACHE_FLUSHES = 7

# binary operators
ADD = 0
SUB = 1
MUL = 2
MIN = 3
MAX = 4
DIV = 5
DIV0 = 6
NUM_BINOPS = 7

# computed-table tags outside the binary operators
T_RESTRICT = 16
T_DYNAMIC = 64  # schedule-specific tags are allocated from here

ZERO = 0
ONE = 1


@njit(cache=True, inline="always")
def _slot(a, b, c, d, mask):
    h = a * -7046029254386353131
    h ^= b * -4658895280553007687
    h ^= c * 7109453100751455733
    h ^= d * -2401121542806069549
    h ^= h >> 29
    h *= -4658895280553007687
    h ^= h >> 32
    return h & mask


@njit(cache=True)
def mk(nodes, vals, utab, meta, v, hi, lo):
    if hi == lo:
        return hi
    mask = utab.shape[0] - 1
    i = _slot(v, hi, lo, 0, mask)
    while utab[i, 3] >= 0:
        if utab[i, 0] == v and utab[i, 1] == hi and utab[i, 2] == lo:
            return np.int64(utab[i, 3])
        i = (i + 1) & mask
    n = meta[M_NODES]
    if n >= nodes.shape[0] or 2 * (n + 1) > utab.shape[0]:
        meta[M_FULL] = 1
        return FULL
    nodes[n, 0] = v
    nodes[n, 1] = hi
    nodes[n, 2] = lo
    vals[n] = 0.0
    utab[i, 0] = v
    utab[i, 1] = hi
    utab[i, 2] = lo
    utab[i, 3] = n
    meta[M_NODES] = n + 1
    return n


@njit(cache=True)
def term(nodes, vals, utab, meta, x):
    if not (x - x == 0.0):
        meta[M_ARITH] = 1
        return ARITH
    x = x + 0.0  # folds -0.0 into 0.0
    hk = hash(x) & 0x3FFFFFFF
    mask = utab.shape[0] - 1
    i = _slot(TERMINAL, hk, 0, 1, mask)
    while utab[i, 3] >= 0:
        if utab[i, 0] == TERMINAL and utab[i, 1] == hk and vals[utab[i, 3]] == x:
            return np.int64(utab[i, 3])
        i = (i + 1) & mask
    n = meta[M_NODES]
    if n >= nodes.shape[0] or 2 * (n + 1) > utab.shape[0]:
        meta[M_FULL] = 1
        return FULL
    nodes[n, 0] = TERMINAL
    nodes[n, 1] = -1
    nodes[n, 2] = -1
    vals[n] = x
    utab[i, 0] = TERMINAL
    utab[i, 1] = hk
    utab[i, 2] = 0
    utab[i, 3] = n
    meta[M_NODES] = n + 1
    return n


@njit(cache=True)
def cache_get(ctab, meta, op, a, b, c):
    if meta[M_NOCACHE] != 0:
        return -1
    mask = ctab.shape[0] - 1
    i = _slot(op, a, b, c, mask)
    while ctab[i, 0] >= 0:
        if ctab[i, 0] == op and ctab[i, 1] == a and ctab[i, 2] == b and ctab[i, 3] == c:
            return np.int64(ctab[i, 4])
        i = (i + 1) & mask
    return -1


@njit(cache=True)
def cache_put(ctab, meta, op, a, b, c, r):
    """Insert a result; returns FULL when the table must grow first.

    With a finite ``meta[M_CACHE_LIMIT]`` the table is flushed in place
    instead of growing.
    """
    if meta[M_NOCACHE] != 0:
        return 0
    cnt = meta[M_CACHE]
    if cnt >= meta[M_CACHE_LIMIT]:
        for k in range(ctab.shape[0]):
            ctab[k, 0] = -1
        meta[M_CACHE] = 0
        meta[M_CACHE_FLUSHES] += 1
        cnt = 0
    if 2 * (cnt + 1) > ctab.shape[0]:
        meta[M_CACHEFULL] = 1
        return FULL
    mask = ctab.shape[0] - 1
    i = _slot(op, a, b, c, mask)
    while ctab[i, 0] >= 0:
        if ctab[i, 0] == op and ctab[i, 1] == a and ctab[i, 2] == b and ctab[i, 3] == c:
            return 0
        i = (i + 1) & mask
    ctab[i, 0] = op
    ctab[i, 1] = a
    ctab[i, 2] = b
    ctab[i, 3] = c
    ctab[i, 4] = r
    meta[M_CACHE] = cnt + 1
    return 0


@njit(cache=True, inline="always")
def _binop(op, a, b):
    if op == ADD:
        return a + b
    if op == SUB:
        return a - b
    if op == MUL:
        return a * b
    if op == MIN:
        return a if a <= b else b
    if op == MAX:
        return a if a >= b else b
    if op == DIV:
        if b == 0.0:
            return np.inf
        return a / b
    # DIV0
    if b == 0.0:
        return 0.0
    return a / b


@njit(cache=True)
def apply(nodes, vals, utab, ctab, meta, op, f, g):
    vf = nodes[f, 0]
    vg = nodes[g, 0]
    if vf == TERMINAL and vg == TERMINAL:
        return term(nodes, vals, utab, meta, _binop(op, vals[f], vals[g]))
    if op == ADD:
        if f == ZERO:
            return g
        if g == ZERO:
            return f
    elif op == SUB:
        if g == ZERO:
            return f
        if f == g:
            return np.int64(ZERO)
    elif op == MUL:
        if f == ZERO or g == ZERO:
            return np.int64(ZERO)
        if f == ONE:
            return g
        if g == ONE:
            return f
    elif op == MIN or op == MAX:
        if f == g:
            return f
    elif op == DIV0:
        if f == ZERO or g == ZERO:
            return np.int64(ZERO)
        if g == ONE:
            return f
    elif op == DIV:
        if g == ONE:
            return f
    if (op == ADD or op == MUL or op == MIN or op == MAX) and f > g:
        t = f
        f = g
        g = t
        t = vf
        vf = vg
        vg = t
    r = cache_get(ctab, meta, op, f, g, 0)
    if r >= 0:
        return r
    v = vf if vf < vg else vg
    if vf == v:
        f1 = np.int64(nodes[f, 1])
        f0 = np.int64(nodes[f, 2])
    else:
        f1 = f
        f0 = f
    if vg == v:
        g1 = np.int64(nodes[g, 1])
        g0 = np.int64(nodes[g, 2])
    else:
        g1 = g
        g0 = g
    h = apply(nodes, vals, utab, ctab, meta, op, f1, g1)
    if h < 0:
        return h
    l = apply(nodes, vals, utab, ctab, meta, op, f0, g0)
    if l < 0:
        return l
    r = mk(nodes, vals, utab, meta, v, h, l)
    if r < 0:
        return r
    s = cache_put(ctab, meta, op, f, g, 0, r)
    if s < 0:
        return s
    return r


@njit(cache=True)
def restrict(nodes, vals, utab, ctab, meta, f, var, bit):
    v = nodes[f, 0]
    if v > var:
        return f
    if v == var:
        return np.int64(nodes[f, 1]) if bit else np.int64(nodes[f, 2])
    r = cache_get(ctab, meta, T_RESTRICT, f, var, bit)
    if r >= 0:
        return r
    h = restrict(nodes, vals, utab, ctab, meta, np.int64(nodes[f, 1]), var, bit)
    if h < 0:
        return h
    l = restrict(nodes, vals, utab, ctab, meta, np.int64(nodes[f, 2]), var, bit)
    if l < 0:
        return l
    r = mk(nodes, vals, utab, meta, v, h, l)
    if r < 0:
        return r
    s = cache_put(ctab, meta, T_RESTRICT, f, var, bit, r)
    if s < 0:
        return s
    return r


@njit(cache=True)
def restrict_cube(nodes, vals, utab, meta, stamp, memo, gen, f, cvars, cbits, i):
    """Cofactor ``f`` by the cube ``cvars[i:] = cbits[i:]`` (cvars sorted)."""
    v = nodes[f, 0]
    while i < cvars.shape[0] and cvars[i] < v:
        i += 1
    if i == cvars.shape[0] or v == TERMINAL:
        return f
    if stamp[f] == gen:
        return memo[f]
    if v == cvars[i]:
        c = nodes[f, 1] if cbits[i] else nodes[f, 2]
        r = restrict_cube(nodes, vals, utab, meta, stamp, memo, gen, np.int64(c), cvars, cbits, i + 1)
    else:
        h = restrict_cube(nodes, vals, utab, meta, stamp, memo, gen, np.int64(nodes[f, 1]), cvars, cbits, i)
        if h < 0:
            return h
        l = restrict_cube(nodes, vals, utab, meta, stamp, memo, gen, np.int64(nodes[f, 2]), cvars, cbits, i)
        if l < 0:
            return l
        r = mk(nodes, vals, utab, meta, v, h, l)
    if r >= 0:
        stamp[f] = gen
        memo[f] = r
    return r


@njit(cache=True, inline="always")
def _level(nodes, n, nvars):
    v = nodes[n, 0]
    return nvars if v == TERMINAL else v


@njit(cache=True)
def _scale(nodes, vals, utab, ctab, meta, f, k):
    if k == 0 or f == ZERO:
        return f
    t = term(nodes, vals, utab, meta, float(2.0 ** k))
    if t < 0:
        return t
    return apply(nodes, vals, utab, ctab, meta, MUL, f, t)


@njit(cache=True)
def abstract(nodes, vals, utab, ctab, meta, stamp, memo, gen, f, op, inset, cnt):
    """Abstract the variables flagged in ``inset`` with ``op``.

    ``cnt[l]`` is the number of flagged variables at level >= l; it lets
    ADD abstraction account for flagged variables the diagram skips.
    """
    v = nodes[f, 0]
    if v == TERMINAL:
        return f
    if stamp[f] == gen:
        return memo[f]
    nv = cnt.shape[0] - 1
    hi = np.int64(nodes[f, 1])
    lo = np.int64(nodes[f, 2])
    h = abstract(nodes, vals, utab, ctab, meta, stamp, memo, gen, hi, op, inset, cnt)
    if h < 0:
        return h
    l = abstract(nodes, vals, utab, ctab, meta, stamp, memo, gen, lo, op, inset, cnt)
    if l < 0:
        return l
    if op == ADD:
        h = _scale(nodes, vals, utab, ctab, meta, h, cnt[v + 1] - cnt[_level(nodes, hi, nv)])
        if h < 0:
            return h
        l = _scale(nodes, vals, utab, ctab, meta, l, cnt[v + 1] - cnt[_level(nodes, lo, nv)])
        if l < 0:
            return l
    if inset[v]:
        r = apply(nodes, vals, utab, ctab, meta, op, l, h)
    else:
        r = mk(nodes, vals, utab, meta, v, h, l)
    if r >= 0:
        stamp[f] = gen
        memo[f] = r
    return r


@njit(cache=True)
def scale_pow2(nodes, vals, utab, ctab, meta, f, k):
    return _scale(nodes, vals, utab, ctab, meta, f, k)


@njit(cache=True)
def element_sum(nodes, vals, stamp, fmemo, gen, f, cnt):
    """Sum of ``f`` over all assignments of the counted variables."""
    nv = cnt.shape[0] - 1
    return _esum(nodes, vals, stamp, fmemo, gen, f, cnt, nv) * 2.0 ** (cnt[0] - cnt[_level(nodes, f, nv)])


@njit(cache=True)
def _esum(nodes, vals, stamp, fmemo, gen, f, cnt, nv):
    v = nodes[f, 0]
    if v == TERMINAL:
        return vals[f]
    if stamp[f] == gen:
        return fmemo[f]
    hi = np.int64(nodes[f, 1])
    lo = np.int64(nodes[f, 2])
    s1 = _esum(nodes, vals, stamp, fmemo, gen, hi, cnt, nv) * 2.0 ** (cnt[v + 1] - cnt[_level(nodes, hi, nv)])
    s0 = _esum(nodes, vals, stamp, fmemo, gen, lo, cnt, nv) * 2.0 ** (cnt[v + 1] - cnt[_level(nodes, lo, nv)])
    s = s0 + s1
    stamp[f] = gen
    fmemo[f] = s
    return s


@njit(cache=True)
def extreme(nodes, vals, stamp, fmemo, gen, f, want_max):
    v = nodes[f, 0]
    if v == TERMINAL:
        return vals[f]
    if stamp[f] == gen:
        return fmemo[f]
    a = extreme(nodes, vals, stamp, fmemo, gen, np.int64(nodes[f, 1]), want_max)
    b = extreme(nodes, vals, stamp, fmemo, gen, np.int64(nodes[f, 2]), want_max)
    if want_max:
        r = a if a > b else b
    else:
        r = a if a < b else b
    stamp[f] = gen
    fmemo[f] = r
    return r


@njit(cache=True)
def arg_extreme(nodes, vals, stamp, fmemo, gen, f, want_max, weights):
    """Index of the first extreme entry; ``weights[var]`` is the bit weight."""
    target = extreme(nodes, vals, stamp, fmemo, gen, f, want_max)
    idx = 0
    n = f
    while nodes[n, 0] != TERMINAL:
        lo = nodes[n, 2]
        lv = vals[lo] if nodes[lo, 0] == TERMINAL else fmemo[lo]
        if lv == target:
            n = lo
        else:
            idx += weights[nodes[n, 0]]
            n = nodes[n, 1]
    return idx


@njit(cache=True)
def collect_terminals(nodes, stamp, gen, f, out, cnt):
    if stamp[f] == gen:
        return
    stamp[f] = gen
    if nodes[f, 0] == TERMINAL:
        out[cnt[0]] = f
        cnt[0] += 1
        return
    collect_terminals(nodes, stamp, gen, np.int64(nodes[f, 1]), out, cnt)
    collect_terminals(nodes, stamp, gen, np.int64(nodes[f, 2]), out, cnt)


@njit(cache=True)
def _count(nodes, stamp, gen, f):
    if stamp[f] == gen:
        return 0
    stamp[f] = gen
    if nodes[f, 0] == TERMINAL:
        return 1
    return 1 + _count(nodes, stamp, gen, np.int64(nodes[f, 1])) + _count(nodes, stamp, gen, np.int64(nodes[f, 2]))


@njit(cache=True)
def count_nodes(nodes, stamp, gen, roots):
    total = 0
    for r in roots:
        total += _count(nodes, stamp, gen, r)
    return total


@njit(cache=True)
def support(nodes, stamp, gen, f, flags):
    if stamp[f] == gen:
        return
    stamp[f] = gen
    v = nodes[f, 0]
    if v == TERMINAL:
        return
    flags[v] = True
    support(nodes, stamp, gen, np.int64(nodes[f, 1]), flags)
    support(nodes, stamp, gen, np.int64(nodes[f, 2]), flags)


@njit(cache=True)
def seed_memo(stamp, memo, gen, ids, newids):
    for k in range(ids.shape[0]):
        stamp[ids[k]] = gen
        memo[ids[k]] = newids[k]


@njit(cache=True)
def terms_batch(nodes, vals, utab, meta, values, out):
    for k in range(values.shape[0]):
        r = term(nodes, vals, utab, meta, values[k])
        if r < 0:
            return r
        out[k] = r
    return 0


@njit(cache=True)
def rebuild(nodes, vals, utab, meta, stamp, memo, gen, f, varmap):
    """Copy ``f`` with relabelled variables; terminals must be pre-seeded.

    ``varmap`` must be strictly increasing on the support of ``f``.
    """
    if stamp[f] == gen:
        return memo[f]
    h = rebuild(nodes, vals, utab, meta, stamp, memo, gen, np.int64(nodes[f, 1]), varmap)
    if h < 0:
        return h
    l = rebuild(nodes, vals, utab, meta, stamp, memo, gen, np.int64(nodes[f, 2]), varmap)
    if l < 0:
        return l
    r = mk(nodes, vals, utab, meta, varmap[nodes[f, 0]], h, l)
    if r >= 0:
        stamp[f] = gen
        memo[f] = r
    return r


@njit(cache=True)
def seed_terminals_identity(nodes, stamp, memo, gen, f):
    if stamp[f] == gen:
        return
    if nodes[f, 0] == TERMINAL:
        stamp[f] = gen
        memo[f] = f
        return
    seed_terminals_identity(nodes, stamp, memo, gen, np.int64(nodes[f, 1]))
    seed_terminals_identity(nodes, stamp, memo, gen, np.int64(nodes[f, 2]))


@njit(cache=True)
def evaluate(nodes, vals, f, assign):
    n = f
    while nodes[n, 0] != TERMINAL:
        if assign[nodes[n, 0]]:
            n = nodes[n, 1]
        else:
            n = nodes[n, 2]
    return vals[n]


@njit(cache=True)
def to_dense(nodes, vals, f, order, weights, i, idx, out):
    if i == order.shape[0]:
        out[idx] = vals[f]
        return
    v = order[i]
    if nodes[f, 0] == v:
        to_dense(nodes, vals, np.int64(nodes[f, 1]), order, weights, i + 1, idx + weights[i], out)
        to_dense(nodes, vals, np.int64(nodes[f, 2]), order, weights, i + 1, idx, out)
    else:
        to_dense(nodes, vals, f, order, weights, i + 1, idx + weights[i], out)
        to_dense(nodes, vals, f, order, weights, i + 1, idx, out)


@njit(cache=True)
def count_nonzeros(nodes, vals, f, order, i):
    if f == ZERO:
        return 0
    if i == order.shape[0]:
        return 1
    if nodes[f, 0] == order[i]:
        return count_nonzeros(nodes, vals, np.int64(nodes[f, 1]), order, i + 1) + count_nonzeros(
            nodes, vals, np.int64(nodes[f, 2]), order, i + 1
        )
    return 2 * count_nonzeros(nodes, vals, f, order, i + 1)


@njit(cache=True)
def nonzeros(nodes, vals, f, order, wr, wc, i, ri, ci, out_r, out_c, out_v, pos):
    if f == ZERO:
        return
    if i == order.shape[0]:
        k = pos[0]
        out_r[k] = ri
        out_c[k] = ci
        out_v[k] = vals[f]
        pos[0] = k + 1
        return
    if nodes[f, 0] == order[i]:
        nonzeros(nodes, vals, np.int64(nodes[f, 1]), order, wr, wc, i + 1, ri + wr[i], ci + wc[i], out_r, out_c, out_v, pos)
        nonzeros(nodes, vals, np.int64(nodes[f, 2]), order, wr, wc, i + 1, ri, ci, out_r, out_c, out_v, pos)
    else:
        nonzeros(nodes, vals, f, order, wr, wc, i + 1, ri + wr[i], ci + wc[i], out_r, out_c, out_v, pos)
        nonzeros(nodes, vals, f, order, wr, wc, i + 1, ri, ci, out_r, out_c, out_v, pos)


@njit(cache=True)
def from_leaves(nodes, vals, utab, meta, values, order, work):
    """Build the diagram whose leaf ``k`` (MSB-first over ``order``) is ``values[k]``."""
    m = values.shape[0]
    for k in range(m):
        r = term(nodes, vals, utab, meta, values[k])
        if r < 0:
            return r
        work[k] = r
    for j in range(order.shape[0] - 1, -1, -1):
        m //= 2
        v = order[j]
        for k in range(m):
            r = mk(nodes, vals, utab, meta, v, work[2 * k + 1], work[2 * k])
            if r < 0:
                return r
            work[k] = r
    return work[0]


@njit(cache=True)
def sched_sum(nodes, vals, utab, ctab, meta, v, t, kind, vvar, nsum, tag):
    """Sum of vector ``v`` over the SUM events at positions >= t (a terminal id)."""
    if nodes[v, 0] == TERMINAL:
        if nsum[t] == 0:
            return v
        return term(nodes, vals, utab, meta, vals[v] * 2.0 ** nsum[t])
    if nsum[t] == 0:
        return v
    while kind[t] != 1:
        t += 1
    r = cache_get(ctab, meta, tag, v, t, 0)
    if r >= 0:
        return r
    x = vvar[t]
    if nodes[v, 0] == x:
        v1 = np.int64(nodes[v, 1])
        v0 = np.int64(nodes[v, 2])
    else:
        v1 = v
        v0 = v
    a = sched_sum(nodes, vals, utab, ctab, meta, v1, t + 1, kind, vvar, nsum, tag)
    if a < 0:
        return a
    b = sched_sum(nodes, vals, utab, ctab, meta, v0, t + 1, kind, vvar, nsum, tag)
    if b < 0:
        return b
    r = term(nodes, vals, utab, meta, vals[b] + vals[a])
    if r < 0:
        return r
    s = cache_put(ctab, meta, tag, v, t, 0, r)
    if s < 0:
        return s
    return r


@njit(cache=True)
def matvec(nodes, vals, utab, ctab, meta, A, v, t, kind, avar, vvar, outv, nsum, tag):
    """Block-recursive product of matrix ``A`` with vector ``v``.

    The schedule lists the matrix variables in level order. An OUT event
    (kind 0) splits the output on ``outv[t]``; a SUM event (kind 1)
    pairs the matrix variable with vector variable ``vvar[t]`` and adds
    the two partial products.
    """
    if A == ZERO or v == ZERO:
        return np.int64(ZERO)
    ne = kind.shape[0]
    if t == ne:
        return term(nodes, vals, utab, meta, vals[A] * vals[v])
    if nodes[A, 0] == TERMINAL:
        s = sched_sum(nodes, vals, utab, ctab, meta, v, t, kind, vvar, nsum, tag + 1)
        if s < 0:
            return s
        return term(nodes, vals, utab, meta, vals[A] * vals[s])
    r = cache_get(ctab, meta, tag, A, v, t)
    if r >= 0:
        return r
    av = avar[t]
    if nodes[A, 0] == av:
        a1 = np.int64(nodes[A, 1])
        a0 = np.int64(nodes[A, 2])
    else:
        a1 = A
        a0 = A
    if kind[t] == 0:
        if a1 == a0:
            r = matvec(nodes, vals, utab, ctab, meta, A, v, t + 1, kind, avar, vvar, outv, nsum, tag)
        else:
            h = matvec(nodes, vals, utab, ctab, meta, a1, v, t + 1, kind, avar, vvar, outv, nsum, tag)
            if h < 0:
                return h
            l = matvec(nodes, vals, utab, ctab, meta, a0, v, t + 1, kind, avar, vvar, outv, nsum, tag)
            if l < 0:
                return l
            r = mk(nodes, vals, utab, meta, outv[t], h, l)
    else:
        x = vvar[t]
        if nodes[v, 0] == x:
            v1 = np.int64(nodes[v, 1])
            v0 = np.int64(nodes[v, 2])
        else:
            v1 = v
            v0 = v
        if a1 == a0 and v1 == v0:
            u = matvec(nodes, vals, utab, ctab, meta, A, v, t + 1, kind, avar, vvar, outv, nsum, tag)
            if u < 0:
                return u
            r = apply(nodes, vals, utab, ctab, meta, ADD, u, u)
        else:
            h = matvec(nodes, vals, utab, ctab, meta, a1, v1, t + 1, kind, avar, vvar, outv, nsum, tag)
            if h < 0:
                return h
            l = matvec(nodes, vals, utab, ctab, meta, a0, v0, t + 1, kind, avar, vvar, outv, nsum, tag)
            if l < 0:
                return l
            r = apply(nodes, vals, utab, ctab, meta, ADD, l, h)
    if r < 0:
        return r
    s = cache_put(ctab, meta, tag, A, v, t, r)
    if s < 0:
        return s
    return r


@njit(cache=True)
def diagonal(nodes, vals, utab, ctab, meta, A, t, rv, cv, ov, tag):
    """Vector over ``ov`` holding ``A`` restricted to ``rv[i] == cv[i]``."""
    if t == rv.shape[0] or nodes[A, 0] == TERMINAL:
        return A
    r = cache_get(ctab, meta, tag, A, t, 0)
    if r >= 0:
        return r
    a1 = restrict(nodes, vals, utab, ctab, meta, A, rv[t], 1)
    if a1 < 0:
        return a1
    a1 = restrict(nodes, vals, utab, ctab, meta, a1, cv[t], 1)
    if a1 < 0:
        return a1
    a0 = restrict(nodes, vals, utab, ctab, meta, A, rv[t], 0)
    if a0 < 0:
        return a0
    a0 = restrict(nodes, vals, utab, ctab, meta, a0, cv[t], 0)
    if a0 < 0:
        return a0
    h = diagonal(nodes, vals, utab, ctab, meta, a1, t + 1, rv, cv, ov, tag)
    if h < 0:
        return h
    l = diagonal(nodes, vals, utab, ctab, meta, a0, t + 1, rv, cv, ov, tag)
    if l < 0:
        return l
    r = mk(nodes, vals, utab, meta, ov[t], h, l)
    if r < 0:
        return r
    s = cache_put(ctab, meta, tag, A, t, 0, r)
    if s < 0:
        return s
    return r


@njit(cache=True)
def copy_into(nodes, vals, new_nodes, new_vals, new_utab, new_meta, stamp, memo, gen, f):
    if stamp[f] == gen:
        return memo[f]
    if nodes[f, 0] == TERMINAL:
        r = term(new_nodes, new_vals, new_utab, new_meta, vals[f])
    else:
        h = copy_into(nodes, vals, new_nodes, new_vals, new_utab, new_meta, stamp, memo, gen, np.int64(nodes[f, 1]))
        l = copy_into(nodes, vals, new_nodes, new_vals, new_utab, new_meta, stamp, memo, gen, np.int64(nodes[f, 2]))
        r = mk(new_nodes, new_vals, new_utab, new_meta, nodes[f, 0], h, l)
    stamp[f] = gen
    memo[f] = r
    return r


@njit(cache=True)
def rehash_unique(nodes, vals, count, utab):
    mask = utab.shape[0] - 1
    for n in range(count):
        v = nodes[n, 0]
        if v == TERMINAL:
            hk = hash(vals[n]) & 0x3FFFFFFF
            i = _slot(TERMINAL, hk, 0, 1, mask)
            a = hk
            b = 0
        else:
            a = nodes[n, 1]
            b = nodes[n, 2]
            i = _slot(v, a, b, 0, mask)
        while utab[i, 3] >= 0:
            i = (i + 1) & mask
        utab[i, 0] = v
        utab[i, 1] = a
        utab[i, 2] = b
        utab[i, 3] = n


@njit(cache=True)
def rehash_cache(old, new):
    mask = new.shape[0] - 1
    cnt = 0
    for k in range(old.shape[0]):
        if old[k, 0] < 0:
            continue
        i = _slot(old[k, 0], old[k, 1], old[k, 2], old[k, 3], mask)
        while new[i, 0] >= 0:
            i = (i + 1) & mask
        for j in range(5):
            new[i, j] = old[k, j]
        cnt += 1
    return cnt
