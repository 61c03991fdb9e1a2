"""Algebraic decision diagrams with a shared, hash-consed node store.

An :class:`AddManager` owns every node. Diagrams are plain ``int``
handles into the store; two handles are equal exactly when the functions
they denote are equal (given the fixed variable order), so equality tests
are O(1).

Variables are numbered ``0 .. num_vars - 1`` and the number *is* the
level: variable 0 is tested first. New variables can only be appended at
the bottom of the order.

Nodes are never freed implicitly. Call :meth:`AddManager.compact` at a
safe point to rebuild the store from the live diagrams; wrapper objects
registered with :meth:`AddManager.track` are re-pointed automatically.
"""

from __future__ import annotations

import enum
import io
import weakref
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K

__all__ = [
    "AddManager",
    "AddArithmeticError",
    "Op",
    "TERMINAL",
]

TERMINAL = K.TERMINAL


class AddArithmeticError(ArithmeticError):
    """Raised when an operation produces a NaN or infinite terminal."""


class Op(enum.IntEnum):
    ADD = K.ADD
    SUB = K.SUB
    MUL = K.MUL
    MIN = K.MIN
    MAX = K.MAX
    DIV = K.DIV
    DIV0 = K.DIV0  # a / b, and 0 where b == 0


_OP_ALIASES = {
    "+": Op.ADD,
    "-": Op.SUB,
    "*": Op.MUL,
    "/": Op.DIV,
    "min": Op.MIN,
    "max": Op.MAX,
    "div0": Op.DIV0,
}


def _as_op(op) -> int:
    if isinstance(op, str):
        return int(_OP_ALIASES[op])
    return int(Op(op))


class AddManager:
    """Node store, unique table and operation cache.

    Args:
        num_vars: number of variables to create up front.
        cache_limit: maximum number of computed-table entries; when the
            limit is reached the whole table is flushed. ``None`` means the
            table grows without bound.
        capacity: initial node capacity (rounded up to a power of two).
    """

    def __init__(self, num_vars: int = 0, cache_limit: int | None = None, capacity: int = 1 << 14):
        cap = 1 << max(10, int(capacity - 1).bit_length())
        self.nodes = np.full((cap, 3), -1, dtype=np.int32)
        self.vals = np.zeros(cap, dtype=np.float64)
        self.utab = np.full((2 * cap, 4), -1, dtype=np.int32)
        ccap = 2 * cap
        if cache_limit is not None:
            if cache_limit < 1:
                raise ValueError("cache_limit must be positive")
            ccap = 1 << int(2 * cache_limit + 1).bit_length()
        self.ctab = np.full((ccap, 5), -1, dtype=np.int32)
        self.meta = np.zeros(16, dtype=np.int64)
        self.stamp = np.zeros(cap, dtype=np.int32)
        self.memo = np.zeros(cap, dtype=np.int64)
        self.fmemo = np.zeros(cap, dtype=np.float64)
        self._gen = 0
        self.cache_limit = cache_limit
        self.meta[K.M_CACHE_LIMIT] = cache_limit if cache_limit is not None else 1 << 62
        self.num_vars = 0
        self._tags: dict = {}
        self._next_tag = K.T_DYNAMIC
        # keyed by id: tracked objects may compare equal by value
        self._tracked: dict[int, weakref.ref] = {}
        self.stats = {"grow": 0, "compact": 0}
        zero = self.terminal(0.0)
        one = self.terminal(1.0)
        assert zero == K.ZERO and one == K.ONE
        if num_vars:
            self.add_vars(num_vars)

    # ------------------------------------------------------------------
    # store management

    def add_vars(self, count: int) -> list[int]:
        """Append ``count`` fresh variables at the bottom of the order."""
        first = self.num_vars
        self.num_vars += count
        if self.num_vars >= TERMINAL:
            raise ValueError("too many variables")
        return list(range(first, self.num_vars))

    @property
    def size(self) -> int:
        """Number of nodes currently allocated (live or dead)."""
        return int(self.meta[K.M_NODES])

    @property
    def cache_size(self) -> int:
        return int(self.meta[K.M_CACHE])

    @property
    def cache_flushes(self) -> int:
        return int(self.meta[K.M_CACHE_FLUSHES])

    @property
    def cache_enabled(self) -> bool:
        return self.meta[K.M_NOCACHE] == 0

    @cache_enabled.setter
    def cache_enabled(self, flag: bool) -> None:
        self.meta[K.M_NOCACHE] = 0 if flag else 1

    def clear_cache(self) -> None:
        """Drop every computed-table entry; results stay handle-identical."""
        self.ctab.fill(-1)
        self.meta[K.M_CACHE] = 0
        self.meta[K.M_CACHEFULL] = 0

    def _next_gen(self) -> int:
        self._gen += 1
        if self._gen >= 2**31 - 1:
            self.stamp.fill(0)
            self._gen = 1
        return self._gen

    def _grow_nodes(self) -> None:
        cap = 2 * self.nodes.shape[0]
        count = self.size
        nodes = np.full((cap, 3), -1, dtype=np.int32)
        nodes[:count] = self.nodes[:count]
        vals = np.zeros(cap, dtype=np.float64)
        vals[:count] = self.vals[:count]
        self.nodes, self.vals = nodes, vals
        self.utab = np.full((2 * cap, 4), -1, dtype=np.int32)
        K.rehash_unique(self.nodes, self.vals, count, self.utab)
        self.stamp = np.zeros(cap, dtype=np.int32)
        self.memo = np.zeros(cap, dtype=np.int64)
        self.fmemo = np.zeros(cap, dtype=np.float64)
        self._gen = 0
        self.stats["grow"] += 1

    def _grow_cache(self) -> None:
        new = np.full((2 * self.ctab.shape[0], 5), -1, dtype=np.int32)
        self.meta[K.M_CACHE] = K.rehash_cache(self.ctab, new)
        self.ctab = new

    def _check(self, r: int) -> int:
        if r == K.ARITH:
            self.meta[K.M_ARITH] = 0
            raise AddArithmeticError("operation produced a non-finite value")
        return r

    def _run(self, fn: Callable[[], int]) -> int:
        """Call ``fn`` until it no longer runs out of node space."""
        while True:
            r = fn()
            if r == K.FULL:
                if self.meta[K.M_FULL]:
                    self.meta[K.M_FULL] = 0
                    self._grow_nodes()
                if self.meta[K.M_CACHEFULL]:
                    self.meta[K.M_CACHEFULL] = 0
                    self._grow_cache()
                continue
            return self._check(int(r))

    def tag(self, key) -> int:
        """A computed-table tag pair reserved for ``key`` (tag and tag + 1)."""
        t = self._tags.get(key)
        if t is None:
            t = self._next_tag
            self._next_tag += 2
            self._tags[key] = t
        return t

    def track(self, obj) -> None:
        """Register an object exposing ``_roots()``/``_remap(mapping)`` for compaction."""
        key = id(obj)
        tracked = self._tracked

        def drop(ref, key=key):
            if tracked.get(key) is ref:
                del tracked[key]

        tracked[key] = weakref.ref(obj, drop)

    def compact(self, extra_roots: Iterable[int] = ()) -> dict[int, int]:
        """Rebuild the store keeping only nodes reachable from live roots.

        Live roots are those of tracked objects plus ``extra_roots``.
        Returns the old-to-new handle mapping; untracked handles not in
        ``extra_roots`` become invalid. The operation cache is cleared.
        """
        objs = [o for o in (r() for r in list(self._tracked.values())) if o is not None]
        roots = [K.ZERO, K.ONE]
        for o in objs:
            roots.extend(o._roots())
        roots.extend(int(r) for r in extra_roots)
        cap = self.nodes.shape[0]
        new_nodes = np.full((cap, 3), -1, dtype=np.int32)
        new_vals = np.zeros(cap, dtype=np.float64)
        new_utab = np.full((2 * cap, 4), -1, dtype=np.int32)
        new_meta = self.meta.copy()
        new_meta[K.M_NODES] = 0
        gen = self._next_gen()
        mapping = {}
        for r in roots:
            if r not in mapping:
                mapping[r] = int(
                    K.copy_into(
                        self.nodes, self.vals, new_nodes, new_vals, new_utab, new_meta, self.stamp, self.memo, gen, r
                    )
                )
        self.nodes, self.vals, self.utab = new_nodes, new_vals, new_utab
        self.meta[K.M_NODES] = new_meta[K.M_NODES]
        self.clear_cache()
        for o in objs:
            o._remap(mapping)
        self.stats["compact"] += 1
        return mapping

    # ------------------------------------------------------------------
    # construction

    def terminal(self, value: float) -> int:
        """The constant diagram ``value`` (NaN and infinities are rejected)."""
        value = float(value)
        if not np.isfinite(value):
            raise AddArithmeticError(f"terminal value must be finite, got {value}")
        return self._run(lambda: K.term(self.nodes, self.vals, self.utab, self.meta, value))

    def var(self, x: int) -> int:
        """The 0/1 indicator of variable ``x``."""
        return self.node(x, K.ONE, K.ZERO)

    def node(self, x: int, hi: int, lo: int) -> int:
        """The reduced node testing ``x`` with children ``hi`` (x=1) and ``lo``."""
        if not 0 <= x < self.num_vars:
            raise ValueError(f"unknown variable {x}")
        if self.top(hi) <= x or self.top(lo) <= x:
            raise ValueError("children must lie strictly below the tested variable")
        return self._run(lambda: K.mk(self.nodes, self.vals, self.utab, self.meta, x, hi, lo))

    def from_leaves(self, values: np.ndarray, order: Sequence[int]) -> int:
        """Diagram over ``order`` (sorted) whose MSB-first leaf k is ``values[k]``."""
        values = np.ascontiguousarray(values, dtype=np.float64).ravel()
        order = np.asarray(order, dtype=np.int64)
        if values.shape[0] != 1 << order.shape[0]:
            raise ValueError("need 2**len(order) values")
        if order.shape[0] and np.any(np.diff(order) <= 0):
            raise ValueError("variables must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise AddArithmeticError("non-finite leaf value")
        work = np.empty(values.shape[0], dtype=np.int64)
        return self._run(lambda: K.from_leaves(self.nodes, self.vals, self.utab, self.meta, values, order, work))

    # ------------------------------------------------------------------
    # inspection

    def is_terminal(self, f: int) -> bool:
        return self.nodes[f, 0] == TERMINAL

    def value(self, f: int) -> float:
        if not self.is_terminal(f):
            raise ValueError("not a terminal")
        return float(self.vals[f])

    def top(self, f: int) -> int:
        """Top variable of ``f``; terminals report ``TERMINAL``."""
        return int(self.nodes[f, 0])

    def high(self, f: int) -> int:
        return int(self.nodes[f, 1])

    def low(self, f: int) -> int:
        return int(self.nodes[f, 2])

    def node_count(self, *roots: int) -> int:
        """Distinct nodes (terminals included) reachable from ``roots``."""
        arr = np.asarray(roots, dtype=np.int64)
        return int(K.count_nodes(self.nodes, self.stamp, self._next_gen(), arr))

    def support(self, f: int) -> list[int]:
        flags = np.zeros(max(self.num_vars, 1), dtype=np.bool_)
        K.support(self.nodes, self.stamp, self._next_gen(), f, flags)
        return [int(v) for v in np.flatnonzero(flags)]

    def terminal_ids(self, f: int) -> np.ndarray:
        out = np.empty(self.size, dtype=np.int64)
        cnt = np.zeros(1, dtype=np.int64)
        K.collect_terminals(self.nodes, self.stamp, self._next_gen(), f, out, cnt)
        return out[: cnt[0]]

    def terminal_values(self, f: int) -> np.ndarray:
        """Sorted distinct terminal values of ``f``."""
        return np.sort(self.vals[self.terminal_ids(f)])

    def eval(self, f: int, assignment) -> float:
        """Value of ``f`` under ``assignment`` (mapping var -> bit, or a bit sequence)."""
        bits = np.zeros(max(self.num_vars, 1), dtype=np.int8)
        if isinstance(assignment, dict):
            for k, b in assignment.items():
                bits[k] = 1 if b else 0
        else:
            a = np.asarray(assignment, dtype=np.int8)
            bits[: a.shape[0]] = a
        return float(K.evaluate(self.nodes, self.vals, f, bits))

    def extreme(self, f: int, maximum: bool = True) -> float:
        return float(K.extreme(self.nodes, self.vals, self.stamp, self.fmemo, self._next_gen(), f, maximum))

    def arg_extreme(self, f: int, order: Sequence[int], maximum: bool = True) -> int:
        """Smallest MSB-first index over ``order`` attaining the extreme value."""
        weights = np.zeros(max(self.num_vars, 1), dtype=np.int64)
        k = len(order)
        for i, v in enumerate(order):
            weights[v] = 1 << (k - 1 - i)
        gen = self._next_gen()
        return int(K.arg_extreme(self.nodes, self.vals, self.stamp, self.fmemo, gen, f, maximum, weights))

    def to_dense(self, f: int, order: Sequence[int]) -> np.ndarray:
        """Values of ``f`` for all assignments of ``order`` (MSB-first index)."""
        order = np.asarray(order, dtype=np.int64)
        self._check_support(f, order)
        k = order.shape[0]
        weights = np.array([1 << (k - 1 - i) for i in range(k)], dtype=np.int64)
        out = np.empty(1 << k, dtype=np.float64)
        K.to_dense(self.nodes, self.vals, f, order, weights, 0, 0, out)
        return out

    def nonzeros(self, f: int, order: Sequence[int], row_weight: Sequence[int], col_weight: Sequence[int]):
        """Triplets of the nonzero entries; index = sum of weights of set bits."""
        order = np.asarray(order, dtype=np.int64)
        self._check_support(f, order)
        n = int(K.count_nonzeros(self.nodes, self.vals, f, order, 0))
        rr = np.empty(n, dtype=np.int64)
        cc = np.empty(n, dtype=np.int64)
        vv = np.empty(n, dtype=np.float64)
        pos = np.zeros(1, dtype=np.int64)
        wr = np.asarray(row_weight, dtype=np.int64)
        wc = np.asarray(col_weight, dtype=np.int64)
        K.nonzeros(self.nodes, self.vals, f, order, wr, wc, 0, 0, 0, rr, cc, vv, pos)
        return rr, cc, vv

    def _check_support(self, f: int, order: np.ndarray) -> None:
        extra = set(self.support(f)) - set(int(v) for v in order)
        if extra:
            raise ValueError(f"diagram depends on variables outside the order: {sorted(extra)}")
        if order.shape[0] and np.any(np.diff(order) <= 0):
            raise ValueError("order must be strictly increasing")

    # ------------------------------------------------------------------
    # operations

    def apply(self, op, f: int, g: int) -> int:
        """Pointwise ``op`` of two diagrams."""
        o = _as_op(op)
        return self._run(lambda: K.apply(self.nodes, self.vals, self.utab, self.ctab, self.meta, o, f, g))

    def add(self, f: int, g: int) -> int:
        return self.apply(Op.ADD, f, g)

    def sub(self, f: int, g: int) -> int:
        return self.apply(Op.SUB, f, g)

    def mul(self, f: int, g: int) -> int:
        return self.apply(Op.MUL, f, g)

    def neg(self, f: int) -> int:
        return self.apply(Op.SUB, K.ZERO, f)

    def cofactor(self, f: int, x: int, bit: int) -> int:
        """Shannon cofactor of ``f`` with ``x`` fixed to ``bit``."""
        return self._run(
            lambda: K.restrict(self.nodes, self.vals, self.utab, self.ctab, self.meta, f, x, 1 if bit else 0)
        )

    def restrict(self, f: int, cube: dict[int, int]) -> int:
        """Cofactor by several variables at once."""
        if not cube:
            return f
        items = sorted(cube.items())
        cv = np.array([k for k, _ in items], dtype=np.int64)
        cb = np.array([1 if b else 0 for _, b in items], dtype=np.int8)
        return self._run(
            lambda: K.restrict_cube(
                self.nodes, self.vals, self.utab, self.meta, self.stamp, self.memo, self._next_gen(), f, cv, cb, 0
            )
        )

    def _abstract(self, f: int, variables: Iterable[int], op: int) -> int:
        nv = self.num_vars
        inset = np.zeros(nv + 1, dtype=np.bool_)
        for v in variables:
            inset[v] = True
        cnt = np.zeros(nv + 1, dtype=np.int64)
        cnt[:nv] = np.cumsum(inset[:nv][::-1])[::-1]
        r = self._run(
            lambda: K.abstract(
                self.nodes,
                self.vals,
                self.utab,
                self.ctab,
                self.meta,
                self.stamp,
                self.memo,
                self._next_gen(),
                f,
                op,
                inset,
                cnt,
            )
        )
        if op == K.ADD:
            lev = nv if self.is_terminal(f) else self.top(f)
            k = int(cnt[0] - cnt[lev])
            if k:
                r = self._run(
                    lambda: K.scale_pow2(self.nodes, self.vals, self.utab, self.ctab, self.meta, r, k)
                )
        return r

    def sum_abstract(self, f: int, variables: Iterable[int]) -> int:
        """Sum of ``f`` over all assignments of ``variables``."""
        return self._abstract(f, variables, K.ADD)

    def max_abstract(self, f: int, variables: Iterable[int]) -> int:
        """Existential quantification for 0/1 diagrams."""
        return self._abstract(f, variables, K.MAX)

    def min_abstract(self, f: int, variables: Iterable[int]) -> int:
        """Universal quantification for 0/1 diagrams."""
        return self._abstract(f, variables, K.MIN)

    exists = max_abstract
    forall = min_abstract

    def element_sum(self, f: int, variables: Sequence[int]) -> float:
        """Sum over all assignments of ``variables``; ``f`` must not depend on others."""
        nv = self.num_vars
        inset = np.zeros(nv + 1, dtype=np.bool_)
        for v in variables:
            inset[v] = True
        cnt = np.zeros(nv + 1, dtype=np.int64)
        cnt[:nv] = np.cumsum(inset[:nv][::-1])[::-1]
        s = float(K.element_sum(self.nodes, self.vals, self.stamp, self.fmemo, self._next_gen(), f, cnt))
        if not np.isfinite(s):
            raise AddArithmeticError("element sum overflowed")
        return s

    def map_terminals(self, f: int, fn: Callable[[np.ndarray], np.ndarray]) -> int:
        """Apply a vectorised function to every terminal value of ``f``."""
        ids = self.terminal_ids(f)
        new_vals = np.asarray(fn(self.vals[ids].copy()), dtype=np.float64)
        if new_vals.shape != ids.shape:
            new_vals = np.broadcast_to(new_vals, ids.shape).copy()
        if not np.all(np.isfinite(new_vals)):
            raise AddArithmeticError("mapped value is not finite")
        new_ids = np.empty(ids.shape[0], dtype=np.int64)
        self._run(lambda: K.terms_batch(self.nodes, self.vals, self.utab, self.meta, new_vals, new_ids))
        ident = np.arange(max(self.num_vars, 1), dtype=np.int64)

        def go():
            gen = self._next_gen()
            K.seed_memo(self.stamp, self.memo, gen, ids, new_ids)
            return K.rebuild(self.nodes, self.vals, self.utab, self.meta, self.stamp, self.memo, gen, f, ident)

        return self._run(go)

    def relabel(self, f: int, mapping: dict[int, int]) -> int:
        """Rename variables; the renaming must preserve order on the support."""
        sup = self.support(f)
        varmap = np.arange(max(self.num_vars, 1), dtype=np.int64)
        for k, v in mapping.items():
            varmap[k] = v
        images = [int(varmap[v]) for v in sup]
        if any(b <= a for a, b in zip(images, images[1:])):
            raise ValueError("relabelling must be strictly increasing on the support")
        if images and (images[0] < 0 or images[-1] >= self.num_vars):
            raise ValueError("relabelling targets unknown variables")

        def go():
            gen = self._next_gen()
            K.seed_terminals_identity(self.nodes, self.stamp, self.memo, gen, f)
            return K.rebuild(self.nodes, self.vals, self.utab, self.meta, self.stamp, self.memo, gen, f, varmap)

        return self._run(go)

    def ite(self, c: int, f: int, g: int) -> int:
        """``c * f + (1 - c) * g`` for a 0/1 diagram ``c``."""
        a = self.mul(c, f)
        b = self.mul(self.sub(K.ONE, c), g)
        return self.add(a, b)

    # ------------------------------------------------------------------
    # text format

    def dump(self, *roots: int) -> str:
        """Deterministic text dump of the diagrams reachable from ``roots``.

        One node per line, children before parents, numbered from 0 in
        depth-first (high before low) post-order::

            <id> T <value>
            <id> N <var> <high-id> <low-id>
            R <id> ...        (final line: the roots)
        """
        local: dict[int, int] = {}
        lines: list[str] = []

        stack = [(r, False) for r in reversed(roots)]
        while stack:
            n, expanded = stack.pop()
            if n in local:
                continue
            if self.is_terminal(n):
                local[n] = len(local)
                lines.append(f"{local[n]} T {float(self.vals[n])!r}")
            elif expanded:
                local[n] = len(local)
                lines.append(f"{local[n]} N {self.top(n)} {local[self.high(n)]} {local[self.low(n)]}")
            else:
                stack.append((n, True))
                stack.append((self.low(n), False))
                stack.append((self.high(n), False))
        lines.append("R " + " ".join(str(local[r]) for r in roots))
        return "\n".join(lines) + "\n"

    def load(self, text: str) -> list[int]:
        """Inverse of :meth:`dump`; returns the root handles."""
        local: dict[int, int] = {}
        roots: list[int] = []
        for line in io.StringIO(text):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "R":
                roots = [local[int(p)] for p in parts[1:]]
                continue
            idx = int(parts[0])
            if parts[1] == "T":
                local[idx] = self.terminal(float(parts[2]))
            else:
                var = int(parts[2])
                while var >= self.num_vars:
                    self.add_vars(1)
                local[idx] = self.node(var, local[int(parts[3])], local[int(parts[4])])
        return roots
