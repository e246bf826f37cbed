"""The multi-level range tree.

Level j (for j = 0 .. d-3) is a full implicit binary tree over coordinate j
whose every node owns an associated structure over the remaining coordinates,
holding exactly the non-phantom points of its subtree.  The last two
coordinates live in a CascadeStructure; a 1-dimensional tree degenerates to a
padded sorted array.

Trees are flat arrays addressed with index arithmetic: slot 0 is the root,
children of slot i are 2i+1 and 2i+2, the parent of slot i>0 is (i-1)//2, and
the L padded leaves occupy slots L-1 .. 2L-2.  Padding leaves are phantoms
with +inf sentinel keys, so they sort to the far right and can never satisfy a
finite query.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .cascade import CascadeStructure, fill_buffers_batch_np, pow2ceil
from .core import (
    DimensionMismatch,
    EmptyInput,
    Point,
    PointSet,
    QueryBox,
    composite_key,
    high_key,
    low_key,
    phantom_key,
)


@dataclass
class QueryStats:
    """Operation counters accumulated over one or more queries.

    nodes_visited counts every tree slot whose key a query examines plus every
    canonical subtree root it hands off to; binary_searches counts array
    lower-bound searches; bridge_follows counts O(1) position transfers along
    cascade bridges; reported counts emitted (or counted) points.
    """

    nodes_visited: int = 0
    binary_searches: int = 0
    bridge_follows: int = 0
    reported: int = 0


@dataclass
class BuildCounters:
    """Construction-cost accounting: elements appended by bottom-up merges."""

    merge_moves: int = 0


class ImplicitTree:
    """Full binary tree in one flat array, keyed by one dimension's composite order.

    `ids` is the padded leaf row (length L): real point ids in sorted order
    followed by phantom ids.  Internal keys are not stored; the key of an
    internal slot is the key of the rightmost leaf of its left subtree,
    located by index arithmetic.
    """

    __slots__ = ("dim", "ids", "m", "L", "H", "ktab")

    def __init__(self, dim: int, ids: Sequence[int], m: int, ktab: Sequence[tuple]):
        self.dim = dim
        self.ids = ids
        self.m = m
        self.L = len(ids)
        self.H = self.L.bit_length() - 1
        self.ktab = ktab

    @property
    def leaf_count(self) -> int:
        return self.L

    @property
    def real_count(self) -> int:
        return self.m

    @property
    def n_slots(self) -> int:
        return 2 * self.L - 1

    def is_leaf(self, slot: int) -> bool:
        return slot >= self.L - 1

    def leaf_span(self, slot: int) -> tuple[int, int]:
        """Half-open padded-leaf index range covered by `slot`'s subtree."""
        depth = (slot + 1).bit_length() - 1
        pos = slot - ((1 << depth) - 1)
        span = self.L >> depth
        return pos * span, (pos + 1) * span

    def key(self, slot: int) -> tuple:
        """Split key of an internal slot; the leaf's own key at a leaf slot."""
        lo, hi = self.leaf_span(slot)
        if hi - lo == 1:
            return self.ktab[self.ids[lo]]
        return self.ktab[self.ids[lo + ((hi - lo) >> 1) - 1]]

    def leaf_entry(self, slot: int) -> int:
        """Entry id at a leaf slot (may be a phantom id)."""
        return self.ids[slot - (self.L - 1)]

    def subtree_ids(self, slot: int) -> list[int]:
        """Real entry ids under `slot`, in leaf order."""
        lo, hi = self.leaf_span(slot)
        limit = self.m
        return [e for e in self.ids[lo:hi] if e < limit]


def build_implicit_tree(points: Sequence[Point], dim: int = 0) -> ImplicitTree:
    """Standalone ImplicitTree over `points` in dimension `dim` (self-owned tables)."""
    pts = list(points)
    if not pts:
        raise EmptyInput("cannot build a tree over zero points")
    m = len(pts)
    L = pow2ceil(m)
    ktab = [composite_key(p, dim) for p in pts] + [phantom_key(t) for t in range(L)]
    order = sorted(range(m), key=ktab.__getitem__)
    ids = array("i", order + [m + t for t in range(m, L)])
    return ImplicitTree(dim, ids, m, ktab)


def find_split_node(tree: ImplicitTree, lo_key: tuple, hi_key: tuple,
                    stats: Optional[QueryStats] = None) -> int:
    """Deepest slot where the lo/hi search paths diverge, or the leaf reached.

    Descent rule: go left iff the query key is <= the slot key.
    """
    if stats is None:
        stats = QueryStats()
    slot = 0
    last = tree.L - 1
    stats.nodes_visited += 1
    while slot < last:
        k = tree.key(slot)
        if hi_key <= k:
            slot = 2 * slot + 1
        elif lo_key > k:
            slot = 2 * slot + 2
        else:
            break
        stats.nodes_visited += 1
    return slot


def canonical_subtrees(tree: ImplicitTree, lo_key: tuple, hi_key: tuple,
                       stats: Optional[QueryStats] = None) -> list[int]:
    """Disjoint subtree roots whose leaves are exactly the keys in [lo_key, hi_key].

    At most 2*log2(L) slots (one slot for a single-leaf tree); phantom leaves
    never qualify because their keys exceed every finite hi_key.
    """
    if stats is None:
        stats = QueryStats()
    out: list[int] = []
    split = find_split_node(tree, lo_key, hi_key, stats)
    first_leaf = tree.L - 1
    if split >= first_leaf:
        if lo_key <= tree.key(split) <= hi_key:
            out.append(split)
        return out

    v = 2 * split + 1
    while v < first_leaf:
        stats.nodes_visited += 1
        if lo_key <= tree.key(v):
            out.append(2 * v + 2)
            stats.nodes_visited += 1
            v = 2 * v + 1
        else:
            v = 2 * v + 2
    stats.nodes_visited += 1
    if lo_key <= tree.key(v) <= hi_key:
        out.append(v)

    v = 2 * split + 2
    while v < first_leaf:
        stats.nodes_visited += 1
        if hi_key > tree.key(v):
            out.append(2 * v + 1)
            stats.nodes_visited += 1
            v = 2 * v + 2
        else:
            v = 2 * v + 1
    stats.nodes_visited += 1
    if lo_key <= tree.key(v) <= hi_key:
        out.append(v)
    return out


def merge_sorted(left: Sequence[Point], right: Sequence[Point], dim: int) -> list[Point]:
    """Stable merge of two composite-sorted point lists; |left|+|right| moves."""
    out: list[Point] = []
    i, j = 0, 0
    nl, nr = len(left), len(right)
    while i < nl and j < nr:
        if composite_key(left[i], dim) <= composite_key(right[j], dim):
            out.append(left[i])
            i += 1
        else:
            out.append(right[j])
            j += 1
    out.extend(left[i:])
    out.extend(right[j:])
    return out


class _Slab:
    """Degenerate 1-dimensional structure: a padded sorted leaf row."""

    __slots__ = ("dim", "m", "L", "ids", "ktab", "points")

    def __init__(self, dim, ids, m, ktab, points):
        self.dim = dim
        self.m = m
        self.L = pow2ceil(m)
        self.ids = array("i", list(ids) + [len(points) + t for t in range(m, self.L)])
        self.ktab = ktab
        self.points = points

    def real_entry_count(self) -> int:
        nreal = len(self.points)
        return sum(1 for e in self.ids if e < nreal)

    def _search(self, key, stats) -> int:
        ids, ktab = self.ids, self.ktab
        lo, hi = 0, self.L
        while lo < hi:
            mid = (lo + hi) >> 1
            if ktab[ids[mid]] < key:
                lo = mid + 1
            else:
                hi = mid
        stats.binary_searches += 1
        return lo

    def query_into(self, box, stats, emit):
        lo_k = low_key(box.lo[self.dim])
        hi_k = high_key(box.hi[self.dim])
        ids, ktab, pts = self.ids, self.ktab, self.points
        u = self._search(lo_k, stats)
        while u < self.L:
            e = ids[u]
            if ktab[e] > hi_k:
                break
            emit(pts[e])
            stats.reported += 1
            u += 1

    def count_in(self, box, stats) -> int:
        lo = self._search(low_key(box.lo[self.dim]), stats)
        hi = self._search(high_key(box.hi[self.dim]), stats)
        return max(0, hi - lo)


class _Level:
    """One tree level over dimension `tree.dim` with per-slot associated structures."""

    __slots__ = ("tree", "assoc")

    def __init__(self, tree: ImplicitTree, assoc: list):
        self.tree = tree
        self.assoc = assoc

    def query_into(self, box, stats, emit):
        dim = self.tree.dim
        lo_k = low_key(box.lo[dim])
        hi_k = high_key(box.hi[dim])
        for slot in canonical_subtrees(self.tree, lo_k, hi_k, stats):
            self.assoc[slot].query_into(box, stats, emit)

    def count_in(self, box, stats) -> int:
        dim = self.tree.dim
        lo_k = low_key(box.lo[dim])
        hi_k = high_key(box.hi[dim])
        return sum(
            self.assoc[slot].count_in(box, stats)
            for slot in canonical_subtrees(self.tree, lo_k, hi_k, stats)
        )


_Structure = Union[_Slab, _Level, CascadeStructure]


class LayeredRangeTree:
    """Static d-dimensional orthogonal range search structure.

    Built once from a PointSet; afterwards immutable, so concurrent queries
    are safe as long as each caller uses its own QueryStats accumulator.
    """

    def __init__(self, pointset: PointSet, root: _Structure, key_tables: list):
        self.pointset = pointset
        self.dims = pointset.dims
        self.n = len(pointset)
        self.root = root
        self._key_tables = key_tables

    # -- queries ------------------------------------------------------------

    def query(self, box: QueryBox, stats: Optional[QueryStats] = None) -> list[Point]:
        """All points inside the closed box, sorted by id."""
        if box.dims != self.dims:
            raise DimensionMismatch(f"box of dimension {box.dims} against a {self.dims}-d tree")
        if stats is None:
            stats = QueryStats()
        out: list[Point] = []
        self.root.query_into(box, stats, out.append)
        out.sort(key=lambda p: p.id)
        return out

    def count(self, box: QueryBox, stats: Optional[QueryStats] = None) -> int:
        """|query(box)| computed from bridge positions, without enumeration."""
        if box.dims != self.dims:
            raise DimensionMismatch(f"box of dimension {box.dims} against a {self.dims}-d tree")
        if stats is None:
            stats = QueryStats()
        k = self.root.count_in(box, stats)
        stats.reported += k
        return k

    # -- structure inspection -------------------------------------------------

    def structures(self) -> Iterator[tuple[int, object]]:
        """Yield (level index, structure) over every tree instance, root first."""
        stack = [(0, self.root)]
        while stack:
            level, node = stack.pop()
            yield level, node
            if isinstance(node, _Level):
                for sub in node.assoc:
                    if sub is not None:
                        stack.append((level + 1, sub))


def build(points: PointSet, counters: Optional[BuildCounters] = None) -> LayeredRangeTree:
    """Build the layered range tree.

    The input is sorted once by the first coordinate's composite order; each
    level's tree is then filled top-down in linear time and its associated
    structures are built bottom-up by merging the children's already-sorted
    next-dimension lists, leaves being trivially sorted.
    """
    n = len(points)
    if n == 0:
        raise EmptyInput("cannot build a tree over zero points")
    d = points.dims
    pts = points.by_id
    maxL = pow2ceil(n)

    ktabs = []
    rtabs = []
    rtabs_np = []
    for j in range(d):
        ktab = [(p.coords[j], p.coords, p.id) for p in pts]
        ktab.extend(phantom_key(t) for t in range(maxL))
        ktabs.append(ktab)
        rank = [0] * (n + maxL)
        for r, e in enumerate(sorted(range(n), key=ktab.__getitem__)):
            rank[e] = r
        for t in range(maxL):
            rank[n + t] = n + t
        rtabs.append(rank)
        rtabs_np.append(np.asarray(rank, dtype=np.int64))

    # same-shape cascades are deferred and merged in one vectorized batch
    pending: dict[tuple[int, int], tuple[list, list]] = {}

    def build_struct(ids: list[int], j: int) -> _Structure:
        rem = d - j
        if rem == 1:
            return _Slab(j, ids, len(ids), ktabs[j], pts)
        if rem == 2:
            m = len(ids)
            if m <= 2:
                return CascadeStructure.build_from_ids(
                    ids, j, j + 1, ktabs[j], ktabs[j + 1], rtabs[j + 1], pts,
                    counters, rtabs_np[j + 1]
                )
            L = pow2ceil(m)
            inst = CascadeStructure(
                j, j + 1, m, L, L.bit_length() - 1, n, None,
                ktabs[j], ktabs[j + 1], pts
            )
            group = pending.setdefault((j, L), ([], []))
            group[0].append(inst)
            group[1].append(ids + list(range(n + m, n + L)))
            return inst

        m = len(ids)
        L = pow2ceil(m)
        tree = ImplicitTree(j, array("i", ids + [n + t for t in range(m, L)]), m, ktabs[j])
        n_slots = 2 * L - 1
        first_leaf = L - 1
        assoc: list = [None] * n_slots
        lists: list = [None] * n_slots
        rank_next = rtabs[j + 1]

        if rem == 3:
            # next level is the cascade; register instances for batched merging
            xd, yd = j + 1, j + 2
            ktx, kty, rty, rty_np = ktabs[xd], ktabs[yd], rtabs[yd], rtabs_np[yd]

            def make_sub(sub: list[int]):
                m2 = len(sub)
                if m2 <= 2:
                    return CascadeStructure.build_from_ids(
                        sub, xd, yd, ktx, kty, rty, pts, counters, rty_np
                    )
                L2 = pow2ceil(m2)
                inst = CascadeStructure(
                    xd, yd, m2, L2, L2.bit_length() - 1, n, None, ktx, kty, pts
                )
                group = pending.setdefault((xd, L2), ([], []))
                group[0].append(inst)
                group[1].append(sub + list(range(n + m2, n + L2)))
                return inst
        else:

            def make_sub(sub: list[int]):
                return build_struct(sub, j + 1)

        for t in range(m):
            lists[first_leaf + t] = [ids[t]]
        for slot in range(n_slots - 1, -1, -1):
            if slot < first_leaf:
                c = 2 * slot + 1
                left, right = lists[c], lists[c + 1]
                lists[c] = lists[c + 1] = None
                if right is None:
                    sub = left
                elif left is None:
                    sub = right
                else:
                    sub = []
                    append = sub.append
                    i, k = 0, 0
                    nl, nr = len(left), len(right)
                    while i < nl and k < nr:
                        a = left[i]
                        b = right[k]
                        if rank_next[a] <= rank_next[b]:
                            append(a)
                            i += 1
                        else:
                            append(b)
                            k += 1
                    sub.extend(left[i:])
                    sub.extend(right[k:])
                lists[slot] = sub
                if counters is not None and sub is not None:
                    counters.merge_moves += len(sub)
            else:
                sub = lists[slot]
            if sub is not None:
                assoc[slot] = make_sub(sub)
        return _Level(tree, assoc)

    order = sorted(range(n), key=ktabs[0].__getitem__)
    root = build_struct(order, 0)
    for (j, L), (insts, rows) in pending.items():
        fill_buffers_batch_np(insts, rows, L, rtabs_np[j + 1], counters)
    return LayeredRangeTree(points, root, ktabs)
