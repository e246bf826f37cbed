"""Fractional cascading over the last two dimensions.

A CascadeStructure is a full binary tree over coordinate x (the second-to-last
dimension) whose every node carries its subtree's points sorted by coordinate
y (the last dimension), plus bridge indices linking each entry to the first
not-smaller entry in each child's array.  A 2D query then needs exactly one
binary search, at the split node; every other position follows bridges in
constant time per level.

Storage is a single flat int32 buffer per structure, addressed by index
arithmetic.  With L padded leaves and height H = log2(L):

    row r in 0..H        node arrays at depth H-r, offset r*L; the array of
                         the node at (depth, pos) is the chunk of width
                         2^r starting at pos*2^r, sorted by y.  Row 0 is the
                         leaf ids sorted by x (so it doubles as the x-tree's
                         leaf order).
    lb rows r in 1..H    left bridges, offset L*(H+r)
    rb rows r in 1..H    right bridges, offset L*(2H+r)

Entries are ids into the owning point list; ids >= nreal are phantom padding
with key (+inf, (+inf,), leaf_index), so every chunk is full, bridges are
total, and no finite query can ever match a phantom.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import EmptyInput, Point, high_key, low_key, phantom_key

_NUMPY_MIN_LEAVES = 128  # below this the scalar merge loop is faster


def pow2ceil(n: int) -> int:
    """Smallest power of two >= n (n >= 1)."""
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def _merged_buffer_np(ids, m, L, H, nreal, ry_np) -> np.ndarray:
    """Vectorized bottom-up merge; bit-identical to the scalar merge loop.

    Per depth, the merge cursor of every element is its count of smaller
    elements in the sibling half (one searchsorted over all chunks at once,
    kept per-chunk by rank offsets); those cursors are both the scatter
    positions and the bridge values.
    """
    rows = np.empty((H + 1, L), dtype=np.int32)
    rows[0, :m] = ids
    if m < L:
        rows[0, m:] = np.arange(nreal + m, nreal + L, dtype=np.int32)
    lbs = np.empty((H, L), dtype=np.int32)
    rbs = np.empty((H, L), dtype=np.int32)
    ranks = ry_np[rows[0]]
    big = np.int64(len(ry_np))
    for r in range(1, H + 1):
        span = 1 << r
        half = span >> 1
        nch = L >> r
        pr = ranks.reshape(nch, 2, half)
        offs = (np.arange(nch, dtype=np.int64) * big)[:, None]
        lflat = (pr[:, 0, :] + offs).ravel()
        rflat = (pr[:, 1, :] + offs).ravel()
        chunk_off = np.repeat(np.arange(nch, dtype=np.int64) * half, half)
        cr = np.searchsorted(rflat, lflat) - chunk_off
        cl = np.searchsorted(lflat, rflat) - chunk_off
        i_w = np.tile(np.arange(half, dtype=np.int64), nch)
        base = np.repeat(np.arange(nch, dtype=np.int64) * span, half)
        tl = base + i_w + cr
        tr = base + i_w + cl
        pid = rows[r - 1].reshape(nch, 2, half)
        out = rows[r]
        lb = lbs[r - 1]
        rb = rbs[r - 1]
        out[tl] = pid[:, 0, :].ravel()
        out[tr] = pid[:, 1, :].ravel()
        lb[tl] = i_w
        rb[tl] = cr
        lb[tr] = cl
        rb[tr] = i_w
        ranks = ry_np[out]
    return np.concatenate([rows.reshape(-1), lbs.reshape(-1), rbs.reshape(-1)])


def fill_buffers_batch_np(instances, padded_rows, L, ry_np, counters=None) -> None:
    """Run the bottom-up merge for many same-L structures in one vectorized pass.

    `instances` are CascadeStructures with buf=None; `padded_rows` their leaf
    rows (ids padded with phantoms).  Produces exactly the buffers the
    per-instance paths would.
    """
    G = len(instances)
    H = L.bit_length() - 1
    rows = np.empty((H + 1, G, L), dtype=np.int32)
    rows[0] = np.array(padded_rows, dtype=np.int32)
    lbs = np.empty((H, G, L), dtype=np.int32)
    rbs = np.empty((H, G, L), dtype=np.int32)
    ranks = ry_np[rows[0]]
    big = np.int64(len(ry_np))
    for r in range(1, H + 1):
        span = 1 << r
        half = span >> 1
        nch = (G * L) >> r
        pr = ranks.reshape(nch, 2, half)
        offs = (np.arange(nch, dtype=np.int64) * big)[:, None]
        lflat = (pr[:, 0, :] + offs).ravel()
        rflat = (pr[:, 1, :] + offs).ravel()
        chunk_off = np.repeat(np.arange(nch, dtype=np.int64) * half, half)
        cr = np.searchsorted(rflat, lflat) - chunk_off
        cl = np.searchsorted(lflat, rflat) - chunk_off
        i_w = np.tile(np.arange(half, dtype=np.int64), nch)
        base = np.repeat(np.arange(nch, dtype=np.int64) * span, half)
        tl = base + i_w + cr
        tr = base + i_w + cl
        pid = rows[r - 1].reshape(nch, 2, half)
        out = rows[r].reshape(-1)
        lb = lbs[r - 1].reshape(-1)
        rb = rbs[r - 1].reshape(-1)
        out[tl] = pid[:, 0, :].ravel()
        out[tr] = pid[:, 1, :].ravel()
        lb[tl] = i_w
        rb[tl] = cr
        lb[tr] = cl
        rb[tr] = i_w
        ranks = ry_np[rows[r]]
    bufs = np.concatenate(
        [
            rows.transpose(1, 0, 2).reshape(G, (H + 1) * L),
            lbs.transpose(1, 0, 2).reshape(G, H * L),
            rbs.transpose(1, 0, 2).reshape(G, H * L),
        ],
        axis=1,
    )
    if counters is not None:
        counters.merge_moves += G * L * H
    for g, inst in enumerate(instances):
        inst.buf = bufs[g]


def lower_bound(entries: Sequence, key, stats=None) -> int:
    """Smallest index with entries[i] >= key; len(entries) if none.

    Counts as exactly one binary search when a stats accumulator is given.
    """
    lo, hi = 0, len(entries)
    while lo < hi:
        mid = (lo + hi) >> 1
        if entries[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if stats is not None:
        stats.binary_searches += 1
    return lo


@dataclass
class CascadeNode:
    """Inspection view of one node's array and bridges (tests, debugging)."""

    points: list[Optional[Point]]
    keys: list[tuple]
    left_bridge: list[int]
    right_bridge: list[int]

    @property
    def y_values(self) -> list[float]:
        return [k[0] for k in self.keys]


class CascadeStructure:
    """The last-two-dimension structure: x-tree plus per-node y-arrays with bridges."""

    __slots__ = ("xdim", "ydim", "m", "L", "H", "nreal", "buf", "ktab_x", "ktab_y", "points")

    def __init__(self, xdim, ydim, m, L, H, nreal, buf, ktab_x, ktab_y, points):
        self.xdim = xdim
        self.ydim = ydim
        self.m = m          # real points in this structure
        self.L = L          # padded leaf count (power of two)
        self.H = H          # log2(L)
        self.nreal = nreal  # ids >= nreal are phantoms
        self.buf = buf
        self.ktab_x = ktab_x
        self.ktab_y = ktab_y
        self.points = points

    # -- construction -------------------------------------------------------

    @classmethod
    def build_from_ids(cls, ids, xdim, ydim, ktab_x, ktab_y, rank_y, points,
                       counters=None, rank_y_np=None):
        """Build from ids sorted by the x composite order.

        ktab_*/rank_y are entry tables indexed by id, already extended with
        phantom slots (id nreal+t -> padding leaf t).  Bottom-up: leaf arrays
        are the single ids; every internal node stable-merges its children's
        arrays by y rank, recording both bridge cursors during the merge.
        Large structures run the same merge vectorized (rank_y_np, when
        supplied, is rank_y as an int64 ndarray); the resulting buffer is
        identical either way.
        """
        m = len(ids)
        nreal = len(points)
        if m == 1:
            buf = array("i", ids)
            return cls(xdim, ydim, m, 1, 0, nreal, buf, ktab_x, ktab_y, points)
        if m == 2:
            a, b = ids
            if counters is not None:
                counters.merge_moves += 2
            if rank_y[a] <= rank_y[b]:
                buf = array("i", (a, b, a, b, 0, 1, 0, 0))
            else:
                buf = array("i", (a, b, b, a, 0, 0, 0, 1))
            return cls(xdim, ydim, 2, 2, 1, nreal, buf, ktab_x, ktab_y, points)

        L = 1 << (m - 1).bit_length()
        H = L.bit_length() - 1
        if counters is not None:
            counters.merge_moves += L * H
        if m >= _NUMPY_MIN_LEAVES and rank_y_np is not None:
            buf = _merged_buffer_np(ids, m, L, H, nreal, rank_y_np)
            return cls(xdim, ydim, m, L, H, nreal, buf, ktab_x, ktab_y, points)

        ry = rank_y
        bl = [0] * (L * (3 * H + 1))
        bl[0:m] = ids
        for t in range(m, L):
            bl[t] = nreal + t
        for r in range(1, H + 1):
            span = 1 << r
            half = span >> 1
            src = (r - 1) * L
            dst = r * L
            lbo = (H + r) * L
            rbo = (2 * H + r) * L
            for base in range(0, L, span):
                ib = src + base
                mid = ib + half
                i = ib
                j = mid
                end = mid + half
                t = dst + base
                lt = lbo + base
                rt = rbo + base
                while i < mid and j < end:
                    a = bl[i]
                    b = bl[j]
                    if ry[a] <= ry[b]:
                        bl[t] = a
                        bl[lt] = i - ib
                        bl[rt] = j - mid
                        i += 1
                    else:
                        bl[t] = b
                        bl[lt] = i - ib
                        bl[rt] = j - mid
                        j += 1
                    t += 1
                    lt += 1
                    rt += 1
                while i < mid:
                    bl[t] = bl[i]
                    bl[lt] = i - ib
                    bl[rt] = half
                    i += 1
                    t += 1
                    lt += 1
                    rt += 1
                while j < end:
                    bl[t] = bl[j]
                    bl[lt] = half
                    bl[rt] = j - mid
                    j += 1
                    t += 1
                    lt += 1
                    rt += 1
        buf = array("i", bl)
        return cls(xdim, ydim, m, L, H, nreal, buf, ktab_x, ktab_y, points)

    # -- structure access ----------------------------------------------------

    @property
    def n_slots(self) -> int:
        return 2 * self.L - 1

    @property
    def tree(self):
        """The x-dimension ImplicitTree view over this structure's leaves."""
        from .tree import ImplicitTree

        return ImplicitTree(self.xdim, self.buf[0 : self.L], self.m, self.ktab_x)

    def _locate(self, slot: int) -> tuple[int, int, int]:
        """(row r, pos, span) of a heap slot."""
        depth = (slot + 1).bit_length() - 1
        pos = slot - ((1 << depth) - 1)
        r = self.H - depth
        return r, pos, 1 << r

    def node(self, slot: int) -> CascadeNode:
        """Materialize one node's entries and bridges for inspection."""
        r, pos, span = self._locate(slot)
        buf, L, H = self.buf, self.L, self.H
        abase = r * L + pos * span
        eids = buf[abase : abase + span]
        pts = [self.points[e] if e < self.nreal else None for e in eids]
        keys = [self.ktab_y[e] for e in eids]
        if r == 0:
            return CascadeNode(pts, keys, [], [])
        lbase = L * (H + r) + pos * span
        rbase = L * (2 * H + r) + pos * span
        return CascadeNode(
            pts,
            keys,
            list(buf[lbase : lbase + span]),
            list(buf[rbase : rbase + span]),
        )

    def real_entry_count(self) -> int:
        """Real (non-phantom) entries stored across all node arrays."""
        end = self.L * (self.H + 1)
        nreal = self.nreal
        return sum(1 for e in self.buf[0:end] if e < nreal)

    def subtree_leaf_ids(self, slot: int) -> list[int]:
        """Real point ids in the subtree of `slot`, in x order."""
        r, pos, span = self._locate(slot)
        return [e for e in self.buf[pos * span : (pos + 1) * span] if e < self.nreal]

    # -- queries -------------------------------------------------------------

    def _find_split(self, xlo_k, xhi_k, stats) -> tuple[int, int]:
        """(depth, pos) where the xlo/xhi descents diverge, or the leaf reached."""
        buf, kx, L, H = self.buf, self.ktab_x, self.L, self.H
        depth, pos = 0, 0
        stats.nodes_visited += 1
        while depth < H:
            span = L >> depth
            k = kx[buf[pos * span + (span >> 1) - 1]]
            if xhi_k <= k:
                pos <<= 1
            elif xlo_k > k:
                pos = (pos << 1) + 1
            else:
                break
            depth += 1
            stats.nodes_visited += 1
        return depth, pos

    def _emit_run(self, abase, span, q, yhi_k, stats, emit, probe):
        """Emit entries of the array at abase from position q while key <= yhi_k."""
        if probe is not None:
            probe(abase, span, q)
        buf, ky, pts = self.buf, self.ktab_y, self.points
        u = abase + q
        end = abase + span
        while u < end:
            e = buf[u]
            if ky[e] > yhi_k:
                break
            emit(pts[e])
            stats.reported += 1
            u += 1

    def query(self, xlo, xhi, ylo, yhi, stats, emit: Callable[[Point], None], probe=None):
        """Report every point in [xlo,xhi] x [ylo,yhi] with ONE binary search.

        The single lower_bound happens at the split node for (ylo, -inf);
        positions at every canonical node and boundary leaf follow bridges.
        `probe(abase, span, pos)`, if given, observes each carried position
        (shadow checks in tests).
        """
        buf, kx, ky, L, H = self.buf, self.ktab_x, self.ktab_y, self.L, self.H
        xlo_k, xhi_k = low_key(xlo), high_key(xhi)
        ylo_k, yhi_k = low_key(ylo), high_key(yhi)

        depth, pos = self._find_split(xlo_k, xhi_k, stats)
        r = H - depth
        span = 1 << r
        abase = r * L + pos * span

        # the one binary search of this query
        lo_i, hi_i = 0, span
        while lo_i < hi_i:
            mid = (lo_i + hi_i) >> 1
            if ky[buf[abase + mid]] < ylo_k:
                lo_i = mid + 1
            else:
                hi_i = mid
        stats.binary_searches += 1
        q = lo_i

        if depth == H:
            kleaf = kx[buf[pos]]
            if xlo_k <= kleaf <= xhi_k:
                self._emit_run(pos, 1, q, yhi_k, stats, emit, probe)
            return

        half = span >> 1

        # walk the xlo path through the left child, emitting right children
        cq = buf[L * (H + r) + pos * span + q] if q < span else half
        stats.bridge_follows += 1
        d, p = depth + 1, pos << 1
        while d < H:
            rr = H - d
            sp = 1 << rr
            hf = sp >> 1
            stats.nodes_visited += 1
            k = kx[buf[p * sp + hf - 1]]
            lbase = L * (H + rr) + p * sp
            rbase = L * (2 * H + rr) + p * sp
            if xlo_k <= k:
                rq = buf[rbase + cq] if cq < sp else hf
                stats.bridge_follows += 1
                stats.nodes_visited += 1
                self._emit_run((rr - 1) * L + ((p << 1) + 1) * hf, hf, rq, yhi_k, stats, emit, probe)
                cq = buf[lbase + cq] if cq < sp else hf
                stats.bridge_follows += 1
                p <<= 1
            else:
                cq = buf[rbase + cq] if cq < sp else hf
                stats.bridge_follows += 1
                p = (p << 1) + 1
            d += 1
        stats.nodes_visited += 1
        kleaf = kx[buf[p]]
        if xlo_k <= kleaf <= xhi_k:
            self._emit_run(p, 1, cq, yhi_k, stats, emit, probe)

        # walk the xhi path through the right child, emitting left children
        cq = buf[L * (2 * H + r) + pos * span + q] if q < span else half
        stats.bridge_follows += 1
        d, p = depth + 1, (pos << 1) + 1
        while d < H:
            rr = H - d
            sp = 1 << rr
            hf = sp >> 1
            stats.nodes_visited += 1
            k = kx[buf[p * sp + hf - 1]]
            lbase = L * (H + rr) + p * sp
            rbase = L * (2 * H + rr) + p * sp
            if xhi_k > k:
                lq = buf[lbase + cq] if cq < sp else hf
                stats.bridge_follows += 1
                stats.nodes_visited += 1
                self._emit_run((rr - 1) * L + (p << 1) * hf, hf, lq, yhi_k, stats, emit, probe)
                cq = buf[rbase + cq] if cq < sp else hf
                stats.bridge_follows += 1
                p = (p << 1) + 1
            else:
                cq = buf[lbase + cq] if cq < sp else hf
                stats.bridge_follows += 1
                p <<= 1
            d += 1
        stats.nodes_visited += 1
        kleaf = kx[buf[p]]
        if xlo_k <= kleaf <= xhi_k:
            self._emit_run(p, 1, cq, yhi_k, stats, emit, probe)

    def query_into(self, box, stats, emit):
        """Level interface: query with this structure's two dimensions of `box`."""
        self.query(box.lo[self.xdim], box.hi[self.xdim],
                   box.lo[self.ydim], box.hi[self.ydim], stats, emit)

    def count_in(self, box, stats) -> int:
        """Level interface: count within this structure's two dimensions of `box`."""
        return self.count(box.lo[self.xdim], box.hi[self.xdim],
                          box.lo[self.ydim], box.hi[self.ydim], stats)

    def count(self, xlo, xhi, ylo, yhi, stats) -> int:
        """Count points in the box without enumerating them.

        Twin positions for (ylo, -inf) and the first entry past (yhi, +inf)
        are found by two binary searches at the split node and then carried
        down via bridges; each canonical node contributes their difference.
        """
        buf, kx, ky, L, H = self.buf, self.ktab_x, self.ktab_y, self.L, self.H
        xlo_k, xhi_k = low_key(xlo), high_key(xhi)
        ylo_k, yhi_k = low_key(ylo), high_key(yhi)

        depth, pos = self._find_split(xlo_k, xhi_k, stats)
        r = H - depth
        span = 1 << r
        abase = r * L + pos * span

        ql = 0
        hi_i = span
        while ql < hi_i:
            mid = (ql + hi_i) >> 1
            if ky[buf[abase + mid]] < ylo_k:
                ql = mid + 1
            else:
                hi_i = mid
        qh = 0
        hi_i = span
        while qh < hi_i:
            mid = (qh + hi_i) >> 1
            if ky[buf[abase + mid]] < yhi_k:
                qh = mid + 1
            else:
                hi_i = mid
        stats.binary_searches += 2

        if depth == H:
            kleaf = kx[buf[pos]]
            if xlo_k <= kleaf <= xhi_k:
                return int(max(0, qh - ql))
            return 0

        half = span >> 1
        total = 0
        lbase0 = L * (H + r) + pos * span
        rbase0 = L * (2 * H + r) + pos * span

        for lo_path in (True, False):
            if lo_path:
                cl = buf[lbase0 + ql] if ql < span else half
                ch = buf[lbase0 + qh] if qh < span else half
                p = pos << 1
            else:
                cl = buf[rbase0 + ql] if ql < span else half
                ch = buf[rbase0 + qh] if qh < span else half
                p = (pos << 1) + 1
            stats.bridge_follows += 2
            d = depth + 1
            while d < H:
                rr = H - d
                sp = 1 << rr
                hf = sp >> 1
                stats.nodes_visited += 1
                k = kx[buf[p * sp + hf - 1]]
                lbase = L * (H + rr) + p * sp
                rbase = L * (2 * H + rr) + p * sp
                turn_off_path = (xlo_k <= k) if lo_path else (xhi_k > k)
                if turn_off_path:
                    if lo_path:
                        bl = buf[rbase + cl] if cl < sp else hf
                        bh = buf[rbase + ch] if ch < sp else hf
                        cl = buf[lbase + cl] if cl < sp else hf
                        ch = buf[lbase + ch] if ch < sp else hf
                        p <<= 1
                    else:
                        bl = buf[lbase + cl] if cl < sp else hf
                        bh = buf[lbase + ch] if ch < sp else hf
                        cl = buf[rbase + cl] if cl < sp else hf
                        ch = buf[rbase + ch] if ch < sp else hf
                        p = (p << 1) + 1
                    stats.bridge_follows += 4
                    stats.nodes_visited += 1
                    total += max(0, bh - bl)
                else:
                    if lo_path:
                        cl = buf[rbase + cl] if cl < sp else hf
                        ch = buf[rbase + ch] if ch < sp else hf
                        p = (p << 1) + 1
                    else:
                        cl = buf[lbase + cl] if cl < sp else hf
                        ch = buf[lbase + ch] if ch < sp else hf
                        p <<= 1
                    stats.bridge_follows += 2
                d += 1
            stats.nodes_visited += 1
            kleaf = kx[buf[p]]
            if xlo_k <= kleaf <= xhi_k:
                total += max(0, ch - cl)
        return int(total)


def build_cascade(points: Sequence[Point], xdim: Optional[int] = None,
                  ydim: Optional[int] = None, counters=None) -> CascadeStructure:
    """Build a standalone CascadeStructure from points sorted by the x dimension.

    By default the last two coordinate dimensions are used.  Internal entry
    ids are positions in the input list; the input Point objects are what
    queries emit.
    """
    pts = list(points)
    if not pts:
        raise EmptyInput("cannot build a cascade over zero points")
    dims = pts[0].dims
    if dims < 2:
        raise ValueError("cascade needs at least two dimensions")
    if xdim is None:
        xdim = dims - 2
    if ydim is None:
        ydim = dims - 1
    m = len(pts)
    L = pow2ceil(m)
    kx = [(p.coords[xdim], p.coords, p.id) for p in pts] + [phantom_key(t) for t in range(L)]
    ky = [(p.coords[ydim], p.coords, p.id) for p in pts] + [phantom_key(t) for t in range(L)]
    if sorted(range(m), key=kx.__getitem__) != list(range(m)):
        raise ValueError("input points must be sorted by the x-dimension composite order")
    ry = [0] * (m + L)
    for pos, e in enumerate(sorted(range(m), key=ky.__getitem__)):
        ry[e] = pos
    for t in range(L):
        ry[m + t] = m + t
    ids = list(range(m))
    return CascadeStructure.build_from_ids(
        ids, xdim, ydim, kx, ky, ry, pts, counters,
        rank_y_np=np.asarray(ry, dtype=np.int64),
    )


def query_2d(cs: CascadeStructure, xlo, xhi, ylo, yhi, stats, emit) -> None:
    """Report points of `cs` in [xlo,xhi] x [ylo,yhi]; exactly one binary search."""
    cs.query(xlo, xhi, ylo, yhi, stats, emit)


def count_2d(cs: CascadeStructure, xlo, xhi, ylo, yhi, stats) -> int:
    """Count points of `cs` in [xlo,xhi] x [ylo,yhi] without enumerating them."""
    return cs.count(xlo, xhi, ylo, yhi, stats)
