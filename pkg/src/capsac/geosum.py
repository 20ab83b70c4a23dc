"""Strip and quadrant aggregates answering rectangle queries in constant time.

For a column ``c`` the left/right strips hold photos strictly left/right of it;
for a row ``l`` the down/up strips hold photos strictly below/above it.  The
four quadrants around ``(c, l)`` are strict on both axes.  A rectangle's total
is the grand total minus the four outer strips plus the four corner quadrants
that were subtracted twice.

Tables are built from 2D prefix sums rather than per-set enumeration; the
values are the same.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from capsac.model import Instance, Rect


@dataclass(frozen=True)
class StripTable:
    """Strip and quadrant aggregates of one per-photo quantity."""

    total: float
    left: list
    right: list
    down: list
    up: list
    q1: list  # right of c, above l
    q2: list  # left of c, above l
    q3: list  # left of c, below l
    q4: list  # right of c, below l

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "StripTable":
        n_cols, n_rows = grid.shape
        # pre[i, j] = sum over columns < i and rows < j
        pre = np.zeros((n_cols + 1, n_rows + 1), dtype=grid.dtype)
        pre[1:, 1:] = grid.cumsum(axis=0).cumsum(axis=1)
        total = pre[n_cols, n_rows]
        c = np.arange(n_cols)
        r = np.arange(n_rows)
        left = pre[c, n_rows]
        right = total - pre[c + 1, n_rows]
        down = pre[n_cols, r]
        up = total - pre[n_cols, r + 1]
        cc, rr = np.meshgrid(c, r, indexing="ij")
        q3 = pre[cc, rr]
        q2 = pre[cc, n_rows] - pre[cc, rr + 1]
        q4 = pre[n_cols, rr] - pre[cc + 1, rr]
        q1 = total - pre[cc + 1, n_rows] - pre[n_cols, rr + 1] + pre[cc + 1, rr + 1]
        return cls(
            total=total.item(),
            left=left.tolist(),
            right=right.tolist(),
            down=down.tolist(),
            up=up.tolist(),
            q1=q1.tolist(),
            q2=q2.tolist(),
            q3=q3.tolist(),
            q4=q4.tolist(),
        )

    def query(self, r: Rect):
        a, b, lo, hi = r.c_lt, r.c_gt, r.l_lo, r.l_hi
        return (
            self.total
            - self.left[a]
            - self.right[b]
            - self.down[lo]
            - self.up[hi]
            + self.q1[b][hi]
            + self.q2[a][hi]
            + self.q3[a][lo]
            + self.q4[b][lo]
        )


class GeoSums:
    """Precomputed aggregates for one instance: time, count, occupied cells, per-holder data."""

    def __init__(self, inst: Instance):
        self.n_cols = inst.n_cols
        self.n_rows = inst.n_rows
        self.holders = inst.drone_ids
        self.holder_index: Dict[int, int] = {h: i for i, h in enumerate(self.holders)}
        shape = (self.n_cols, self.n_rows)
        time = np.zeros(shape)
        count = np.zeros(shape, dtype=np.int64)
        data = np.zeros((len(self.holders),) + shape)
        held = np.zeros((len(self.holders),) + shape, dtype=np.int64)
        for p, c, r in zip(inst.photos, inst.cols, inst.rows):
            time[c, r] += p.lam
            count[c, r] += 1
            for h in p.holders:
                k = self.holder_index[h]
                data[k, c, r] += p.mu
                held[k, c, r] += 1
        cells = (count > 0).astype(np.int64)
        self.time = StripTable.from_grid(time)
        self.count = StripTable.from_grid(count)
        self.cells = StripTable.from_grid(cells)
        self.data = [StripTable.from_grid(data[k]) for k in range(len(self.holders))]
        self.held = [StripTable.from_grid(held[k]) for k in range(len(self.holders))]
        # inclusive-exclusive prefix of counts for fast tightening
        pre = np.zeros((self.n_cols + 1, self.n_rows + 1), dtype=np.int64)
        pre[1:, 1:] = count.cumsum(axis=0).cumsum(axis=1)
        self._pre = pre.tolist()
        self._tight: Dict[Rect, Optional[Rect]] = {}
        self._occ: Dict[Tuple[Rect, str], List[int]] = {}

    @property
    def total_time(self) -> float:
        return self.time.total

    @property
    def total_count(self) -> int:
        return self.count.total

    def total_data(self, h: int) -> float:
        return self.data[self._holder(h)].total

    def _holder(self, h: int) -> int:
        try:
            return self.holder_index[h]
        except KeyError:
            raise ValueError(f"unknown drone id {h}") from None

    def region_time(self, r: Rect) -> float:
        return self.time.query(r)

    def region_count(self, r: Rect) -> int:
        return self.count.query(r)

    def region_cells(self, r: Rect) -> int:
        return self.cells.query(r)

    def region_data(self, h: int, r: Rect) -> float:
        """Megabytes of photos inside ``r`` stored by drone ``h``."""
        k = self._holder(h)
        if self.held[k].query(r) == 0:
            return 0.0
        return self.data[k].query(r)

    def region_data_all(self, r: Rect) -> List[float]:
        """``region_data`` for every drone, in ``holders`` order."""
        return [
            tab.query(r) if cnt.query(r) else 0.0 for tab, cnt in zip(self.data, self.held)
        ]

    # -- helpers used by the partition tree --------------------------------

    def _count(self, c0: int, c1: int, l0: int, l1: int) -> int:
        p = self._pre
        return p[c1 + 1][l1 + 1] - p[c0][l1 + 1] - p[c1 + 1][l0] + p[c0][l0]

    def tighten(self, r: Rect):
        """Shrink ``r`` to the bounding box of its photos; ``None`` if it holds none."""
        try:
            return self._tight[r]
        except KeyError:
            pass
        t = self._tighten(r)
        self._tight[r] = t
        return t

    def _tighten(self, r: Rect):
        a, b, lo, hi = r.c_lt, r.c_gt, r.l_lo, r.l_hi
        n = self._count(a, b, lo, hi)
        if n == 0:
            return None
        a0, lo0 = a, lo
        a = _first_true(a0, b, lambda c: self._count(a0, c, lo, hi) > 0)
        b = _first_true(a, b, lambda c: self._count(a, c, lo, hi) == n)
        lo = _first_true(lo0, hi, lambda l: self._count(a, b, lo0, l) > 0)
        hi = _first_true(lo, hi, lambda l: self._count(a, b, lo, l) == n)
        return Rect(a, b, lo, hi)

    def occupied(self, r: Rect, axis: str) -> List[int]:
        """Column (``axis='lng'``) or row (``axis='lat'``) indices holding photos inside ``r``."""
        key = (r, axis)
        found = self._occ.get(key)
        if found is None:
            if axis == "lng":
                found = [c for c in range(r.c_lt, r.c_gt + 1) if self._count(c, c, r.l_lo, r.l_hi)]
            else:
                found = [l for l in range(r.l_lo, r.l_hi + 1) if self._count(r.c_lt, r.c_gt, l, l)]
            self._occ[key] = found
        return list(found)


def _first_true(lo: int, hi: int, pred) -> int:
    """Smallest x in [lo, hi] with pred(x) true (pred monotone); hi + 1 if none."""
    while lo <= hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid - 1
        else:
            lo = mid + 1
    return lo


def build(inst: Instance) -> GeoSums:
    return GeoSums(inst)
