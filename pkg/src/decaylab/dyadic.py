"""Discretized-set combinatorics on dyadic grids.

A set at level m is a collection of dyadic cells of side 2**-m, stored as
integer cell indices (cell i covers [i*2**-m, (i+1)*2**-m), and analogously
per axis in dimension 2).  This module provides covering numbers,
non-concentration checks (relative "frostman-type" and absolute "katz-tao"),
uniform-subset extraction, branching functions and their superlinear
decompositions, direction-parametrized projections, and additive energy.

Ball convention used by every check in this module: the dyadic cell with
index c belongs to the closed ball B(x, r) iff the closed cell
[c*2**-m, (c+1)*2**-m] intersects [x-r, x+r].  The brute-force oracles in
the test-suite share the same convention, so fast paths must match them
exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DyadicGridSet",
    "BranchingFunction",
    "covering_number",
    "set_check",
    "uniformize",
    "uniformity_audit",
    "branching_function",
    "superlinear_decompose",
    "project",
    "projection_scan",
    "ProjectionScanReport",
    "additive_energy",
]


@dataclass(frozen=True)
class DyadicGridSet:
    """Set of occupied dyadic cells at one level, in dimension 1 or 2.

    cells: int64 array of cell indices; shape (n,) in dim 1, (n, 2) in dim 2.
    Indices may be negative (windows below the origin are fine).
    """

    dim: int
    level: int
    cells: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        cells = np.asarray(self.cells, dtype=np.int64)
        if self.dim == 1:
            cells = np.unique(cells.reshape(-1))
        else:
            cells = cells.reshape(-1, 2)
            cells = np.unique(cells, axis=0)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def spacing(self) -> float:
        return 2.0 ** -self.level

    @property
    def size(self) -> int:
        return int(self.cells.shape[0])

    def is_empty(self) -> bool:
        return self.size == 0

    def window(self) -> tuple:
        """Bounding index box: (lo, hi) in dim 1, ((lo0, hi0), (lo1, hi1)) in dim 2.

        hi is exclusive.  Empty sets report a degenerate (0, 0) box.
        """
        if self.is_empty():
            return (0, 0) if self.dim == 1 else ((0, 0), (0, 0))
        if self.dim == 1:
            return (int(self.cells[0]), int(self.cells[-1]) + 1)
        lo = self.cells.min(axis=0)
        hi = self.cells.max(axis=0) + 1
        return ((int(lo[0]), int(hi[0])), (int(lo[1]), int(hi[1])))

    def centers(self) -> np.ndarray:
        return (self.cells + 0.5) * self.spacing

    def coarsened(self, to_level: int) -> "DyadicGridSet":
        """Occupied cells at a coarser level (floor-shift of indices)."""
        if to_level > self.level:
            raise ValueError("coarsened() target must not be finer")
        shift = self.level - to_level
        return DyadicGridSet(self.dim, to_level, self.cells >> shift)

    def contains_points(self, x: np.ndarray) -> np.ndarray:
        """Membership of 1-d coordinates in the union of cells (dim 1 only)."""
        if self.dim != 1:
            raise ValueError("contains_points is dim-1 only")
        idx = np.floor(np.asarray(x) / self.spacing).astype(np.int64)
        return np.isin(idx, self.cells)

    # -- serialization ---------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"dim {self.dim}", f"level {self.level}", f"count {self.size}"]
        if self.dim == 1:
            w = self.window()
            lines.append(f"window {w[0]} {w[1]}")
            lines.extend(str(int(c)) for c in self.cells)
        else:
            (a0, b0), (a1, b1) = self.window()
            lines.append(f"window {a0} {b0} {a1} {b1}")
            lines.extend(f"{int(c[0])} {int(c[1])}" for c in self.cells)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "DyadicGridSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        dim = int(lines[0].split()[1])
        level = int(lines[1].split()[1])
        count = int(lines[2].split()[1])
        body = lines[4:4 + count]
        if dim == 1:
            cells = np.array([int(x) for x in body], dtype=np.int64)
        else:
            cells = np.array([[int(v) for v in ln.split()] for ln in body],
                             dtype=np.int64).reshape(-1, 2)
        return DyadicGridSet(dim, level, cells)


def covering_number(X: DyadicGridSet, r: float) -> int:
    """Number of dyadic r-cells meeting X (the dyadic covering number).

    r must be a dyadic 2**-l with l <= X.level.  Nonincreasing in r, and
    equal to |cells| at r = 2**-level.
    """
    l = _dyadic_exponent(r)
    if l > X.level:
        raise ValueError(f"r={r} is finer than the set's grid 2**-{X.level}")
    if X.is_empty():
        return 0
    shift = X.level - l
    coarse = X.cells >> shift
    if X.dim == 1:
        return int(np.unique(coarse).size)
    return int(np.unique(coarse, axis=0).shape[0])


def _dyadic_exponent(r: float) -> int:
    l = int(round(-np.log2(r)))
    if not np.isclose(r, 2.0 ** -l, rtol=1e-12):
        raise ValueError(f"r={r} is not a dyadic power 2**-l")
    return l


def ball_cell_count(X: DyadicGridSet, center: float, r: float) -> int:
    """|X ∩ B(center, r)| in δ-cells, closed-cell-meets-closed-ball convention.

    Dim-1 only; shared by the fast scans and the brute-force test oracles.
    """
    h = X.spacing
    # cell c intersects [center-r, center+r]  iff  c*h <= center+r and (c+1)*h >= center-r
    lo = int(np.ceil((center - r) / h)) - 1
    hi = int(np.floor((center + r) / h))
    i0 = np.searchsorted(X.cells, lo, side="left")
    i1 = np.searchsorted(X.cells, hi, side="right")
    return int(i1 - i0)


def set_check(X: DyadicGridSet, s: float, K: float, kind: str = "frostman-type"):
    """Non-concentration audit over all dyadic r in [δ, 1] and r-cell centers.

    frostman-type: |X ∩ B(x,r)|_δ <= K * r**s * |X|_δ  (relative)
    katz-tao:      |X ∩ B(x,r)|_δ <= K * (r/δ)**s      (absolute)

    Returns (passed, witness) where witness is the first violating (x, r)
    in the scan order r = δ, 2δ, ..., 1 and x increasing, or None.
    """
    if kind not in ("frostman-type", "katz-tao"):
        raise ValueError(f"unknown kind {kind!r}")
    if X.dim != 1:
        raise ValueError("set_check is dim-1 only")
    if X.is_empty():
        raise ValueError("set_check needs a nonempty set")
    delta = X.spacing
    total = X.size
    for l in range(X.level, -1, -1):
        r = 2.0 ** -l
        bound = K * (r ** s) * total if kind == "frostman-type" else K * (r / delta) ** s
        # only r-cells within distance r of an occupied r-cell can violate
        occ = np.unique(X.cells >> (X.level - l))
        cand = np.unique(np.concatenate([occ - 1, occ, occ + 1]))
        for j in cand:
            x = (j + 0.5) * r
            cnt = ball_cell_count(X, x, r)
            if cnt > bound + 1e-9:
                return False, (float(x), float(r))
    return True, None


def uniformize(X: DyadicGridSet, D: int, m: int) -> DyadicGridSet:
    """Extract an exactly {2**-(D*j)}-uniform subset, finest block level first.

    At block level j (processed j = m..1) every surviving level-D*(j-1) cell
    is required to have the same number R_j of surviving level-D*j children.
    R_j is chosen to maximize (cells kept) = R * #{parents with >= R children};
    parents with fewer children are dropped, richer parents keep their first
    R_j children in index order.  Ties in the kept count go to the larger R.

    Because levels are processed bottom-up, every surviving level-D*j cell
    carries the same number of final cells, so each step keeps at least a
    1/(2**(dim*D) harmonic) >= 1/(D*dim+1) fraction; in dimension 1 the
    output satisfies |X'| >= |X| / (D+1)**m exactly.
    """
    if D < 1 or m < 1:
        raise ValueError("need D >= 1 and m >= 1")
    if X.level != D * m:
        raise ValueError(f"set level {X.level} != D*m = {D * m}")
    if X.is_empty():
        return X
    cells = X.cells
    for j in range(m, 0, -1):
        shift = D * (m - j)
        child = _level_key(cells, X.dim, shift)        # level D*j key per cell
        parent = _level_key(cells, X.dim, shift + D)   # level D*(j-1) key per cell
        # distinct (parent, child) pairs define the level-D*j occupancy
        pairs = np.unique(np.stack([parent, child], axis=1), axis=0)
        par_ids, counts = np.unique(pairs[:, 0], return_counts=True)
        best_R, best_kept = 1, -1
        for R in range(1, int(counts.max()) + 1):
            kept = R * int(np.sum(counts >= R))
            if kept >= best_kept:   # ties -> larger R (larger class index)
                best_kept, best_R = kept, R
        keep_parents = par_ids[counts >= best_R]
        # first best_R children (by child key) of each kept parent
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        sp = pairs[order]
        mask_par = np.isin(sp[:, 0], keep_parents)
        sp = sp[mask_par]
        # rank of each pair within its parent run
        _, starts = np.unique(sp[:, 0], return_index=True)
        ranks = np.arange(sp.shape[0]) - np.repeat(starts, np.diff(np.append(starts, sp.shape[0])))
        keep_children = sp[ranks < best_R, 1]
        sel = np.isin(child, keep_children) & np.isin(parent, keep_parents)
        cells = cells[sel]
        if cells.shape[0] == 0:  # cannot happen: best_R >= 1 keeps something
            break
    return DyadicGridSet(X.dim, X.level, cells)


def _level_key(cells: np.ndarray, dim: int, shift: int) -> np.ndarray:
    """Collapse cell indices to a single sortable key at a coarser level."""
    if dim == 1:
        return cells >> shift
    a = cells[:, 0] >> shift
    b = cells[:, 1] >> shift
    return (a << 32) ^ (b & np.int64(0xFFFFFFFF))


def uniformity_audit(X: DyadicGridSet, D: int, m: int):
    """Check exact uniformity; returns (ok, counts or offending block level)."""
    if X.is_empty():
        return True, []
    counts = []
    for j in range(1, m + 1):
        shift = D * (m - j)
        child = _level_key(X.cells, X.dim, shift)
        parent = _level_key(X.cells, X.dim, shift + D)
        pairs = np.unique(np.stack([parent, child], axis=1), axis=0)
        _, cnt = np.unique(pairs[:, 0], return_counts=True)
        if cnt.min() != cnt.max():
            return False, j
        counts.append(int(cnt[0]))
    return True, counts


@dataclass(frozen=True)
class BranchingFunction:
    """Normalized log covering-number profile of a uniform set.

    values[j] = log |X|_{2**-(D*j)} / (D*m*log 2) for j = 0..m, linear
    in between.  f(0) = 0, f nondecreasing, slopes in [0, dim].
    """

    D: int
    m: int
    values: tuple
    dim: int = 1

    def __post_init__(self):
        if len(self.values) != self.m + 1:
            raise ValueError("need m+1 node values")
        if abs(self.values[0]) > 1e-12:
            raise ValueError("branching function must start at 0")
        v = np.asarray(self.values)
        slopes = np.diff(v) * self.m
        if np.any(slopes < -1e-9) or np.any(slopes > self.dim + 1e-9):
            raise ValueError("node slopes must lie in [0, dim]")

    def __call__(self, u) -> np.ndarray:
        nodes = np.linspace(0.0, 1.0, self.m + 1)
        return np.interp(u, nodes, np.asarray(self.values))

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)


def branching_function(X: DyadicGridSet, D: int, m: int) -> BranchingFunction:
    """Branching profile of a {2**-(D*j)}-uniform set; rejects non-uniform input."""
    ok, info = uniformity_audit(X, D, m)
    if not ok:
        raise ValueError(f"input is not uniform at block level {info}")
    if X.is_empty():
        raise ValueError("branching_function needs a nonempty set")
    denom = D * m * np.log(2.0)
    vals = [0.0]
    for j in range(1, m + 1):
        nj = covering_number(X, 2.0 ** -(D * j))
        vals.append(float(np.log(nj) / denom))
    return BranchingFunction(D=D, m=m, values=tuple(vals), dim=X.dim)


def _max_superlinear_slope(values: np.ndarray, m: int, i: int, j: int) -> float:
    """Largest s with f(u) - f(a_i) >= s (u - a_i) at all nodes u in (a_i, a_j]."""
    idx = np.arange(i + 1, j + 1)
    quot = (values[idx] - values[i]) / ((idx - i) / m)
    return float(quot.min())


def superlinear_decompose(f: BranchingFunction, eps: float):
    """Partition [0,1] into node-aligned intervals with nondecreasing slopes.

    Each reported (a, b, s) satisfies f(u) - f(a) >= s*(u - a) at every node
    of [a, b]; interval lengths are >= eps/4 (in u units, up to node
    rounding); and the slope sum aims for sum s_j (a_{j+1}-a_j) >= f(1) - eps.

    The construction takes the intervals between contact points of the lower
    convex envelope of the node values (slope sum exactly f(1)), then merges
    short intervals right-to-left; each merged interval's slope is recomputed
    as the exact node-wise maximum, which keeps the slopes nondecreasing.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = f.m
    values = np.asarray(f.values)
    # contact points of the lower convex envelope (monotone-chain on nodes)
    hull = [0]
    for j in range(1, m + 1):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            if (values[i1] - values[i0]) * (j - i1) >= (values[j] - values[i1]) * (i1 - i0):
                hull.pop()
            else:
                break
        hull.append(j)
    breaks = hull  # node indices, 0 ... m
    min_blocks = max(1, int(np.ceil(eps / 4.0 * m)))
    # merge short intervals right-to-left
    merged = []
    hi = breaks[-1]
    for lo in reversed(breaks[:-1]):
        if hi - lo >= min_blocks or lo == 0:
            merged.append((lo, hi))
            hi = lo
    if merged and merged[-1][0] != 0:
        merged.append((0, merged[-1][0]))
    merged.reverse()
    # leftmost interval may still be short: fold it into its neighbour
    while len(merged) >= 2 and merged[0][1] - merged[0][0] < min_blocks:
        merged = [(merged[0][0], merged[1][1])] + merged[2:]
    out = []
    for lo, hi in merged:
        s = _max_superlinear_slope(values, m, lo, hi)
        out.append((lo / m, hi / m, max(s, 0.0)))
    return out


def project(X: DyadicGridSet, y: float, out_level: int) -> DyadicGridSet:
    """Image of the cell centers of a planar set under (x1, x2) -> x1 - y*x2."""
    if X.dim != 2:
        raise ValueError("project needs a dim-2 set")
    if abs(y) > 4:
        raise ValueError("direction |y| <= 4 expected")
    h = X.spacing
    c1 = (X.cells[:, 0] + 0.5) * h
    c2 = (X.cells[:, 1] + 0.5) * h
    img = c1 - y * c2
    out_h = 2.0 ** -out_level
    idx = np.floor(img / out_h).astype(np.int64)
    return DyadicGridSet(1, out_level, np.unique(idx))


@dataclass(frozen=True)
class ProjectionScanReport:
    directions: np.ndarray          # y values scanned (cell centers of Y)
    covering: np.ndarray            # |pi_y(A1 x A2)|_delta per direction
    threshold: float                # delta**-(s + c*t)
    best_y: float
    best_covering: int
    fraction_above: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "min_covering": int(self.covering.min()),
            "max_covering": int(self.covering.max()),
            "best_y": self.best_y,
            "best_covering": self.best_covering,
            "fraction_above": self.fraction_above,
            "passed": self.passed,
        }


def projection_scan(A1: DyadicGridSet, A2: DyadicGridSet, Y: DyadicGridSet,
                    s: float, t: float, c: float = 1.0 / 24) -> ProjectionScanReport:
    """Scan |pi_y(A1 x A2)|_δ over direction cells y in Y.

    The verdict compares the best direction against δ**-(s + c*t); the scan
    can confirm instances of the projection lower bound, never refute it.
    """
    if A1.is_empty() or A2.is_empty() or Y.is_empty():
        raise ValueError("projection_scan needs nonempty A1, A2, Y")
    if A1.level != A2.level:
        raise ValueError("A1 and A2 must share a level")
    level = A1.level
    h = 2.0 ** -level
    delta = h
    c1 = (A1.cells + 0.5) * h
    c2 = (A2.cells + 0.5) * h
    ys = Y.centers()
    counts = np.empty(ys.size, dtype=np.int64)
    prod = np.empty((c1.size, c2.size))
    for i, y in enumerate(ys):
        np.subtract.outer(c1, y * c2, out=prod)
        idx = np.floor(prod.ravel() / h).astype(np.int64)
        counts[i] = np.unique(idx).size
    threshold = delta ** -(s + c * t)
    best = int(np.argmax(counts))
    return ProjectionScanReport(
        directions=ys,
        covering=counts,
        threshold=float(threshold),
        best_y=float(ys[best]),
        best_covering=int(counts[best]),
        fraction_above=float(np.mean(counts >= threshold)),
        passed=bool(counts[best] >= threshold),
    )


def additive_energy(A: DyadicGridSet, B: DyadicGridSet) -> int:
    """Number of quadruples (a1, b1, a2, b2) in AxBxAxB with a1-b1 = a2-b2.

    Computed at cell resolution via the difference histogram
    h(d) = #{(a,b): a-b = d} as sum h(d)**2.
    """
    if A.dim != 1 or B.dim != 1:
        raise ValueError("additive_energy is dim-1 only")
    if A.level != B.level:
        raise ValueError("sets must share a level")
    if A.is_empty() or B.is_empty():
        return 0
    a, b = A.cells, B.cells
    if a.size * b.size <= 16_000_000:
        d = np.subtract.outer(a, b).ravel()
        lo = d.min()
        hist = np.bincount(d - lo)
    else:
        lo_a, hi_a = a.min(), a.max()
        lo_b, hi_b = b.min(), b.max()
        n = int(hi_a - lo_a + hi_b - lo_b + 2)
        ia = np.zeros(n, dtype=np.float64)
        ib = np.zeros(n, dtype=np.float64)
        ia[a - lo_a] = 1.0
        ib[b - lo_b] = 1.0
        from scipy.signal import fftconvolve
        hist = np.rint(fftconvolve(ia, ib[::-1])).astype(np.int64)
    hist = hist.astype(np.int64)
    return int(np.sum(hist * hist))
