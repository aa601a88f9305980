"""Measures as nonnegative mass vectors on dyadic grids.

A GridMeasure at level m assigns one mass to each cell
[origin + i*2**-m, origin + (i+1)*2**-m) of a bounded window; the origin is
itself a multiple of the cell width, tracked as an integer index.  All
operations are pure: they return new measures and never mutate inputs.

Conventions baked in here and relied on everywhere else:
  * quadrature of densities uses the midpoint rule per cell;
  * atoms bin to the half-open cell containing them (boundary ties go right);
  * Fourier sums and energy kernels treat each cell as an atom at its center;
  * windows are closed on the left, open on the right.

Experiments at a nominal scale delta = 2**-m run their grids 8x finer
(OVERSAMPLE_BITS = 3) so that phases at |xi| <= 2/delta stay resolved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .dyadic import DyadicGridSet

__all__ = [
    "OVERSAMPLE_BITS",
    "GridMeasure",
    "Kernel",
    "bump_profile",
    "kernel_weights",
    "from_density",
    "from_atoms",
    "from_masses",
    "uniform_measure",
    "point_mass",
    "regularize",
    "pushforward_affine",
    "restrict_normalize",
    "sup_ball_mass",
    "l1_distance",
]

# experiments at nominal scale 2**-m use an internal grid at 2**-(m+3)
OVERSAMPLE_BITS = 3

_MASS_RTOL = 1e-12


@dataclass(frozen=True)
class GridMeasure:
    """Mass vector on a dyadic grid; immutable after construction."""

    level: int
    origin_index: int
    masses: np.ndarray

    def __post_init__(self):
        if self.level < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")
        m = np.ascontiguousarray(np.asarray(self.masses, dtype=np.float64))
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a nonempty 1-d array")
        if not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite")
        neg = m < 0
        if np.any(neg):
            worst = float(m[neg].min())
            if worst < -1e-15 * max(1.0, float(np.abs(m).max())):
                raise ValueError(f"negative mass {worst}")
            m = m.copy()
            m[neg] = 0.0
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "_total", float(np.sum(m)))

    # -- geometry ---------------------------------------------------------------
    @property
    def spacing(self) -> float:
        return 2.0 ** -self.level

    @property
    def origin(self) -> float:
        return self.origin_index * self.spacing

    @property
    def size(self) -> int:
        return int(self.masses.size)

    @property
    def total_mass(self) -> float:
        return self._total

    def support(self) -> tuple[float, float]:
        """Window of the cells that actually carry mass (left-closed, right-open)."""
        nz = np.nonzero(self.masses)[0]
        if nz.size == 0:
            return (self.origin, self.origin)
        return (self.origin + nz[0] * self.spacing,
                self.origin + (nz[-1] + 1) * self.spacing)

    def centers(self) -> np.ndarray:
        return (self.origin_index + np.arange(self.size) + 0.5) * self.spacing

    def occupied(self) -> tuple[np.ndarray, np.ndarray]:
        """(cell centers, masses) restricted to cells with positive mass."""
        nz = np.nonzero(self.masses)[0]
        return ((self.origin_index + nz + 0.5) * self.spacing, self.masses[nz])

    def is_probability(self, tol: float = 1e-9) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    # -- basic transforms ---------------------------------------------------------
    def normalized(self) -> "GridMeasure":
        if self.total_mass <= 0:
            raise ValueError("cannot normalize a zero measure")
        return GridMeasure(self.level, self.origin_index, self.masses / self.total_mass)

    def refined(self, level: int) -> "GridMeasure":
        """Same measure on a finer grid; each cell splits into equal-mass children."""
        if level < self.level:
            raise ValueError("refined() cannot coarsen")
        if level == self.level:
            return self
        f = 1 << (level - self.level)
        out = np.repeat(self.masses / f, f)
        return GridMeasure(level, self.origin_index * f, out)

    def coarsened(self, level: int) -> "GridMeasure":
        """Mass aggregated onto a coarser grid (exact re-binning)."""
        if level > self.level:
            raise ValueError("coarsened() cannot refine")
        if level == self.level:
            return self
        f = 1 << (self.level - level)
        lo = _floor_div(self.origin_index, f)
        hi = _floor_div(self.origin_index + self.size - 1, f) + 1
        out = np.zeros(hi - lo, dtype=np.float64)
        idx = _floor_div(self.origin_index + np.arange(self.size), f) - lo
        np.add.at(out, idx, self.masses)
        return GridMeasure(level, lo, out)

    def trimmed(self) -> "GridMeasure":
        """Drop zero-mass cells at both ends of the window."""
        nz = np.nonzero(self.masses)[0]
        if nz.size == 0 or (nz[0] == 0 and nz[-1] == self.size - 1):
            return self
        return GridMeasure(self.level, self.origin_index + int(nz[0]),
                           self.masses[nz[0]:nz[-1] + 1])

    def density(self) -> np.ndarray:
        return self.masses / self.spacing

    def occupied_set(self, level: int | None = None) -> DyadicGridSet:
        """Cells carrying mass, as a dyadic set (optionally coarsened)."""
        nz = np.nonzero(self.masses)[0]
        s = DyadicGridSet(1, self.level, self.origin_index + nz)
        return s if level is None or level == self.level else s.coarsened(level)

    # -- serialization --------------------------------------------------------------
    def to_text(self) -> str:
        head = [f"level {self.level}",
                f"origin {self.origin!r}",
                f"count {self.size}"]
        return "\n".join(head + [repr(float(v)) for v in self.masses]) + "\n"

    @staticmethod
    def from_text(text: str) -> "GridMeasure":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        level = int(lines[0].split()[1])
        origin = float(lines[1].split()[1])
        count = int(lines[2].split()[1])
        body = np.array([float(v) for v in lines[3:3 + count]], dtype=np.float64)
        origin_index = int(round(origin * 2.0 ** level))
        return GridMeasure(level, origin_index, body)


def _floor_div(a, f):
    return np.floor_divide(a, f) if isinstance(a, np.ndarray) else a // f


def assert_mass_conserved(before: float, after: float, what: str = "operation"):
    if abs(after - before) > _MASS_RTOL * max(1.0, abs(before)):
        raise AssertionError(f"{what} lost mass: {before} -> {after}")


# ---------------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------------

def _window_indices(window: tuple[float, float], level: int) -> tuple[int, int]:
    a, b = window
    if not (np.isfinite(a) and np.isfinite(b)) or not b > a:
        raise ValueError(f"bad window {window}")
    h = 2.0 ** -level
    lo = int(np.floor(a / h + 1e-9))
    hi = int(np.ceil(b / h - 1e-9))
    return lo, max(hi, lo + 1)


def from_density(fn, window: tuple[float, float], level: int,
                 normalize: bool = True) -> GridMeasure:
    """Bin a density by the midpoint rule; rejects negative samples.

    Cells whose centers fall outside [a, b) carry no mass, so non-dyadic
    window endpoints do not leak density into the rounded-out cells.
    """
    lo, hi = _window_indices(window, level)
    h = 2.0 ** -level
    centers = (np.arange(lo, hi) + 0.5) * h
    inside = (centers >= window[0]) & (centers < window[1])
    vals = np.where(inside, np.asarray(fn(centers), dtype=np.float64), 0.0)
    if np.any(vals < 0):
        bad = centers[np.argmin(vals)]
        raise ValueError(f"density is negative at x={bad}")
    masses = vals * h
    mu = GridMeasure(level, lo, masses)
    return mu.normalized() if normalize else mu


def from_atoms(atoms, window: tuple[float, float], level: int,
               weights=None, normalize: bool = True) -> GridMeasure:
    """Bin point masses to half-open cells (boundary ties go right)."""
    atoms = np.asarray(atoms, dtype=np.float64)
    a, b = window
    if atoms.size == 0:
        raise ValueError("need at least one atom")
    out_of_window = (atoms < a) | (atoms > b)
    if np.any(out_of_window):
        raise ValueError(f"atom outside window: x={atoms[out_of_window][0]}")
    if weights is None:
        weights = np.full(atoms.size, 1.0 / atoms.size)
    weights = np.asarray(weights, dtype=np.float64)
    lo, hi = _window_indices(window, level)
    h = 2.0 ** -level
    idx = np.floor(atoms / h).astype(np.int64)
    idx = np.clip(idx, lo, hi - 1)          # right-endpoint atoms fold into the window
    masses = np.zeros(hi - lo, dtype=np.float64)
    np.add.at(masses, idx - lo, weights)
    mu = GridMeasure(level, lo, masses)
    return mu.normalized() if normalize else mu


def from_masses(masses, window: tuple[float, float], level: int,
                normalize: bool = False) -> GridMeasure:
    lo, hi = _window_indices(window, level)
    masses = np.asarray(masses, dtype=np.float64)
    if masses.size != hi - lo:
        raise ValueError(f"mass list length {masses.size} != window cells {hi - lo}")
    mu = GridMeasure(level, lo, masses)
    return mu.normalized() if normalize else mu


def uniform_measure(a: float, b: float, level: int) -> GridMeasure:
    """Uniform probability measure on [a, b] at the given grid level."""
    return from_density(lambda x: np.ones_like(x), (a, b), level, normalize=True)


def point_mass(x: float, level: int) -> GridMeasure:
    return from_atoms([x], (x - 2.0 ** -level, x + 2.0 ** -level), level)


# ---------------------------------------------------------------------------------
# mollification kernel
# ---------------------------------------------------------------------------------

def bump_profile(u) -> np.ndarray:
    """Radially decreasing bump: 1 on [-1/2, 1/2], 0 outside [-1, 1].

    The shoulders are the cubic 1 - (3t^2 - 2t^3) with t = 2|u| - 1, making
    the profile C^1 and monotone on each side.
    """
    u = np.abs(np.asarray(u, dtype=np.float64))
    t = np.clip(2.0 * u - 1.0, 0.0, 1.0)
    return 1.0 - (3.0 * t * t - 2.0 * t ** 3)


@dataclass(frozen=True)
class Kernel:
    """Approximate-identity bump at one scale."""

    scale: float
    shape: str = "cubic-shoulder"

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("kernel scale must be positive")

    def weights(self, level: int) -> np.ndarray:
        return kernel_weights(self.scale, level)


def kernel_weights(delta: float, level: int) -> np.ndarray:
    """Discretized bump at cell resolution, normalized to total weight 1.

    Sampled at cell centers k*2**-level for |k| <= delta * 2**level; the
    sandwich (1 inside [-delta/2, delta/2], 0 outside [-delta, delta]) holds
    cell-exactly before normalization.
    """
    h = 2.0 ** -level
    K = int(round(delta / h))
    if K < 1:
        raise ValueError(f"delta={delta} is below grid resolution {h}")
    k = np.arange(-K, K + 1)
    w = bump_profile(k * h / delta)
    return w / w.sum()


def regularize(mu: GridMeasure, delta: float) -> GridMeasure:
    """Mollify at scale delta: mass-preserving convolution with the bump.

    delta must be a dyadic multiple of the grid spacing; the support grows by
    at most delta on each side.
    """
    h = mu.spacing
    ratio = delta / h
    K = int(round(ratio))
    if K < 1:
        raise ValueError(f"cannot resolve kernel: delta={delta} < spacing {h}")
    if abs(ratio - K) > 1e-9 or (K & (K - 1)) != 0:
        raise ValueError(f"delta={delta} is not a dyadic multiple of spacing {h}")
    if K == 1:
        return mu
    w = kernel_weights(delta, mu.level)
    if mu.masses.size * w.size <= 1 << 24:
        out = np.convolve(mu.masses, w)       # exact zeros stay zero
    else:
        out = fftconvolve(mu.masses, w)
        out[out < 1e-16 * out.max()] = 0.0    # scrub FFT noise off true zeros
    out = np.maximum(out, 0.0)
    tot = out.sum()
    if tot > 0:
        out *= mu.total_mass / tot
    return GridMeasure(mu.level, mu.origin_index - K, out)


# ---------------------------------------------------------------------------------
# pushforward, restriction, ball mass
# ---------------------------------------------------------------------------------

def pushforward_affine(mu: GridMeasure, a: float, b: float,
                       level: int | None = None) -> GridMeasure:
    """Image of mu under x -> a*x + b, re-binned at the requested level.

    Each source cell is treated as carrying uniform mass, so its image
    interval is split across target cells proportionally to overlap; the map
    is exactly mass-preserving.  a = 0 is rejected (use point_mass instead).
    """
    if a == 0:
        raise ValueError("degenerate map a=0; use an explicit point mass")
    out_level = mu.level if level is None else level
    h_in, h_out = mu.spacing, 2.0 ** -out_level
    edges = (mu.origin_index + np.arange(mu.size + 1)) * h_in
    img = a * edges + b
    left = np.minimum(img[:-1], img[1:])
    right = np.maximum(img[:-1], img[1:])
    lo_idx = np.floor(left / h_out).astype(np.int64)
    hi_idx = np.ceil(right / h_out).astype(np.int64) - 1   # [left, right) never touches a cell starting at right
    hi_idx = np.maximum(hi_idx, lo_idx)
    base = int(lo_idx.min())
    nspan = int(hi_idx.max()) - base + 1
    out = np.zeros(nspan, dtype=np.float64)
    width = right - left
    max_span = int((hi_idx - lo_idx).max()) + 1
    for k in range(max_span):
        idx = lo_idx + k
        active = idx <= hi_idx
        if not np.any(active):
            break
        cell_lo = idx * h_out
        ov = np.minimum(right, cell_lo + h_out) - np.maximum(left, cell_lo)
        frac = np.where(active, np.maximum(ov, 0.0) / width, 0.0)
        np.add.at(out, idx - base, frac * mu.masses)
    res = GridMeasure(out_level, base, out)
    assert_mass_conserved(mu.total_mass, res.total_mass, "pushforward_affine")
    return res


def restrict_normalize(mu: GridMeasure, A: DyadicGridSet) -> tuple[GridMeasure, float]:
    """Zero the mass outside A, renormalize to total 1; returns the retained fraction."""
    if A.dim != 1:
        raise ValueError("restriction set must be dim 1")
    if A.level > mu.level:
        raise ValueError("restriction set must live at a level <= the measure's")
    shift = mu.level - A.level
    coarse = (mu.origin_index + np.arange(mu.size)) >> shift
    mask = np.isin(coarse, A.cells)
    retained = float(np.sum(mu.masses[mask]))
    if retained <= 0:
        raise ValueError("empty restriction: the set carries no mass")
    out = np.where(mask, mu.masses, 0.0)
    return GridMeasure(mu.level, mu.origin_index, out / retained), retained / mu.total_mass


def mask_measure(mu: GridMeasure, A: DyadicGridSet) -> GridMeasure:
    """Restriction without renormalization (mu restricted to A as a sub-measure)."""
    shift = mu.level - A.level
    if shift < 0:
        raise ValueError("restriction set must live at a level <= the measure's")
    coarse = (mu.origin_index + np.arange(mu.size)) >> shift
    mask = np.isin(coarse, A.cells)
    return GridMeasure(mu.level, mu.origin_index, np.where(mask, mu.masses, 0.0))


def sup_ball_mass(mu: GridMeasure, r: float) -> float:
    """max over grid centers a of mu(B(a, r)), with cells counted by center.

    Sliding-window sum, exact for the discretized measure; nondecreasing in r.
    """
    if r < mu.spacing:
        raise ValueError(f"r={r} below grid scale {mu.spacing}")
    k = int(np.floor(r / mu.spacing + 1e-12))   # |c_j - c_i| <= r  <=>  |j - i| <= k
    csum = np.concatenate([[0.0], np.cumsum(mu.masses)])
    n = mu.size
    i = np.arange(n)
    lo = np.maximum(i - k, 0)
    hi = np.minimum(i + k + 1, n)
    return float(np.max(csum[hi] - csum[lo]))


def ball_mass_vector(mu: GridMeasure, r: float) -> np.ndarray:
    """mu(B(c_i, r)) for every grid center c_i (same convention as sup_ball_mass)."""
    k = int(np.floor(r / mu.spacing + 1e-12))
    csum = np.concatenate([[0.0], np.cumsum(mu.masses)])
    n = mu.size
    i = np.arange(n)
    lo = np.maximum(i - k, 0)
    hi = np.minimum(i + k + 1, n)
    return csum[hi] - csum[lo]


def l1_distance(mu: GridMeasure, nu: GridMeasure) -> float:
    """Transport (L^1-of-CDF) distance between two grid measures.

    This is the natural metric at grid resolution: moving mass m by one cell
    changes the distance by m * spacing, so re-binning slop stays O(spacing).
    """
    level = max(mu.level, nu.level)
    a, b = mu.refined(level), nu.refined(level)
    lo = min(a.origin_index, b.origin_index)
    hi = max(a.origin_index + a.size, b.origin_index + b.size)
    pa = np.zeros(hi - lo)
    pb = np.zeros(hi - lo)
    pa[a.origin_index - lo:a.origin_index - lo + a.size] = a.masses
    pb[b.origin_index - lo:b.origin_index - lo + b.size] = b.masses
    return float(np.sum(np.abs(np.cumsum(pa - pb))) * 2.0 ** -level)
