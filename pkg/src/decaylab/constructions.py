"""Constructors for the explicit measures and sets the experiments exercise:
lattice-neighborhood sets, combs, concentrated counterexample measures, thin
intervals, and seeded random Cantor-type inputs with certified Frostman
behaviour.

Every constructor checks its own declared guarantees at build time (cosine
floor, transform size, support containment, Frostman constant) and fails
loudly if one is violated; callers can disable the heavier checks with
verify=False when they only need the raw object.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolution import convolve
from .dyadic import DyadicGridSet
from .energy import frostman_constant
from .measures import GridMeasure, OVERSAMPLE_BITS, uniform_measure
from .spectral import fourier_at, l2_at_scale, product_fourier

__all__ = [
    "CantorSpec",
    "make_random_frostman",
    "default_schedule",
    "make_lattice_neighborhood",
    "product_containment_defect",
    "make_comb",
    "make_shifted_comb",
    "shifted_comb_phase_audit",
    "make_thin_interval",
    "mix",
]


# ---------------------------------------------------------------------------
# random Cantor-type test inputs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CantorSpec:
    """Seeded random dyadic Cantor construction.

    Per block level, every surviving cell spawns 2**block children of which
    `keep` (an int, or one int per level) survive, chosen by the seeded RNG.
    The natural measure splits mass equally among kept children, giving
    dimension log2(keep)/block.
    """

    block: int
    keep: int | tuple
    depth: int
    seed: int
    s_target: float | None = None

    def __post_init__(self):
        keeps = self.keep_schedule()
        if len(keeps) != self.depth:
            raise ValueError("keep schedule length must equal depth")
        for k in keeps:
            if not 1 <= k <= 2 ** self.block:
                raise ValueError(f"keep={k} outside [1, 2**block]")
        if self.s_target is not None:
            s_eff = float(np.mean([np.log2(k) for k in keeps])) / self.block
            if abs(s_eff - self.s_target) > 1.0 / (self.block * self.depth) + 1e-12:
                raise ValueError(
                    f"keep schedule gives dimension {s_eff:.4f}, "
                    f"requested {self.s_target}")

    def keep_schedule(self) -> tuple:
        if isinstance(self.keep, int):
            return (self.keep,) * self.depth
        return tuple(self.keep)

    @property
    def level(self) -> int:
        return self.block * self.depth

    @property
    def dimension(self) -> float:
        keeps = self.keep_schedule()
        return float(np.mean([np.log2(k) for k in keeps])) / self.block


_FROSTMAN_CAP = 4.0
_RETRY_STRIDE = 10007


def make_random_frostman(spec: CantorSpec, verify: bool = True):
    """Random Cantor set and its natural measure; deterministic per seed.

    The measure is laid out OVERSAMPLE_BITS finer than the set.  At build
    time the Frostman constant at s = dimension is required to be <= 4 over
    dyadic radii in [2**-level, 1/2]; the seed is deterministically re-drawn
    (seed + k*10007) until the draw passes, so equal specs give equal output.
    """
    keeps = spec.keep_schedule()
    for attempt in range(8):
        rng = np.random.default_rng(spec.seed + attempt * _RETRY_STRIDE)
        cells = np.zeros(1, dtype=np.int64)
        nfold = 1 << spec.block
        for k in keeps:
            n = cells.size
            offsets = np.argsort(rng.random((n, nfold)), axis=1)[:, :k]
            offsets.sort(axis=1)
            cells = (cells[:, None] * nfold + offsets).reshape(-1)
        cells.sort()
        X = DyadicGridSet(1, spec.level, cells)
        mu = _equal_mass_measure(X)
        if not verify:
            return X, mu
        s = spec.dimension
        rep = frostman_constant(mu, s, (2.0 ** -spec.level, 0.5))
        if rep.constant <= _FROSTMAN_CAP:
            return X, mu
    raise RuntimeError(
        f"no draw of {spec} met the Frostman cap {_FROSTMAN_CAP} in 8 attempts")


def _equal_mass_measure(X: DyadicGridSet) -> GridMeasure:
    """Uniform probability measure on a dyadic set, oversampled 8x."""
    level = X.level + OVERSAMPLE_BITS
    f = 1 << OVERSAMPLE_BITS
    lo = int(X.cells[0]) * f
    hi = (int(X.cells[-1]) + 1) * f
    masses = np.zeros(hi - lo, dtype=np.float64)
    per_cell = 1.0 / (X.size * f)
    fine = (X.cells[:, None] * f + np.arange(f)[None, :]).reshape(-1)
    masses[fine - lo] = per_cell
    return GridMeasure(level, lo, masses)


# ---------------------------------------------------------------------------
# lattice-neighborhood sets
# ---------------------------------------------------------------------------

def default_schedule(level: int) -> tuple:
    """Rapidly growing integer schedule n_k = 2**(2**k), truncated to the grid."""
    out = []
    k = 1
    while True:
        n = 2 ** (2 ** k)
        if 1.0 / n < 2.0 ** -level:
            break
        out.append(n)
        k += 1
    return tuple(out)


def make_lattice_neighborhood(s: float, schedule, level: int):
    """Grid points of [0, 1] within n_k**-1 of the lattice n_k**-s * Z, all k.

    Returns (set, uniform measure on it).  An empty schedule imposes no
    constraint (the full interval); a schedule entry that empties the set at
    grid resolution is reported by its position.
    """
    if not 0 < s < 1:
        raise ValueError("need 0 < s < 1")
    schedule = tuple(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    h = 2.0 ** -level
    centers = (np.arange(1 << level) + 0.5) * h
    keep = np.ones(centers.size, dtype=bool)
    for pos, n in enumerate(schedule):
        if 1.0 / n < h:
            raise ValueError(f"schedule entry n_{pos + 1}={n} is below grid resolution")
        gap = float(n) ** -s
        dist = np.abs(centers - np.round(centers / gap) * gap)
        keep &= dist <= 1.0 / n + 1e-12
        if not np.any(keep):
            raise ValueError(f"set is empty at grid resolution after n_{pos + 1}={n}")
    X = DyadicGridSet(1, level, np.nonzero(keep)[0])
    return X, _equal_mass_measure(X)


def product_containment_defect(sets, s_list, n: float) -> tuple[float, float]:
    """Worst lattice distance of pairwise/products of set points vs the allowance.

    For sets built on a shared schedule entry n (with exponents s_list), every
    product of one point per set must lie within len(sets) * n**-1 of the
    lattice n**-(sum s_i) * Z.  Returns (max distance, allowance); the caller
    adds grid slop before asserting.
    """
    gap = float(n) ** -float(np.sum(s_list))
    prod = sets[0].centers()
    for X in sets[1:]:
        prod = np.multiply.outer(prod, X.centers()).ravel()
        if prod.size > 20_000_000:
            raise ValueError("product tuple set too large")
    dist = np.abs(prod - np.round(prod / gap) * gap)
    return float(dist.max()), len(sets) / float(n)


# ---------------------------------------------------------------------------
# combs
# ---------------------------------------------------------------------------

def make_comb(r: float, c: float, verify: bool = True):
    """Intervals of length c*r centred on r*Z inside [0, 1], uniform measure.

    Guarantees (checked at build time): cos(2 pi x / r) >= 1/2 on the set,
    hence |rho_hat(1/r)| >= 1/2.
    """
    l = int(round(-np.log2(r)))
    if not np.isclose(r, 2.0 ** -l) or r > 0.25:
        raise ValueError("r must be dyadic and <= 1/4")
    if not 0 < c <= 0.125:
        raise ValueError("c must lie in (0, 1/8]")
    level = int(np.ceil(-np.log2(c * r))) + 2
    h = 2.0 ** -level
    centers = (np.arange(1 << level) + 0.5) * h
    dist = np.abs(centers - np.round(centers / r) * r)
    keep = dist <= c * r / 2.0
    X = DyadicGridSet(1, level, np.nonzero(keep)[0])
    cells = np.zeros(1 << level, dtype=np.float64)
    cells[X.cells] = 1.0 / X.size
    rho = GridMeasure(level, 0, cells).trimmed()
    if verify:
        min_cos = float(np.cos(2 * np.pi * X.centers() / r).min())
        if min_cos < 0.5:
            raise ValueError(f"cosine floor violated: min cos = {min_cos:.4f}")
        mag = abs(fourier_at(rho, 1.0 / r))
        if mag < 0.5:
            raise ValueError(f"|rho_hat(1/r)| = {mag:.4f} < 1/2")
    return X, rho


def make_shifted_comb(s: float, delta: float, c: float = 1.0 / 16,
                      verify: bool = True) -> GridMeasure:
    """Comb with tooth scale delta**s, rescaled into [1, 1 + delta**(1-s)].

    The result is a uniform measure on ~delta**-s intervals of length c*delta
    spaced delta apart: its mollified L2 norm is as large as a measure of
    dimension s can have, yet the triple multiplicative self-convolution has
    transform of size ~1 at frequency 1/delta.  Requires s < 1/2 and a phase
    budget delta**(2-3s) <= 1/16, delta**(1-2s) <= 1/16.

    verify=True re-checks the two declared guarantees:
      * l2_at_scale(mu, delta)^2 within a factor 16 of delta**(s-1),
      * |(mu x mu x mu)^(1/delta)| >= 1/8 (via product_fourier; no global
        fine grid is ever built).
    """
    if not 0 < s < 0.5:
        raise ValueError("need 0 < s < 1/2")
    budget_cube = delta ** (2.0 - 3.0 * s)
    budget_square = delta ** (1.0 - 2.0 * s)
    cap = (1.0 / 16) * (1.0 + 1e-9)
    if budget_cube > cap or budget_square > cap:
        raise ValueError(
            f"phase budget too large: delta^(2-3s)={budget_cube:.3g}, "
            f"delta^(1-2s)={budget_square:.3g} (need both <= 1/16)")
    r = delta ** s
    l = int(round(-np.log2(r)))
    _, rho = make_comb(2.0 ** -l, c, verify=verify)
    out_level = int(np.ceil(-np.log2(c * delta))) + 2
    from .measures import pushforward_affine
    mu = pushforward_affine(rho, delta ** (1.0 - s), 1.0, level=out_level).trimmed()
    if verify:
        lsq = l2_at_scale(mu, _dyadic_at_least(delta, mu.level)) ** 2
        ref = delta ** (s - 1.0)
        if not (ref / 16 <= lsq <= 16 * ref):
            raise ValueError(f"L2 guarantee violated: {lsq:.4g} vs reference {ref:.4g}")
        t2 = convolve(mu, mu, "mul")
        mag = abs(product_fourier(t2, mu, 1.0 / delta))
        if mag < 1.0 / 8:
            raise ValueError(f"triple transform |.|={mag:.4f} < 1/8")
    return mu


def _dyadic_at_least(delta: float, level: int) -> float:
    """Snap delta to the nearest dyadic 2**-k (delta is dyadic in all uses)."""
    k = int(round(-np.log2(delta)))
    return 2.0 ** -min(k, level - 1)


def shifted_comb_phase_audit(s: float, delta: float, c: float = 1.0 / 16):
    """Measured vs budgeted phase defect of the triple-product transform.

    Compares |(mu x mu x mu)^(1/delta)| against |rho_hat(delta**-s)|**3,
    whose difference is controlled by 2 pi (delta^(2-3s) + 3 delta^(1-2s))
    plus grid slop.  Returns (defect, budget).
    """
    r = delta ** s
    l = int(round(-np.log2(r)))
    _, rho = make_comb(2.0 ** -l, c, verify=False)
    mu = make_shifted_comb(s, delta, c, verify=False)
    t2 = convolve(mu, mu, "mul")
    actual = product_fourier(t2, mu, 1.0 / delta)
    base = fourier_at(rho, delta ** -s) ** 3 * np.exp(-2j * np.pi / delta)
    budget = 2 * np.pi * (delta ** (2 - 3 * s) + 3 * delta ** (1 - 2 * s))
    return float(abs(actual - base)), float(budget)


# ---------------------------------------------------------------------------
# thin interval
# ---------------------------------------------------------------------------

def make_thin_interval(s: float, delta: float, c: float,
                       verify: bool = True) -> GridMeasure:
    """Normalized uniform measure on [0, c * delta**(1-s)] for s < 2/3.

    Its triple multiplicative power is supported in [0, c**3 delta**(3-3s)]
    which sits inside [0, c*delta], so the transform at 1/delta is ~1.
    """
    if not 0 < s < 2.0 / 3:
        raise ValueError("need 0 < s < 2/3")
    if not 0 < c <= 0.5:
        raise ValueError("need 0 < c <= 1/2")
    width = c * delta ** (1.0 - s)
    # resolve the window and the phases at 1/delta; the triple product then
    # collapses into the first few cells, which still certifies containment
    level = max(int(np.ceil(np.log2(1.0 / width))) + 4,
                int(np.ceil(np.log2(1.0 / delta))) + 5)
    mu = uniform_measure(0.0, width, level)
    if verify:
        t3 = convolve(convolve(mu, mu, "mul"), mu, "mul").trimmed()
        lo, hi = t3.support()
        if not (lo >= -1e-15 and hi <= c * delta + t3.spacing + 1e-15):
            raise ValueError(f"triple product support [{lo}, {hi}] exceeds [0, {c * delta}]")
        mag = abs(fourier_at(t3, 1.0 / delta))
        if mag < 0.5:
            raise ValueError(f"triple transform |.|={mag:.4f} < 1/2")
    return mu


def mix(mu: GridMeasure, nu: GridMeasure, weight: float) -> GridMeasure:
    """Convex combination weight*mu + (1-weight)*nu on a common grid."""
    if not 0 <= weight <= 1:
        raise ValueError("weight must lie in [0, 1]")
    level = max(mu.level, nu.level)
    a, b = mu.refined(level), nu.refined(level)
    lo = min(a.origin_index, b.origin_index)
    hi = max(a.origin_index + a.size, b.origin_index + b.size)
    out = np.zeros(hi - lo, dtype=np.float64)
    out[a.origin_index - lo:a.origin_index - lo + a.size] += weight * a.masses
    out[b.origin_index - lo:b.origin_index - lo + b.size] += (1 - weight) * b.masses
    return GridMeasure(level, lo, out)
