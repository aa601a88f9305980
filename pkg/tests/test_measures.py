import numpy as np
import pytest

from decaylab import (GridMeasure, from_atoms, from_density, l1_distance,
                      point_mass, pushforward_affine, regularize,
                      restrict_normalize, sup_ball_mass, uniform_measure)
from decaylab.dyadic import DyadicGridSet
from decaylab.measures import bump_profile, kernel_weights

from conftest import random_masses_measure


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_uniform_16_cells():
    mu = uniform_measure(0.0, 1.0, 4)
    assert mu.size == 16
    assert np.allclose(mu.masses, 1.0 / 16, rtol=0, atol=1e-15)
    assert abs(mu.total_mass - 1.0) <= 1e-12


def test_single_atom_covers_endpoint():
    mu = from_atoms([1.0], (0.0, 1.0), 7)
    nz = np.nonzero(mu.masses)[0]
    assert nz.size == 1
    assert mu.masses[nz[0]] == 1.0
    left = mu.origin + nz[0] * mu.spacing
    assert left <= 1.0 <= left + mu.spacing


def test_linear_density_midpoint_rule():
    # oracle: masses from the midpoint rule directly
    m = 10
    h = 2.0 ** -m
    centers = (np.arange(1 << m) + 0.5) * h
    expected = 2.0 * centers * h
    expected /= expected.sum()
    mu = from_density(lambda x: 2.0 * x, (0.0, 1.0), m)
    assert np.allclose(mu.masses, expected, rtol=0, atol=1e-15)
    assert np.all(np.diff(mu.masses) > 0)
    assert abs(mu.total_mass - 1.0) <= 1e-9


def test_construct_rejections():
    with pytest.raises(ValueError, match="negative"):
        from_density(lambda x: x - 0.5, (0.0, 1.0), 4)
    with pytest.raises(ValueError, match="outside window"):
        from_atoms([1.5], (0.0, 1.0), 4)


def test_mass_conservation_construct():
    mu = from_density(lambda x: np.exp(x), (0.0, 1.0), 9, normalize=False)
    direct = np.sum(np.exp((np.arange(512) + 0.5) / 512) / 512)
    assert abs(mu.total_mass - direct) <= 1e-12 * direct


# ---------------------------------------------------------------------------
# kernel and regularize
# ---------------------------------------------------------------------------

def test_bump_sandwich_cell_exact():
    level, delta = 8, 2.0 ** -5
    w = kernel_weights(delta, level)
    k = np.arange(-8, 9)
    x = k * 2.0 ** -level
    raw = bump_profile(x / delta)
    assert np.all(raw[np.abs(x) <= delta / 2] == 1.0)
    assert np.all(raw[np.abs(x) >= delta] == 0.0)
    assert np.all(np.diff(raw[k >= 0]) <= 0)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_non_dyadic_window_does_not_leak():
    mu = from_density(lambda x: np.ones_like(x), (0.3, 0.7), 8, normalize=False)
    lo, hi = mu.support()
    h = mu.spacing
    assert lo >= 0.3 - h and hi <= 0.7 + h
    assert mu.total_mass == pytest.approx(0.4, abs=2 * h)


def test_kernel_type():
    from decaylab import Kernel
    from decaylab.measures import kernel_weights
    k = Kernel(scale=0.25)
    assert np.array_equal(k.weights(8), kernel_weights(0.25, 8))
    with pytest.raises(ValueError):
        Kernel(scale=0.0)


def test_regularize_point_mass_plateau():
    mu = point_mass(0.0, 6)
    delta = 0.25
    md = regularize(mu, delta)
    assert abs(md.total_mass - 1.0) <= 1e-12
    w = kernel_weights(delta, 6)
    nz = md.masses[md.masses > 0]
    assert np.allclose(np.sort(nz), np.sort(w[w > 0]), atol=1e-15)


def test_regularize_uniform_interior_unchanged():
    # oracle:直接 convolution with the same weights via np.convolve
    mu = uniform_measure(0.0, 1.0, 9)
    delta = 1.0 / 8
    md = regularize(mu, delta)
    oracle = np.convolve(mu.masses, kernel_weights(delta, 9))
    oracle *= mu.total_mass / oracle.sum()
    assert np.max(np.abs(md.masses - oracle)) <= 1e-12
    # interior masses unchanged within 1e-6
    k = int(delta / mu.spacing)
    inner = slice(2 * k, md.size - 2 * k)
    assert np.max(np.abs(md.masses[inner] - 1.0 / 512)) <= 1e-6


def test_regularize_twice_vs_once():
    mu = random_masses_measure(3, level=9)
    delta = 2.0 ** -5
    once = regularize(mu, delta)
    twice = regularize(regularize(mu, delta), delta)
    lo1, hi1 = once.support()
    lo2, hi2 = twice.support()
    assert abs(lo1 - lo2) <= 2 * delta and abs(hi1 - hi2) <= 2 * delta
    assert l1_distance(once, twice) <= 0.1


def test_regularize_matches_quadrature_on_atoms():
    # oracle: density(x) = sum_a w_a * P_delta(x - a) evaluated per cell
    level, delta = 8, 2.0 ** -4
    atoms = np.array([0.25, 0.7071])
    weights = np.array([0.25, 0.75])
    mu = from_atoms(atoms, (0.0, 1.0), level, weights=weights, normalize=False)
    md = regularize(mu, delta)
    wk = kernel_weights(delta, level)
    kk = (wk.size - 1) // 2
    centers = md.centers()
    binned = mu.occupied()
    oracle = np.zeros_like(centers)
    for a, w in zip(*binned):
        d = np.rint((centers - a) / md.spacing).astype(int) + kk
        ok = (d >= 0) & (d < wk.size)
        oracle[ok] += w * wk[d[ok]]
    assert np.max(np.abs(md.masses - oracle)) <= 1e-8


def test_regularize_rejects_subgrid_scale():
    mu = uniform_measure(0.0, 1.0, 4)
    with pytest.raises(ValueError, match="resolve"):
        regularize(mu, 2.0 ** -6)


# ---------------------------------------------------------------------------
# pushforward
# ---------------------------------------------------------------------------

def test_pushforward_identity():
    mu = random_masses_measure(11)
    out = pushforward_affine(mu, 1.0, 0.0)
    assert out.level == mu.level and out.origin_index == mu.origin_index
    assert np.allclose(out.masses, mu.masses, atol=1e-15)


def test_pushforward_scale_two():
    mu = uniform_measure(0.0, 1.0, 6)
    out = pushforward_affine(mu, 2.0, 0.0)
    lo, hi = out.support()
    assert (lo, hi) == (0.0, 2.0)
    occ = out.masses[out.masses > 0]
    assert occ.size == 128
    assert np.allclose(occ, mu.masses[0] / 2.0, atol=1e-15)  # cell masses halved at the same level
    assert abs(out.total_mass - 1.0) <= 1e-12


def test_pushforward_mass_conservation():
    mu = random_masses_measure(5, level=9)
    for a, b in [(0.5, 0.0), (-1.0, 0.3), (3.0, -2.0), (2.0 ** -5, 1.0)]:
        out = pushforward_affine(mu, a, b)
        assert abs(out.total_mass - mu.total_mass) <= 1e-12
    with pytest.raises(ValueError, match="degenerate"):
        pushforward_affine(mu, 0.0, 1.0)


# ---------------------------------------------------------------------------
# restriction and ball mass
# ---------------------------------------------------------------------------

def test_restrict_full_window():
    mu = uniform_measure(0.0, 1.0, 6)
    A = DyadicGridSet(1, 6, np.arange(64))
    out, retained = restrict_normalize(mu, A)
    assert retained == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(out.masses, mu.masses, atol=1e-15)


def test_restrict_half_window():
    mu = uniform_measure(0.0, 1.0, 6)
    A = DyadicGridSet(1, 5, np.arange(16))   # [0, 1/2] at a coarser level
    out, retained = restrict_normalize(mu, A)
    assert retained == pytest.approx(0.5, abs=1e-12)
    assert out.total_mass == pytest.approx(1.0, abs=1e-12)
    lo, hi = out.support()
    assert (lo, hi) == (0.0, 0.5)


def test_restrict_empty_rejected():
    mu = uniform_measure(0.0, 1.0, 6)
    A = DyadicGridSet(1, 6, np.array([4000]))
    with pytest.raises(ValueError, match="empty restriction"):
        restrict_normalize(mu, A)


def test_sup_ball_mass_point_and_uniform():
    pm = point_mass(0.3, 8)
    assert sup_ball_mass(pm, 2.0 ** -8) == pytest.approx(1.0)
    mu = uniform_measure(0.0, 1.0, 10)
    val = sup_ball_mass(mu, 1.0 / 8)
    assert abs(val - 0.25) <= 2 * mu.spacing


def test_sup_ball_mass_comb_tooth():
    # oracle: direct enumeration over all (center, cell) pairs
    from decaylab.constructions import make_comb
    r_comb = 2.0 ** -4
    _, rho = make_comb(r_comb, 1.0 / 16)
    r = r_comb / 2
    val = sup_ball_mass(rho, r)
    c, w = rho.occupied()
    centers = rho.centers()
    oracle = max(float(np.sum(w[np.abs(c - x) <= r])) for x in centers)
    assert val == pytest.approx(oracle, abs=1e-15)
    tooth = 1.0 / 16   # 16 tooth positions (two half-teeth) share the mass
    assert tooth * 0.9 <= val <= tooth * 1.6


def test_sup_ball_mass_monotone():
    mu = random_masses_measure(17, level=9)
    rs = [2.0 ** -k for k in range(9, 0, -1)]
    vals = [sup_ball_mass(mu, r) for r in rs]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_text_round_trip_bit_exact():
    mu = random_masses_measure(23, level=9)
    again = GridMeasure.from_text(mu.to_text())
    assert again.level == mu.level
    assert again.origin_index == mu.origin_index
    assert np.array_equal(again.masses, mu.masses)


def test_l1_distance_one_cell_shift():
    mu = point_mass(0.5, 6)
    nu = GridMeasure(mu.level, mu.origin_index + 1, mu.masses)
    assert l1_distance(mu, nu) == pytest.approx(mu.spacing, rel=1e-12)
