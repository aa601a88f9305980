import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decaylab import (BranchingFunction, DyadicGridSet, additive_energy,
                      branching_function, covering_number, project,
                      projection_scan, set_check, superlinear_decompose,
                      uniformize)
from decaylab.constructions import CantorSpec, make_random_frostman
from decaylab.dyadic import ball_cell_count, uniformity_audit


# ---------------------------------------------------------------------------
# brute-force oracles (shared ball convention, independent loops)
# ---------------------------------------------------------------------------

def brute_ball_count(cells, level, x, r):
    h = 2.0 ** -level
    n = 0
    for c in cells:
        if c * h <= x + r and (c + 1) * h >= x - r:
            n += 1
    return n


def brute_set_check(cells, level, s, K, kind):
    delta = 2.0 ** -level
    total = len(set(cells))
    for l in range(level, -1, -1):
        r = 2.0 ** -l
        bound = K * r ** s * total if kind == "frostman-type" else K * (r / delta) ** s
        occ = sorted({c >> (level - l) for c in cells})
        for j0 in occ:
            for j in (j0 - 1, j0, j0 + 1):
                x = (j + 0.5) * r
                if brute_ball_count(cells, level, x, r) > bound + 1e-9:
                    return False, (x, r)
    return True, None


def brute_additive_energy(a_cells, b_cells):
    n = 0
    for a1 in a_cells:
        for b1 in b_cells:
            for a2 in a_cells:
                for b2 in b_cells:
                    if a1 - b1 == a2 - b2:
                        n += 1
    return n


# ---------------------------------------------------------------------------
# covering numbers
# ---------------------------------------------------------------------------

def test_covering_full_interval():
    X = DyadicGridSet(1, 8, np.arange(256))
    assert covering_number(X, 2.0 ** -4) == 16
    assert covering_number(X, 2.0 ** -8) == 256


def test_covering_singleton():
    X = DyadicGridSet(1, 8, np.array([137]))
    for l in range(0, 9):
        assert covering_number(X, 2.0 ** -l) == 1


def test_covering_cantor_generator_recursion():
    # tree oracle: a keep-per-block construction covers keep^j cells at level D*j
    spec = CantorSpec(block=2, keep=2, depth=6, seed=0)
    X, _ = make_random_frostman(spec)
    for j in range(1, 7):
        assert covering_number(X, 2.0 ** -(2 * j)) == 2 ** j


def test_covering_monotone():
    rng = np.random.default_rng(3)
    X = DyadicGridSet(1, 10, rng.choice(1 << 10, size=200, replace=False))
    vals = [covering_number(X, 2.0 ** -l) for l in range(0, 11)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == X.size


# ---------------------------------------------------------------------------
# set checks
# ---------------------------------------------------------------------------

def test_set_check_full_interval_passes():
    X = DyadicGridSet(1, 8, np.arange(256))
    ok, witness = set_check(X, 1.0, 4.0, "frostman-type")
    assert ok and witness is None


def test_set_check_block_fails_katz_tao():
    # one 2^-4 block at level 8: absolutely concentrated, must fail at K=1
    X = DyadicGridSet(1, 8, np.arange(16))
    ok, witness = set_check(X, 0.5, 1.0, "katz-tao")
    assert not ok
    ok2, _ = brute_set_check(list(range(16)), 8, 0.5, 1.0, "katz-tao")
    assert not ok2


def test_set_check_zero_s_always_passes():
    rng = np.random.default_rng(11)
    for _ in range(5):
        X = DyadicGridSet(1, 7, rng.choice(128, size=30, replace=False))
        ok, _ = set_check(X, 0.0, 1.0, "frostman-type")
        assert ok


def test_set_check_monotone_in_s():
    rng = np.random.default_rng(12)
    X = DyadicGridSet(1, 8, rng.choice(256, size=40, replace=False))
    for K in (2.0, 4.0):
        passed_high, _ = set_check(X, 0.7, K, "frostman-type")
        if passed_high:
            passed_low, _ = set_check(X, 0.3, K, "frostman-type")
            assert passed_low


def test_remark_equivalence_frostman_implies_katz_tao():
    # a frostman-type (delta, s, K)-set with |X|_delta <= delta^-s is Katz-Tao
    spec = CantorSpec(block=2, keep=2, depth=5, seed=4)
    X, _ = make_random_frostman(spec)
    s = 0.5
    delta = X.spacing
    assert X.size <= delta ** -s + 1e-9
    K = 4.0
    ok_f, _ = set_check(X, s, K, "frostman-type")
    ok_kt, _ = set_check(X, s, K, "katz-tao")
    assert (not ok_f) or ok_kt


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(min_value=0, max_value=63), min_size=1, max_size=20),
       st.sampled_from([0.3, 0.5, 0.8]),
       st.sampled_from([1.0, 2.0, 6.0]),
       st.sampled_from(["frostman-type", "katz-tao"]))
def test_set_check_matches_brute_force(cells, s, K, kind):
    X = DyadicGridSet(1, 6, np.array(sorted(cells)))
    fast = set_check(X, s, K, kind)
    slow = brute_set_check(sorted(cells), 6, s, K, kind)
    assert fast[0] == slow[0]
    if not fast[0]:
        assert fast[1] == pytest.approx(slow[1])


def test_ball_cell_count_convention():
    X = DyadicGridSet(1, 4, np.array([3, 4, 5, 9]))
    for x in (0.2, 0.25, 0.3, 0.6):
        for r in (2.0 ** -4, 2.0 ** -3, 0.25):
            assert ball_cell_count(X, x, r) == brute_ball_count([3, 4, 5, 9], 4, x, r)


# ---------------------------------------------------------------------------
# uniformize
# ---------------------------------------------------------------------------

def test_uniformize_fixed_points():
    spec = CantorSpec(block=2, keep=2, depth=5, seed=9)
    X, _ = make_random_frostman(spec)
    out = uniformize(X, 2, 5)
    assert np.array_equal(out.cells, X.cells)   # already uniform
    full = DyadicGridSet(1, 6, np.arange(64))
    out2 = uniformize(full, 2, 3)
    assert np.array_equal(out2.cells, full.cells)


def test_uniformize_random_inputs():
    rng = np.random.default_rng(21)
    D, m = 2, 5
    for trial in range(25):
        size = int(rng.integers(3, 500))
        cells = np.unique(rng.choice(1 << (D * m), size=size, replace=False))
        X = DyadicGridSet(1, D * m, cells)
        out = uniformize(X, D, m)
        ok, counts = uniformity_audit(out, D, m)
        assert ok
        assert out.size >= X.size / (D + 1) ** m
        assert np.all(np.isin(out.cells, X.cells))


def test_uniformize_dim2():
    rng = np.random.default_rng(5)
    D, m = 2, 3
    cells = np.unique(rng.integers(0, 1 << (D * m), size=(300, 2)), axis=0)
    X = DyadicGridSet(2, D * m, cells)
    out = uniformize(X, D, m)
    ok, _ = uniformity_audit(out, D, m)
    assert ok


# ---------------------------------------------------------------------------
# branching functions
# ---------------------------------------------------------------------------

def test_branching_full_interval_linear():
    X = DyadicGridSet(1, 6, np.arange(64))
    f = branching_function(X, 2, 3)
    assert np.allclose(f.values, [0, 1 / 3, 2 / 3, 1.0], atol=1e-12)


def test_branching_singleton_zero():
    X = DyadicGridSet(1, 6, np.array([17]))
    f = branching_function(X, 2, 3)
    assert np.allclose(f.values, 0.0, atol=1e-12)


def test_branching_cantor_half_slope():
    spec = CantorSpec(block=2, keep=2, depth=6, seed=1)
    X, _ = make_random_frostman(spec)
    f = branching_function(X, 2, 6)
    assert np.allclose(f.values, np.linspace(0, 0.5, 7), atol=1e-12)


def test_branching_rejects_non_uniform():
    X = DyadicGridSet(1, 4, np.array([0, 1, 2, 3, 4]))   # parents 0 and 1 differ
    with pytest.raises(ValueError, match="uniform"):
        branching_function(X, 2, 2)


def test_branching_close_to_raw_profile_after_uniformize():
    rng = np.random.default_rng(31)
    D, m = 2, 6
    cells = np.unique(rng.choice(1 << (D * m), size=800, replace=False))
    X = DyadicGridSet(1, D * m, cells)
    U = uniformize(X, D, m)
    f = branching_function(U, D, m)
    denom = D * m * np.log(2.0)
    for j in range(m + 1):
        raw = np.log(covering_number(X, 2.0 ** -(D * j))) / denom if j else 0.0
        assert abs(f.values[j] - raw) <= 1.0 / m + 1e-9


# ---------------------------------------------------------------------------
# superlinear decomposition
# ---------------------------------------------------------------------------

def _check_decomposition(f: BranchingFunction, eps=0.25):
    out = superlinear_decompose(f, eps)
    values = np.asarray(f.values)
    m = f.m
    slopes = [s for _, _, s in out]
    assert all(b > a for a, b, _ in out)
    assert out[0][0] == 0.0 and out[-1][1] == 1.0
    assert all(x[1] == y[0] for x, y in zip(out, out[1:]))
    assert all(s2 >= s1 - 1e-12 for s1, s2 in zip(slopes, slopes[1:]))
    for a, b, s in out:
        ia, ib = int(round(a * m)), int(round(b * m))
        for u in range(ia + 1, ib + 1):
            assert values[u] - values[ia] >= s * (u - ia) / m - 1e-9
    return out


def test_superlinear_linear_profile():
    f = BranchingFunction(D=2, m=8, values=tuple(np.linspace(0, 1, 9)))
    out = _check_decomposition(f)
    total = sum(s * (b - a) for a, b, s in out)
    assert total >= f.values[-1] - 0.25
    assert len(out) == 1 and out[0][2] == pytest.approx(1.0, abs=1e-9)


def test_superlinear_flat_profile():
    f = BranchingFunction(D=2, m=6, values=(0.0,) * 7)
    out = _check_decomposition(f)
    assert len(out) == 1 and out[0][2] == 0.0


def test_superlinear_two_slope_profile():
    m = 8
    vals = [0.0] * (m // 2) + list(np.linspace(0, 0.5, m // 2 + 1))
    f = BranchingFunction(D=2, m=m, values=tuple(vals))
    out = _check_decomposition(f, eps=0.25)
    total = sum(s * (b - a) for a, b, s in out)
    assert total >= f.values[-1] - 0.25
    # oracle: exhaustive search over single breakpoints for the best 2-piece sum
    values = np.asarray(f.values)

    def max_slope(i, j):
        return min((values[u] - values[i]) / ((u - i) / m) for u in range(i + 1, j + 1))

    best = max(max_slope(0, b) * (b / m) + max_slope(b, m) * ((m - b) / m)
               for b in range(1, m))
    assert total >= best - 0.25


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def _grid2(points, level):
    h = 2.0 ** -level
    cells = np.array([[int(np.floor(x / h)), int(np.floor(y / h))]
                      for x, y in points])
    return DyadicGridSet(2, level, cells)


def test_project_coordinate_shadow():
    pts = [(0.1, 0.9), (0.4, 0.2), (0.8, 0.5)]
    X = _grid2(pts, 4)
    out = project(X, 0.0, 4)
    assert out.size == 3
    xs = sorted(int(p[0] * 16) for p in pts)
    assert sorted(out.cells.tolist()) == xs


def test_project_kernel_direction():
    pts = [(0.0, 0.0), (0.25, 0.25), (0.5, 0.5), (0.75, 0.75)]
    X = _grid2(pts, 2)
    out = project(X, 1.0, 2)
    assert covering_number(out, 0.25) == 1


def test_project_difference_set():
    a = [0.0, 0.25, 0.5, 0.75]
    pts = [(x, y) for x in a for y in a]
    X = _grid2(pts, 2)
    out = project(X, 1.0, 2)
    assert out.size == 7   # A - A = {-3/4 .. 3/4} step 1/4


def test_projection_scan_full_sets():
    level = 6
    A = DyadicGridSet(1, level, np.arange(1 << level))
    Y = DyadicGridSet(1, level, np.arange(1 << level))
    rep = projection_scan(A, A, Y, s=1.0, t=1.0, c=1.0 / 24)
    assert rep.passed


def test_projection_scan_zero_direction():
    level = 6
    rng = np.random.default_rng(8)
    A1 = DyadicGridSet(1, level, rng.choice(1 << level, 12, replace=False))
    A2 = DyadicGridSet(1, level, rng.choice(1 << level, 9, replace=False))
    Y = DyadicGridSet(1, level, np.array([0]))   # y-cell center 2^-7, almost 0
    rep = projection_scan(A1, A2, Y, s=0.5, t=0.0)
    # shadow direction: covering count is |A1| up to boundary slop
    assert abs(rep.best_covering - A1.size) <= 2


# ---------------------------------------------------------------------------
# additive energy
# ---------------------------------------------------------------------------

def test_additive_energy_progression_formula():
    for N in (3, 8, 20, 64):
        A = DyadicGridSet(1, 8, np.arange(N))
        expected = (2 * N ** 3 + N) // 3
        assert additive_energy(A, A) == expected
    # brute-force quadruple count for a small case
    A = DyadicGridSet(1, 8, np.arange(6))
    assert additive_energy(A, A) == brute_additive_energy(range(6), range(6))


def test_additive_energy_singleton():
    A = DyadicGridSet(1, 5, np.array([7]))
    assert additive_energy(A, A) == 1


@settings(max_examples=40, deadline=None)
@given(st.sets(st.integers(0, 31), min_size=1, max_size=12),
       st.sets(st.integers(0, 31), min_size=1, max_size=12))
def test_additive_energy_matches_four_loop(a, b):
    A = DyadicGridSet(1, 5, np.array(sorted(a)))
    B = DyadicGridSet(1, 5, np.array(sorted(b)))
    assert additive_energy(A, B) == brute_additive_energy(sorted(a), sorted(b))


def test_additive_energy_cauchy_schwarz_floor():
    rng = np.random.default_rng(13)
    for _ in range(10):
        a = np.unique(rng.choice(256, size=20))
        b = np.unique(rng.choice(256, size=25))
        A = DyadicGridSet(1, 8, a)
        B = DyadicGridSet(1, 8, b)
        diff_count = np.unique(np.subtract.outer(a, b)).size
        assert additive_energy(A, B) >= (a.size * b.size) ** 2 / diff_count - 1e-9
