import itertools
import math

import numpy as np
import pytest

from conftest import CAT, CAT_PAIR, LAMBDA_A
from kent.counting import k_metric
from kent.lattice import IndexSetMode, LatticeError, all_k
from kent.systems import (FiniteSystem, ProductSystem, SampleConfig, ShiftSystem, TranslationSystem,
                          ValidationError, check_action_law, conjugate_finite, conjugate_toral, make_conjugate,
                          make_finite, make_iterate, make_product, make_subsystem, make_toral, mat_mul, mat_pow,
                          orbits, parse_cycles, ResourceError)
from kent.verify import random_finite

DISCRETE3 = np.ones((3, 3)) - np.eye(3)


def test_toral_apply_example(cat_pair):
    np.testing.assert_allclose(cat_pair.apply((1, 0), np.array([0.5, 0.5])), [0.5, 0.0], atol=1e-15)
    x = np.array([0.3, 0.7])
    np.testing.assert_array_equal(cat_pair.apply((0, 0), x), x)


def test_finite_apply_example():
    S = make_finite(3, [[1, 2, 0]], DISCRETE3)  # (1 2 3) in 1-based notation
    assert S.apply((2,), 0) == 2
    assert S.apply((-1,), 0) == 2
    np.testing.assert_array_equal(parse_cycles("(1 2 3)", 3), [1, 2, 0])


def test_make_finite_validation():
    make_finite(2, [[0, 1], [0, 1]], np.ones((2, 2)) - np.eye(2))
    make_finite(2, [[1, 0], [0, 1]], np.ones((2, 2)) - np.eye(2))
    with pytest.raises(ValidationError, match="do not commute"):
        make_finite(3, [[1, 2, 0], [1, 0, 2]], DISCRETE3)
    bad = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float)
    with pytest.raises(ValidationError, match="triangle inequality fails on triple"):
        make_finite(3, [[0, 1, 2]], bad)
    asym = DISCRETE3.copy()
    asym[0, 1] = 2
    with pytest.raises(ValidationError, match=r"not symmetric at pair \(0, 1\)"):
        make_finite(3, [[0, 1, 2]], asym)
    with pytest.raises(ValidationError, match="not a permutation"):
        make_finite(3, [[0, 0, 1]], DISCRETE3)


@pytest.mark.parametrize("text", ["(1 2", "(1 4)", "(1 1)", "(a b)"])
def test_parse_cycles_rejects(text):
    with pytest.raises(ValidationError):
        parse_cycles(text, 3)


def test_make_toral_validation():
    with pytest.raises(ValidationError, match="do not commute"):
        make_toral([CAT, ((1, 1), (1, 2))])
    with pytest.raises(ValidationError, match="det"):
        make_toral([((2, 0), (0, 1))])
    with pytest.raises(ValidationError, match="complex or repeated"):
        make_toral([((0, -1), (1, 0))])
    with pytest.raises(ValidationError):
        make_toral([((1, 1), (0, 1))])
    inv = make_toral([CAT, ((1, -1), (-1, 2))])
    assert not inv.aligned
    # det = -1 is admitted
    assert make_toral([((1, 1), (1, 0))]).aligned


def test_eigen_data(cat_pair):
    e = cat_pair.eig
    assert e.lam1[0] == pytest.approx(LAMBDA_A, abs=1e-12)
    assert e.lam1[1] == pytest.approx(LAMBDA_A**2, abs=1e-12)
    assert e.v1[1] / e.v1[0] == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)
    for M, lam in zip(CAT_PAIR, e.lam1):
        assert np.linalg.norm(np.array(M, float) @ e.v1 - lam * e.v1) <= 1e-12
    assert abs(e.v1 @ e.v2) < 1e-12


def test_power_cache_exact(cat_pair):
    A, B = CAT_PAIR
    for m in itertools.product(range(-6, 7), repeat=2):
        naive = ((1, 0), (0, 1))
        for _ in range(abs(m[0])):
            naive = mat_mul(naive, A if m[0] > 0 else ((1, -1), (-1, 2)))
        for _ in range(abs(m[1])):
            naive = mat_mul(naive, B if m[1] > 0 else mat_pow(B, -1))
        assert cat_pair.power(m) == naive
    assert mat_mul(A, B) == mat_mul(B, A)


def test_torus_dist(cat_pair):
    x = np.array([0.4, 0.3])
    assert cat_pair.dist(x, x) == 0
    y = np.mod(x + 0.1 * cat_pair.eig.v1, 1)
    assert cat_pair.dist(y, x) == pytest.approx(0.1, abs=1e-12)
    std = cat_pair.with_metric("standard")
    assert std.dist(np.array([0.95, 0]), np.array([0.05, 0])) == pytest.approx(0.1, abs=1e-12)


def test_metric_equivalence(cat_pair):
    rng = np.random.default_rng(1)
    w = rng.random((1000, 2)) - rng.random((1000, 2))
    c, C = cat_pair.metric_constants()
    de, ds = cat_pair.offset_dist(w), cat_pair.with_metric("standard").offset_dist(w)
    assert np.all(ds >= c * de / 1.1) and np.all(ds <= C * de * 1.1)


def test_action_law_all_systems(cat_pair):
    rng = np.random.default_rng(0)
    pts = list(rng.random((5, 2)))
    check_action_law(cat_pair, pts, tol=1e-9)
    check_action_law(TranslationSystem([[0.1, 0.2], [0.3, 0.05]]), pts)
    F = random_finite(rng, 8)
    check_action_law(F, F.points)
    sh = ShiftSystem(2, 4)
    words = sh.sample(SampleConfig("random", 5))
    # shift law only holds away from the window edge; keep the radius small
    check_action_law(make_finite(1, [[0]], np.zeros((1, 1))), [0])
    for w in words:
        assert sh.apply((0,), w) == w
    P = ProductSystem(cat_pair, TranslationSystem([[0.1, 0.2], [0.3, 0.05]]))
    check_action_law(P, list(zip(pts, pts)), radius=2, tol=1e-9)


def test_product(cat_pair):
    T = TranslationSystem([[0.1, 0.2], [0.3, 0.05]])
    P = make_product(cat_pair, T)
    x1, x2 = np.array([0.1, 0.1]), np.array([0.2, 0.1])
    y1, y2 = np.array([0.0, 0.0]), np.array([0.7, 0.0])
    assert P.dist((x1, y1), (x1, y1)) == 0
    assert P.dist((x1, y1), (x2, y2)) == max(cat_pair.dist(x1, x2), T.dist(y1, y2))
    m = (2, -1)
    px, py = P.apply(m, (x1, y1))
    np.testing.assert_array_equal(px, cat_pair.apply(m, x1))
    np.testing.assert_array_equal(py, T.apply(m, y1))
    with pytest.raises(LatticeError):
        make_product(cat_pair, make_toral([CAT]))


def test_product_finite_metric_is_max():
    rng = np.random.default_rng(3)
    S1, S2 = random_finite(rng, 4), random_finite(rng, 4)
    P = make_product(S1, S2)
    for (a, b), (c, d) in itertools.product(itertools.product(range(S1.N), range(S2.N)), repeat=2):
        assert P.dist(a * S2.N + b, c * S2.N + d) == max(S1.table[a, c], S2.table[b, d])


def test_iterate(cat_pair):
    x = np.array([0.123, 0.456])
    one = make_iterate(cat_pair, (1, 1))
    zero = make_iterate(cat_pair, (0, 0))
    r21 = make_iterate(cat_pair, (2, 1))
    A, B = CAT_PAIR
    for m in itertools.product(range(-2, 3), repeat=2):
        np.testing.assert_allclose(one.apply(m, x), cat_pair.apply(m, x), atol=1e-12)
        np.testing.assert_allclose(zero.apply(m, x), x, atol=1e-15)
    assert r21.power((1, 1)) == mat_mul(mat_pow(A, 2), B)
    assert r21.eig.lam1[0] == pytest.approx(LAMBDA_A**2)
    F = random_finite(np.random.default_rng(5), 6)
    F2 = make_iterate(F, (2, 1))
    for p in range(F.N):
        assert F2.apply((1, 1), p) == F.apply((2, 1), p)


def test_subsystem():
    S = make_finite(4, [[1, 2, 0, 3]], np.ones((4, 4)) - np.eye(4))
    full = make_subsystem(S, range(4))
    np.testing.assert_array_equal(full.table, S.table)
    np.testing.assert_array_equal(full.generators[0], S.generators[0])
    fixed = make_subsystem(S, [3])
    assert fixed.N == 1
    with pytest.raises(ValidationError, match="point 0 escapes"):
        make_subsystem(S, [0])
    assert orbits(S) == [[0, 1, 2], [3]]


def test_conjugate_identity_and_pullback():
    rng = np.random.default_rng(7)
    F = random_finite(rng, 8)
    same = make_conjugate(F, lambda p: p, lambda p: p, pullback=True)
    for m in [(1, 0), (2, -1)]:
        for p in range(F.N):
            assert same.apply(m, p) == F.apply(m, p)
    h = rng.permutation(F.N)
    hinv = np.argsort(h)
    C = make_conjugate(F, lambda p: int(h[p]), lambda q: int(hinv[q]), pullback=True)
    kx = all_k(2)[2]
    for y1, y2 in itertools.combinations(range(F.N), 2):
        assert k_metric(C, 3, kx, "quadrant", y1, y2) == k_metric(F, 3, kx, "quadrant", int(hinv[y1]),
                                                                  int(hinv[y2]))
    G = conjugate_finite(F, h)
    np.testing.assert_array_equal(G.table[np.ix_(h, h)], F.table)
    with pytest.raises(ValidationError):
        make_conjugate(F, lambda p: p + 1, lambda q: q, pullback=True)


def test_conjugate_toral_swap(cat_pair):
    P = ((0, 1), (1, 0))
    T = conjugate_toral(cat_pair, P)
    assert T.matrices == tuple(mat_mul(mat_mul(P, a), P) for a in cat_pair.matrices)
    assert T.aligned
    x = np.array([0.2, 0.65])
    np.testing.assert_allclose(T.apply((1, 1), x[::-1]), cat_pair.apply((1, 1), x)[::-1], atol=1e-12)


def test_sampling(cat_pair):
    g = cat_pair.sample(SampleConfig("grid", 4))
    assert [tuple(p) for p in g] == [(0, 0), (0, 0.5), (0.5, 0), (0.5, 0.5)]
    a = cat_pair.sample(SampleConfig("random", 10, seed=3))
    b = cat_pair.sample(SampleConfig("random", 10, seed=3))
    np.testing.assert_array_equal(a, b)
    line = cat_pair.sample(SampleConfig("unstable-line", 50, seed=1))
    gaps = [cat_pair.dist(line[i], line[i + 1]) for i in range(49)]
    np.testing.assert_allclose(gaps, 1 / 50, atol=1e-12)
    with pytest.raises(LatticeError):
        TranslationSystem([[0.1, 0.2]]).sample(SampleConfig("unstable-line", 10))
    with pytest.raises(ValueError):
        SampleConfig("spiral", 10)
    with pytest.raises(ValueError):
        SampleConfig("grid", 0)


def test_shift_metric_and_window():
    S = ShiftSystem(2, 3)
    x = (0, 0, 0, 1, 0, 0, 0)
    y = (0, 0, 0, 0, 0, 0, 0)
    z = (0, 1, 0, 0, 0, 0, 0)
    assert S.dist(x, y) == 1.0
    assert S.dist(z, y) == 0.25
    assert S.apply((1,), (1, 2, 3, 4, 5, 6, 7)) == (2, 3, 4, 5, 6, 7, 0)
    S.check_scale(2, 0.5)
    with pytest.raises(ResourceError):
        S.check_scale(3, 0.5)
