import math

import numpy as np
import pytest

from conftest import CAT, LAMBDA_A, TORAL_TARGET
from kent.entropy import (ESTIMATE_CSV_COLUMNS, ball_sides, ball_sides_bruteforce, estimate, growth_rate,
                          iterate_bound_check, shift_sep_bruteforce, shift_sep_oracle, toral_formula, worker_count)
from kent.lattice import LatticeError, all_k, k_bits
from kent.systems import (NumericFloorError, ProductSystem, SampleConfig, ShiftSystem, ValidationError,
                          make_finite, make_toral, parse_cycles)

K1_2 = k_bits(1, 2)


@pytest.fixture
def rotation():
    N = 6
    table = np.array([[min(abs(i - j), N - abs(i - j)) for j in range(N)] for i in range(N)], float)
    return make_finite(N, [parse_cycles("(1 2 3 4 5 6)", N), parse_cycles("(1 3 5)(2 4 6)", N)], table)


def test_growth_rate_exact():
    c = 0.731
    data = [(2, 2 * c), (3, 3 * c), (4, 4 * c)]
    assert growth_rate(data, "slope") == pytest.approx(c, abs=1e-15)
    assert growth_rate(data, "tail-difference") == pytest.approx(c, abs=1e-15)
    assert growth_rate([(n, 5.0) for n in range(3, 8)]) == 0
    for q in (2, 3, 5):
        for j in (0, 1, 2):
            logs = [(n, shift_sep_oracle(q, n, j, as_log=True)) for n in range(2, 7)]
            assert growth_rate(logs) == pytest.approx(math.log(q), abs=1e-12)
            assert growth_rate(logs, "tail-difference") == pytest.approx(math.log(q), abs=1e-12)


def test_growth_rate_errors():
    with pytest.raises(ValueError):
        growth_rate([(1, 0.0), (2, 1.0)])
    with pytest.raises(ValueError):
        growth_rate([(1, 0.0), (3, 1.0), (2, 2.0)])
    with pytest.raises(ValueError):
        growth_rate([(1, 0.0), (2, 1.0), (3, 2.0)], "median")


def test_toral_formula():
    assert toral_formula(CAT, ((5, 3), (3, 2))) == pytest.approx(TORAL_TARGET, abs=1e-12)
    assert toral_formula(CAT, CAT) == pytest.approx(2 * math.log(LAMBDA_A), abs=1e-12)
    assert toral_formula(CAT) == pytest.approx(math.log(LAMBDA_A), abs=1e-12)
    # published six-digit constants carry a rounding slip of a few 1e-6
    assert toral_formula(CAT, ((5, 3), (3, 2))) == pytest.approx(2.887267, abs=5e-6)
    assert toral_formula(CAT, CAT) == pytest.approx(1.924845, abs=5e-6)
    assert toral_formula(CAT) == pytest.approx(0.962424, abs=5e-6)
    with pytest.raises(ValidationError, match="hypothesis violated"):
        toral_formula(CAT, ((1, -1), (-1, 2)))


def test_ball_sides_closed_form():
    for kx in all_k(2):
        assert ball_sides(1, kx, 0.1, 2, 3) == (pytest.approx(0.2), pytest.approx(0.2))
    assert ball_sides(3, k_bits(1, 2), 0.1, 2, 3) == (pytest.approx(0.2 / 36), pytest.approx(0.2))
    assert ball_sides(3, k_bits(4, 2), 0.1, 2, 3) == (pytest.approx(0.2), pytest.approx(0.2 / 36))
    # k=2 negates the first coordinate, so the v1 side contracts by lambda_B only
    k2 = ball_sides(3, k_bits(2, 2), 0.1, 2, 3)
    k3 = ball_sides(3, k_bits(3, 2), 0.1, 2, 3)
    assert k2 == (pytest.approx(0.2 / 9), pytest.approx(0.05))
    assert k3 == (pytest.approx(0.05), pytest.approx(0.2 / 9))
    assert sorted(k2) == pytest.approx(sorted([0.05, 0.2 / 9]))
    with pytest.raises(LatticeError):
        ball_sides(3, k_bits(1, 1), 0.1, 2, 3)
    with pytest.raises(ValueError):
        ball_sides(3, K1_2, 0.1, 0.5, 3)


def test_ball_sides_bruteforce(cat_pair):
    la, lb = cat_pair.eig.lam1
    for kx in all_k(2):
        for n in range(1, 7):
            for eps in (0.1, 0.01):
                closed = ball_sides(n, kx, eps, la, lb)
                brute = ball_sides_bruteforce(cat_pair, n, kx, eps)
                assert max(abs(a - b) for a, b in zip(closed, brute)) <= 1e-9
    assert ball_sides_bruteforce(cat_pair, 1, K1_2, 0.1) == pytest.approx((0.2, 0.2))
    assert ball_sides_bruteforce(cat_pair, 4, k_bits(1, 2), 0.1) == pytest.approx(
        ball_sides_bruteforce(cat_pair, 4, k_bits(4, 2), 0.1)[::-1])


def test_shift_oracle():
    assert shift_sep_oracle(2, 1, 0) == 2
    assert shift_sep_oracle(2, 2, 0) == 4
    assert shift_sep_oracle(3, 2, 1) == 81
    assert shift_sep_oracle(2, 400, 3, as_log=True) == pytest.approx(406 * math.log(2))
    with pytest.raises(ValueError):
        shift_sep_oracle(1, 2, 0)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("j", [0, 1])
def test_shift_oracle_window_formula(n, j):
    assert shift_sep_bruteforce(2, n, j, W=4) == shift_sep_oracle(2, n, j)


def test_estimate_rotation_is_zero(rotation):
    for kx in all_k(2):
        est = estimate(rotation, kx, eps_schedule=[1.5, 0.5], n_range=(1, 5))
        assert est.extrapolated == 0
        assert est.qualifier == "lower-bound"
        assert all(c.counts == [c.counts[0]] * 5 for c in est.per_eps)


def test_estimate_shift_and_product():
    S = ShiftSystem(2, 3)
    one = estimate(S, k_bits(1, 1), eps_schedule=[1.0], n_range=(1, 3), cfg=SampleConfig("grid", 2**7))
    assert one.per_eps[0].counts == [2, 4, 8]
    assert one.extrapolated == pytest.approx(math.log(2), abs=1e-12)
    P = ProductSystem(S, ShiftSystem(2, 3))
    two = estimate(P, k_bits(1, 1), eps_schedule=[1.0], n_range=(1, 3), cfg=SampleConfig("grid", 2**14))
    assert two.extrapolated == pytest.approx(2 * one.extrapolated, abs=1e-12)


def test_sep_lower_below_span_upper():
    S = make_toral([CAT])
    cfg = SampleConfig("grid", 3600)
    lo = estimate(S, k_bits(1, 1), eps_schedule=[0.3], n_range=(1, 3), cfg=cfg, quantity="sep-lower")
    hi = estimate(S, k_bits(1, 1), eps_schedule=[0.3], n_range=(1, 3), cfg=cfg, quantity="span-upper")
    assert hi.qualifier == "upper-bound"
    assert all(a <= b for a, b in zip(lo.per_eps[0].counts, hi.per_eps[0].counts))
    assert lo.extrapolated <= hi.extrapolated + 1e-9


def test_estimate_errors(cat_pair, rotation):
    with pytest.raises(ValueError, match="strictly decreasing"):
        estimate(rotation, K1_2, eps_schedule=[0.5, 1.5])
    with pytest.raises(ValueError):
        estimate(rotation, K1_2, n_range=(3, 4))
    with pytest.raises(NumericFloorError):
        estimate(cat_pair, K1_2, eps_schedule=[0.01, 0.0005])
    with pytest.raises(LatticeError):
        estimate(cat_pair, k_bits(1, 1))
    with pytest.raises(ValueError, match="density_slack"):
        estimate(cat_pair, K1_2, eps_schedule=[0.1], cfg=SampleConfig("random", 50), quantity="span-upper")
    with pytest.raises(ValueError, match="too coarse"):
        estimate(make_toral([CAT]), k_bits(1, 1), eps_schedule=[0.1], n_range=(1, 3),
                 cfg=SampleConfig("grid", 16), quantity="span-upper")


def test_estimate_serialisation_and_threads(cat_pair, monkeypatch):
    kw = dict(eps_schedule=[0.1, 0.05], n_range=(2, 4), cfg=SampleConfig("expanding", 20000))
    a = estimate(cat_pair, K1_2, workers=1, **kw)
    b = estimate(cat_pair, K1_2, workers=2, **kw)
    assert a.to_dict() == b.to_dict()
    d = a.to_dict()
    assert d["mode"] == "quadrant" and d["qualifier"] == "lower-bound" and len(d["per_eps"]) == 2
    rows = a.csv_rows()
    assert len(rows) == 6 and set(rows[0]) == set(ESTIMATE_CSV_COLUMNS)
    assert a.monotone == (a.per_eps[1].rate >= a.per_eps[0].rate - 1e-2)
    monkeypatch.setenv("KENT_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("KENT_THREADS", "lots")
    assert worker_count() == 1


def test_misaligned_pair_is_flagged():
    S = make_toral([CAT, ((1, -1), (-1, 2))])
    est = estimate(S, K1_2, eps_schedule=[0.1], n_range=(1, 3), cfg=SampleConfig("random", 300))
    assert any("not aligned" in note for note in est.notes)


def test_iterate_bound_trivial(rotation):
    rep = iterate_bound_check(rotation, (0, 0), K1_2, eps_schedule=[0.5], n_range=(1, 3))
    assert rep.lhs == 0 and rep.rhs == 0 and rep.passed
    rep = iterate_bound_check(rotation, (1, 1), K1_2, eps_schedule=[0.5], n_range=(1, 3))
    assert rep.passed


def test_iterate_bound_cat_pair(cat_pair):
    rep = iterate_bound_check(cat_pair, (1, 1), K1_2, eps_schedule=[0.1, 0.05], n_range=(3, 6),
                              cfg=SampleConfig("expanding", 50000))
    assert rep.passed
    assert rep.generator_rates[0] == pytest.approx(math.log(LAMBDA_A), rel=0.15)
    assert rep.generator_rates[1] == pytest.approx(2 * math.log(LAMBDA_A), rel=0.15)
