"""Entropy estimates from counts, plus closed-form and combinatorial oracles."""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .counting import (design_patch, greedy_separated_indices, greedy_spanning, line_patch,
                       metric_matrix, patch_greedy, patch_stencil)
from .lattice import IndexSetMode, KIndex, LatticeError, index_set, k_bits, unit
from .systems import (NumericFloorError, SampleConfig, ShiftSystem, System, ToralSystem, TranslationSystem,
                      ValidationError, as_matrix, eigen_data, make_iterate)

DEFAULT_EPS = (0.1, 0.05, 0.02, 0.01, 0.005)
DEFAULT_N_RANGE = (3, 7)
TORAL_EPS_FLOOR = 1e-3
QUANTITIES = ("sep-lower", "span-upper")


def worker_count() -> int:
    """Thread cap from ``KENT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("KENT_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# growth rates


def growth_rate(log_counts: Sequence[tuple[int, float]], method: str = "slope") -> float:
    """Finite-n stand-in for ``limsup (1/n) log count``.

    ``slope`` is the least-squares slope of log-count against n;
    ``tail-difference`` is the last increment ``L(n_max) - L(n_max - 1)``.
    """
    if len(log_counts) < 3:
        raise ValueError("growth_rate needs at least 3 points")
    ns = np.array([float(n) for n, _ in log_counts])
    ys = np.array([float(v) for _, v in log_counts])
    if np.any(np.diff(ns) <= 0):
        raise ValueError("n values must be strictly increasing")
    if method == "slope":
        xc = ns - ns.mean()
        return float(xc @ (ys - ys.mean()) / (xc @ xc))
    if method == "tail-difference":
        if ns[-1] - ns[-2] != 1:
            raise ValueError("tail-difference needs consecutive n at the top of the range")
        return float(ys[-1] - ys[-2])
    raise ValueError(f"unknown growth-rate method {method!r}")


def _fit_residual(ns, ys, rate) -> float:
    ns, ys = np.asarray(ns, float), np.asarray(ys, float)
    icpt = ys.mean() - rate * ns.mean()
    return float(np.sqrt(np.mean((ys - (icpt + rate * ns)) ** 2)))


@dataclass
class EpsCurve:
    eps: float
    ns: list[int]
    counts: list[int]
    log_counts: list[float]
    rate: float
    tail_rate: float
    residual: float

    def to_dict(self) -> dict:
        return {"eps": self.eps, "ns": self.ns, "counts": self.counts, "log_counts": self.log_counts,
                "rate": self.rate, "tail_rate": self.tail_rate, "residual": self.residual}


@dataclass
class EntropyEstimate:
    k: KIndex
    mode: IndexSetMode
    quantity: str
    per_eps: list[EpsCurve]
    extrapolated: float
    tail_extrapolated: float
    monotone: bool
    qualifier: str
    sample: str
    system: str = ""
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.per_eps:
            raise ValueError("an estimate needs at least one eps")
        for c in self.per_eps:
            if len(c.ns) < 3 or not math.isfinite(c.rate):
                raise ValueError(f"bad curve at eps={c.eps}")

    def to_dict(self) -> dict:
        return {"k": self.k.k, "d": self.k.d, "mode": self.mode.value, "quantity": self.quantity,
                "qualifier": self.qualifier, "extrapolated": self.extrapolated,
                "tail_extrapolated": self.tail_extrapolated, "monotone_in_eps": self.monotone,
                "sample": self.sample, "system": self.system, "notes": list(self.notes),
                "per_eps": [c.to_dict() for c in self.per_eps]}

    def csv_rows(self) -> list[dict]:
        rows = []
        for c in self.per_eps:
            for n, cnt, lc in zip(c.ns, c.counts, c.log_counts):
                rows.append({"k": self.k.k, "mode": self.mode.value, "quantity": self.quantity,
                             "eps": repr(float(c.eps)), "n": n, "count": cnt, "log_count": repr(float(lc)),
                             "rate": repr(float(c.rate))})
        return rows


ESTIMATE_CSV_COLUMNS = ("k", "mode", "quantity", "eps", "n", "count", "log_count", "rate")


# ---------------------------------------------------------------------------
# the estimator


def grid_slack(S: System, n: int, kx: KIndex, mode, count: int) -> float:
    """Density of a ``grid`` torus sample under ``rho_{n,k}`` (every point is within this of the grid)."""
    side = max(1, math.isqrt(count))
    half = 0.5 / side
    if isinstance(S, TranslationSystem):
        return half
    if isinstance(S, ToralSystem):
        worst = 0.0
        for m in index_set(n, kx, mode):
            P = S.power_float(m)
            M = S._Vinv @ P if S.metric_mode == "eigen" else P
            worst = max(worst, float(np.max(np.sum(np.abs(M), axis=1))))
        return worst * half * (1 + 1e-9)
    raise ValueError(f"no automatic density bound for {S.descriptor}; pass density_slack")


def _default_cfg(S: System) -> SampleConfig:
    if isinstance(S, ToralSystem):
        return SampleConfig("expanding", 200_000, 0)
    # 21 x 21 keeps grid spacings off the default eps values (no exact ties)
    return SampleConfig("grid", 441, 0)


def _check_schedule(S: System, eps_schedule: Sequence[float], n_range: tuple[int, int]) -> list[int]:
    eps = list(eps_schedule)
    if not eps or any(e <= 0 for e in eps):
        raise ValueError("eps schedule must be nonempty and positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError(f"eps schedule must be strictly decreasing: {eps}")
    if isinstance(S, ToralSystem) and min(eps) < TORAL_EPS_FLOOR:
        raise NumericFloorError(f"eps {min(eps)} is below the toral numeric floor {TORAL_EPS_FLOOR}")
    lo, hi = n_range
    ns = list(range(lo, hi + 1))
    if lo < 1 or len(ns) < 3:
        raise ValueError(f"n range {n_range} must contain at least 3 values >= 1")
    return ns


def _counts_for_eps(S, kx, mode, eps, ns, cfg, quantity, density_slack, oversample) -> tuple[list[int], str]:
    if isinstance(S, ToralSystem) and quantity == "sep-lower" and cfg.scheme in ("expanding", "unstable-line"):
        if cfg.scheme == "expanding":
            patch = design_patch(S, kx, mode, eps, ns[0], ns[-1], cfg.count, cfg.seed, oversample, cfg.anchor)
        else:
            patch = line_patch(S, cfg.count, cfg.length, cfg.seed, cfg.anchor)
        counts = [len(patch_greedy(patch, patch_stencil(S, patch, n, kx, mode, eps))) for n in ns]
        return counts, patch.describe()
    pts = S.sample(cfg)
    desc = f"{cfg.scheme}(count={len(pts)}, seed={cfg.seed})"
    counts = []
    for n in ns:
        if quantity == "sep-lower":
            counts.append(len(greedy_separated_indices(S, pts, n, kx, mode, eps)))
        else:
            if density_slack is None:
                slack = grid_slack(S, n, kx, mode, cfg.count) if cfg.scheme == "grid" else None
                if slack is None:
                    raise ValueError("span-upper needs a grid sample or an explicit density_slack")
            else:
                slack = density_slack(n) if callable(density_slack) else float(density_slack)
            if slack >= eps:
                raise ValueError(f"sample too coarse for requested radius: slack {slack:.3g} >= eps {eps} at n={n}")
            counts.append(len(greedy_spanning(S, pts, n, kx, mode, eps, slack)))
    return counts, desc


def estimate(S: System, kx: KIndex, mode: IndexSetMode | str = IndexSetMode.QUADRANT,
             eps_schedule: Sequence[float] = DEFAULT_EPS, n_range: tuple[int, int] = DEFAULT_N_RANGE,
             cfg: SampleConfig | None = None, quantity: str = "sep-lower",
             density_slack: float | Callable[[int], float] | None = None, oversample: float = 0.9,
             monotone_tol: float = 1e-2, workers: int | None = None) -> EntropyEstimate:
    """Estimate ``h_k`` by fitting growth rates of greedy counts over ``n``.

    Toral systems with the ``expanding`` or ``unstable-line`` scheme use the
    translation-invariant patch kernel; everything else runs the generic
    greedy on ``S.sample(cfg)``.  The extrapolated value is the rate at the
    smallest ``eps``.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    mode = IndexSetMode.parse(mode)
    if kx.d != S.d:
        raise LatticeError(f"k index has d={kx.d}, system has d={S.d}")
    ns = _check_schedule(S, eps_schedule, n_range)
    cfg = cfg or _default_cfg(S)

    def job(eps):
        return _counts_for_eps(S, kx, mode, eps, ns, cfg, quantity, density_slack, oversample)

    w = workers or worker_count()
    if w > 1:
        with ThreadPoolExecutor(max_workers=w) as ex:
            results = list(ex.map(job, eps_schedule))
    else:
        results = [job(e) for e in eps_schedule]

    curves = []
    for eps, (counts, _) in zip(eps_schedule, results):
        logs = [math.log(c) for c in counts]
        pairs = list(zip(ns, logs))
        rate = growth_rate(pairs, "slope")
        curves.append(EpsCurve(float(eps), ns, counts, logs, rate, growth_rate(pairs, "tail-difference"),
                               _fit_residual(ns, logs, rate)))
    rates = [c.rate for c in curves]
    monotone = all(b >= a - monotone_tol for a, b in zip(rates, rates[1:]))
    notes = []
    if not monotone:
        notes.append("fitted rate decreases as eps shrinks")
    if isinstance(S, ToralSystem) and not S.aligned:
        notes.append("toral generators are not aligned; no closed form applies")
    return EntropyEstimate(kx, mode, quantity, curves, curves[-1].rate, curves[-1].tail_rate, monotone,
                           "lower-bound" if quantity == "sep-lower" else "upper-bound",
                           results[-1][1], S.descriptor, notes)


# ---------------------------------------------------------------------------
# toral oracles


def toral_formula(A, B=None) -> float:
    """``log|lambda_A| + log|lambda_B|`` for an aligned commuting hyperbolic pair.

    With ``B=None`` this is the classical ``log|lambda_A|`` of a single map.
    """
    eig = eigen_data(A, B)
    if not eig.aligned:
        raise ValidationError("theorem hypothesis violated: expanding eigenvalues are not aligned; use the estimator")
    return float(sum(math.log(abs(l)) for l in eig.lam1))


def ball_sides(n: int, kx: KIndex, eps: float, lam_a: float, lam_b: float) -> tuple[float, float]:
    """Side lengths (along ``v1``, along ``v2``) of a ``rho~_{n,k}``-ball, quadrant index set.

    The ``v1`` coordinate scales by ``lam_a**m1 * lam_b**m2`` and the ``v2``
    coordinate by the reciprocal, so each side is ``2 eps`` over the largest
    such factor on the k-quadrant box.
    """
    if kx.d != 2:
        raise LatticeError(f"ball_sides needs a d=2 index, got d={kx.d}")
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    la, lb = abs(lam_a), abs(lam_b)
    if la <= 1 or lb <= 1:
        raise ValueError("both eigenvalues must be expanding (|lambda| > 1)")
    b1, b2 = kx.bits
    g1 = la ** ((1 - b1) * (n - 1)) * lb ** ((1 - b2) * (n - 1))
    g2 = la ** (b1 * (n - 1)) * lb ** (b2 * (n - 1))
    return 2 * eps / g1, 2 * eps / g2


def lifted_k_metric(S: ToralSystem, n: int, kx: KIndex, mode, w) -> float:
    """``rho~_{n,k}(w, 0)`` on the plane: no reduction mod 1."""
    a = 0.0
    for m in index_set(n, kx, mode):
        a = max(a, float(np.max(np.abs(S.eigen_coords(S.power_float(m) @ np.asarray(w, float))))))
    return a


def ball_sides_bruteforce(S: ToralSystem, n: int, kx: KIndex, eps: float,
                          mode: IndexSetMode | str = IndexSetMode.QUADRANT) -> tuple[float, float]:
    """Ball extents along ``v1`` and ``v2`` by maximising over the whole index set.

    ``rho~_{n,k}`` is positively homogeneous, so the half-extent along ``v_j``
    is ``eps / rho~_{n,k}(v_j, 0)``.
    """
    if S.eig is None or S.metric_mode != "eigen":
        raise ValueError("ball_sides_bruteforce needs the eigen metric")
    return tuple(2 * eps / lifted_k_metric(S, n, kx, mode, v) for v in (S.eig.v1, S.eig.v2))


# ---------------------------------------------------------------------------
# shift oracle


def shift_sep_oracle(q: int, n: int, j: int, as_log: bool = False):
    """Exact ``sep(n, 1, 2**-j)`` for the two-sided full shift on ``q`` symbols.

    Two sequences are ``2**-j`` apart in ``rho_n`` exactly when they differ on
    ``[-j, n-1+j]``, so the count is ``q**(n + 2j)``.
    """
    if q < 2 or n < 1 or j < 0:
        raise ValueError("need q >= 2, n >= 1, j >= 0")
    L = n + 2 * j
    return L * math.log(q) if as_log else q**L


def shift_sep_bruteforce(q: int, n: int, j: int, W: int = 4) -> int:
    """``sep`` by enumerating every word on ``[-W, W]``.

    The ``< eps`` relation here is an equivalence (agreement on a window),
    which is verified; the maximum separated set is then one point per class.
    """
    S = ShiftSystem(q, W)
    eps = 2.0**-j
    S.check_scale(n, eps)
    words = list(itertools.product(range(q), repeat=2 * W + 1))
    D = metric_matrix(S, words, n, k_bits(1, 1), IndexSetMode.QUADRANT)
    close = D < eps
    # equivalence: rows of the relation are either identical or disjoint
    _, first, inverse = np.unique(close, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for c, row in enumerate(first):
        members = inverse == c
        if not np.array_equal(close[row], members):
            raise AssertionError("the <eps relation is not an equivalence; window argument fails")
    return len(first)


# ---------------------------------------------------------------------------
# iterate bound


@dataclass
class IterateReport:
    r: tuple[int, ...]
    k: int
    lhs: float
    generator_rates: list[float]
    rhs: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.lhs >= self.rhs - self.tolerance

    def to_dict(self) -> dict:
        return {"r": list(self.r), "k": self.k, "lhs": self.lhs, "generator_rates": self.generator_rates,
                "rhs": self.rhs, "tolerance": self.tolerance, "passed": self.passed}


def iterate_bound_check(S: System, r: Sequence[int], kx: KIndex, mode=IndexSetMode.QUADRANT,
                        eps_schedule=DEFAULT_EPS, n_range=DEFAULT_N_RANGE, cfg: SampleConfig | None = None,
                        tolerance: float = 0.1, **kw) -> IterateReport:
    """Compare ``estimate(T^r)`` with ``max_i |r_i| * estimate(T^{e_i})``."""
    r = tuple(int(v) for v in r)
    lhs = estimate(make_iterate(S, r), kx, mode, eps_schedule, n_range, cfg, **kw).extrapolated
    gens = [estimate(make_iterate(S, unit(i, S.d)), kx, mode, eps_schedule, n_range, cfg, **kw).extrapolated
            for i in range(S.d)]
    rhs = max(abs(ri) * g for ri, g in zip(r, gens))
    return IterateReport(r, kx.k, lhs, gens, rhs, tolerance)
