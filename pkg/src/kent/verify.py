"""Property suites run by ``kent verify``.

Each suite returns a :class:`SuiteReport`.  Random finite systems are disjoint
unions of ``Z_a x Z_b`` translation blocks under a random relabelling, with a
metric table taken from distinct integer points of the plane (L1 or sup
distance).  Integer tables keep every comparison exact and produce plenty of
ties at ``eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .counting import chain_check, exact_sep, exact_span, finite_metric, greedy_separated
from .entropy import (ball_sides, ball_sides_bruteforce, estimate, growth_rate, iterate_bound_check,
                      shift_sep_oracle, toral_formula)
from .lattice import IndexSetMode, all_k, k_bits
from .systems import (FiniteSystem, ProductSystem, SampleConfig, ShiftSystem, ToralSystem, conjugate_finite,
                      conjugate_toral, make_subsystem, make_toral, mat_pow, orbits, product_finite)

CAT = ((2, 1), (1, 1))
CAT_PAIR = (CAT, mat_pow(CAT, 2))
MODES = (IndexSetMode.STRICT, IndexSetMode.QUADRANT)


@dataclass
class SuiteReport:
    name: str
    cases: int = 0
    failures: list[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok: bool, witness: Callable[[], dict]) -> None:
        self.cases += 1
        if not ok:
            self.failures.append(witness())

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "cases": self.cases,
                "failures": self.failures[:5], "failure_count": len(self.failures), "details": self.details}


# ---------------------------------------------------------------------------
# random finite systems


def _block_generators(shapes: Sequence[tuple[int, ...]], d: int) -> list[np.ndarray]:
    gens = [[] for _ in range(d)]
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        cells = np.arange(size).reshape(shape)
        for i in range(d):
            gens[i].append(np.roll(cells, -1, axis=i).reshape(-1) + offset)
        offset += size
    return [np.concatenate(g) for g in gens]


def random_table(rng: np.random.Generator, N: int) -> np.ndarray:
    R = max(3, N)
    flat = rng.choice(R * R, size=N, replace=False)
    pts = np.stack([flat // R, flat % R], axis=1)
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    return (diff.sum(-1) if rng.random() < 0.5 else diff.max(-1)).astype(float)


def random_finite(rng: np.random.Generator, N_max: int = 10, d: int = 2, N_min: int = 1,
                  min_blocks: int = 1) -> FiniteSystem:
    """Seeded random finite ``Z^d``-system with ``N_min <= N <= N_max`` points."""
    while True:
        N = int(rng.integers(N_min, N_max + 1))
        shapes, left = [], N
        while left:
            shape = tuple(int(rng.integers(1, 4)) for _ in range(d))
            while int(np.prod(shape)) > left:
                shape = tuple(max(1, s - 1) for s in shape)
            shapes.append(shape)
            left -= int(np.prod(shape))
        if len(shapes) >= min_blocks:
            break
    S = FiniteSystem(_block_generators(shapes, d), np.zeros((N, N)), descriptor=f"blocks{shapes}")
    return conjugate_finite(S, rng.permutation(N), random_table(rng, N))


def eps_pool(table: np.ndarray) -> list[float]:
    """Every base distance, every midpoint between consecutive ones, and one value above the diameter."""
    vals = np.unique(table[table > 0])
    if not len(vals):
        return [1.0]
    mids = (vals[:-1] + vals[1:]) / 2
    return sorted(set(vals.tolist()) | set(mids.tolist()) | {float(vals[-1]) + 1.0})


def pick_eps(rng: np.random.Generator, table: np.ndarray, count: int) -> list[float]:
    pool = eps_pool(table)
    idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
    return sorted((float(pool[i]) for i in idx), reverse=True)


def system_witness(S: FiniteSystem) -> dict:
    return {"N": S.N, "generators": [g.tolist() for g in S.generators], "table": S.table.tolist()}


# ---------------------------------------------------------------------------
# suites


def verify_chain(count: int = 100, seed: int = 0, N_max: int = 10, n_max: int = 3, eps_per: int = 5) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("chain")
    for _ in range(count):
        S = random_finite(rng, N_max)
        for eps in pick_eps(rng, S.table, eps_per):
            for n in range(1, n_max + 1):
                for kx in all_k(S.d):
                    for mode in MODES:
                        c = chain_check(S, n, kx, mode, eps)
                        rep.check(c.passed, lambda: {**system_witness(S), "n": n, "k": kx.k, "mode": mode.value,
                                                     "eps": eps, "cov_2eps,span,sep,cov": list(c.values())})
    return rep


def verify_product(count: int = 50, seed: int = 0, q: tuple[int, int] = (2, 3)) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("product")
    for _ in range(count):
        S1 = random_finite(rng, 5, N_min=2)
        S2 = random_finite(rng, min(5, 24 // S1.N), N_min=1)
        P = product_finite(S1, S2)
        for eps in pick_eps(rng, P.table, 3):
            for n in (1, 2):
                for kx in all_k(2):
                    for mode in MODES:
                        a1, a2, ap = (exact_span(X, n, kx, mode, eps) for X in (S1, S2, P))
                        b1, b2, bp = (exact_sep(X, n, kx, mode, eps) for X in (S1, S2, P))
                        rep.check(ap <= a1 * a2 and bp >= b1 * b2, lambda: {
                            "S1": system_witness(S1), "S2": system_witness(S2), "n": n, "k": kx.k,
                            "mode": mode.value, "eps": eps, "span": [a1, a2, ap], "sep": [b1, b2, bp]})
    # shift oracles: the rates add
    q1, q2 = q
    j = 1
    ns = range(2, 7)
    combined = [(n, math.log(shift_sep_oracle(q1, n, j) * shift_sep_oracle(q2, n, j))) for n in ns]
    rate = growth_rate(combined)
    target = math.log(q1 * q2)
    rep.check(abs(rate - target) <= 1e-12, lambda: {"shift_rate": rate, "target": target})
    # brute force on the product shift with a one-cell window
    X = ProductSystem(ShiftSystem(q1, 1), ShiftSystem(q2, 1))
    words = [(a, b) for a in ShiftSystem(q1, 1).sample(SampleConfig("grid", q1**3))
             for b in ShiftSystem(q2, 1).sample(SampleConfig("grid", q2**3))]
    got = len(greedy_separated(X, words, 1, k_bits(1, 1), IndexSetMode.QUADRANT, 1.0))
    want = shift_sep_oracle(q1, 1, 0) * shift_sep_oracle(q2, 1, 0)
    rep.check(got == want, lambda: {"product_shift_sep": got, "expected": want})
    rep.details.update(shift_rate=rate, target=target, product_shift_sep=got)
    return rep


def verify_union(count: int = 50, seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("union")
    for _ in range(count):
        S = random_finite(rng, 10, N_min=3, min_blocks=2)
        orbs = orbits(S)
        # two covering families of orbits, possibly overlapping
        while True:
            m1 = rng.random(len(orbs)) < 0.5
            m2 = (rng.random(len(orbs)) < 0.5) | ~m1
            if m1.any() and m2.any():
                break
        idx1 = sorted(p for o, t in zip(orbs, m1) if t for p in o)
        idx2 = sorted(p for o, t in zip(orbs, m2) if t for p in o)
        A1, A2 = make_subsystem(S, idx1), make_subsystem(S, idx2)
        for eps in pick_eps(rng, S.table, 3):
            for n in (1, 2, 3):
                for kx in all_k(2):
                    for mode in MODES:
                        sx, s1, s2 = (exact_sep(X, n, kx, mode, eps) for X in (S, A1, A2))
                        px, p1, p2 = (exact_span(X, n, kx, mode, eps) for X in (S, A1, A2))
                        rep.check(s1 <= sx and s2 <= sx and px <= p1 + p2, lambda: {
                            **system_witness(S), "A1": idx1, "A2": idx2, "n": n, "k": kx.k,
                            "mode": mode.value, "eps": eps, "sep": [sx, s1, s2], "span": [px, p1, p2]})
    return rep


def factor_modulus(X: FiniteSystem, Y_table: np.ndarray, proj: np.ndarray, eps: float) -> float:
    """Largest ``delta`` with ``rho_X < delta  =>  rho_Y(proj) < eps``."""
    far = Y_table[np.ix_(proj, proj)] >= eps
    if not far.any():
        return float(X.table.max()) + 1.0
    return float(X.table[far].min())


def verify_factor(count: int = 25, seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("factor")
    for _ in range(count):
        Y = random_finite(rng, 6, N_min=2)
        F = random_finite(rng, min(4, 24 // Y.N))
        X = product_finite(Y, F)
        Y2 = FiniteSystem(Y.generators, random_table(rng, Y.N), Y.labels, "factor")
        proj = np.arange(X.N) // F.N
        for eps in pick_eps(rng, Y2.table, 3):
            delta = factor_modulus(X, Y2.table, proj, eps)
            for n in (1, 2, 3):
                for kx in all_k(2):
                    for mode in MODES:
                        lo, hi = exact_sep(Y2, n, kx, mode, eps), exact_sep(X, n, kx, mode, delta)
                        rep.check(lo <= hi, lambda: {"X": system_witness(X), "Y": system_witness(Y2), "n": n,
                                                     "k": kx.k, "mode": mode.value, "eps": eps, "delta": delta,
                                                     "sep_Y": lo, "sep_X": hi})
    return rep


def verify_conjugacy(count: int = 25, seed: int = 0, toral: bool = True, ks: Sequence[int] = (1,),
                     tolerance: float = 0.05, S: ToralSystem | None = None, **est_kw) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("conjugacy")
    for _ in range(count):
        X = random_finite(rng, 10)
        h = rng.permutation(X.N)
        Y = conjugate_finite(X, h)
        for n in (1, 2, 3):
            for kx in all_k(2):
                for mode in MODES:
                    DX, DY = finite_metric(X, n, kx, mode), finite_metric(Y, n, kx, mode)
                    ok = np.array_equal(DY[np.ix_(h, h)], DX)
                    rep.check(ok, lambda: {**system_witness(X), "relabel": h.tolist(), "n": n, "k": kx.k,
                                           "mode": mode.value})
    if toral:
        S = S or make_toral(CAT_PAIR)
        T = conjugate_toral(S, ((0, 1), (1, 0)))
        rows = []
        for k in ks:
            kx = k_bits(k, S.d)
            a = estimate(S, kx, **est_kw).extrapolated
            b = estimate(T, kx, **est_kw).extrapolated
            rel = abs(a - b) / abs(a)
            rows.append({"k": k, "original": a, "conjugated": b, "rel_diff": rel})
            rep.check(rel <= tolerance, lambda: rows[-1])
        rep.details["toral"] = rows
    return rep


def verify_torus_balls(S: ToralSystem | None = None, n_max: int = 6, eps_values=(0.1, 0.01),
                       tol: float = 1e-9) -> SuiteReport:
    S = S or make_toral(CAT_PAIR)
    rep = SuiteReport("torus-balls")
    la, lb = S.eig.lam1
    worst = 0.0
    for kx in all_k(2):
        for n in range(1, n_max + 1):
            for eps in eps_values:
                closed = ball_sides(n, kx, eps, la, lb)
                brute = ball_sides_bruteforce(S, n, kx, eps)
                err = max(abs(a - b) for a, b in zip(closed, brute))
                worst = max(worst, err)
                rep.check(err <= tol, lambda: {"n": n, "k": kx.k, "eps": eps, "closed": list(closed),
                                               "brute": list(brute), "abs_err": err})
    rep.details["max_abs_err"] = worst
    return rep


def verify_metric_equivalence(S: ToralSystem | None = None, pairs: int = 1000, seed: int = 0,
                              slack: float = 0.1) -> SuiteReport:
    S = S or make_toral(CAT_PAIR)
    rng = np.random.default_rng(seed)
    std = S.with_metric("standard")
    c, C = S.metric_constants()
    x, y = rng.random((pairs, 2)), rng.random((pairs, 2))
    de = S.offset_dist(x - y)
    ds = std.offset_dist(x - y)
    rep = SuiteReport("metric-equivalence")
    for i in range(pairs):
        rep.check(c * de[i] / (1 + slack) <= ds[i] <= C * de[i] * (1 + slack),
                  lambda: {"x": x[i].tolist(), "y": y[i].tolist(), "eigen": float(de[i]), "standard": float(ds[i]),
                           "c": c, "C": C})
    rep.details.update(c=c, C=C, min_ratio=float(np.min(ds / de)), max_ratio=float(np.max(ds / de)))
    return rep


def verify_iterate(S: ToralSystem | None = None, r=(2, 1), ks: Sequence[int] = (1,), n_range=(3, 6),
                   tolerance: float = 0.1, formula_tol: float = 0.1, **est_kw) -> SuiteReport:
    S = S or make_toral(CAT_PAIR)
    rep = SuiteReport("iterate")
    target = toral_formula(*[mat_pow(a, e) for a, e in zip(S.matrices, r)])
    rows = []
    for k in ks:
        ib = iterate_bound_check(S, r, k_bits(k, S.d), n_range=n_range, tolerance=tolerance, **est_kw)
        rel = abs(ib.lhs - target) / target
        rows.append({**ib.to_dict(), "formula": target, "rel_err": rel})
        rep.check(ib.passed and rel <= formula_tol, lambda: rows[-1])
    rep.details["rows"] = rows
    return rep


def verify_d1_symmetry(A=CAT, agree: float = 0.05, formula_tol: float = 0.1, **est_kw) -> SuiteReport:
    S = make_toral([A])
    target = toral_formula(A)
    rep = SuiteReport("d1-symmetry")
    vals = [estimate(S, kx, **est_kw).extrapolated for kx in all_k(1)]
    rel_agree = abs(vals[0] - vals[1]) / max(vals)
    errs = [abs(v - target) / target for v in vals]
    rep.check(rel_agree <= agree and max(errs) <= formula_tol,
              lambda: {"k1": vals[0], "k2": vals[1], "formula": target, "rel_agree": rel_agree, "rel_err": errs})
    rep.details.update(k1=vals[0], k2=vals[1], formula=target, rel_agree=rel_agree)
    return rep


SUITES: dict[str, Callable[..., SuiteReport]] = {
    "chain": verify_chain,
    "product": verify_product,
    "union": verify_union,
    "factor": verify_factor,
    "conjugacy": verify_conjugacy,
    "torus-balls": verify_torus_balls,
    "metric-equivalence": verify_metric_equivalence,
    "iterate": verify_iterate,
    "d1-symmetry": verify_d1_symmetry,
}
TORAL_SUITES = ("conjugacy", "torus-balls", "metric-equivalence", "iterate")
