"""Z^d-actions: the abstract interface, concrete systems and combinators.

Every system exposes scalar ``apply``/``dist`` plus batched variants used by
the counting kernels.  A *batch* is whatever container the system finds cheap
(an int array for finite systems, a ``(K, 2)`` float array on the torus, a
plain list otherwise); :meth:`System.as_batch` builds one from a point list.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .lattice import LatticeError, LatticeVector, add, star, zero

Matrix = tuple[tuple[int, int], tuple[int, int]]

SCHEMES = ("grid", "unstable-line", "random", "expanding")


class ValidationError(ValueError):
    """A system definition violates one of its structural invariants."""


class ResourceError(RuntimeError):
    """A request exceeds a configured size or precision budget."""


class NumericFloorError(ResourceError):
    """Double precision cannot resolve the requested scale."""


@dataclass(frozen=True)
class SampleConfig:
    scheme: str = "grid"
    count: int = 100
    seed: int = 0
    anchor: Any = None
    # Segment length for ``unstable-line``, measured along the unit eigenvector.
    length: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown sampling scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.count < 1:
            raise ValueError("sample count must be >= 1")


class System:
    """Base class for a Z^d-action on a compact metric space."""

    d: int
    descriptor: str = "system"

    def apply(self, m: Sequence[int], x):
        raise NotImplementedError

    def dist(self, x, y) -> float:
        raise NotImplementedError

    def sample(self, cfg: SampleConfig) -> list:
        raise NotImplementedError

    # Batched interface; subclasses override for speed.
    def as_batch(self, points: Sequence) -> Any:
        return list(points)

    def batch_len(self, batch) -> int:
        return len(batch)

    def batch_take(self, batch, idx):
        return [batch[i] for i in idx]

    def batch_get(self, batch, i):
        return batch[i]

    def apply_batch(self, m: Sequence[int], batch):
        return [self.apply(m, x) for x in batch]

    def dist_one_many(self, x, batch) -> np.ndarray:
        return np.array([self.dist(x, y) for y in batch], dtype=float)

    def pairwise(self, batch) -> np.ndarray:
        n = self.batch_len(batch)
        out = np.zeros((n, n))
        for i in range(n):
            out[i] = self.dist_one_many(batch[i], batch)
        return out

    def check_scale(self, n: int, eps: float) -> None:
        """Raise if the system cannot resolve ``rho_{n,k}`` at radius ``eps``."""

    def _check_m(self, m: Sequence[int]) -> LatticeVector:
        m = tuple(int(c) for c in m)
        if len(m) != self.d:
            raise LatticeError(f"lattice vector {m} has dimension {len(m)}, system has d={self.d}")
        return m

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.descriptor}>"


def sample(S: System, cfg: SampleConfig) -> list:
    return S.sample(cfg)


# ---------------------------------------------------------------------------
# Finite permutation systems


def _compose(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """(p o q)(i) = p[q[i]]."""
    return p[q]


class FiniteSystem(System):
    """Commuting permutations of ``N`` points with an explicit metric table."""

    def __init__(self, generators: Sequence[np.ndarray], table: np.ndarray, labels: Sequence | None = None,
                 descriptor: str | None = None):
        self.generators = [np.asarray(g, dtype=np.intp) for g in generators]
        self.inverses = [np.argsort(g) for g in self.generators]
        self.table = np.asarray(table, dtype=float)
        self.N = self.table.shape[0]
        self.d = len(self.generators)
        self.labels = list(labels) if labels is not None else list(range(self.N))
        self.descriptor = descriptor or f"finite(N={self.N}, d={self.d})"
        self._cache: dict[LatticeVector, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def points(self) -> list[int]:
        return list(range(self.N))

    def element(self, m: Sequence[int]) -> np.ndarray:
        """The permutation ``T^m`` as an index array."""
        m = self._check_m(m)
        perm = self._cache.get(m)
        if perm is not None:
            return perm
        perm = np.arange(self.N)
        for g, ginv, e in zip(self.generators, self.inverses, m):
            base = g if e >= 0 else ginv
            for _ in range(abs(e)):
                perm = _compose(base, perm)
        with self._lock:
            self._cache.setdefault(m, perm)
        return perm

    def apply(self, m, x):
        return int(self.element(m)[x])

    def dist(self, x, y) -> float:
        return float(self.table[x, y])

    def as_batch(self, points):
        return np.asarray(points, dtype=np.intp)

    def batch_take(self, batch, idx):
        return batch[np.asarray(idx, dtype=np.intp)]

    def batch_get(self, batch, i):
        return int(batch[i])

    def apply_batch(self, m, batch):
        return self.element(m)[batch]

    def dist_one_many(self, x, batch):
        return self.table[x, batch]

    def pairwise(self, batch):
        return self.table[np.ix_(batch, batch)]

    def sample(self, cfg: SampleConfig) -> list[int]:
        if cfg.scheme == "random":
            rng = np.random.default_rng(cfg.seed)
            return [int(i) for i in rng.permutation(self.N)[: cfg.count]]
        if cfg.scheme in ("unstable-line", "expanding"):
            raise LatticeError(f"{cfg.scheme} sampling needs a toral system")
        return list(range(min(cfg.count, self.N)))


def _as_perm(g, N: int, which: int) -> np.ndarray:
    arr = np.asarray(g, dtype=np.intp)
    if arr.shape != (N,) or sorted(arr.tolist()) != list(range(N)):
        raise ValidationError(f"generator {which} is not a permutation of 0..{N - 1}: {list(g)}")
    return arr


def check_metric_table(table: np.ndarray) -> None:
    """Exact metric-axiom check; raises naming the first offending pair or triple."""
    D = np.asarray(table, dtype=float)
    N = D.shape[0]
    if D.shape != (N, N):
        raise ValidationError(f"metric table must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValidationError("metric table entries must be finite and non-negative")
    if np.any(np.diag(D) != 0):
        i = int(np.flatnonzero(np.diag(D) != 0)[0])
        raise ValidationError(f"metric table has nonzero diagonal at point {i}")
    bad = np.argwhere(D != D.T)
    if len(bad):
        i, j = bad[0]
        raise ValidationError(f"metric table is not symmetric at pair ({i}, {j})")
    off = D + np.eye(N)
    if np.any(off == 0):
        i, j = np.argwhere(off == 0)[0]
        raise ValidationError(f"distinct points ({i}, {j}) are at distance 0")
    # D[i,k] <= D[i,j] + D[j,k] for all triples
    viol = D[:, None, :] > D[:, :, None] + D[None, :, :]
    if viol.any():
        i, j, k = np.argwhere(viol)[0]
        raise ValidationError(f"triangle inequality fails on triple ({i}, {j}, {k})")


def make_finite(points: int | Sequence, generators: Sequence[Sequence[int]], metric_table,
                descriptor: str | None = None) -> FiniteSystem:
    """Validated finite system.

    ``generators`` are 0-based image arrays: ``g[i]`` is the image of point ``i``.
    """
    labels = list(range(points)) if isinstance(points, int) else list(points)
    N = len(labels)
    if not generators:
        raise ValidationError("at least one generator is required (d >= 1)")
    gens = [_as_perm(g, N, i) for i, g in enumerate(generators)]
    for i, j in itertools.combinations(range(len(gens)), 2):
        if not np.array_equal(gens[i][gens[j]], gens[j][gens[i]]):
            raise ValidationError(f"generators {i} and {j} do not commute")
    table = np.asarray(metric_table, dtype=float)
    if table.shape != (N, N):
        raise ValidationError(f"metric table shape {table.shape} does not match {N} points")
    check_metric_table(table)
    return FiniteSystem(gens, table, labels, descriptor)


def parse_cycles(text: str, N: int) -> np.ndarray:
    """Cycle notation with 1-based points, e.g. ``"(1 2 3)(4 5)"`` -> 0-based image array."""
    perm = np.arange(N)
    text = text.strip()
    if text in ("", "()", "id"):
        return perm
    seen: set[int] = set()
    for chunk in text.replace(")", ")|").split("|"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if not (chunk.startswith("(") and chunk.endswith(")")):
            raise ValidationError(f"malformed cycle {chunk!r}")
        body = chunk[1:-1].replace(",", " ").split()
        try:
            cyc = [int(t) - 1 for t in body]
        except ValueError:
            raise ValidationError(f"non-integer entry in cycle {chunk!r}") from None
        for c in cyc:
            if not 0 <= c < N or c in seen:
                raise ValidationError(f"cycle {chunk!r} has an out-of-range or repeated point")
            seen.add(c)
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            perm[a] = b
    return perm


def make_subsystem(S: FiniteSystem, subset: Sequence[int]) -> FiniteSystem:
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        raise ValidationError("subsystem needs a nonempty subset")
    pos = {p: i for i, p in enumerate(idx)}
    gens = []
    for gi, g in enumerate(S.generators):
        for p in idx:
            if int(g[p]) not in pos:
                raise ValidationError(f"point {p} escapes the subset under generator {gi} (maps to {int(g[p])})")
        gens.append(np.array([pos[int(g[p])] for p in idx], dtype=np.intp))
    table = S.table[np.ix_(idx, idx)]
    labels = [S.labels[p] for p in idx]
    return FiniteSystem(gens, table, labels, f"{S.descriptor}|{len(idx)} pts")


def orbits(S: FiniteSystem) -> list[list[int]]:
    """Orbits of the action, each sorted, ordered by smallest element."""
    seen = np.zeros(S.N, dtype=bool)
    out = []
    for p in range(S.N):
        if seen[p]:
            continue
        orb = {p}
        frontier = [p]
        while frontier:
            q = frontier.pop()
            for g in S.generators + S.inverses:
                r = int(g[q])
                if r not in orb:
                    orb.add(r)
                    frontier.append(r)
        for q in orb:
            seen[q] = True
        out.append(sorted(orb))
    return out


# ---------------------------------------------------------------------------
# Toral automorphisms


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    return (
        (a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]),
        (a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]),
    )


IDENTITY: Matrix = ((1, 0), (0, 1))


def det(a: Matrix) -> int:
    return a[0][0] * a[1][1] - a[0][1] * a[1][0]


def mat_inv(a: Matrix) -> Matrix:
    """Exact inverse of a unimodular integer matrix via the adjugate."""
    D = det(a)
    if D not in (1, -1):
        raise ValidationError(f"matrix {a} is not unimodular (det={D})")
    return ((D * a[1][1], -D * a[0][1]), (-D * a[1][0], D * a[0][0]))


def mat_pow(a: Matrix, e: int) -> Matrix:
    base = a if e >= 0 else mat_inv(a)
    out = IDENTITY
    for _ in range(abs(e)):
        out = mat_mul(base, out)
    return out


def as_matrix(entries) -> Matrix:
    flat = np.asarray(entries).reshape(-1).tolist()
    if len(flat) != 4:
        raise ValidationError(f"a 2x2 matrix needs 4 entries, got {len(flat)}")
    if any(int(v) != v for v in flat):
        raise ValidationError(f"matrix entries must be integers: {flat}")
    a, b, c, d = (int(v) for v in flat)
    return ((a, b), (c, d))


def check_hyperbolic(a: Matrix) -> None:
    D = det(a)
    if D not in (1, -1):
        raise ValidationError(f"matrix {a} has |det| = {abs(D)} != 1")
    t = a[0][0] + a[1][1]
    disc = t * t - 4 * D
    if disc <= 0:
        raise ValidationError(f"matrix {a} has complex or repeated eigenvalues")
    # eigenvalue +-1 iff 1 -+ t + D == 0
    if 1 - t + D == 0 or 1 + t + D == 0:
        raise ValidationError(f"matrix {a} has an eigenvalue of modulus 1")


def _eigvecs(a: Matrix) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Unit eigenvectors (expanding first) and eigenvalues of a hyperbolic matrix."""
    (p, q), (r, s) = a
    t, D = p + s, det(a)
    root = math.sqrt(t * t - 4 * D)
    lams = [(t + root) / 2, (t - root) / 2]
    lams.sort(key=abs, reverse=True)
    vecs = []
    for lam in lams:
        # (M - lam) v = 0; pick the better-conditioned row
        if abs(q) >= abs(r) and q != 0:
            v = np.array([q, lam - p], dtype=float)
        elif r != 0:
            v = np.array([lam - s, r], dtype=float)
        else:
            v = np.array([1.0, 0.0]) if abs(lam - p) < abs(lam - s) else np.array([0.0, 1.0])
        v /= np.linalg.norm(v)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        vecs.append(v)
    return vecs[0], vecs[1], lams[0], lams[1]


@dataclass(frozen=True)
class EigenData:
    v1: np.ndarray
    v2: np.ndarray
    lam1: tuple[float, ...]  # eigenvalue of each generator along v1
    lam2: tuple[float, ...]  # ... along v2
    aligned: bool

    @property
    def basis(self) -> np.ndarray:
        return np.column_stack([self.v1, self.v2])


def _eigen_along(mats: Sequence[Matrix], v1: np.ndarray, v2: np.ndarray) -> tuple[tuple[float, ...], tuple[float, ...]]:
    l1, l2 = [], []
    for a in mats:
        M = np.array(a, dtype=float)
        for v, acc in ((v1, l1), (v2, l2)):
            w = M @ v
            lam = float(v @ w)
            if np.linalg.norm(w - lam * v) > 1e-9 * max(1.0, abs(lam)):
                raise ValidationError(f"matrix {a} does not share the common eigenvector {v.tolist()}")
            acc.append(lam)
    return tuple(l1), tuple(l2)


def eigen_data(A: Matrix, B: Matrix | None = None) -> EigenData:
    """Common unit eigenvectors; ``v1`` is the expanding direction of ``A``.

    ``aligned`` is true iff every generator expands along ``v1``.
    """
    A = as_matrix(A)
    mats = [A] if B is None else [A, as_matrix(B)]
    for a in mats:
        check_hyperbolic(a)
    if len(mats) == 2 and mat_mul(mats[0], mats[1]) != mat_mul(mats[1], mats[0]):
        raise ValidationError(f"matrices {mats[0]} and {mats[1]} do not commute")
    v1, v2, _, _ = _eigvecs(A)
    l1, l2 = _eigen_along(mats, v1, v2)
    return EigenData(v1, v2, l1, l2, all(abs(x) > 1 for x in l1))


def _int_mul_mod1(P: Matrix, X: np.ndarray) -> np.ndarray:
    """Rows of ``X @ P.T`` reduced mod 1, with the integer part handled exactly.

    Each coordinate is split into a coarse part with few enough bits that
    ``p * hi`` is exact in double precision, plus a small remainder.  The
    rounding error then no longer scales with the size of ``P``.
    """
    Pf = np.array(P, dtype=float)
    big = float(np.max(np.abs(Pf)))
    bits = max(0, 51 - math.ceil(math.log2(big + 1)))
    scale = float(2**bits)
    hi = np.floor(X * scale) / scale
    lo = X - hi
    return np.mod(np.mod(hi @ Pf.T, 1.0) + lo @ Pf.T, 1.0)


class ToralSystem(System):
    """Z^d-action on the 2-torus by commuting integer matrices.

    Points are length-2 float arrays in ``[0, 1)^2``; powers are exact integer
    matrices and only the final product touches floats.
    """

    TRANSLATE_RADIUS = 2

    def __init__(self, matrices: Sequence[Matrix], metric_mode: str = "eigen", eig: EigenData | None = None,
                 descriptor: str | None = None):
        self.matrices = tuple(as_matrix(a) for a in matrices)
        self.d = len(self.matrices)
        if metric_mode not in ("standard", "eigen"):
            raise ValidationError(f"unknown torus metric mode {metric_mode!r}")
        self.metric_mode = metric_mode
        self.eig = eig
        self.descriptor = descriptor or "toral(" + "; ".join(",".join(str(v) for row in a for v in row)
                                                             for a in self.matrices) + f"; {metric_mode})"
        self._cache: dict[LatticeVector, Matrix] = {}
        self._lock = threading.Lock()
        if eig is not None:
            self._V = eig.basis
            self._Vinv = np.linalg.inv(self._V)
        elif metric_mode == "eigen":
            raise ValidationError("eigen metric needs eigen data")
        r = self.TRANSLATE_RADIUS
        self._translates = np.array(list(itertools.product(range(-r, r + 1), repeat=2)), dtype=float)

    @property
    def aligned(self) -> bool:
        return bool(self.eig and self.eig.aligned)

    def power(self, m: Sequence[int]) -> Matrix:
        m = self._check_m(m)
        P = self._cache.get(m)
        if P is None:
            P = IDENTITY
            for a, e in zip(self.matrices, m):
                P = mat_mul(mat_pow(a, e), P)
            with self._lock:
                self._cache.setdefault(m, P)
        return P

    def power_float(self, m) -> np.ndarray:
        return np.array(self.power(m), dtype=float)

    def apply(self, m, x):
        return _int_mul_mod1(self.power(m), np.asarray(x, dtype=float)[None, :])[0]

    def as_batch(self, points):
        return np.asarray(points, dtype=float).reshape(-1, 2)

    def batch_take(self, batch, idx):
        return batch[np.asarray(idx, dtype=np.intp)]

    def apply_batch(self, m, batch):
        return _int_mul_mod1(self.power(m), batch)

    # -- metric -------------------------------------------------------------

    def offset_dist(self, w: np.ndarray) -> np.ndarray:
        """Torus distance from 0 of each difference vector in ``w`` (shape ``(..., 2)``)."""
        w = np.asarray(w, dtype=float)
        w = w - np.round(w)
        if self.metric_mode == "standard":
            return np.max(np.abs(w), axis=-1)
        shp = w.shape[:-1]
        w = w.reshape(-1, 2)
        out = np.empty(len(w))
        cand = w[:, None, :] + self._translates[None, :, :]
        a = cand @ self._Vinv.T
        norms = np.max(np.abs(a), axis=-1)
        best = np.argmin(norms, axis=1)
        out[:] = norms[np.arange(len(w)), best]
        r = self.TRANSLATE_RADIUS
        edge = np.max(np.abs(self._translates[best]), axis=1) >= r
        if edge.any():
            raise ResourceError("eigen-metric minimiser hit the translate search boundary; increase TRANSLATE_RADIUS")
        return out.reshape(shp)

    def offset_below(self, w: np.ndarray, eps: float) -> np.ndarray:
        """Boolean mask of ``offset_dist(w) < eps``, skipping offsets that are provably far."""
        w = np.asarray(w, dtype=float)
        w = w - np.round(w)
        std = np.max(np.abs(w), axis=-1)
        if self.metric_mode == "standard":
            return std < eps
        # eigen distance >= standard distance / ||V||_inf
        _, C = self.metric_constants()
        out = np.zeros(std.shape, dtype=bool)
        near = std < C * eps * (1 + 1e-12)
        if near.any():
            out[near] = self.offset_dist(w[near]) < eps
        return out

    def dist(self, x, y) -> float:
        return float(self.offset_dist(np.asarray(x, float) - np.asarray(y, float)))

    def dist_one_many(self, x, batch):
        return self.offset_dist(np.asarray(x, float)[None, :] - batch)

    def pairwise(self, batch):
        return self.offset_dist(batch[:, None, :] - batch[None, :, :])

    def eigen_coords(self, w) -> np.ndarray:
        return np.asarray(w, float) @ self._Vinv.T

    def metric_constants(self) -> tuple[float, float]:
        """``(c, C)`` with ``c*eigen <= standard <= C*eigen`` for small offsets."""
        C = float(np.max(np.sum(np.abs(self._V), axis=1)))
        c = 1.0 / float(np.max(np.sum(np.abs(self._Vinv), axis=1)))
        return c, C

    def with_metric(self, metric_mode: str) -> "ToralSystem":
        return ToralSystem(self.matrices, metric_mode, self.eig)

    # -- sampling -----------------------------------------------------------

    def sample(self, cfg: SampleConfig) -> list[np.ndarray]:
        if cfg.scheme == "grid":
            side = max(1, math.isqrt(cfg.count))
            ticks = np.arange(side) / side
            return [np.array([a, b]) for a in ticks for b in ticks]
        rng = np.random.default_rng(cfg.seed)
        if cfg.scheme == "random":
            return list(rng.random((cfg.count, 2)))
        if cfg.scheme == "expanding":
            raise LatticeError("expanding samples depend on k, eps and n; build one with counting.design_patch")
        if self.eig is None:
            raise LatticeError("unstable-line sampling needs eigen data")
        x0 = np.asarray(cfg.anchor, float) if cfg.anchor is not None else rng.random(2)
        delta = cfg.length / cfg.count
        pts = np.mod(x0[None, :] + np.arange(cfg.count)[:, None] * delta * self.eig.v1[None, :], 1.0)
        return list(pts)


def make_toral(matrices: Sequence, metric_mode: str = "eigen") -> ToralSystem:
    """Validated toral action; misaligned pairs are accepted and flagged."""
    mats = [as_matrix(a) for a in matrices]
    if not mats:
        raise ValidationError("at least one matrix is required")
    for a in mats:
        check_hyperbolic(a)
    for i, j in itertools.combinations(range(len(mats)), 2):
        if mat_mul(mats[i], mats[j]) != mat_mul(mats[j], mats[i]):
            raise ValidationError(f"matrices {i} and {j} do not commute: "
                                  f"{mat_mul(mats[i], mats[j])} != {mat_mul(mats[j], mats[i])}")
    v1, v2, _, _ = _eigvecs(mats[0])
    l1, l2 = _eigen_along(mats, v1, v2)
    eig = EigenData(v1, v2, l1, l2, all(abs(x) > 1 for x in l1))
    return ToralSystem(mats, metric_mode, eig)


def conjugate_toral(S: ToralSystem, P) -> ToralSystem:
    """Conjugate by the torus automorphism ``P``: generators become ``P A P^-1``."""
    P = as_matrix(P)
    Pinv = mat_inv(P)
    mats = [mat_mul(mat_mul(P, a), Pinv) for a in S.matrices]
    if S.eig is None:
        return ToralSystem(mats, "standard")
    Pf = np.array(P, dtype=float)
    v1, v2 = Pf @ S.eig.v1, Pf @ S.eig.v2
    v1, v2 = v1 / np.linalg.norm(v1), v2 / np.linalg.norm(v2)
    l1, l2 = _eigen_along(mats, v1, v2)
    return ToralSystem(mats, S.metric_mode, EigenData(v1, v2, l1, l2, S.eig.aligned))


# ---------------------------------------------------------------------------
# Torus translations (isometries)


class TranslationSystem(System):
    """x -> x + sum m_i * alpha_i (mod 1) with the standard sup metric."""

    def __init__(self, alphas: Sequence[Sequence[float]]):
        self.alphas = np.asarray(alphas, dtype=float).reshape(-1, 2)
        self.d = len(self.alphas)
        self.descriptor = f"translation({self.alphas.tolist()})"

    def apply(self, m, x):
        m = self._check_m(m)
        return np.mod(np.asarray(x, float) + np.asarray(m, float) @ self.alphas, 1.0)

    def as_batch(self, points):
        return np.asarray(points, dtype=float).reshape(-1, 2)

    def batch_take(self, batch, idx):
        return batch[np.asarray(idx, dtype=np.intp)]

    def apply_batch(self, m, batch):
        m = self._check_m(m)
        return np.mod(batch + np.asarray(m, float) @ self.alphas, 1.0)

    @staticmethod
    def _d(w):
        w = w - np.round(w)
        return np.max(np.abs(w), axis=-1)

    def dist(self, x, y):
        return float(self._d(np.asarray(x, float) - np.asarray(y, float)))

    def dist_one_many(self, x, batch):
        return self._d(np.asarray(x, float)[None, :] - batch)

    def pairwise(self, batch):
        return self._d(batch[:, None, :] - batch[None, :, :])

    def sample(self, cfg):
        if cfg.scheme == "random":
            return list(np.random.default_rng(cfg.seed).random((cfg.count, 2)))
        if cfg.scheme != "grid":
            raise LatticeError(f"{cfg.scheme} sampling needs a toral system")
        side = max(1, math.isqrt(cfg.count))
        ticks = np.arange(side) / side
        return [np.array([a, b]) for a in ticks for b in ticks]


# ---------------------------------------------------------------------------
# Full shift on q symbols, d = 1


class ShiftSystem(System):
    """Two-sided full shift seen through the window ``[-W, W]``.

    Points are tuples of length ``2W + 1`` (index ``W`` is coordinate 0);
    outside the window a sequence reads as symbol 0.  The metric is
    ``2**-min{|i| : x_i != y_i}``.
    """

    d = 1

    def __init__(self, q: int, W: int):
        if q < 2 or W < 1:
            raise ValidationError("shift needs q >= 2 and W >= 1")
        self.q, self.W = q, W
        self.descriptor = f"shift(q={q}, W={W})"
        self._weights = 2.0 ** -np.abs(np.arange(-W, W + 1))

    def apply(self, m, x):
        (s,) = self._check_m(m)
        W = self.W
        return tuple(x[i + s] if 0 <= i + s <= 2 * W else 0 for i in range(2 * W + 1))

    def dist(self, x, y):
        return float(self.dist_one_many(x, np.asarray([y]))[0])

    def as_batch(self, points):
        return np.asarray(points, dtype=np.int64).reshape(-1, 2 * self.W + 1)

    def batch_take(self, batch, idx):
        return batch[np.asarray(idx, dtype=np.intp)]

    def batch_get(self, batch, i):
        return tuple(int(c) for c in batch[i])

    def apply_batch(self, m, batch):
        (s,) = self._check_m(m)
        out = np.zeros_like(batch)
        L = 2 * self.W + 1
        lo, hi = max(0, -s), min(L, L - s)
        if lo < hi:
            out[:, lo:hi] = batch[:, lo + s:hi + s]
        return out

    def dist_one_many(self, x, batch):
        diff = np.asarray(x)[None, :] != batch
        return np.max(np.where(diff, self._weights[None, :], 0.0), axis=1)

    def pairwise(self, batch):
        diff = batch[:, None, :] != batch[None, :, :]
        return np.max(np.where(diff, self._weights[None, None, :], 0.0), axis=2)

    def check_scale(self, n, eps):
        j = max(0, math.ceil(-math.log2(eps) - 1e-12))
        if self.W < n + j:
            raise ResourceError(f"shift window W={self.W} too small for n={n}, eps={eps}; need W >= {n + j}")

    def sample(self, cfg):
        L = 2 * self.W + 1
        if cfg.scheme in ("unstable-line", "expanding"):
            raise LatticeError(f"{cfg.scheme} sampling needs a toral system")
        if cfg.scheme == "grid" and self.q ** L <= cfg.count:
            return [tuple(w) for w in itertools.product(range(self.q), repeat=L)]
        rng = np.random.default_rng(cfg.seed)
        return [tuple(int(c) for c in w) for w in rng.integers(0, self.q, size=(cfg.count, L))]


# ---------------------------------------------------------------------------
# Combinators


class ProductSystem(System):
    """Diagonal action on ``X x Y`` with the max metric."""

    def __init__(self, S1: System, S2: System):
        if S1.d != S2.d:
            raise LatticeError(f"product needs equal dimensions, got {S1.d} and {S2.d}")
        self.S1, self.S2, self.d = S1, S2, S1.d
        self.descriptor = f"({S1.descriptor}) x ({S2.descriptor})"

    def apply(self, m, p):
        x, y = p
        return (self.S1.apply(m, x), self.S2.apply(m, y))

    def dist(self, p, q):
        return max(self.S1.dist(p[0], q[0]), self.S2.dist(p[1], q[1]))

    def as_batch(self, points):
        return (self.S1.as_batch([p[0] for p in points]), self.S2.as_batch([p[1] for p in points]))

    def batch_len(self, batch):
        return self.S1.batch_len(batch[0])

    def batch_take(self, batch, idx):
        return (self.S1.batch_take(batch[0], idx), self.S2.batch_take(batch[1], idx))

    def batch_get(self, batch, i):
        return (self.S1.batch_get(batch[0], i), self.S2.batch_get(batch[1], i))

    def apply_batch(self, m, batch):
        return (self.S1.apply_batch(m, batch[0]), self.S2.apply_batch(m, batch[1]))

    def dist_one_many(self, p, batch):
        return np.maximum(self.S1.dist_one_many(p[0], batch[0]), self.S2.dist_one_many(p[1], batch[1]))

    def pairwise(self, batch):
        return np.maximum(self.S1.pairwise(batch[0]), self.S2.pairwise(batch[1]))

    def check_scale(self, n, eps):
        self.S1.check_scale(n, eps)
        self.S2.check_scale(n, eps)

    def sample(self, cfg):
        per = max(1, math.ceil(math.sqrt(cfg.count)))
        sub = SampleConfig(cfg.scheme, per, cfg.seed, None, cfg.length)
        xs, ys = self.S1.sample(sub), self.S2.sample(sub)
        return list(itertools.product(xs, ys))[: cfg.count]


def product_finite(S1: FiniteSystem, S2: FiniteSystem) -> FiniteSystem:
    """Product of two finite systems as a finite system; point ``i*N2 + j`` is ``(i, j)``."""
    if S1.d != S2.d:
        raise LatticeError(f"product needs equal dimensions, got {S1.d} and {S2.d}")
    N1, N2 = S1.N, S2.N
    gens = [(g1[:, None] * N2 + g2[None, :]).reshape(-1) for g1, g2 in zip(S1.generators, S2.generators)]
    table = np.maximum(S1.table[:, None, :, None], S2.table[None, :, None, :]).reshape(N1 * N2, N1 * N2)
    labels = [(a, b) for a in S1.labels for b in S2.labels]
    return FiniteSystem(gens, table, labels, f"({S1.descriptor}) x ({S2.descriptor})")


def make_product(S1: System, S2: System) -> System:
    if isinstance(S1, FiniteSystem) and isinstance(S2, FiniteSystem):
        return product_finite(S1, S2)
    return ProductSystem(S1, S2)


class IterateSystem(System):
    """``T^r``: the action at ``m`` is ``T`` at ``m * r`` (coordinate-wise)."""

    def __init__(self, S: System, r: Sequence[int]):
        self.S, self.r, self.d = S, S._check_m(r), S.d
        self.descriptor = f"{S.descriptor}^{self.r}"

    def apply(self, m, x):
        return self.S.apply(star(self._check_m(m), self.r), x)

    def dist(self, x, y):
        return self.S.dist(x, y)

    def as_batch(self, points):
        return self.S.as_batch(points)

    def batch_len(self, batch):
        return self.S.batch_len(batch)

    def batch_take(self, batch, idx):
        return self.S.batch_take(batch, idx)

    def batch_get(self, batch, i):
        return self.S.batch_get(batch, i)

    def apply_batch(self, m, batch):
        return self.S.apply_batch(star(self._check_m(m), self.r), batch)

    def dist_one_many(self, x, batch):
        return self.S.dist_one_many(x, batch)

    def pairwise(self, batch):
        return self.S.pairwise(batch)

    def check_scale(self, n, eps):
        self.S.check_scale(n, eps)

    def sample(self, cfg):
        return self.S.sample(cfg)


def make_iterate(S: System, r: Sequence[int]) -> System:
    r = S._check_m(r)
    if isinstance(S, ToralSystem):
        mats = [mat_pow(a, e) for a, e in zip(S.matrices, r)]
        eig = None
        if S.eig is not None:
            l1 = tuple(lam ** e for lam, e in zip(S.eig.lam1, r))
            l2 = tuple(lam ** e for lam, e in zip(S.eig.lam2, r))
            eig = EigenData(S.eig.v1, S.eig.v2, l1, l2, all(abs(x) > 1 for x in l1))
        return ToralSystem(mats, S.metric_mode, eig)
    if isinstance(S, FiniteSystem):
        gens = [S.element(tuple(e if j == i else 0 for j in range(S.d))) for i, e in enumerate(r)]
        return FiniteSystem(gens, S.table, S.labels, f"{S.descriptor}^{r}")
    return IterateSystem(S, r)


class ConjugateSystem(System):
    """The action ``h o T^m o h^-1`` on the image space of ``h``."""

    def __init__(self, S: System, h: Callable, h_inv: Callable, dist: Callable | None = None,
                 pullback: bool = False, check_cfg: SampleConfig | None = None, tol: float = 1e-9):
        if dist is None and not pullback:
            raise ValidationError("supply a target metric or request the pullback metric")
        self.S, self.h, self.h_inv, self.d = S, h, h_inv, S.d
        self._dist = dist
        self.pullback = pullback
        self.descriptor = f"conj({S.descriptor}{', pullback' if pullback else ''})"
        for x in S.sample(check_cfg or SampleConfig("grid", 16)):
            y = h(x)
            back = h(h_inv(y))
            if not _close(back, y, tol):
                raise ValidationError(f"h(h_inv(y)) != y at sample point y={y!r}")

    def apply(self, m, y):
        return self.h(self.S.apply(m, self.h_inv(y)))

    def dist(self, y1, y2):
        if self.pullback:
            return self.S.dist(self.h_inv(y1), self.h_inv(y2))
        return float(self._dist(y1, y2))

    def sample(self, cfg):
        return [self.h(x) for x in self.S.sample(cfg)]

    def check_scale(self, n, eps):
        self.S.check_scale(n, eps)


def _close(a, b, tol) -> bool:
    try:
        return bool(np.allclose(np.asarray(a, float), np.asarray(b, float), atol=tol, rtol=0))
    except (TypeError, ValueError):
        return a == b


def make_conjugate(S: System, h: Callable, h_inv: Callable, dist: Callable | None = None,
                   pullback: bool = False) -> System:
    return ConjugateSystem(S, h, h_inv, dist=dist, pullback=pullback)


def conjugate_finite(S: FiniteSystem, relabel: Sequence[int], table=None) -> FiniteSystem:
    """Conjugate by the bijection ``i -> relabel[i]``.

    With ``table=None`` the pullback metric ``rho(h^-1 y1, h^-1 y2)`` is used.
    """
    h = np.asarray(relabel, dtype=np.intp)
    h = _as_perm(h, S.N, 0)
    h_inv = np.argsort(h)
    gens = [h[g[h_inv]] for g in S.generators]
    if table is None:
        table = S.table[np.ix_(h_inv, h_inv)]
    else:
        check_metric_table(table)
    return FiniteSystem(gens, table, [S.labels[i] for i in h_inv], f"conj({S.descriptor})")


def check_action_law(S: System, points: Sequence, radius: int = 3, tol: float = 1e-9) -> None:
    """Verify ``T^0 = id`` and ``T^{a+b} = T^a T^b`` for ``||a||, ||b|| <= radius``."""
    box = list(itertools.product(range(-radius, radius + 1), repeat=S.d))
    batch = S.as_batch(points)
    ident = S.apply_batch(zero(S.d), batch)
    if not _batch_close(S, ident, batch, tol):
        raise ValidationError("T^0 is not the identity")
    for a in box:
        Ta = S.apply_batch(a, batch)
        for b in box:
            lhs = S.apply_batch(add(a, b), batch)
            rhs = S.apply_batch(b, Ta)
            if not _batch_close(S, lhs, rhs, tol):
                raise ValidationError(f"action law fails for m1={b}, m2={a}")


def _batch_close(S, u, v, tol) -> bool:
    return all(S.dist(S.batch_get(u, i), S.batch_get(v, i)) <= tol for i in range(S.batch_len(u)))
