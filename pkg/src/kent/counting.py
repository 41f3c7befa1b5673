"""k-type metrics and the three counting quantities.

Exact counts on finite systems come from small branch-and-bound solvers over
the graph whose edges join points at ``rho_{n,k}`` distance strictly below
``eps``:

* ``sep``  -- maximum independent set,
* ``span`` -- minimum dominating set (closed neighbourhoods),
* ``cov``  -- minimum clique cover.

Separated uses ``>= eps``, spanning ``< eps`` and covering ``diameter < eps``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lattice import IndexSetMode, KIndex, index_set
from .systems import (FiniteSystem, NumericFloorError, ResourceError, System, ToralSystem)

EXACT_LIMIT = 24
QUALIFIERS = ("exact", "lower-bound", "upper-bound")
# Smallest sample step (torus units) double precision is trusted to resolve.
SPACING_FLOOR = 1e-11


# ---------------------------------------------------------------------------
# the k-type metric


def k_metric(S: System, n: int, kx: KIndex, mode: IndexSetMode | str, x, y) -> float:
    """``rho_{n,k}(x, y)``: max of ``S.dist(T^m x, T^m y)`` over the index set."""
    return max(S.dist(S.apply(m, x), S.apply(m, y)) for m in index_set(n, kx, mode))


def orbit_images(S: System, batch, n: int, kx: KIndex, mode) -> list:
    return [S.apply_batch(m, batch) for m in index_set(n, kx, mode)]


def metric_matrix(S: System, points: Sequence, n: int, kx: KIndex, mode) -> np.ndarray:
    """All-pairs ``rho_{n,k}`` on ``points``."""
    batch = S.as_batch(points)
    D = None
    for img in orbit_images(S, batch, n, kx, mode):
        P = S.pairwise(img)
        D = P if D is None else np.maximum(D, P)
    return D


def finite_metric(S: FiniteSystem, n: int, kx: KIndex, mode) -> np.ndarray:
    D = np.zeros_like(S.table)
    for m in index_set(n, kx, mode):
        p = S.element(m)
        np.maximum(D, S.table[np.ix_(p, p)], out=D)
    return D


# ---------------------------------------------------------------------------
# greedy witnesses on samples


def _rho_to(S: System, images: list, i: int, idx: Sequence[int]) -> np.ndarray:
    out = None
    for img in images:
        d = S.dist_one_many(S.batch_get(img, i), S.batch_take(img, idx))
        out = d if out is None else np.maximum(out, d)
    return out


def _order(K: int, shuffle_seed: int | None) -> list[int]:
    if shuffle_seed is None:
        return list(range(K))
    return [int(i) for i in np.random.default_rng(shuffle_seed).permutation(K)]


def greedy_separated_indices(S: System, sample: Sequence, n: int, kx: KIndex, mode, eps: float,
                             shuffle_seed: int | None = None) -> list[int]:
    if len(sample) == 0:
        raise ValueError("sample must be nonempty")
    S.check_scale(n, eps)
    images = orbit_images(S, S.as_batch(sample), n, kx, mode)
    kept: list[int] = []
    for i in _order(len(sample), shuffle_seed):
        if not kept or _rho_to(S, images, i, kept).min() >= eps:
            kept.append(i)
    return kept


def greedy_separated(S: System, sample: Sequence, n: int, kx: KIndex, mode, eps: float,
                     shuffle_seed: int | None = None) -> list:
    """Scan ``sample`` in order keeping points at ``rho_{n,k} >= eps`` from all kept ones.

    The result is ``(n, k, eps)``-separated, so its size bounds ``sep`` from below.
    """
    return [sample[i] for i in greedy_separated_indices(S, sample, n, kx, mode, eps, shuffle_seed)]


def greedy_spanning(S: System, sample: Sequence, n: int, kx: KIndex, mode, eps: float,
                    density_slack: float, shuffle_seed: int | None = None) -> list:
    """Greedy cover of the sample by ``(eps - density_slack)``-balls.

    If every point of X is within ``density_slack`` of the sample, the chosen
    centres span X at radius ``eps`` and their number bounds ``span`` from above.
    """
    if density_slack >= eps:
        raise ValueError(f"sample too coarse for requested radius: slack {density_slack} >= eps {eps}")
    if len(sample) == 0:
        raise ValueError("sample must be nonempty")
    S.check_scale(n, eps)
    r = eps - density_slack
    images = orbit_images(S, S.as_batch(sample), n, kx, mode)
    centres: list[int] = []
    for i in _order(len(sample), shuffle_seed):
        if not centres or _rho_to(S, images, i, centres).min() >= r:
            centres.append(i)
    return [sample[i] for i in centres]


# ---------------------------------------------------------------------------
# translation-invariant patch kernel for toral systems


@dataclass
class Patch:
    """A grid ``origin + sum_j i_j * steps[j]`` (mod 1) in row-major order."""

    origin: np.ndarray
    steps: list[np.ndarray]
    shape: tuple[int, ...]
    note: str = ""

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(s) for s in self.shape], indexing="ij")
        out = np.broadcast_to(self.origin, (self.size, 2)).copy()
        for g, step in zip(grids, self.steps):
            out += g.reshape(-1, 1) * step[None, :]
        return np.mod(out, 1.0)

    def describe(self) -> str:
        lens = ", ".join(f"{float(np.linalg.norm(s)):.3e}" for s in self.steps)
        return f"patch(shape={self.shape}, steps=[{lens}]{', ' + self.note if self.note else ''})"


def _forward_offsets(shape: tuple[int, ...]) -> np.ndarray:
    """Integer offsets that move forward in row-major order, lexicographically sorted."""
    ranges = [np.arange(-(s - 1), s) for s in shape]
    offs = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, len(shape))
    strides = np.cumprod((1,) + tuple(reversed(shape[1:])))[::-1]
    flat = offs @ np.asarray(strides)
    keep = flat > 0
    # a flat offset > 0 is lexicographically positive only if no wrap into another row
    first = np.argmax(offs != 0, axis=1)
    keep &= offs[np.arange(len(offs)), first] > 0
    return offs[keep]


def patch_stencil(S: ToralSystem, patch: Patch, n: int, kx: KIndex, mode, eps: float) -> np.ndarray:
    """Forward grid offsets ``o`` with ``rho_{n,k}(x + o, x) < eps``.

    On the torus ``T^m x - T^m y = P_m (x - y)`` mod 1 and the metric is
    translation invariant, so ``rho_{n,k}`` on the patch depends only on the
    grid offset.  Each surviving offset is checked against every ``m`` in the
    index set by brute force.
    """
    offs = _forward_offsets(patch.shape)
    W = offs.astype(float) @ np.stack(patch.steps)
    close = np.ones(len(offs), dtype=bool)
    ms = index_set(n, kx, mode)
    # visit the largest powers first so the candidate set shrinks fast; order does not affect the result
    ms.sort(key=lambda m: -max(abs(v) for row in S.power(m) for v in row))
    for m in ms:
        if not close.any():
            break
        P = S.power_float(m)
        sel = np.flatnonzero(close)
        close[sel] = S.offset_below(W[sel] @ P.T, eps)
    return offs[close]


def patch_greedy(patch: Patch, stencil: np.ndarray) -> np.ndarray:
    """Greedy separated selection on the patch grid; returns kept flat indices.

    Identical to :func:`greedy_separated` run on ``patch.points()`` in order.
    """
    shape = patch.shape
    blocked = np.zeros(shape, dtype=bool)
    kept = []
    dims = len(shape)
    coords = np.stack(np.unravel_index(np.arange(patch.size), shape), axis=1)
    flat_blocked = blocked.reshape(-1)
    shp = np.asarray(shape)
    for p in range(patch.size):
        if flat_blocked[p]:
            continue
        kept.append(p)
        if len(stencil):
            tgt = coords[p] + stencil
            ok = np.all((tgt >= 0) & (tgt < shp), axis=1)
            if dims == 1:
                flat_blocked[tgt[ok, 0]] = True
            else:
                flat_blocked[np.ravel_multi_index(tuple(tgt[ok].T), shape)] = True
    return np.asarray(kept, dtype=np.intp)


def patch_separated_count(S: ToralSystem, patch: Patch, n: int, kx: KIndex, mode, eps: float) -> int:
    return len(patch_greedy(patch, patch_stencil(S, patch, n, kx, mode, eps)))


def axis_growth(S: ToralSystem, n: int, kx: KIndex, mode) -> np.ndarray:
    """Largest expansion of each eigendirection over the index set, by direct maximisation."""
    V = S.eig.basis
    Vinv = np.linalg.inv(V)
    g = np.zeros(2)
    for m in index_set(n, kx, mode):
        coeff = np.abs(np.diag(Vinv @ S.power_float(m) @ V))
        g = np.maximum(g, coeff)
    return g


def design_patch(S: ToralSystem, kx: KIndex, mode, eps: float, n_min: int, n_max: int, count: int,
                 seed: int = 0, oversample: float = 0.9, anchor=None) -> Patch:
    """Grid sample laid along the eigendirections that expand under ``rho_{n,k}``.

    Steps are ``eps / (oversample * growth_j(n_max))``; axis lengths are in
    proportion to each direction's growth over ``[n_min, n_max]`` with about
    ``count`` points in total.
    """
    if S.eig is None:
        raise ValueError("patch sampling needs eigen data")
    g_hi = axis_growth(S, n_max, kx, mode)
    g_lo = axis_growth(S, n_min, kx, mode)
    axes = [j for j in range(2) if g_hi[j] > 1 + 1e-9] or [0]
    ratio = np.array([max(g_hi[j] / g_lo[j], 1.0) for j in axes])
    c = (count / float(np.prod(ratio))) ** (1.0 / len(axes))
    shape = tuple(max(1, int(round(c * r))) for r in ratio)
    while int(np.prod(shape)) > count and max(shape) > 1:
        j = int(np.argmax(shape))
        shape = shape[:j] + (shape[j] - 1,) + shape[j + 1:]
    vecs = (S.eig.v1, S.eig.v2)
    steps = [eps / (oversample * g_hi[j]) * vecs[j] for j in axes]
    smallest = min(float(np.linalg.norm(s)) for s in steps)
    if smallest < SPACING_FLOOR:
        raise NumericFloorError(
            f"sample step {smallest:.2e} is below the double-precision floor {SPACING_FLOOR:.0e} "
            f"at n={n_max}, eps={eps}; lower n or raise eps")
    rng = np.random.default_rng(seed)
    origin = np.asarray(anchor, float) if anchor is not None else rng.random(2)
    names = ",".join(f"v{j + 1}" for j in axes)
    return Patch(origin, steps, shape, note=f"axes={names}, oversample={oversample}")


def line_patch(S: ToralSystem, count: int, length: float = 1.0, seed: int = 0, anchor=None) -> Patch:
    """The ``unstable-line`` sample as a one-axis patch (same points, same order)."""
    rng = np.random.default_rng(seed)
    origin = np.asarray(anchor, float) if anchor is not None else rng.random(2)
    return Patch(origin, [length / count * S.eig.v1], (count,), note="unstable-line")


# ---------------------------------------------------------------------------
# exact solvers on bitmask graphs (N <= EXACT_LIMIT)


def _adjacency(D: np.ndarray, eps: float) -> list[int]:
    N = len(D)
    close = D < eps
    adj = []
    for i in range(N):
        mask = 0
        for j in np.flatnonzero(close[i]):
            if j != i:
                mask |= 1 << int(j)
        adj.append(mask)
    return adj


def _bits(mask: int) -> Iterable[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def max_independent_set(adj: list[int]) -> int:
    N = len(adj)
    best = 0

    def rec(R: int, size: int) -> None:
        nonlocal best
        while True:
            if R == 0:
                best = max(best, size)
                return
            if size + R.bit_count() <= best:
                return
            # vertices of degree <= 1 in R can always be taken
            vmin, dmin, vmax, dmax = -1, N + 1, -1, -1
            for v in _bits(R):
                deg = (adj[v] & R).bit_count()
                if deg < dmin:
                    vmin, dmin = v, deg
                if deg > dmax:
                    vmax, dmax = v, deg
            if dmin <= 1:
                R &= ~(adj[vmin] | (1 << vmin))
                size += 1
                continue
            rec(R & ~(adj[vmax] | (1 << vmax)), size + 1)
            R &= ~(1 << vmax)

    rec((1 << N) - 1, 0)
    return best


def min_dominating_set(adj: list[int]) -> int:
    N = len(adj)
    full = (1 << N) - 1
    closed = [adj[i] | (1 << i) for i in range(N)]
    best = N

    def rec(dominated: int, allowed: int, size: int) -> None:
        nonlocal best
        if dominated == full:
            best = min(best, size)
            return
        undom = full & ~dominated
        reach = max((closed[w] & undom).bit_count() for w in _bits(allowed)) if allowed else 0
        if reach == 0:
            return
        if size + -(-undom.bit_count() // reach) >= best:
            return
        u = min(_bits(undom), key=lambda v: (closed[v] & allowed).bit_count())
        cands = sorted(_bits(closed[u] & allowed), key=lambda w: -(closed[w] & undom).bit_count())
        for w in cands:
            rec(dominated | closed[w], allowed, size + 1)
            allowed &= ~(1 << w)

    rec(0, full, 0)
    return best


def min_clique_cover(adj: list[int]) -> int:
    N = len(adj)
    if N == 0:
        return 0
    lower = max_independent_set(adj)
    order = sorted(range(N), key=lambda v: adj[v].bit_count())
    best = N
    classes: list[int] = []

    def rec(i: int) -> bool:
        nonlocal best
        if len(classes) >= best:
            return False
        if i == N:
            best = len(classes)
            return best == lower
        v = order[i]
        bit = 1 << v
        for c in range(len(classes)):
            if classes[c] & ~adj[v] == 0:
                classes[c] |= bit
                done = rec(i + 1)
                classes[c] &= ~bit
                if done:
                    return True
        classes.append(bit)
        done = rec(i + 1)
        classes.pop()
        return done

    rec(0)
    return best


def _exact_graph(S: FiniteSystem, n: int, kx: KIndex, mode, eps: float, limit: int) -> list[int]:
    if not isinstance(S, FiniteSystem):
        raise TypeError("exact counts need a FiniteSystem")
    if S.N > limit:
        raise ResourceError(f"{S.N} points exceeds the exact-solver limit {limit}")
    return _adjacency(finite_metric(S, n, kx, mode), eps)


def exact_sep(S: FiniteSystem, n: int, kx: KIndex, mode, eps: float, limit: int = EXACT_LIMIT) -> int:
    return max_independent_set(_exact_graph(S, n, kx, mode, eps, limit))


def exact_span(S: FiniteSystem, n: int, kx: KIndex, mode, eps: float, limit: int = EXACT_LIMIT) -> int:
    return min_dominating_set(_exact_graph(S, n, kx, mode, eps, limit))


def exact_cov(S: FiniteSystem, n: int, kx: KIndex, mode, eps: float, limit: int = EXACT_LIMIT) -> int:
    return min_clique_cover(_exact_graph(S, n, kx, mode, eps, limit))


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Count:
    value: int
    qualifier: str

    def __post_init__(self):
        if self.qualifier not in QUALIFIERS:
            raise ValueError(f"unknown qualifier {self.qualifier!r}")


CSV_COLUMNS = ("n", "k", "mode", "eps", "sep", "sep_qualifier", "span", "span_qualifier",
               "cov", "cov_qualifier", "sample")


@dataclass
class CountResult:
    n: int
    k: KIndex
    eps: float
    mode: IndexSetMode
    sep: Count | None = None
    span: Count | None = None
    cov: Count | None = None
    sample: str = ""
    cov_2eps: Count | None = None

    def __post_init__(self):
        self.mode = IndexSetMode.parse(self.mode)
        for c in (self.sep, self.span, self.cov, self.cov_2eps):
            if c is not None and c.qualifier == "exact" and not self.sample.startswith("finite"):
                raise ValueError("exact counts are only admitted for finite systems")
        trio = (self.cov_2eps, self.span, self.sep, self.cov)
        if all(c is not None and c.qualifier == "exact" for c in trio):
            v = [c.value for c in trio]
            if not v[0] <= v[1] <= v[2] <= v[3]:
                raise AssertionError(f"chain inequality violated: {v}")

    def row(self) -> dict:
        def part(c):
            return (c.value, c.qualifier) if c is not None else ("", "")
        sep, span, cov = part(self.sep), part(self.span), part(self.cov)
        return {"n": self.n, "k": self.k.k, "mode": self.mode.value, "eps": repr(float(self.eps)),
                "sep": sep[0], "sep_qualifier": sep[1], "span": span[0], "span_qualifier": span[1],
                "cov": cov[0], "cov_qualifier": cov[1], "sample": self.sample}

    def to_dict(self) -> dict:
        d = self.row()
        if self.cov_2eps is not None:
            d["cov_2eps"] = asdict(self.cov_2eps)
        return d


@dataclass
class ChainReport:
    n: int
    k: int
    mode: str
    eps: float
    cov_2eps: int
    span: int
    sep: int
    cov: int

    @property
    def passed(self) -> bool:
        return self.cov_2eps <= self.span <= self.sep <= self.cov

    def values(self) -> tuple[int, int, int, int]:
        return (self.cov_2eps, self.span, self.sep, self.cov)


def chain_check(S: FiniteSystem, n: int, kx: KIndex, mode, eps: float, limit: int = EXACT_LIMIT) -> ChainReport:
    """Exact ``cov(2eps) <= span(eps) <= sep(eps) <= cov(eps)``."""
    if S.N > limit:
        raise ResourceError(f"{S.N} points exceeds the exact-solver limit {limit}")
    D = finite_metric(S, n, kx, mode)
    adj = _adjacency(D, eps)
    adj2 = _adjacency(D, 2 * eps)
    mode = IndexSetMode.parse(mode)
    return ChainReport(n, kx.k, mode.value, eps, min_clique_cover(adj2), min_dominating_set(adj),
                       max_independent_set(adj), min_clique_cover(adj))
