"""Bernoulli-side computations on the shared weight field.

Everything here reads the same weights the invasion sees, so per-configuration
couplings are exact: an edge is p-open when its weight is strictly below p.
Includes cluster extraction, the union-find minimax sweep (the independent
oracle for pond extraction), crossing and connectivity estimators, the
finite-size correlation length, a percolation-function proxy, and the nested
closed-dual-circuit checker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .lattice import Edge, Vertex, edge_from_id, neighbours
from .stats import TailEstimate, wilson_interval
from .weights import WeightField, derive_seed, is_p_open

P_C = 0.5  # bond percolation threshold on the square lattice


class ConfigError(ValueError):
    pass


class SaturatedError(RuntimeError):
    """A correlation-length search hit its size cap before reaching 1 - eps."""


# ----------------------------------------------------------------------
# clusters and the minimax sweep
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Cluster:
    """p-open cluster of `root` inside B(box)."""

    root: Vertex
    p: float
    box: int
    vertices: np.ndarray          # (k, 2) int32, in discovery order
    volume: int
    radius_l1: int
    radius_linf: int
    touched_boundary: bool

    def vertex_set(self) -> set[Vertex]:
        return {(int(x), int(y)) for x, y in self.vertices}


@dataclass(frozen=True)
class SweepResult:
    """Bottleneck connection level of the start vertex to dB(box)."""

    level: float
    bottleneck: Edge
    vertices: np.ndarray          # strict-level pond: component below `level`
    volume: int
    radius_l1: int
    radius_linf: int


def cluster_at(f: WeightField, start: Vertex, p: float, box: int) -> Cluster:
    """Flood fill of the p-open cluster of `start` inside B(box)."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p = {p} outside [0,1]")
    if max(abs(start[0]), abs(start[1])) > box:
        raise ConfigError(f"start {start} outside B({box})")
    if f.mode == "pseudorandom":
        xs, ys, cnt, ml1, mlinf, touched = _k.flood_below(
            f.seed, start[0], start[1], box, p)
        verts = np.stack([xs, ys], axis=1).astype(np.int32)
        return _make_cluster(f, start, p, box, verts, int(cnt), int(ml1),
                             int(mlinf), bool(touched))
    # explicit table: plain BFS
    seen = {start}
    order = [start]
    head = 0
    touched = max(abs(start[0]), abs(start[1])) == box
    while head < len(order):
        v = order[head]
        head += 1
        for e in neighbours(v, box):
            other = e.v if e.u == v else e.u
            if other in seen:
                continue
            if f.weight(e) < p:
                seen.add(other)
                order.append(other)
                if max(abs(other[0]), abs(other[1])) == box:
                    touched = True
    verts = np.array(order, np.int32).reshape(-1, 2)
    ml1 = max(abs(int(x)) + abs(int(y)) for x, y in order)
    mlinf = max(max(abs(int(x)), abs(int(y))) for x, y in order)
    return _make_cluster(f, start, p, box, verts, len(order), ml1, mlinf, touched)


def _make_cluster(f, start, p, box, verts, volume, ml1, mlinf, touched) -> Cluster:
    return Cluster(root=start, p=p, box=box, vertices=verts, volume=volume,
                   radius_l1=ml1, radius_linf=mlinf, touched_boundary=touched)


def cluster_edges(c: Cluster, f: WeightField) -> set[Edge]:
    """Open edges with both endpoints in the cluster."""
    vs = c.vertex_set()
    out = set()
    for v in vs:
        for e in neighbours(v, c.box):
            other = e.v if e.u == v else e.u
            if other in vs and is_p_open(f, e, c.p):
                out.add(e)
    return out


def minimax_pond(f: WeightField, start: Vertex, box: int) -> SweepResult:
    """Sorted-edge union-find sweep: the level at which `start` reaches dB(box).

    The strict-level pond is the component of `start` among edges strictly
    below the bottleneck weight; it equals the invasion candidate pond.
    """
    if max(abs(start[0]), abs(start[1])) >= box:
        raise ConfigError(f"start {start} not interior to B({box})")
    if f.mode == "pseudorandom":
        tau, beid, dup = _k.minimax_sweep(f.seed, start[0], start[1], box)
        if dup:
            raise RuntimeError("duplicate weights in the sweep box")
        xs, ys, cnt, ml1, mlinf, _ = _k.flood_below(f.seed, start[0], start[1],
                                                    box, tau)
        verts = np.stack([xs, ys], axis=1).astype(np.int32)
        return SweepResult(level=float(tau), bottleneck=edge_from_id(int(beid)),
                           vertices=verts, volume=int(cnt), radius_l1=int(ml1),
                           radius_linf=int(mlinf))
    return _minimax_explicit(f, start, box)


def _minimax_explicit(f: WeightField, start: Vertex, box: int) -> SweepResult:
    from .lattice import box_edges

    W = 2 * box + 1
    NV = W * W
    BND = NV
    parent = list(range(NV + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def cell(v):
        return (v[0] + box) * W + (v[1] + box)

    for x in range(-box, box + 1):
        for y in range(-box, box + 1):
            if max(abs(x), abs(y)) == box:
                parent[cell((x, y))] = BND
    s = cell(start)
    edges = sorted(box_edges(box), key=lambda e: (f.weight(e), e.eid))
    for e in edges:
        ru, rv = find(cell(e.u)), find(cell(e.v))
        if ru != rv:
            parent[ru] = rv
            if find(s) == find(BND):
                tau = f.weight(e)
                cl = cluster_at(f, start, tau, box)
                return SweepResult(level=tau, bottleneck=e, vertices=cl.vertices,
                                   volume=cl.volume, radius_l1=cl.radius_l1,
                                   radius_linf=cl.radius_linf)
    raise RuntimeError("start never connected to the boundary")


# ----------------------------------------------------------------------
# Monte Carlo estimators
# ----------------------------------------------------------------------

def _chunked_hits(total: int, workers: int, fn) -> int:
    if workers <= 1 or total < 2 * workers:
        return int(fn(0, total))
    from concurrent.futures import ThreadPoolExecutor
    chunk = (total + workers - 1) // workers
    spans = [(lo, min(chunk, total - lo)) for lo in range(0, total, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return sum(int(h) for h in ex.map(lambda s: fn(*s), spans))


def estimate_pi(n: int, trials: int, seed: int, workers: int = 1) -> TailEstimate:
    """Monte Carlo estimate of the critical one-arm probability to dB(n).

    Per-trial fields depend only on (seed, trial index), so estimates at
    different n on the same seed are coupled and exactly nested.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    hits = _chunked_hits(trials, workers, lambda lo, k: _k.reach_boundary_batch(
        seed, lo, k, 0, 0, P_C, n))
    lo, hi = wilson_interval(hits, trials)
    return TailEstimate(label="pi", threshold=n, trials=trials, hits=hits,
                        censored=0, estimate=hits / trials, ci_low=lo, ci_high=hi,
                        seed=seed)


def estimate_sigma(n: int, m: int, p: float, trials: int, seed: int,
                   exclude_side_bonds: bool = True, workers: int = 1) -> TailEstimate:
    """Probability of a p-open left-right crossing of [0,n]x[0,m].

    With exclude_side_bonds (the correlation-length convention) the horizontal
    bonds lying on y=0 and y=m are unusable while their vertices stay legal;
    that convention needs m >= 2. Without it every in-rectangle edge counts,
    and the (n+1) x n rectangle at p = 1/2 crosses with probability exactly 1/2.
    """
    if n < 1 or m < 1:
        raise ConfigError("rectangle sides must be >= 1")
    if exclude_side_bonds and m < 2:
        raise ConfigError("side-bond exclusion leaves no horizontal row for m < 2")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p = {p} outside [0,1]")
    hits = _chunked_hits(trials, workers, lambda lo, k: _k.crossing_batch(
        seed, lo, k, n, m, p, exclude_side_bonds))
    lo, hi = wilson_interval(hits, trials)
    return TailEstimate(label="sigma", threshold=n, trials=trials, hits=hits,
                        censored=0, estimate=hits / trials, ci_low=lo, ci_high=hi,
                        seed=seed, p=p, m=m)


@dataclass(frozen=True)
class LEstimate:
    """Finite-size correlation length: smallest n with sigma(n,n,p) >= 1 - eps."""

    p: float
    eps: float
    L: int | None
    sigma_at_L: float | None
    trials_per_size: int
    n_max: int
    saturated: bool
    evaluations: tuple[tuple[int, float], ...]


def estimate_L(p: float, eps: float = 0.05, trials_per_size: int = 1000,
               n_max: int = 512, seed: int = 0, workers: int = 1) -> LEstimate:
    """Doubling search plus bisection for the correlation length at p.

    Crossing trials at size n use seeds derived from (seed, n) only, so a
    p-grid evaluated on one seed is monotone-coupled across p.
    """
    if not P_C < p <= 1.0:
        raise ConfigError(f"correlation length is defined for p > {P_C}")
    if not 0.0 < eps < 1.0:
        raise ConfigError("eps must lie in (0,1)")
    evals: dict[int, float] = {}

    def sig(n: int) -> float:
        if n not in evals:
            est = estimate_sigma(n, n, p, trials_per_size, derive_seed(seed, n),
                                 exclude_side_bonds=True, workers=workers)
            evals[n] = est.estimate
        return evals[n]

    target = 1.0 - eps
    # the side-bond convention has no usable row at n=1, start doubling at 2
    n = 2
    while n <= n_max and sig(n) < target:
        n *= 2
    if n > n_max:
        return LEstimate(p=p, eps=eps, L=None, sigma_at_L=None,
                         trials_per_size=trials_per_size, n_max=n_max,
                         saturated=True, evaluations=tuple(sorted(evals.items())))
    lo, hi = n // 2, n       # sig(lo) < target <= sig(hi); lo=1 never evaluated
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if sig(mid) >= target:
            hi = mid
        else:
            lo = mid
    return LEstimate(p=p, eps=eps, L=hi, sigma_at_L=evals[hi],
                     trials_per_size=trials_per_size, n_max=n_max,
                     saturated=False, evaluations=tuple(sorted(evals.items())))


def estimate_theta(p: float, K: int = 4, trials: int = 2000, seed: int = 0,
                   eps: float = 0.05, L: int | None = None, box: int | None = None,
                   trials_per_size: int = 1000, n_max: int = 512,
                   workers: int = 1) -> TailEstimate:
    """Finite proxy for the percolation function: P_p(0 <-> dB(K * L(p))).

    Saturation of the underlying correlation-length search raises
    SaturatedError. Passing `box` overrides K * L entirely (useful for
    monotone-coupling checks at a fixed box).
    """
    if not P_C < p <= 1.0:
        raise ConfigError(f"theta proxy is defined for p > {P_C}")
    if K < 2:
        raise ConfigError("box factor K must be >= 2")
    Lval = L
    if box is None:
        if Lval is None:
            lest = estimate_L(p, eps=eps, trials_per_size=trials_per_size,
                              n_max=n_max, seed=derive_seed(seed, 101),
                              workers=workers)
            if lest.saturated:
                raise SaturatedError(f"L({p}, {eps}) saturated at n_max = {n_max}")
            Lval = lest.L
        box = K * Lval
    hits = _chunked_hits(trials, workers, lambda lo, k: _k.reach_boundary_batch(
        seed, lo, k, 0, 0, p, box))
    lo_ci, hi_ci = wilson_interval(hits, trials)
    return TailEstimate(label="theta", threshold=box, trials=trials, hits=hits,
                        censored=0, estimate=hits / trials, ci_low=lo_ci,
                        ci_high=hi_ci, seed=seed, p=p, m=Lval)


# ----------------------------------------------------------------------
# closed dual circuits around the origin
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class AnpResult:
    """Nested p-closed dual circuits around the origin inside B(box).

    Diameters are exact for each traced circuit; `exists` reports whether any
    circuit reaches diameter n in the requested norm. The traced family is a
    one-sided witness: absence of a traced circuit of diameter n does not
    exclude non-nested circuits.
    """

    p: float
    n: int
    box: int
    norm: str
    exists: bool
    witness_diameter: int
    n_circuits: int
    max_diam_l1: int
    max_diam_linf: int


def check_Anp(f: WeightField, p: float, n: int, box: int, norm: str = "l1") -> AnpResult:
    """Trace the nested family of p-closed dual circuits around the origin.

    The radius premise of the circuit comparison is an L1 quantity, so the
    default diameter norm is L1; both norms are always reported.
    """
    if n > box:
        raise ConfigError(f"n = {n} exceeds box = {box}")
    if norm not in ("l1", "linf"):
        raise ConfigError("norm must be 'l1' or 'linf'")
    if f.mode != "pseudorandom":
        raise ConfigError("circuit tracing expects a pseudorandom field")
    ncirc, ml1, mlinf = _k.anp_scan(f.seed, p, box)
    wit = ml1 if norm == "l1" else mlinf
    return AnpResult(p=p, n=n, box=box, norm=norm, exists=wit >= n,
                     witness_diameter=int(wit), n_circuits=int(ncirc),
                     max_diam_l1=int(ml1), max_diam_linf=int(mlinf))
