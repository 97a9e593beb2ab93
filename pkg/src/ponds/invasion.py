"""Invasion growth, first-pond extraction and the finite-box pond partition.

The growth rule: starting from a single vertex, repeatedly invade the
minimum-weight edge of the outer boundary of the invaded graph. The outer
boundary contains every non-invaded edge with at least one invaded endpoint,
so the minimum can close a loop, adding an edge but no vertex.

First-pond extraction runs the invasion in a clipped box B(M) and applies an
adaptive stopping rule: when the invasion first touches dB(M), the candidate
outlet is the running-maximum edge and the candidate pond is the region
invaded strictly before it. The candidate is accepted when it fits inside
B(M//margin - 1) and its level exceeds 1/2; otherwise the box doubles and the
invasion resumes (re-running it is equivalent, the process is deterministic
given the field). Hitting the maximum box returns the candidate flagged as
censored. The level clause is sound because a finite-box level at or below
1/2 is always still growing; tail experiments count censored samples
conservatively.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .lattice import (Box, Edge, Vertex, edge_between, edge_from_id, l1_radius,
                      linf_radius, neighbours)
from .weights import WeightField


class ExhaustedRegionError(RuntimeError):
    """The frontier emptied: the whole clipped box has been invaded."""


class ConfigError(ValueError):
    pass


_NO_VERTEX = int(_k._NO_VERTEX)


# ----------------------------------------------------------------------
# step-level engine
# ----------------------------------------------------------------------

@dataclass
class InvasionState:
    """Mutable state of one invasion run inside a clipped box.

    The frontier heap holds exactly the outer boundary of the invaded graph:
    each edge enters once, when its first endpoint is invaded, and leaves only
    by being invaded itself.
    """

    start: Vertex
    box: int | None
    vertices: set[Vertex]
    edges: list[Edge]
    edge_weights: list[float]
    frontier: list[tuple[float, int, Edge]]
    running_max: tuple[Edge, float, int] | None = None
    steps: int = 0

    def frontier_edges(self) -> list[Edge]:
        """Current outer-boundary edges, cheapest first."""
        return [e for (_, _, e) in sorted(self.frontier)]


def new_invasion(f: WeightField, start: Vertex = (0, 0), box: int | None = None) -> InvasionState:
    if box is not None and max(abs(start[0]), abs(start[1])) > box:
        raise ConfigError(f"start {start} outside B({box})")
    state = InvasionState(start=start, box=box, vertices={start}, edges=[],
                          edge_weights=[], frontier=[])
    for e in neighbours(start, box):
        heapq.heappush(state.frontier, (f.weight(e), e.eid, e))
    return state


def invade_step(state: InvasionState, f: WeightField) -> InvasionState:
    """Invade the minimum-weight frontier edge; ties break on smaller edge id."""
    if not state.frontier:
        raise ExhaustedRegionError("frontier is empty, the region is fully invaded")
    w, _, e = heapq.heappop(state.frontier)
    state.edges.append(e)
    state.edge_weights.append(w)
    state.steps += 1
    if state.running_max is None or w > state.running_max[1]:
        state.running_max = (e, w, state.steps)
    new = None
    if e.u not in state.vertices:
        new = e.u
    elif e.v not in state.vertices:
        new = e.v
    if new is not None:
        state.vertices.add(new)
        for ne in neighbours(new, state.box):
            other = ne.v if ne.u == new else ne.u
            if other not in state.vertices:
                heapq.heappush(state.frontier, (f.weight(ne), ne.eid, ne))
    return state


# ----------------------------------------------------------------------
# ponds
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Pond:
    """First pond of `start`: the region invaded strictly before the outlet.

    vertices/edge_ids are numpy arrays (large censored ponds make Python sets
    expensive); vertex_set() and edge_set() build the set views on demand.
    Edge_ids hold every invaded pre-outlet edge, which equals all edges between
    pond vertices with weight below the level.
    """

    start: Vertex
    tau_hat: float
    outlet: Edge
    vertices: np.ndarray          # (k, 2) int32
    edge_ids: np.ndarray          # (m,) int64
    radius_l1: int
    radius_linf: int
    volume: int
    censored: bool
    box: int                      # half-width of the box in force at acceptance
    levels_by_box: tuple[tuple[int, float], ...]

    def vertex_set(self) -> set[Vertex]:
        return {(int(x), int(y)) for x, y in self.vertices}

    def edge_set(self) -> set[Edge]:
        return {edge_from_id(int(e)) for e in self.edge_ids}

    def to_json(self, seed: int | None = None, sample: int | None = None) -> str:
        doc = {
            "tau_hat": self.tau_hat,
            "outlet": {"u": list(self.outlet.u), "v": list(self.outlet.v),
                       "id": self.outlet.eid, "tau": self.tau_hat},
            "radius_l1": self.radius_l1,
            "volume": self.volume,
            "censored": self.censored,
            "box": self.box,
            "seed": seed,
            "sample": sample,
        }
        return json.dumps(doc, sort_keys=True)


def _validate_boxes(m0: int, m_max: int, start: Vertex, margin: int) -> None:
    if m0 < 2 or (m0 & (m0 - 1)) != 0:
        raise ConfigError(f"m0 = {m0} must be a power of two >= 2")
    if (m_max & (m_max - 1)) != 0:
        raise ConfigError(f"m_max = {m_max} must be a power of two")
    if m0 > m_max:
        raise ConfigError(f"m0 = {m0} exceeds m_max = {m_max}")
    if margin < 2:
        raise ConfigError("margin factor must be at least 2")
    if max(abs(start[0]), abs(start[1])) >= m0:
        raise ConfigError(f"start {start} not interior to B({m0})")


def extract_first_pond(f: WeightField, start: Vertex = (0, 0), m0: int = 8,
                       m_max: int = 4096, margin: int = 2,
                       require_supercritical: bool = True) -> Pond:
    """Adaptive first-pond extraction (see the module docstring for the rule)."""
    _validate_boxes(m0, m_max, start, margin)
    if f.mode == "pseudorandom":
        (rec_eid, rec_w, rec_vx, rec_vy, a, tau, maxl1, maxlinf, vol, censored,
         m_used, levels, n_rungs, dup) = _k.pond_trace(
            f.seed, start[0], start[1], m0, m_max, margin, require_supercritical)
        if dup:
            raise RuntimeError("duplicate weights met during extraction")
        vx = rec_vx[:a][rec_vx[:a] != _NO_VERTEX]
        vy = rec_vy[:a][rec_vx[:a] != _NO_VERTEX]
        verts = np.empty((vx.size + 1, 2), np.int32)
        verts[0] = start
        verts[1:, 0] = vx
        verts[1:, 1] = vy
        lbb = tuple((m0 * 2 ** i, float(levels[i])) for i in range(n_rungs))
        return Pond(start=start, tau_hat=float(tau),
                    outlet=edge_from_id(int(rec_eid[a])),
                    vertices=verts, edge_ids=rec_eid[:a].copy(),
                    radius_l1=int(maxl1), radius_linf=int(maxlinf),
                    volume=int(vol), censored=bool(censored), box=int(m_used),
                    levels_by_box=lbb)
    return _extract_explicit(f, start, m0, m_max, margin, require_supercritical)


def _extract_explicit(f: WeightField, start: Vertex, m0: int, m_max: int,
                      margin: int, require_supercritical: bool) -> Pond:
    """Pure-Python twin of the kernel extraction, for explicit weight tables."""
    M = m0
    levels: list[tuple[int, float]] = []
    while True:
        state = new_invasion(f, start, box=M)
        bnd = M
        touched = False
        while True:
            if not state.frontier:
                raise ExhaustedRegionError("box exhausted before touching its boundary")
            invade_step(state, f)
            e = state.edges[-1]
            for v in (e.u, e.v):
                if max(abs(v[0]), abs(v[1])) == bnd and v in state.vertices:
                    touched = True
            if touched:
                break
        outlet, tau, step = state.running_max
        levels.append((M, tau))
        pond_edges = state.edges[: step - 1]
        pond_w = state.edge_weights[: step - 1]
        verts: list[Vertex] = [start]
        seen = {start}
        for pe in pond_edges:
            for v in (pe.u, pe.v):
                if v not in seen:
                    seen.add(v)
                    verts.append(v)
        maxlinf = linf_radius(seen)
        fits = maxlinf <= M // margin - 1
        sup = (not require_supercritical) or tau > 0.5
        if (fits and sup) or M >= m_max:
            ws = sorted(state.edge_weights)
            for i in range(1, len(ws)):
                if ws[i] == ws[i - 1]:
                    raise RuntimeError("duplicate weights met during extraction")
            va = np.array(verts, np.int32).reshape(-1, 2)
            return Pond(start=start, tau_hat=tau, outlet=outlet,
                        vertices=va,
                        edge_ids=np.array([pe.eid for pe in pond_edges], np.int64),
                        radius_l1=l1_radius(seen), radius_linf=maxlinf,
                        volume=len(verts), censored=not (fits and sup),
                        box=M, levels_by_box=tuple(levels))
        M *= 2


# ----------------------------------------------------------------------
# pond samples for tail experiments
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PondSamples:
    """Scalar per-sample results of a batch of independent extractions."""

    master_seed: int
    trials: int
    m0: int
    m_max: int
    margin: int
    tau: np.ndarray
    outlet_id: np.ndarray
    radius_l1: np.ndarray         # candidate radius (lower bound when censored)
    radius_linf: np.ndarray
    volume: np.ndarray            # candidate volume (lower bound when censored)
    censored: np.ndarray          # uint8
    m_used: np.ndarray
    rung_levels: np.ndarray       # (trials, MAX_RUNGS), NaN padded

    @property
    def censored_count(self) -> int:
        return int(self.censored.sum())


def sample_ponds(master_seed: int, trials: int, m0: int = 8, m_max: int = 256,
                 margin: int = 2, start: Vertex = (0, 0), workers: int = 1,
                 first_index: int = 0) -> PondSamples:
    """Extract `trials` ponds on per-sample derived seeds.

    Results are a pure function of (master_seed, first_index, trials); the
    worker count only splits the index range.
    """
    _validate_boxes(m0, m_max, start, margin)
    parts = _chunked(trials, workers, lambda lo, n: _k.sample_ponds_batch(
        master_seed, first_index + lo, n, start[0], start[1], m0, m_max, margin, True))
    taus = np.concatenate([p[0] for p in parts])
    outs = np.concatenate([p[1] for p in parts])
    r1 = np.concatenate([p[2] for p in parts])
    rinf = np.concatenate([p[3] for p in parts])
    vols = np.concatenate([p[4] for p in parts])
    cens = np.concatenate([p[5] for p in parts])
    mused = np.concatenate([p[6] for p in parts])
    levels = np.concatenate([p[8] for p in parts])
    dups = sum(int(p[9]) for p in parts)
    if dups:
        raise RuntimeError(f"{dups} extractions met duplicate weights")
    return PondSamples(master_seed=master_seed, trials=trials, m0=m0, m_max=m_max,
                       margin=margin, tau=taus, outlet_id=outs, radius_l1=r1,
                       radius_linf=rinf, volume=vols, censored=cens, m_used=mused,
                       rung_levels=levels)


def _chunked(total: int, workers: int, fn):
    """Run fn(lo, n) over the index range split into `workers` chunks.

    Chunks are merged in index order, so the output is identical for any
    worker count; kernels release the GIL, so plain threads scale.
    """
    if workers <= 1 or total < 2 * workers:
        return [fn(0, total)]
    from concurrent.futures import ThreadPoolExecutor
    chunk = (total + workers - 1) // workers
    spans = [(lo, min(chunk, total - lo)) for lo in range(0, total, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda s: fn(*s), spans))


# ----------------------------------------------------------------------
# pond partition of a box
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PondPartition:
    """Final-level pond decomposition of B(n), computed inside B(box)."""

    n: int
    box: int
    labels: dict[Vertex, int]
    levels: dict[int, float]


def pond_partition(f: WeightField, n: int, box: int | None = None) -> PondPartition:
    """Label every vertex of B(n) with its pond and report per-pond levels.

    A vertex's final level is the minimax weight of paths to dB(box); ponds are
    maximal connected sets sharing a level. box defaults to 2n and must be at
    least that (finite-volume margin).
    """
    if n < 1:
        raise ConfigError("partition requires n >= 1")
    M = 2 * n if box is None else box
    if M < 2 * n:
        raise ConfigError(f"outer box {M} smaller than 2n = {2 * n}")
    if f.mode == "pseudorandom":
        levels = _k.partition_levels(f.seed, M)
        labels = _k.label_equal_levels(levels, M)
    else:
        levels, labels = _partition_explicit(f, M)
    W = 2 * M + 1
    out_labels: dict[Vertex, int] = {}
    out_levels: dict[int, float] = {}
    for x in range(-n, n + 1):
        for y in range(-n, n + 1):
            c = (x + M) * W + (y + M)
            lab = int(labels[c])
            out_labels[(x, y)] = lab
            out_levels[lab] = float(levels[c])
    return PondPartition(n=n, box=M, labels=out_labels, levels=out_levels)


def _partition_explicit(f: WeightField, M: int):
    """Kruskal-style level assignment on an explicit table (oracle-friendly)."""
    from .lattice import box_edges

    W = 2 * M + 1
    NV = W * W
    BND = NV
    parent = list(range(NV + 1))
    members: list[list[int] | None] = [[v] for v in range(NV)]
    members.append(None)
    levels = np.full(NV, np.nan)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def cell(v: Vertex) -> int:
        return (v[0] + M) * W + (v[1] + M)

    for x in range(-M, M + 1):
        for y in range(-M, M + 1):
            if max(abs(x), abs(y)) == M:
                parent[cell((x, y))] = BND
    edges = sorted(box_edges(M), key=lambda e: (f.weight(e), e.eid))
    for e in edges:
        ru, rv = find(cell(e.u)), find(cell(e.v))
        if ru == rv:
            continue
        rb = find(BND)
        if rb in (ru, rv):
            other = rv if ru == rb else ru
            w = f.weight(e)
            for m in members[other]:
                levels[m] = w
            members[other] = None
            parent[other] = rb
        else:
            if len(members[ru]) > len(members[rv]):
                ru, rv = rv, ru
            members[rv].extend(members[ru])
            members[ru] = None
            parent[ru] = rv

    labels = np.full(NV, -1, np.int64)
    lparent = list(range(NV))

    def lfind(x: int) -> int:
        while lparent[x] != x:
            lparent[x] = lparent[lparent[x]]
            x = lparent[x]
        return x

    for x in range(-M + 1, M):
        for y in range(-M + 1, M):
            v = cell((x, y))
            for (ox, oy) in ((x + 1, y), (x, y + 1)):
                if max(abs(ox), abs(oy)) >= M:
                    continue
                u = cell((ox, oy))
                if levels[v] == levels[u]:
                    rv, ru = lfind(v), lfind(u)
                    if rv != ru:
                        lparent[rv] = ru
    for x in range(-M + 1, M):
        for y in range(-M + 1, M):
            v = cell((x, y))
            labels[v] = lfind(v)
    return levels, labels
