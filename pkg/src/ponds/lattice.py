"""Square-lattice geometry: vertices, canonical edges, boxes and the dual lattice.

Vertices are plain (x, y) integer tuples. An edge is canonicalised to its
lexicographically smaller endpoint plus an orientation bit and carries a
packed integer id that is independent of any simulation box, so ids agree
across runs, box sizes and translated computations.

Norm conventions: boxes B(n) and their boundaries use the L-inf norm, pond
radii use the L1 norm. Functions are named accordingly.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

Vertex = tuple[int, int]

COORD_LIMIT = 1 << 30  # coordinate bound that keeps packed ids inside int64

ORIGIN: Vertex = (0, 0)


class RegionError(ValueError):
    """A vertex or edge lies outside the configured region."""


class DegenerateBoxError(ValueError):
    """Box too small for the requested operation."""


class Edge(NamedTuple):
    u: Vertex
    v: Vertex
    eid: int

    @property
    def horizontal(self) -> bool:
        return self.eid & 1 == 0


class Box(NamedTuple):
    n: int

    def __contains__(self, v: Vertex) -> bool:
        return max(abs(v[0]), abs(v[1])) <= self.n


class DualEdge(NamedTuple):
    eid: int           # id of the primal edge this dual edge crosses
    a: tuple[float, float]
    b: tuple[float, float]


def _zigzag(v: int) -> int:
    return 2 * v if v >= 0 else -2 * v - 1


def _unzig(z: int) -> int:
    return z // 2 if z % 2 == 0 else -(z + 1) // 2


def _check_coord(v: Vertex) -> None:
    if abs(v[0]) >= COORD_LIMIT or abs(v[1]) >= COORD_LIMIT:
        raise RegionError(f"vertex {v} outside the addressable region")


def edge_id(u: Vertex, v: Vertex) -> int:
    """Canonical id of the nearest-neighbour edge <u,v>; symmetric in u, v."""
    if u > v:
        u, v = v, u
    dx, dy = v[0] - u[0], v[1] - u[1]
    if (dx, dy) == (1, 0):
        o = 0
    elif (dx, dy) == (0, 1):
        o = 1
    else:
        raise ValueError(f"{u} and {v} are not nearest neighbours")
    _check_coord(u)
    return (_zigzag(u[0]) << 32) | (_zigzag(u[1]) << 1) | o


def edge_between(u: Vertex, v: Vertex) -> Edge:
    eid = edge_id(u, v)
    if u > v:
        u, v = v, u
    return Edge(u, v, eid)


def edge_from_id(eid: int) -> Edge:
    x = _unzig(eid >> 32)
    y = _unzig((eid >> 1) & 0x7FFFFFFF)
    if eid & 1:
        return Edge((x, y), (x, y + 1), eid)
    return Edge((x, y), (x + 1, y), eid)


def neighbours(v: Vertex, box: int | None = None) -> list[Edge]:
    """Incident edges of v in E, N, W, S order.

    With a box half-width, edges whose far endpoint leaves B(box) are dropped
    (they do not exist in the clipped graph); a vertex outside the box raises.
    """
    _check_coord(v)
    x, y = v
    if box is not None and max(abs(x), abs(y)) > box:
        raise RegionError(f"vertex {v} outside B({box})")
    others = [(x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1)]
    out = []
    for o in others:
        if box is not None and max(abs(o[0]), abs(o[1])) > box:
            continue
        out.append(edge_between(v, o))
    return out


def l1_radius(vertices: Iterable[Vertex]) -> int:
    """max |x|+|y| over the set; the pond-radius norm."""
    best = -1
    for (x, y) in vertices:
        r = abs(x) + abs(y)
        if r > best:
            best = r
    if best < 0:
        raise ValueError("l1_radius of an empty set")
    return best


def linf_radius(vertices: Iterable[Vertex]) -> int:
    """max(|x|,|y|) over the set; the box norm."""
    best = -1
    for (x, y) in vertices:
        r = max(abs(x), abs(y))
        if r > best:
            best = r
    if best < 0:
        raise ValueError("linf_radius of an empty set")
    return best


def box_vertices(n: int) -> list[Vertex]:
    """All vertices of B(n)."""
    if n < 0:
        raise DegenerateBoxError("negative box half-width")
    return [(x, y) for x in range(-n, n + 1) for y in range(-n, n + 1)]


def boundary(n: int) -> set[Vertex]:
    """The L-inf ring dB(n) = B(n) \\ B(n-1); has exactly 8n vertices."""
    if n < 1:
        raise DegenerateBoxError("boundary requires half-width n >= 1")
    ring: set[Vertex] = set()
    for t in range(-n, n + 1):
        ring.add((t, n))
        ring.add((t, -n))
        ring.add((n, t))
        ring.add((-n, t))
    return ring


def box_edges(n: int) -> list[Edge]:
    """All edges of the clipped box B(n), horizontals first."""
    if n < 1:
        raise DegenerateBoxError("box_edges requires half-width n >= 1")
    out = []
    for x in range(-n, n):
        for y in range(-n, n + 1):
            out.append(edge_between((x, y), (x + 1, y)))
    for x in range(-n, n + 1):
        for y in range(-n, n):
            out.append(edge_between((x, y), (x, y + 1)))
    return out


def dual(e: Edge) -> DualEdge:
    """The dual-lattice edge crossing e, with endpoints on Z^2 + (1/2, 1/2)."""
    (x, y) = e.u
    if e.horizontal:
        return DualEdge(e.eid, (x + 0.5, y - 0.5), (x + 0.5, y + 0.5))
    return DualEdge(e.eid, (x - 0.5, y + 0.5), (x + 0.5, y + 0.5))


def primal(d: DualEdge) -> Edge:
    """Inverse of dual(); dual-of-dual is the identity on edges."""
    return edge_from_id(d.eid)
