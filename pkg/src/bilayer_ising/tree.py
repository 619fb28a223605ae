"""Finite rooted regular trees: vertex indexing, generations, balls, edges.

Vertices are addressed by their root path (tuple of child indices), so
enumeration order is deterministic and serialization is canonical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Tuple

Vertex = Tuple[int, ...]

ROOT: Vertex = ()

ROOT_MODES = ("full", "reduced")


@dataclass(frozen=True)
class TreeShape:
    """A depth-bounded regular tree with branching factor k.

    In "full" mode the root has k+1 direct successors (the root of the
    infinite tree has degree k+1); in "reduced" mode it has k, like every
    other interior vertex.
    """

    k: int
    depth: int
    root_mode: str = "full"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("branching factor k must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.root_mode not in ROOT_MODES:
            raise ValueError("root_mode must be one of %r" % (ROOT_MODES,))

    @property
    def root_degree(self) -> int:
        return self.k + 1 if self.root_mode == "full" else self.k

    def contains(self, x: Vertex) -> bool:
        if len(x) > self.depth:
            return False
        for i, c in enumerate(x):
            fan = self.root_degree if i == 0 else self.k
            if not 0 <= c < fan:
                return False
        return True


def parent(x: Vertex) -> Vertex:
    if not x:
        raise ValueError("the root has no parent")
    return x[:-1]


def successors(shape: TreeShape, x: Vertex) -> List[Vertex]:
    """Direct successors S(x) of a vertex strictly inside the ball."""
    if not shape.contains(x):
        raise ValueError("vertex %r is outside the tree" % (x,))
    if len(x) >= shape.depth:
        raise ValueError("vertex %r has no successors within depth %d" % (x, shape.depth))
    fan = shape.root_degree if len(x) == 0 else shape.k
    return [x + (c,) for c in range(fan)]


def generation(shape: TreeShape, m: int) -> List[Vertex]:
    """The sphere W_m: all vertices at distance m from the root."""
    if not 0 <= m <= shape.depth:
        raise ValueError("generation %d outside [0, %d]" % (m, shape.depth))
    level: List[Vertex] = [ROOT]
    for _ in range(m):
        nxt: List[Vertex] = []
        for x in level:
            fan = shape.root_degree if len(x) == 0 else shape.k
            nxt.extend(x + (c,) for c in range(fan))
        level = nxt
    return level


def ball(shape: TreeShape, m: int | None = None) -> List[Vertex]:
    """The ball V_m, ordered by (generation, path)."""
    if m is None:
        m = shape.depth
    if not 0 <= m <= shape.depth:
        raise ValueError("radius %d outside [0, %d]" % (m, shape.depth))
    out: List[Vertex] = []
    for j in range(m + 1):
        out.extend(generation(shape, j))
    return out


def edges(shape: TreeShape, m: int | None = None) -> List[Tuple[Vertex, Vertex]]:
    """All parent-child pairs L_m inside the ball of radius m."""
    if m is None:
        m = shape.depth
    if not 0 <= m <= shape.depth:
        raise ValueError("radius %d outside [0, %d]" % (m, shape.depth))
    out = []
    for x in ball(shape, m):
        if x:
            out.append((parent(x), x))
    return out


def iter_vertices(shape: TreeShape) -> Iterator[Vertex]:
    return iter(ball(shape, shape.depth))


def path_str(x: Vertex) -> str:
    """Canonical string form of a vertex path ('' is the root)."""
    return ".".join(str(c) for c in x)


def parse_path(s: str) -> Vertex:
    if s == "":
        return ROOT
    return tuple(int(tok) for tok in s.split("."))
