"""Finite windows of q-regular towers of graphs.

A tower is a sequence of level graphs with contractions pointing down one
level.  Line towers (the half-grid and the q-ary towers) are generated on
the fly; explicit towers carry their level graphs and contraction maps.
Vertices are addressed as ``(level, id)`` pairs throughout.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .errors import DomainError, InfeasibleError, ResourceError, ValidationError

DEFAULT_VERTEX_CAP = 10**7

GRID = "grid"
QARY = "qary"
HOROSPHERE = "horosphere"
CUSTOM = "custom"


@dataclass(frozen=True)
class ExplicitLevels:
    """Level graphs plus contraction maps, level 0 first.

    ``parents[n]`` maps each vertex of level ``n >= 1`` to its image in level
    ``n - 1``; ``parents[0]`` is empty.
    """

    vertices: tuple[tuple[Hashable, ...], ...]
    edges: tuple[frozenset, ...]
    parents: tuple[dict, ...]

    def children_of(self, level: int, v) -> list:
        if level + 1 >= len(self.vertices):
            return []
        return self._children[level + 1].get(v, [])

    def __post_init__(self):
        kids = []
        for n, pmap in enumerate(self.parents):
            acc = defaultdict(list)
            for child in self.vertices[n]:
                if n and child in pmap:
                    acc[pmap[child]].append(child)
            for lst in acc.values():
                lst.sort(key=_sort_key)
            kids.append(dict(acc))
        object.__setattr__(self, "_children", kids)
        adj = []
        for es in self.edges:
            nb = defaultdict(set)
            for e in es:
                a, b = tuple(e)
                nb[a].add(b)
                nb[b].add(a)
            adj.append(dict(nb))
        object.__setattr__(self, "_adj", adj)

    def neighbors(self, level: int, v) -> list:
        return sorted(self._adj[level].get(v, ()), key=_sort_key)


def _sort_key(v):
    return (0, v) if isinstance(v, int) else (1, str(v))


@dataclass(frozen=True)
class TowerSpec:
    kind: str
    q: int = 1
    explicit: ExplicitLevels | None = field(default=None, compare=False)
    check_regular: bool = True

    def __post_init__(self):
        if self.kind not in (GRID, QARY, HOROSPHERE, CUSTOM):
            raise ValidationError(f"unknown tower kind {self.kind!r}")
        if self.q < 1:
            raise ValidationError("q must be >= 1")
        if self.kind == GRID and self.q != 1:
            raise ValidationError("the grid tower has q = 1")
        if self.kind == QARY and self.q < 2:
            raise ValidationError("q-ary towers need q >= 2")
        if self.kind in (HOROSPHERE, CUSTOM):
            if self.explicit is None:
                raise ValidationError(f"{self.kind} towers need explicit levels")
            _validate_explicit(self.explicit, self.q, self.check_regular)

    @classmethod
    def grid(cls) -> "TowerSpec":
        return cls(GRID, 1)

    @classmethod
    def qary(cls, q: int) -> "TowerSpec":
        return cls(QARY, q)

    @classmethod
    def custom(cls, vertices, edges, parents, q: int) -> "TowerSpec":
        return cls(CUSTOM, q, _explicit(vertices, edges, parents))

    @classmethod
    def horosphere(cls, vertices, edges, parents) -> "TowerSpec":
        # raw successor fibres vary in size, so q-regularity is not demanded
        q = 1
        ex = _explicit(vertices, edges, parents)
        return cls(HOROSPHERE, q, ex, check_regular=False)

    @property
    def is_line(self) -> bool:
        return self.kind in (GRID, QARY)

    def parent(self, level: int, v):
        if level == 0:
            return None
        if self.kind == GRID:
            return v
        if self.kind == QARY:
            return v // self.q
        return self.explicit.parents[level].get(v)

    def child_index(self, level: int, v) -> int:
        if self.kind == GRID:
            return 0
        if self.kind == QARY:
            return v % self.q
        p = self.parent(level, v)
        return self.explicit.children_of(level - 1, p).index(v)

    def children(self, level: int, v) -> list:
        if self.kind == GRID:
            return [v]
        if self.kind == QARY:
            return [self.q * v + j for j in range(self.q)]
        return list(self.explicit.children_of(level, v))

    def neighbors(self, level: int, v) -> list:
        """Horizontal neighbours in the full level graph (lines are infinite)."""
        if self.is_line:
            return [v - 1, v + 1]
        return self.explicit.neighbors(level, v)

    def level_vertices(self, level: int):
        if self.is_line:
            raise DomainError("line levels are infinite")
        return self.explicit.vertices[level]

    def describe(self) -> str:
        if self.kind == QARY:
            return f"qary:{self.q}"
        return self.kind


def _explicit(vertices, edges, parents) -> ExplicitLevels:
    vs = tuple(tuple(sorted(level, key=_sort_key)) for level in vertices)
    es = tuple(frozenset(frozenset(e) for e in level) for level in edges)
    ps = tuple(dict(p) for p in parents)
    if not (len(vs) == len(es) == len(ps)):
        raise ValidationError("vertices, edges and parents must list the same levels")
    return ExplicitLevels(vs, es, ps)


def _validate_explicit(ex: ExplicitLevels, q: int, check_regular: bool):
    for n, level in enumerate(ex.vertices):
        members = set(level)
        for e in ex.edges[n]:
            if len(e) != 2 or not e <= members:
                raise ValidationError(f"level {n}: edge {set(e)} is not a pair of level vertices")
        if n == 0:
            continue
        below = set(ex.vertices[n - 1])
        pmap = ex.parents[n]
        for v in level:
            if pmap.get(v) not in below:
                raise ValidationError(f"level {n}: vertex {v!r} has no parent in level {n - 1}")
        for e in ex.edges[n]:
            a, b = tuple(e)
            pa, pb = pmap[a], pmap[b]
            if pa != pb and frozenset((pa, pb)) not in ex.edges[n - 1]:
                raise ValidationError(
                    f"level {n}: contraction sends edge {{{a!r}, {b!r}}} to a non-edge")
        if check_regular and n < len(ex.vertices):
            for p in below:
                got = len(ex.children_of(n - 1, p))
                if got != q:
                    raise ValidationError(
                        f"level {n - 1}: vertex {p!r} has {got} preimages, expected {q}")


@dataclass(frozen=True)
class Line:
    """One line of a level: ``vertices[m]`` sits at position ``origin + m``."""

    label: int
    origin: int
    vertices: tuple


@dataclass(frozen=True)
class VertexSet:
    """A finite set of vertices of one level, with its boundary and neighbourhood.

    Both are measured in the graph the set was built against (a tower spec,
    whose line levels are infinite, or a patch).
    """

    level: int
    members: frozenset
    boundary: frozenset
    neighbourhood: frozenset

    @classmethod
    def of(cls, graph, level: int, members: Iterable) -> "VertexSet":
        members = frozenset(members)
        boundary = set()
        nbhd = set(members)
        for v in members:
            for w in graph.neighbors(level, v):
                if w not in members:
                    boundary.add((v, w))
                    nbhd.add(w)
        return cls(level, members, frozenset(boundary), frozenset(nbhd))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members, key=_sort_key))

    @property
    def boundary_size(self) -> int:
        return len(self.boundary)


class TowerPatch:
    """A finite window of levels ``0..height-1`` of a tower.

    ``vertices`` is ordered by level, then vertex id; that order is the
    variable order used by the solvers.
    """

    def __init__(self, spec: TowerSpec, levels: list[list], base=None):
        self.spec = spec
        self.height = len(levels)
        self.base = base
        self.levels = [list(lv) for lv in levels]
        self.vertices = [(n, v) for n, lv in enumerate(self.levels) for v in lv]
        self.index = {x: i for i, x in enumerate(self.vertices)}
        self._members = [set(lv) for lv in self.levels]
        self.horizontal = []
        self.vertical = []
        for n, lv in enumerate(self.levels):
            mem = self._members[n]
            for v in lv:
                for w in spec.neighbors(n, v):
                    if w in mem and _sort_key(v) < _sort_key(w):
                        self.horizontal.append((self.index[(n, v)], self.index[(n, w)]))
                if n > 0:
                    p = spec.parent(n, v)
                    if p in self._members[n - 1]:
                        self.vertical.append(
                            (self.index[(n, v)], self.index[(n - 1, p)], spec.child_index(n, v)))
        self.horizontal.sort()
        self.interior = frozenset(x for x in self.vertices if self._is_interior(*x))

    def _is_interior(self, n: int, v) -> bool:
        if n >= self.height - 1:
            return False
        spec = self.spec
        if any(w not in self._members[n] for w in spec.neighbors(n, v)):
            return False
        if n > 0 and spec.parent(n, v) not in self._members[n - 1]:
            return False
        kids = spec.children(n, v)
        if spec.kind != HOROSPHERE and len(kids) != spec.q:
            return False
        return all(c in self._members[n + 1] for c in kids)

    # graph queries -------------------------------------------------------

    def __contains__(self, x) -> bool:
        n, v = x
        return 0 <= n < self.height and v in self._members[n]

    def neighbors(self, level: int, v) -> list:
        return [w for w in self.spec.neighbors(level, v) if w in self._members[level]]

    def children(self, level: int, v) -> list:
        if level + 1 >= self.height:
            return []
        return [c for c in self.spec.children(level, v) if c in self._members[level + 1]]

    def parent(self, level: int, v):
        p = self.spec.parent(level, v)
        if p is None or level == 0 or p not in self._members[level - 1]:
            return None
        return p

    @property
    def q(self) -> int:
        return self.spec.q

    def lines(self, level: int) -> list[Line]:
        """Line decomposition of a level (a single line for line towers)."""
        if not self.spec.is_line:
            raise DomainError("explicit towers carry no line structure")
        lv = self.levels[level]
        return [Line(0, lv[0], tuple(lv))] if lv else []

    def labeled_edges(self):
        """``(u, label, v)`` triples over vertex indices, for the domino solver.

        Horizontal edges point from the lower to the higher id; vertical edges
        point from child to parent with label ``v<child index>``.
        """
        out = [(i, "h", j) for i, j in self.horizontal]
        out += [(c, f"v{j}", p) for c, p, j in self.vertical]
        return out

    def labels(self) -> list[str]:
        return ["h"] + [f"v{j}" for j in range(self.q)]

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        levels = []
        for n, lv in enumerate(self.levels):
            if self.spec.is_line and lv:
                levels.append({"level": n, "range": [lv[0], lv[-1] + 1]})
            else:
                levels.append({"level": n, "vertices": list(lv)})
        vx = self.vertices
        return {
            "kind": self.spec.kind,
            "q": self.spec.q,
            "height": self.height,
            "levels": levels,
            "horizontal": [[list(vx[i]), list(vx[j])] for i, j in self.horizontal],
            "vertical": [[list(vx[c]), list(vx[p]), j] for c, p, j in self.vertical],
            "interior": [list(x) for x in self.vertices if x in self.interior],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "TowerPatch":
        kind, q = data["kind"], data["q"]
        levels = []
        for entry in sorted(data["levels"], key=lambda e: e["level"]):
            if "range" in entry:
                lo, hi = entry["range"]
                levels.append(list(range(lo, hi)))
            else:
                levels.append(list(entry["vertices"]))
        if kind in (GRID, QARY):
            spec = TowerSpec(kind, q)
            base = (levels[0][0], levels[0][-1] + 1) if levels and levels[0] else None
            return cls(spec, levels, base)
        edges = [set() for _ in levels]
        parents = [dict() for _ in levels]
        for (n, a), (_, b) in data["horizontal"]:
            edges[n].add((a, b))
        for (n, c), (_, p), _j in data["vertical"]:
            parents[n][c] = p
        if kind == HOROSPHERE:
            spec = TowerSpec.horosphere(levels, edges, parents)
        else:
            spec = TowerSpec(CUSTOM, q, _explicit(levels, edges, parents), check_regular=False)
        return cls(spec, levels)

    @classmethod
    def from_json(cls, text: str) -> "TowerPatch":
        return cls.from_dict(json.loads(text))

    def to_dot(self, colours=None) -> str:
        """DOT drawing; vertical edges directed, horizontal ones undirected."""
        lines = ["digraph tower {", "  rankdir=BT;"]
        for i, (n, v) in enumerate(self.vertices):
            label = f"{n}:{v}" if colours is None else str(colours[i])
            lines.append(f'  n{i} [label="{label}"];')
        for i, j in self.horizontal:
            lines.append(f"  n{i} -> n{j} [dir=none];")
        for c, p, j in self.vertical:
            lines.append(f'  n{c} -> n{p} [label="{j}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_patch(spec: TowerSpec, height: int, base_range=None,
                vertex_cap: int = DEFAULT_VERTEX_CAP) -> TowerPatch:
    """Window of levels ``[0, height)``; level ``n`` covers the full preimage of level ``n-1``.

    ``base_range`` is a half-open ``(lo, hi)`` interval for line towers; for
    explicit towers the whole level graphs are used and it must be None.
    """
    if height < 1:
        raise ValidationError("height must be >= 1")
    if spec.is_line:
        if base_range is None:
            raise ValidationError("line towers need a base range")
        lo, hi = base_range
        if hi <= lo:
            raise ValidationError("base range is empty")
        factor = spec.q ** (height - 1)
        total = (hi - lo) * sum(spec.q ** n for n in range(height))
        if total > vertex_cap or factor * (hi - lo) > vertex_cap:
            raise ResourceError(f"patch would hold {total} vertices (cap {vertex_cap})",
                                bound=vertex_cap, reached=total)
        levels = [list(range(lo * spec.q ** n, hi * spec.q ** n)) for n in range(height)]
        return TowerPatch(spec, levels, (lo, hi))
    if base_range is not None:
        raise ValidationError("explicit towers take no base range")
    available = len(spec.explicit.vertices)
    if height > available:
        raise ValidationError(f"tower provides {available} levels, {height} requested")
    levels = [list(spec.explicit.vertices[n]) for n in range(height)]
    total = sum(map(len, levels))
    if total > vertex_cap:
        raise ResourceError(f"patch would hold {total} vertices (cap {vertex_cap})",
                            bound=vertex_cap, reached=total)
    return TowerPatch(spec, levels)


def folner_set(graph, level: int, k: int, start=None) -> VertexSet:
    """A set ``F`` in one level graph with ``k * #boundary(F) <= #F``.

    ``graph`` is a TowerSpec or a TowerPatch.  Line levels give the interval
    ``[start, start + 2k)``; explicit levels give the smallest ball around
    ``start`` (default: the least vertex) that satisfies the inequality.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    spec = graph.spec if isinstance(graph, TowerPatch) else graph
    if spec.is_line:
        width = 2 * k
        if isinstance(graph, TowerPatch):
            lv = graph.levels[level]
            lo = lv[0] + 1 if start is None else start
            # both boundary edges must exist in the patch for #boundary = 2
            if lo - 1 < lv[0] or lo + width > lv[-1]:
                raise InfeasibleError(
                    f"level {level} spans {len(lv)} vertices; an interval Folner set for "
                    f"k={k} needs {width} plus one on each side",
                    needed=width + 2)
        else:
            lo = 0 if start is None else start
        return VertexSet.of(graph, level, range(lo, lo + width))
    verts = (graph.levels[level] if isinstance(graph, TowerPatch)
             else spec.level_vertices(level))
    if not verts:
        raise InfeasibleError(f"level {level} is empty", needed=1)
    centre = verts[0] if start is None else start
    dist = {centre: 0}
    frontier = deque([centre])
    order = [centre]
    while frontier:
        v = frontier.popleft()
        for w in graph.neighbors(level, v):
            if w not in dist:
                dist[w] = dist[v] + 1
                frontier.append(w)
                order.append(w)
    radius = 0
    while True:
        ball = [v for v in order if dist[v] <= radius]
        F = VertexSet.of(graph, level, ball)
        if k * F.boundary_size <= len(F):
            return F
        if len(ball) == len(order):
            raise InfeasibleError(
                f"the component of {centre!r} has {len(order)} vertices and cannot reach ratio 1/{k}",
                needed=k * F.boundary_size)
        radius += 1


def pullback_folner(graph, level: int, F: VertexSet) -> VertexSet:
    """Preimage of ``F`` (a subset of level ``level-1``) under the contraction."""
    if F.level != level - 1:
        raise DomainError(f"set lives in level {F.level}, expected {level - 1}")
    spec = graph.spec if isinstance(graph, TowerPatch) else graph
    pre = []
    for v in F.members:
        kids = (graph.children(F.level, v) if isinstance(graph, TowerPatch)
                else spec.children(F.level, v))
        pre.extend(kids)
    return VertexSet.of(graph, level, pre)
