"""Domino instances, colouring checks, a finite-patch solver and DIMACS export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ResourceError, ValidationError

SATISFIABLE = "satisfiable"
UNSATISFIABLE = "unsatisfiable"
ABORTED = "aborted"

BRUTE_FORCE_CAP = 10**6


@dataclass(frozen=True)
class DominoInstance:
    colours: tuple
    labels: tuple
    allowed: frozenset

    def __post_init__(self):
        object.__setattr__(self, "colours", tuple(self.colours))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "allowed", frozenset(tuple(t) for t in self.allowed))
        if not self.colours or not self.labels:
            raise ValidationError("colour and label sets must be non-empty")
        if len(set(self.colours)) != len(self.colours):
            raise ValidationError("duplicate colours")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("duplicate labels")
        cs, ls = set(self.colours), set(self.labels)
        for a, s, b in self.allowed:
            if a not in cs or b not in cs:
                raise ValidationError(f"triple {(a, s, b)!r} uses an undeclared colour")
            if s not in ls:
                raise ValidationError(f"triple {(a, s, b)!r} uses an undeclared label")
        object.__setattr__(self, "_cid", {c: i for i, c in enumerate(self.colours)})
        object.__setattr__(self, "_lid", {s: i for i, s in enumerate(self.labels)})

    @classmethod
    def full(cls, colours, labels) -> "DominoInstance":
        return cls(colours, labels, {(a, s, b) for a in colours for s in labels for b in colours})

    def colour_id(self, c) -> int:
        try:
            return self._cid[c]
        except KeyError:
            raise ValidationError(f"undeclared colour {c!r}") from None

    def label_id(self, s) -> int:
        try:
            return self._lid[s]
        except KeyError:
            raise ValidationError(f"undeclared label {s!r}") from None

    def allow_matrix(self, label) -> np.ndarray:
        """Boolean ``k x k`` table of ``(a, label, b)`` membership by colour id."""
        k = len(self.colours)
        cache = self.__dict__.setdefault("_mats", {})
        if label not in cache:
            self.label_id(label)
            m = np.zeros((k, k), dtype=bool)
            for a, s, b in self.allowed:
                if s == label:
                    m[self._cid[a], self._cid[b]] = True
            cache[label] = m
        return cache[label]

    def to_dict(self) -> dict:
        cid, lid = self._cid, self._lid
        trip = sorted(self.allowed, key=lambda t: (cid[t[0]], lid[t[1]], cid[t[2]]))
        return {"colours": list(self.colours), "labels": list(self.labels),
                "allowed": [list(t) for t in trip]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "DominoInstance":
        return cls(data["colours"], data["labels"], {tuple(t) for t in data["allowed"]})

    @classmethod
    def from_json(cls, text: str) -> "DominoInstance":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LabeledGraph:
    """Finite vertex list plus directed labeled edges ``(u, label, v)`` over indices."""

    names: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        n = len(self.names)
        for u, _, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge {(u, v)} references a missing vertex")

    @property
    def n(self) -> int:
        return len(self.names)

    @classmethod
    def of(cls, patch) -> "LabeledGraph":
        """Accepts a LabeledGraph or anything with ``vertices`` and ``labeled_edges()``."""
        if isinstance(patch, cls):
            return patch
        return cls(tuple(patch.vertices), tuple(patch.labeled_edges()))

    @classmethod
    def grid(cls, width: int, height: int, hlabel="h", vlabel="v") -> "LabeledGraph":
        """Rows bottom to top; ``(x, y) -> (x+1, y)`` edges get ``hlabel``, upward ones ``vlabel``."""
        names = [(x, y) for y in range(height) for x in range(width)]
        idx = {p: i for i, p in enumerate(names)}
        edges = []
        for x, y in names:
            if x + 1 < width:
                edges.append((idx[(x, y)], hlabel, idx[(x + 1, y)]))
            if y + 1 < height:
                edges.append((idx[(x, y)], vlabel, idx[(x, y + 1)]))
        return cls(names, edges)

    @classmethod
    def cycle(cls, n: int, label="h") -> "LabeledGraph":
        return cls(range(n), [(i, label, (i + 1) % n) for i in range(n)])

    def to_dot(self, coloring=None) -> str:
        lines = ["digraph patch {"]
        for i, name in enumerate(self.names):
            lab = str(name) if coloring is None else str(coloring[i])
            lines.append(f'  n{i} [label="{lab}"];')
        for u, s, v in self.edges:
            lines.append(f'  n{u} -> n{v} [label="{s}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _as_list(graph: LabeledGraph, coloring) -> list:
    if isinstance(coloring, dict):
        missing = [nm for nm in graph.names if nm not in coloring]
        if missing:
            raise ValidationError(f"colouring misses vertex {missing[0]!r}")
        return [coloring[nm] for nm in graph.names]
    out = list(coloring)
    if len(out) != graph.n:
        raise ValidationError(f"colouring has {len(out)} entries for {graph.n} vertices")
    return out


def check_coloring(patch, instance: DominoInstance, coloring) -> list:
    """Edges ``(u, label, v)`` whose colour triple is not allowed."""
    graph = LabeledGraph.of(patch)
    cols = _as_list(graph, coloring)
    for c in cols:
        instance.colour_id(c)
    bad = []
    for u, s, v in graph.edges:
        instance.label_id(s)
        if (cols[u], s, cols[v]) not in instance.allowed:
            bad.append((u, s, v))
    return bad


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    nodes: int
    coloring: tuple | None = None
    budget: int | None = None

    @property
    def satisfiable(self) -> bool:
        return self.status == SATISFIABLE

    def to_dict(self) -> dict:
        out = {"status": self.status, "nodes": self.nodes}
        if self.coloring is not None:
            out["coloring"] = list(self.coloring)
        if self.budget is not None:
            out["budget"] = self.budget
        return out


def _csp_arrays(graph: LabeledGraph, instance: DominoInstance):
    n, k = graph.n, len(instance.colours)
    dom = np.ones((n, k), dtype=np.uint8)
    # arc types: label id * 2 (child side needs support forward) / +1 backward
    types = {}
    tables = []
    arcs = [[] for _ in range(n)]
    for u, s, v in graph.edges:
        mat = instance.allow_matrix(s)
        if u == v:
            dom[u] &= np.diag(mat).astype(np.uint8)
            continue
        for key, x, y, m in ((("f", s), u, v, mat), (("b", s), v, u, mat.T)):
            t = types.get(key)
            if t is None:
                t = types[key] = len(tables)
                tables.append(m)
            arcs[y].append((x, t))
    dep_ptr = np.zeros(n + 1, dtype=np.int64)
    dep_x, dep_t = [], []
    for y in range(n):
        for x, t in arcs[y]:
            dep_x.append(x)
            dep_t.append(t)
        dep_ptr[y + 1] = len(dep_x)
    sup_ptr = [0]
    sup_idx = []
    for m in tables:
        for a in range(k):
            sup_idx.extend(np.flatnonzero(m[a]).tolist())
            sup_ptr.append(len(sup_idx))
    if not tables:
        sup_ptr = [0]
    return (dom, dep_ptr, np.array(dep_x, dtype=np.int32), np.array(dep_t, dtype=np.int32),
            np.array(sup_ptr, dtype=np.int64), np.array(sup_idx, dtype=np.int32))


def solve_patch(patch, instance: DominoInstance, budget: int = 10**6, backend=None) -> SolveOutcome:
    """Arc consistency plus backtracking over vertices in patch order, colours in declared order.

    ``nodes`` counts value assignments tried during branching; it is exact and
    reproducible for a fixed input.
    """
    if budget <= 0:
        raise ValidationError("budget must be positive")
    graph = LabeledGraph.of(patch)
    for _, s, _ in graph.edges:
        instance.label_id(s)
    solver = kernels.solve_csp if backend is None else backend.solve_csp
    status, nodes, assign = solver(*_csp_arrays(graph, instance), budget)
    if status == kernels.SAT:
        cols = tuple(instance.colours[a] for a in assign.tolist())
        return SolveOutcome(SATISFIABLE, int(nodes), cols)
    if status == kernels.UNSAT:
        return SolveOutcome(UNSATISFIABLE, int(nodes))
    return SolveOutcome(ABORTED, int(nodes), budget=budget)


def brute_force(patch, instance: DominoInstance, cap: int = BRUTE_FORCE_CAP):
    """Exhaustive enumeration: ``(number of valid colourings, least one or None)``.

    Assignments are ordered lexicographically with vertex 0 most significant.
    """
    graph = LabeledGraph.of(patch)
    n, k = graph.n, len(instance.colours)
    total = k ** n
    if total > cap:
        raise ResourceError(f"{total} colourings exceed the brute-force cap {cap}",
                            bound=cap, reached=total)
    mats = {s: instance.allow_matrix(s) for _, s, _ in graph.edges}
    count, first = 0, None
    chunk = 1 << 16
    weights = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        digits = (codes[:, None] // weights[None, :]) % k
        ok = np.ones(len(codes), dtype=bool)
        for u, s, v in graph.edges:
            ok &= mats[s][digits[:, u], digits[:, v]]
        hits = np.flatnonzero(ok)
        count += len(hits)
        if first is None and len(hits):
            first = tuple(instance.colours[a] for a in digits[hits[0]].tolist())
    return count, first


def export_cnf(patch, instance: DominoInstance) -> str:
    """DIMACS text; variable ``v*|A| + a + 1`` means vertex ``v`` has colour id ``a``.

    Clauses: per vertex one at-least-one clause and the pairwise at-most-one
    clauses, then per edge one blocking clause for each disallowed colour pair.
    """
    graph = LabeledGraph.of(patch)
    k = len(instance.colours)
    clauses = []
    for v in range(graph.n):
        base = v * k + 1
        clauses.append([base + a for a in range(k)])
        for a in range(k):
            for b in range(a + 1, k):
                clauses.append([-(base + a), -(base + b)])
    for u, s, v in graph.edges:
        mat = instance.allow_matrix(s)
        for a, b in zip(*np.nonzero(~mat)):
            lu, lv = -(u * k + int(a) + 1), -(v * k + int(b) + 1)
            clauses.append([lu] if lu == lv else [lu, lv])
    lines = [f"p cnf {graph.n * k} {len(clauses)}"]
    lines += [" ".join(map(str, c)) + " 0" for c in clauses]
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> tuple[int, list[list[int]]]:
    nvars, clauses, cur = 0, [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            nvars = int(line.split()[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(lit)
    return nvars, clauses


def decode_cnf_model(model: Iterable[int], instance: DominoInstance, n_vertices: int) -> list:
    k = len(instance.colours)
    out = [None] * n_vertices
    for lit in model:
        if lit > 0:
            v, a = divmod(lit - 1, k)
            out[v] = instance.colours[a]
    return out
