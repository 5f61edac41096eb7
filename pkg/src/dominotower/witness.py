"""Decorations of line-tower patches built from orbits, and orbits read back from decorations.

Forward direction: each level gets the floor-difference (Beatty) sequence of
its orbit point, and carries come from a matching between surplus units
("whites") and unit slots ("blacks") on neighbouring vertices.  Backward
direction: averaging the data over a Folner set and its pullbacks satisfies
an exact identity whose error term lives on the boundary.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor

from .affine import PiecewiseAffineSystem, Q, qstr
from .errors import DomainError, UnsupportedError, ValidationError
from .tileset import TilesetParams
from .towers import TowerPatch, VertexSet, pullback_folner


def beatty(xi, m: int) -> int:
    xi = Q(xi)
    return floor((m + 1) * xi) - floor(m * xi)


def beatty_sum(xi, a: int, b: int) -> int:
    """``sum(beatty(xi, m) for m in range(a, b))`` by telescoping."""
    xi = Q(xi)
    return floor(b * xi) - floor(a * xi)


@dataclass
class Decoration:
    """Instructions per level, integer data per vertex, carries per horizontal edge.

    Carries are stored once per edge as ``c(v, w)`` with ``v < w``; the
    reverse direction is the negation.  ``orbit`` (when the decoration came
    from ``decorate``) lets the matcher extend levels past the patch.
    """

    instructions: list
    data: dict
    carries: dict = field(default_factory=dict)
    orbit: list | None = None

    def carry(self, n: int, v, w):
        if (n, v, w) in self.carries:
            return self.carries[(n, v, w)]
        if (n, w, v) in self.carries:
            cx, cy = self.carries[(n, w, v)]
            return (-cx, -cy)
        return None

    def copy(self) -> "Decoration":
        return Decoration(list(self.instructions), dict(self.data), dict(self.carries),
                          None if self.orbit is None else list(self.orbit))

    def to_dict(self) -> dict:
        out = {
            "instructions": list(self.instructions),
            "data": [[n, v, d[0], d[1]] for (n, v), d in sorted(self.data.items())],
            "carries": [[n, v, w, qstr(c[0]), qstr(c[1])]
                        for (n, v, w), c in sorted(self.carries.items())],
        }
        if self.orbit is not None:
            out["orbit"] = [[qstr(u[0]), qstr(u[1]), i] for u, i in self.orbit]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Decoration":
        orbit = None
        if "orbit" in data:
            orbit = [((Q(x), Q(y)), i) for x, y, i in data["orbit"]]
        return cls(list(data["instructions"]),
                   {(n, v): (dx, dy) for n, v, dx, dy in data["data"]},
                   {(n, v, w): (Q(cx), Q(cy)) for n, v, w, cx, cy in data["carries"]},
                   orbit)

    @classmethod
    def from_json(cls, text: str) -> "Decoration":
        return cls.from_dict(json.loads(text))


def orbit_of(sys: PiecewiseAffineSystem, u0, length: int) -> list:
    """``[(u_0, i_0), (u_1, i_1), ...]`` with ``u_{n+1} = f_{i_n}(u_n)``."""
    u = (Q(u0[0]), Q(u0[1]))
    out = []
    for _ in range(length):
        i = sys.locate(u)
        if i is None:
            raise DomainError(f"orbit leaves U at {u}")
        out.append((u, i))
        u = sys.map(i)(u)
    return out


def _require_line(patch: TowerPatch):
    if not patch.spec.is_line:
        raise UnsupportedError("witness construction needs a line structure")


def decorate(orbit, patch: TowerPatch, sys: PiecewiseAffineSystem | None = None) -> Decoration:
    """Level ``n`` carries ``d(m) = (B_{u_n,x}(m), B_{u_n,y}(m))`` at position ``m``."""
    _require_line(patch)
    if len(orbit) < patch.height:
        raise ValidationError(f"orbit has {len(orbit)} points for {patch.height} levels")
    orbit = [((Q(u[0]), Q(u[1])), i) for u, i in orbit]
    if sys is not None:
        for n, (u, i) in enumerate(orbit):
            x0, y0 = sys.square(i)
            if not (x0 <= u[0] <= x0 + 1 and y0 <= u[1] <= y0 + 1):
                raise DomainError(f"orbit point {n} lies outside square {i}")
            if n + 1 < len(orbit) and sys.map(i)(u) != orbit[n + 1][0]:
                raise DomainError(f"orbit point {n + 1} is not the image of point {n}")
    data = {}
    for n, lv in enumerate(patch.levels):
        (ux, uy), _ = orbit[n]
        for m in lv:
            data[(n, m)] = (beatty(ux, m), beatty(uy, m))
    return Decoration([orbit[n][1] for n in range(patch.height)], data, {}, orbit)


def _defect_at(sys, q, i, d, kids):
    fx, fy = sys.map(i)((Fraction(d[0]), Fraction(d[1])))
    return (fx - Fraction(sum(k[0] for k in kids), q), fy - Fraction(sum(k[1] for k in kids), q))


def defect(dec: Decoration, patch: TowerPatch, v, sys: PiecewiseAffineSystem):
    """``f_{i(v)}(d(v)) - mean of the children's data`` for ``v = (level, id)``."""
    n, m = v
    kids = patch.spec.children(n, m)
    if n + 1 >= patch.height or any((n + 1, c) not in dec.data for c in kids):
        raise DomainError(f"vertex {v} lacks children in the patch")
    return _defect_at(sys, patch.q, dec.instructions[n], dec.data[v],
                      [dec.data[(n + 1, c)] for c in kids])


@dataclass(frozen=True)
class HallFailure:
    """Vertices ``vertices`` whose ``kind`` units exceed what their neighbourhood offers."""

    level: int
    coordinate: int
    kind: str
    vertices: tuple
    demand: int
    supply: int


class _Flow:
    def __init__(self, n):
        self.adj = [[] for _ in range(n)]
        self.to, self.cap = [], []

    def arc(self, a, b, c):
        self.adj[a].append(len(self.to))
        self.to.append(b)
        self.cap.append(c)
        self.adj[b].append(len(self.to))
        self.to.append(a)
        self.cap.append(0)
        return len(self.to) - 2

    def augment(self, s, t, need, hop_limit=None):
        total = 0
        while total < need:
            prev = {s: None}
            dist = {s: 0}
            dq = deque([s])
            while dq and t not in prev:
                x = dq.popleft()
                if hop_limit is not None and dist[x] >= hop_limit:
                    continue
                for e in self.adj[x]:
                    y = self.to[e]
                    if self.cap[e] > 0 and y not in prev:
                        prev[y] = e
                        dist[y] = dist[x] + 1
                        dq.append(y)
            if t not in prev:
                break
            path, y = [], t
            while prev[y] is not None:
                path.append(prev[y])
                y = self.to[prev[y] ^ 1]
            push = min(min(self.cap[e] for e in path), need - total)
            for e in path:
                self.cap[e] -= push
                self.cap[e ^ 1] += push
            total += push
        return total


def _level_window(dec, patch, n, sys, margin):
    lv = patch.levels[n]
    lo, hi = lv[0], lv[-1] + 1
    q = patch.q
    pos = list(range(lo - margin, hi + margin)) if dec.orbit is not None else list(lv)
    D = {}
    for m in pos:
        if lo <= m < hi:
            D[m] = defect(dec, patch, (n, m), sys)
        else:
            (ux, uy), i = dec.orbit[n]
            (vx, vy), _ = dec.orbit[n + 1]
            d = (beatty(ux, m), beatty(uy, m))
            kids = [(beatty(vx, q * m + j), beatty(vy, q * m + j)) for j in range(q)]
            D[m] = _defect_at(sys, q, i, d, kids)
    return pos, D


def match_carries(dec: Decoration, patch: TowerPatch, n: int, params: TilesetParams,
                  sys: PiecewiseAffineSystem, margin: int | None = None):
    """Carries on the level-``n`` edges of the patch, or a HallFailure.

    Vertex ``v`` holds ``M*D(v) + L`` whites and ``L`` blacks; whites may
    match blacks at ``v`` and its two neighbours.  Interior vertices must be
    fully matched on both sides; vertices past the patch (taken from the
    orbit, ``margin`` per side) only absorb slack.  Each coordinate is
    matched on its own.
    """
    _require_line(patch)
    if params.L < params.M * params.Dmax:
        raise ValidationError(f"L = {params.L} is below M*Dmax = {params.M * params.Dmax}")
    if not 0 <= n < patch.height - 1:
        raise DomainError(f"level {n} has no children in the patch")
    L, M = params.L, params.M
    margin = 4 * L if margin is None else margin
    if margin < 1:
        raise ValidationError("margin must be >= 1")
    pos, D = _level_window(dec, patch, n, sys, margin)
    interior = {m for (lvl, m) in patch.interior if lvl == n}
    index = {m: k for k, m in enumerate(pos)}
    out = {}
    per_coord = []
    for c in range(2):
        units = {m: int(D[m][c] * M) + L for m in pos}
        res = _match_one(pos, index, units, interior, L, n, c, margin)
        if isinstance(res, HallFailure):
            return res
        per_coord.append(res)
    lv = patch.levels[n]
    for v in lv[:-1]:
        w = v + 1
        cx = Fraction(per_coord[0][(v, w)] - per_coord[0][(w, v)], M)
        cy = Fraction(per_coord[1][(v, w)] - per_coord[1][(w, v)], M)
        out[(n, v, w)] = (cx, cy)
    return out


def _match_one(pos, index, units, interior, L, n, coord, margin):
    nv = len(pos)
    # nodes: s, t, S*, T*, whites, blacks
    s, t, S, T = 0, 1, 2, 3
    W = lambda k: 4 + k
    B = lambda k: 4 + nv + k
    g = _Flow(4 + 2 * nv)
    big = L * nv * 4 + 1
    need = 0
    arcs = {}
    for k, m in enumerate(pos):
        w = units[m]
        if w < 0 or w > 2 * L:
            raise ValidationError(f"vertex {m} has {w} whites; L is too small for its defect")
        if m in interior:
            g.arc(S, W(k), w)
            g.arc(s, T, w)
            g.arc(S, t, L)
            g.arc(B(k), T, L)
            need += w + L
        else:
            g.arc(s, W(k), w)
            g.arc(B(k), t, L)
        for dm in (-1, 0, 1):
            k2 = index.get(m + dm)
            if k2 is not None:
                arcs[(m, m + dm)] = g.arc(W(k), B(k2), L)
    g.arc(t, s, big)
    got = g.augment(S, T, need, hop_limit=2 * margin + 8)
    if got < need:
        got += g.augment(S, T, need - got)
    if got < need:
        return _hall_witness(pos, units, interior, L, n, coord)
    flows = {}
    for (a, b), e in arcs.items():
        flows[(a, b)] = g.cap[e ^ 1]
    return _Defaulting(flows)


class _Defaulting(dict):
    def __missing__(self, key):
        return 0


def _hall_witness(pos, units, interior, L, n, coord):
    inner = sorted(interior)
    best = None
    for a_i in range(len(inner)):
        wsum = 0
        for b_i in range(a_i, len(inner)):
            if b_i > a_i and inner[b_i] != inner[b_i - 1] + 1:
                break
            a, b = inner[a_i], inner[b_i]
            wsum += units[b]
            nb = [m for m in range(a - 1, b + 2) if m in units]
            blacks = L * len(nb)
            whites_nb = sum(units[m] for m in nb)
            blacks_in = L * (b - a + 1)
            if wsum > blacks:
                cand = HallFailure(n, coord, "white", tuple(range(a, b + 1)), wsum, blacks)
            elif blacks_in > whites_nb:
                cand = HallFailure(n, coord, "black", tuple(range(a, b + 1)), blacks_in, whites_nb)
            else:
                continue
            if best is None or len(cand.vertices) < len(best.vertices):
                best = cand
    if best is None:
        best = HallFailure(n, coord, "cut", tuple(inner), -1, -1)
    return best


def attach_carries(dec: Decoration, patch: TowerPatch, params: TilesetParams,
                   sys: PiecewiseAffineSystem, margin: int | None = None):
    """Match every level with children; top-level edges get zero carries."""
    out = dec.copy()
    out.carries = {}
    for n in range(patch.height - 1):
        res = match_carries(dec, patch, n, params, sys, margin)
        if isinstance(res, HallFailure):
            return res
        out.carries.update(res)
    top = patch.height - 1
    zero = (Fraction(0), Fraction(0))
    for v in patch.levels[top][:-1]:
        out.carries[(top, v, v + 1)] = zero
    return out


def build_witness(sys, orbit, patch, params, margin=None):
    return attach_carries(decorate(orbit, patch, sys), patch, params, sys, margin)


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    violations: tuple
    checked_vertices: int
    checked_edges: int

    @property
    def ok(self) -> bool:
        return not self.violations

    def interior_violations(self) -> list:
        return [v for v in self.violations if v.kind == "equation"]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checked_vertices": self.checked_vertices,
                "checked_edges": self.checked_edges,
                "violations": [{"kind": v.kind, "where": list(v.where), "detail": v.detail}
                               for v in self.violations]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def verify_decoration(patch: TowerPatch, dec: Decoration, params: TilesetParams,
                      sys: PiecewiseAffineSystem) -> VerificationReport:
    """Recheck corners, carries and the affine equation in scaled integer arithmetic."""
    bad = []
    M, L, q = params.M, params.L, patch.q
    if len(dec.instructions) < patch.height:
        bad.append(Violation("instruction", (), "fewer instructions than levels"))
        return VerificationReport(tuple(bad), 0, 0)
    for n, lv in enumerate(patch.levels):
        i = dec.instructions[n]
        if not 1 <= i <= sys.size:
            bad.append(Violation("instruction", (n,), f"instruction {i} does not exist"))
            continue
        x0, y0 = sys.square(i)
        for v in lv:
            d = dec.data.get((n, v))
            if d is None:
                bad.append(Violation("data", (n, v), "missing"))
            elif d[0] not in (x0, x0 + 1) or d[1] not in (y0, y0 + 1):
                bad.append(Violation("corner", (n, v), f"{d} is not a corner of square {i}"))
    n_edges = 0
    for a, b in patch.horizontal:
        (n, v), (_, w) = patch.vertices[a], patch.vertices[b]
        n_edges += 1
        fw, bw = (n, v, w) in dec.carries, (n, w, v) in dec.carries
        if not fw and not bw:
            bad.append(Violation("carry", (n, v, w), "missing"))
            continue
        if fw and bw:
            c1, c2 = dec.carries[(n, v, w)], dec.carries[(n, w, v)]
            if c1[0] != -c2[0] or c1[1] != -c2[1]:
                bad.append(Violation("antisymmetry", (n, v, w), ""))
        c = dec.carry(n, v, w)
        for x in c:
            s = x * M
            if s.denominator != 1 or not -L * M <= s <= L * M:
                bad.append(Violation("carry", (n, v, w), f"{qstr(x)} is outside C"))
                break
    checked = 0
    for n, v in sorted(patch.interior):
        if bad and any(b.kind in ("data", "instruction") and b.where[:1] in ((n,), (n + 1,))
                       for b in bad):
            continue
        checked += 1
        i = dec.instructions[n]
        a, b_, c_, d_, e, f = sys.map(i).coefficients
        den = M * q
        dx, dy = dec.data[(n, v)]
        # everything scaled by M*q is an integer
        lhs_x = (a * dx + b_ * dy + e) * den
        lhs_y = (c_ * dx + d_ * dy + f) * den
        kids = patch.spec.children(n, v)
        sx = sum(dec.data[(n + 1, k)][0] for k in kids) * M
        sy = sum(dec.data[(n + 1, k)][1] for k in kids) * M
        cx = cy = Fraction(0)
        for w in patch.spec.neighbors(n, v):
            cw = dec.carry(n, v, w)
            if cw is None:
                cx = None
                break
            cx += cw[0]
            cy += cw[1]
        if cx is None:
            bad.append(Violation("equation", (n, v), "incident carry missing"))
            continue
        rx = lhs_x - sx - cx * den
        ry = lhs_y - sy - cy * den
        if rx != 0 or ry != 0:
            bad.append(Violation("equation", (n, v),
                                 f"residual ({qstr(rx / den)}, {qstr(ry / den)})"))
    return VerificationReport(tuple(bad), checked, n_edges)


@dataclass(frozen=True)
class ExtractStep:
    level: int
    size: int
    boundary: int
    average: tuple
    image: tuple
    next_average: tuple
    boundary_term: tuple
    identity_holds: bool
    residual: Fraction
    bound: Fraction

    def to_dict(self) -> dict:
        pair = lambda p: [qstr(p[0]), qstr(p[1])]
        return {"level": self.level, "size": self.size, "boundary": self.boundary,
                "average": pair(self.average), "image": pair(self.image),
                "next_average": pair(self.next_average),
                "boundary_term": pair(self.boundary_term),
                "identity_holds": self.identity_holds,
                "residual": qstr(self.residual), "bound": qstr(self.bound),
                "within_bound": self.residual <= self.bound}


def folner_chain(patch: TowerPatch, F0: VertexSet, top: int | None = None) -> list[VertexSet]:
    top = patch.height - 1 if top is None else top
    chain = [F0]
    for n in range(F0.level + 1, top + 1):
        chain.append(pullback_folner(patch, n, chain[-1]))
    return chain


def extract_orbit(patch: TowerPatch, dec: Decoration, params: TilesetParams,
                  sys: PiecewiseAffineSystem, F0: VertexSet) -> list[ExtractStep]:
    """Averages over ``F0`` and its pullbacks, with the exact boundary identity per level."""
    chain = folner_chain(patch, F0)
    steps = []
    for k in range(len(chain) - 1):
        F, G = chain[k], chain[k + 1]
        n = F.level
        outside = [v for v in F.members if (n, v) not in patch.interior]
        if outside:
            raise DomainError(f"Folner set at level {n} leaves the interior at {outside[0]}")
        size = len(F)
        avg = (Fraction(sum(dec.data[(n, v)][0] for v in F.members), size),
               Fraction(sum(dec.data[(n, v)][1] for v in F.members), size))
        nxt = (Fraction(sum(dec.data[(n + 1, v)][0] for v in G.members), len(G)),
               Fraction(sum(dec.data[(n + 1, v)][1] for v in G.members), len(G)))
        bx = by = Fraction(0)
        for v, w in F.boundary:
            c = dec.carry(n, v, w)
            if c is None:
                raise DomainError(f"boundary edge {(v, w)} at level {n} has no carry")
            bx += c[0]
            by += c[1]
        term = (bx / size, by / size)
        img = sys.map(dec.instructions[n])(avg)
        holds = img[0] == nxt[0] + term[0] and img[1] == nxt[1] + term[1]
        resid = max(abs(img[0] - nxt[0]), abs(img[1] - nxt[1]))
        bound = Fraction(params.L * F.boundary_size, size)
        steps.append(ExtractStep(n, size, F.boundary_size, avg, img, nxt, term, holds, resid, bound))
    return steps
