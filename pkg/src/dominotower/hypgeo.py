"""Geometry of small-cancellation groups: word problem, Cayley balls, cone types, horospheres.

Letters are indexed ``a, A, b, B, ...``: generator ``k`` is letter ``2k``
and its inverse is ``2k + 1``, so ``s ^ 1`` inverts a letter.  Elements of
a computed ball are integer indices; index 0 is the identity.
"""

from __future__ import annotations

import json
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
import math
from math import ceil

import numpy as np

from . import kernels
from .errors import (DeterminismError, DomainError, ResourceError, UnsupportedError,
                     ValidationError)

DEFAULT_ELEMENT_CAP = 12_000_000
DEFAULT_PAIR_CAP = 5_000_000


def _inv(w):
    return tuple(x ^ 1 for x in reversed(w))


def _free_reduce(w):
    out = []
    for x in w:
        if out and out[-1] == x ^ 1:
            out.pop()
        else:
            out.append(x)
    return out


@dataclass(frozen=True)
class Presentation:
    generators: tuple
    relators: tuple
    verified: bool = False
    max_piece: int = 0

    def __post_init__(self):
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        for g in gens:
            if len(g) != 1 or not g.islower():
                raise ValidationError(f"generator {g!r} must be a single lower-case letter")
        if len(set(gens)) != len(gens):
            raise ValidationError("duplicate generators")
        rels = tuple(tuple(r) for r in self.relators)
        S = 2 * len(gens)
        for r in rels:
            if not r:
                raise ValidationError("empty relator")
            if any(not 0 <= x < S for x in r):
                raise ValidationError("relator uses an undeclared letter")
            if any(r[k] == r[(k + 1) % len(r)] ^ 1 for k in range(len(r))):
                raise ValidationError(f"relator {self.format(r)} is not cyclically reduced")
        object.__setattr__(self, "relators", rels)

    @property
    def n_letters(self) -> int:
        return 2 * len(self.generators)

    @property
    def letters(self) -> list[str]:
        return [c for g in self.generators for c in (g, g.upper())]

    def parse_word(self, text: str) -> tuple:
        idx = {c: i for i, c in enumerate(self.letters)}
        try:
            return tuple(idx[c] for c in text if not c.isspace())
        except KeyError as exc:
            raise ValidationError(f"undeclared letter {exc.args[0]!r}") from None

    def format(self, word) -> str:
        letters = self.letters
        return "".join(letters[x] for x in word)

    @classmethod
    def parse(cls, text: str, verify: bool = True) -> "Presentation":
        """First non-comment line lists generators; each further line is a relator."""
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise ValidationError("empty presentation")
        head = lines[0]
        if ":" in head:
            head = head.split(":", 1)[1]
        gens = head.replace(",", " ").split()
        shell = cls(gens, ())
        rels = [shell.parse_word(ln) for ln in lines[1:]]
        pres = cls(gens, rels)
        return pres.with_verification() if verify else pres

    @classmethod
    def from_strings(cls, gens, relators, verify: bool = True) -> "Presentation":
        shell = cls(tuple(gens), ())
        pres = cls(tuple(gens), tuple(shell.parse_word(r) for r in relators))
        return pres.with_verification() if verify else pres

    def with_verification(self) -> "Presentation":
        piece, ok = verify_small_cancellation(self)
        return Presentation(self.generators, self.relators, ok, piece)

    def to_text(self) -> str:
        lines = ["generators: " + " ".join(self.generators)]
        lines += [self.format(r) for r in self.relators]
        return "\n".join(lines) + "\n"

    @property
    def all_even(self) -> bool:
        return all(len(r) % 2 == 0 for r in self.relators)


def free_group(rank: int) -> Presentation:
    return Presentation.from_strings("abcdefghijklmnopqrstuvwxyz"[:rank], [])


def surface_group(genus: int = 2) -> Presentation:
    gens = "abcdefghijklmnopqrstuvwxyz"[:2 * genus]
    rel = "".join(x + y + x.upper() + y.upper() for x, y in zip(gens[::2], gens[1::2]))
    return Presentation.from_strings(gens, [rel])


def symmetrized(pres: Presentation) -> list[tuple]:
    out = set()
    for r in pres.relators:
        for w in (r, _inv(r)):
            for k in range(len(w)):
                out.add(w[k:] + w[:k])
    return sorted(out)


def verify_small_cancellation(pres: Presentation):
    """``(max piece length, ok)``; ok iff every piece is shorter than ``min |r| / 6``."""
    rs = symmetrized(pres)
    if not rs:
        return 0, True
    best = 0
    for i in range(len(rs)):
        for j in range(i + 1, len(rs)):
            a, b = rs[i], rs[j]
            k = 0
            while k < min(len(a), len(b)) and a[k] == b[k]:
                k += 1
            best = max(best, k)
    shortest = min(map(len, pres.relators))
    return best, 6 * best < shortest


class Dehn:
    """Dehn's algorithm: replace more than half of a relator by the shorter rest."""

    def __init__(self, pres: Presentation, allow_unverified: bool = False):
        if pres.relators and not pres.verified and not allow_unverified:
            raise ValidationError("presentation is not verified C'(1/6)")
        self.pres = pres
        table = {}
        for r in symmetrized(pres):
            n = len(r)
            for k in range(n // 2 + 1, n + 1):
                u = r[:k]
                rep = _inv(r[k:])
                if u not in table or len(rep) < len(table[u]):
                    table[u] = rep
        self.table = table
        self.lengths = sorted({len(u) for u in table}, reverse=True)

    def reduce(self, word) -> tuple:
        w = _free_reduce(word)
        changed = True
        while changed:
            changed = False
            for start in range(len(w)):
                for k in self.lengths:
                    u = tuple(w[start:start + k])
                    if len(u) == k and u in self.table:
                        w = _free_reduce(w[:start] + list(self.table[u]) + w[start + k:])
                        changed = True
                        break
                if changed:
                    break
        return tuple(w)

    def is_trivial(self, word) -> bool:
        return not self.reduce(word)


def dehn_reduce(pres: Presentation, word):
    """Dehn fixpoint; a string input gives a string back."""
    if isinstance(word, str):
        return pres.format(Dehn(pres).reduce(pres.parse_word(word)))
    return Dehn(pres).reduce(word)


def is_trivial(pres: Presentation, word) -> bool:
    if isinstance(word, str):
        word = pres.parse_word(word)
    return Dehn(pres).is_trivial(word)


class CayleyBall:
    """Elements of norm at most ``radius`` with the generator adjacency between them.

    ``adj[g, s]`` is the index of ``g s`` or -1 if it lies outside the ball.
    Canonical words are the shortlex-least geodesics in letter order.
    """

    def __init__(self, pres, n_letters, radius, adj, norm, parent, last, spheres,
                 cover=False):
        self.pres = pres
        self.n_letters = n_letters
        self.radius = radius
        self.adj = adj
        self.norm = norm
        self.parent = parent
        self.last = last
        self.spheres = list(spheres)
        self.cover = cover
        self.delta = None
        self.rho = None
        self._layer_start = np.concatenate([[0], np.cumsum(self.spheres)]).astype(np.int64)

    @property
    def size(self) -> int:
        return int(self.adj.shape[0])

    def layer(self, n: int) -> range:
        return range(int(self._layer_start[n]), int(self._layer_start[n + 1]))

    def ball_upto(self, n: int) -> range:
        return range(0, int(self._layer_start[min(n, self.radius) + 1]))

    def word(self, g: int) -> tuple:
        out = []
        while g > 0:
            out.append(int(self.last[g]))
            g = int(self.parent[g])
        return tuple(reversed(out))

    def word_str(self, g: int) -> str:
        return self.pres.format(self.word(g)) if self.pres is not None else str(self.word(g))

    def walk(self, g: int, word) -> int:
        for t in word:
            g = int(self.adj[g, t])
            if g < 0:
                return -1
        return g

    def element(self, word) -> int:
        if isinstance(word, str):
            word = self.pres.parse_word(word)
        return self.walk(0, word)

    def mult(self, g: int, h: int) -> int:
        return self.walk(g, self.word(h))

    def inverse(self, g: int) -> int:
        return self.walk(0, _inv(self.word(g)))

    def to_dict(self) -> dict:
        out = {"radius": self.radius, "size": self.size, "spheres": self.spheres,
               "double_cover": self.cover}
        if self.pres is not None:
            out["presentation"] = self.pres.to_text()
        if self.delta is not None:
            out["delta"] = self.delta
        if self.rho is not None:
            out["rho"] = self.rho
        return out


def ball(pres: Presentation, R: int, cap: int = DEFAULT_ELEMENT_CAP,
         allow_unverified: bool = False, backend=None) -> CayleyBall:
    """Breadth-first ball; ``g s`` is identified with an existing element whenever
    a relator ``s y^-1`` closes up along already known edges."""
    if R < 0:
        raise ValidationError("radius must be >= 0")
    if pres.relators and not pres.verified and not allow_unverified:
        raise ValidationError("presentation is not verified C'(1/6); pass allow_unverified")
    S = pres.n_letters
    walks = [[] for _ in range(S)]
    for r in symmetrized(pres):
        walks[r[0]].append(_inv(r[1:]))
    bfs = kernels.cayley_bfs if backend is None else backend.cayley_bfs
    adj, norm, parent, last, spheres = bfs(S, walks, R, cap)
    return CayleyBall(pres, S, R, adj, norm, parent, last, spheres)


def descend(b: CayleyBall, g: int, pick=min) -> list[int]:
    """Chain from ``g`` down to the identity, stepping along ``pick`` of the decreasing letters."""
    chain = [g]
    while g:
        n = b.norm[g]
        down = [s for s in range(b.n_letters) if b.adj[g, s] >= 0 and b.norm[b.adj[g, s]] == n - 1]
        g = int(b.adj[g, pick(down)])
        chain.append(g)
    return chain


def successor(b: CayleyBall, g: int) -> int:
    """Neighbour one step closer to the identity along the least decreasing letter."""
    if g == 0:
        raise DomainError("the identity has no successor")
    n = b.norm[g]
    for s in range(b.n_letters):
        h = b.adj[g, s]
        if h >= 0 and b.norm[h] == n - 1:
            return int(h)
    raise DomainError(f"element {g} has no norm-decreasing neighbour")


def successor_array(b: CayleyBall) -> np.ndarray:
    adj, norm = b.adj, b.norm
    out = np.full(b.size, -1, dtype=np.int64)
    todo = np.ones(b.size, dtype=bool)
    todo[0] = False
    for s in range(b.n_letters):
        nb = adj[:, s]
        ok = todo & (nb >= 0)
        ok[ok] = norm[nb[ok]] == norm[ok] - 1
        out[ok] = nb[ok]
        todo &= ~ok
    return out


def _geodesic_points(b, start, chain_up):
    pts = [start]
    g = start
    for t in chain_up:
        g = int(b.adj[g, t])
        if g < 0:
            return None
        pts.append(g)
    return pts


def _letters_up(b, u, pick):
    chain = descend(b, u, pick)[::-1]
    out = []
    for x, y in zip(chain, chain[1:]):
        out.append(next(s for s in range(b.n_letters) if b.adj[x, s] == y))
    return out


def estimate_delta(b: CayleyBall, samples: int = 3000, seed: int = 0) -> int:
    """Largest thinness seen on geodesic triangles ``(e, y, z)`` inside the ball.

    One corner sits at the identity (thinness is left invariant).  Sides are
    taken along two tie-breaks, least and greatest decreasing letter.  A
    triangle point is skipped whenever a side or a distance it needs cannot
    be evaluated inside the ball, so the result is a lower bound for any
    hyperbolicity constant.
    """
    if b.radius < 3:
        raise ValidationError("estimate_delta needs radius >= 3")
    rng = random.Random(seed)
    corner = list(range(b.size))
    total = len(corner) ** 2
    if total <= samples:
        pairs = [(y, z) for y in corner for z in corner if y <= z]
    else:
        # bias towards the outer layers where identifications live
        outer = list(b.layer(b.radius)) + list(b.layer(b.radius - 1))
        pairs = [(rng.choice(outer), rng.choice(corner)) for _ in range(samples)]
        pairs += [(rng.choice(outer), 0) for _ in range(samples // 4)]
    inv_cache = {}

    def inv(g):
        if g not in inv_cache:
            inv_cache[g] = b.inverse(g)
        return inv_cache[g]

    def dist(p, q):
        r = b.walk(inv(p), b.word(q))
        if r < 0:
            r = b.walk(inv(q), b.word(p))
        return None if r < 0 else int(b.norm[r])

    def sides(p, q):
        u = b.walk(inv(p), b.word(q))
        if u < 0:
            return None
        out = []
        for pick in (min, max):
            pts = _geodesic_points(b, p, _letters_up(b, u, pick))
            if pts is not None:
                out.append(pts)
        return out

    best = 0
    for y, z in pairs:
        tri = (sides(0, y), sides(y, z), sides(z, 0))
        if any(not t for t in tri):
            continue
        A, B, C = tri
        for s1s, o1s, o2s in ((A, B, C), (B, C, A), (C, A, B)):
            for s1 in s1s:
                for o1 in o1s:
                    for o2 in o2s:
                        pool = set(o1) | set(o2)
                        for p in s1:
                            if p in pool:
                                continue
                            ds = [dist(p, q) for q in pool]
                            if None in ds:
                                continue
                            best = max(best, min(ds))
    return best


@dataclass
class ConeAtlas:
    """Cone-type data on the inner ball.

    The type of ``g`` is its cone truncated at radius ``rho``:
    ``{h : |h| <= rho, |g h| = |g| + |h|}``, read off the profile
    ``N_g(h) = |g h| - |g|``.
    """

    rho: int
    typed_upto: int
    type_of: np.ndarray
    representatives: list
    transitions: dict
    infinite: list
    first_norm: list
    profile_words: list
    unresolved: list = field(default_factory=list)

    @property
    def n_types(self) -> int:
        return len(self.representatives)

    def out_letters(self, t: int) -> list:
        return sorted(s for (u, s) in self.transitions if u == t)

    def to_dict(self) -> dict:
        return {"rho": self.rho, "typed_upto": self.typed_upto, "types": self.n_types,
                "transitions": [[u, s, v] for (u, s), v in sorted(self.transitions.items())],
                "infinite": [bool(x) for x in self.infinite],
                "first_norm": self.first_norm, "unresolved": self.unresolved}

    def to_dot(self, pres: Presentation | None = None) -> str:
        letters = pres.letters if pres is not None else None
        lines = ["digraph cones {"]
        for t in range(self.n_types):
            shape = "doublecircle" if self.infinite[t] else "circle"
            lines.append(f'  t{t} [shape={shape}];')
        for (u, s), v in sorted(self.transitions.items()):
            lab = letters[s] if letters else str(s)
            lines.append(f'  t{u} -> t{v} [label="{lab}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def cone_types(b: CayleyBall, rho: int | None = None, check: bool = True) -> ConeAtlas:
    if rho is None:
        if b.delta is None:
            b.delta = estimate_delta(b) + 1
        rho = max(2 * b.delta, 2)
    if rho < 1:
        raise ValidationError("rho must be >= 1")
    top = b.radius - rho
    if top < 1:
        raise ValidationError(f"ball radius {b.radius} leaves no typed elements at rho={rho}")
    hs = list(b.ball_upto(rho))
    words = [b.word(h) for h in hs]
    hnorm = b.norm[hs].astype(np.int16)
    typed = np.arange(int(b._layer_start[top + 1]))
    prof = kernels.norm_profile(b.adj, b.norm, typed, words)
    mask = prof == hnorm[None, :]
    packed = np.packbits(mask, axis=1)
    type_of = np.full(b.size, -1, dtype=np.int32)
    ids, reps, first = {}, [], []
    for g in typed.tolist():
        key = packed[g].tobytes()
        t = ids.get(key)
        if t is None:
            t = ids[key] = len(reps)
            reps.append(g)
            first.append(int(b.norm[g]))
        type_of[g] = t
    trans = {}
    clash = []
    inner = int(b._layer_start[top])
    for g in range(inner):
        tg = int(type_of[g])
        for s in range(b.n_letters):
            c = int(b.adj[g, s])
            if c >= 0 and b.norm[c] == b.norm[g] + 1:
                key = (tg, s)
                tc = int(type_of[c])
                if key in trans and trans[key] != tc:
                    clash.append((g, s))
                else:
                    trans[key] = tc
    if clash and check:
        g, s = clash[0]
        raise DeterminismError(
            f"cone types at rho={rho} are not deterministic ({len(clash)} clashes, first at "
            f"{b.word_str(g)}*{b.pres.letters[s] if b.pres else s}); increase rho and the radius")
    n = len(reps)
    succ = defaultdict(set)
    for (u, _), v in trans.items():
        succ[u].add(v)
    unresolved = [t for t in range(n) if t not in succ]
    infinite = _reaches_cycle(n, succ)
    b.rho = rho
    return ConeAtlas(rho, top, type_of, reps, trans, infinite, first, words, unresolved)


def _reaches_cycle(n, succ) -> list[bool]:
    """States from which an infinite path exists (greatest fixed point)."""
    alive = set(range(n))
    indeg_out = {u: set(vs) for u, vs in succ.items()}
    changed = True
    while changed:
        changed = False
        for u in list(alive):
            if not any(v in alive for v in indeg_out.get(u, ())):
                alive.discard(u)
                changed = True
    return [u in alive for u in range(n)]


@dataclass
class HorosphereGraph:
    level: int
    vertices: list
    edges: list
    successor: dict
    radius: int

    def neighbors(self) -> dict:
        nb = defaultdict(set)
        for a, c in self.edges:
            nb[a].add(c)
            nb[c].add(a)
        return nb

    def components(self) -> list[list]:
        nb = self.neighbors()
        seen, comps = set(), []
        for v in self.vertices:
            if v in seen:
                continue
            comp, dq = [], deque([v])
            seen.add(v)
            while dq:
                x = dq.popleft()
                comp.append(x)
                for y in nb.get(x, ()):
                    if y not in seen:
                        seen.add(y)
                        dq.append(y)
            comps.append(sorted(comp))
        return comps

    @property
    def connected(self) -> bool:
        return len(self.components()) <= 1

    def distances_from(self, v) -> dict:
        nb = self.neighbors()
        dist = {v: 0}
        dq = deque([v])
        while dq:
            x = dq.popleft()
            for y in nb.get(x, ()):
                if y not in dist:
                    dist[y] = dist[x] + 1
                    dq.append(y)
        return dist

    def to_dict(self, b: CayleyBall | None = None) -> dict:
        name = (lambda g: b.word_str(g)) if b is not None else (lambda g: g)
        return {"level": self.level, "fellow_travel_radius": self.radius,
                "vertices": [name(v) for v in self.vertices],
                "edges": [[name(x), name(y)] for x, y in self.edges],
                "successor": {str(name(k)): name(v) for k, v in sorted(self.successor.items())}}

    def to_dot(self, b: CayleyBall | None = None) -> str:
        name = (lambda g: b.word_str(g) or "1") if b is not None else str
        lines = [f"graph horosphere_{self.level} {{"]
        for v in self.vertices:
            lines.append(f'  g{v} [label="{name(v)}"];')
        for x, y in self.edges:
            lines.append(f"  g{x} -- g{y};")
        lines.append("}")
        return "\n".join(lines) + "\n"


class PairAutomaton:
    """States ``(type g', type h', g'^-1 h')`` with the quotient of norm at most ``radius``.

    A transition extends both rays by one geodesic letter each.  A pair of
    elements spans a horosphere edge iff its state has an infinite run.
    """

    def __init__(self, b: CayleyBall, atlas: ConeAtlas, radius: int, cap: int = DEFAULT_PAIR_CAP):
        if radius + 2 > b.radius:
            raise ValidationError("ball too small for the fellow-travel radius")
        self.b, self.atlas, self.radius, self.cap = b, atlas, radius, cap
        self.outs = [atlas.out_letters(t) for t in range(atlas.n_types)]
        self.alive = {}
        # left[s][r] = s^-1 r for r in the ball of the fellow-travel radius
        inner = list(b.ball_upto(radius))
        self.left = [{r: b.walk(b.adj[0, s ^ 1], b.word(r)) for r in inner}
                     for s in range(b.n_letters)]

    def _successors(self, state):
        tg, th, rel = state
        b, trans = self.b, self.atlas.transitions
        out = []
        for s in self.outs[tg]:
            left = self.left[s][rel]
            if left < 0:
                continue
            ns = trans[(tg, s)]
            for t in self.outs[th]:
                r2 = int(b.adj[left, t])
                if r2 > 0 and b.norm[r2] <= self.radius:
                    out.append((ns, trans[(th, t)], r2))
        return out

    def resolve(self, starts) -> dict:
        """Liveness of every state reachable from ``starts``."""
        todo = [s for s in starts if s not in self.alive]
        if not todo:
            return self.alive
        succ = {}
        stack = list(todo)
        while stack:
            st = stack.pop()
            if st in succ or st in self.alive:
                continue
            nxt = self._successors(st)
            succ[st] = nxt
            if len(succ) > self.cap:
                raise ResourceError(f"pair automaton exceeds {self.cap} states",
                                    bound=self.cap, reached=len(succ))
            for y in nxt:
                if y not in succ and y not in self.alive:
                    stack.append(y)
        # prune dead states backwards
        live_count = {}
        preds = defaultdict(list)
        for x, ys in succ.items():
            cnt = 0
            for y in ys:
                if y in self.alive:
                    cnt += 1 if self.alive[y] else 0
                else:
                    preds[y].append(x)
                    cnt += 1
            live_count[x] = cnt
        dead = deque(x for x, c in live_count.items() if c == 0)
        is_dead = set(dead)
        while dead:
            y = dead.popleft()
            for x in preds.get(y, ()):
                if x in is_dead:
                    continue
                live_count[x] -= 1
                if live_count[x] == 0:
                    is_dead.add(x)
                    dead.append(x)
        for x in succ:
            self.alive[x] = x not in is_dead
        return self.alive


def _fellow_radius(b: CayleyBall, delta) -> int:
    if delta is None:
        if b.delta is None:
            b.delta = estimate_delta(b) + 1
        delta = b.delta
    return int(ceil(2 * delta))


def horosphere_graph(b: CayleyBall, atlas: ConeAtlas, n: int, delta=None,
                     automaton: PairAutomaton | None = None,
                     cap: int = DEFAULT_PAIR_CAP) -> HorosphereGraph:
    """Level-``n`` horosphere graph for the horofunction ``|.| - n``."""
    if n < 0 or n > atlas.typed_upto:
        raise ValidationError(f"level {n} is outside the typed range 0..{atlas.typed_upto}")
    radius = automaton.radius if automaton is not None else _fellow_radius(b, delta)
    verts = [g for g in b.layer(n) if atlas.infinite[int(atlas.type_of[g])]]
    succ = {}
    if n > 0:
        sa = successor_array(b)
        succ = {g: int(sa[g]) for g in verts}
    if n == 0 or not verts:
        return HorosphereGraph(n, verts, [], succ, radius)
    auto = automaton or PairAutomaton(b, atlas, radius, cap)
    varr = np.array(verts, dtype=np.int64)
    member = np.zeros(b.size, dtype=bool)
    member[varr] = True
    # walk every vertex along every short word, sharing prefixes via the BFS tree
    reach = {0: varr}
    cands = []
    for h in list(b.ball_upto(radius))[1:]:
        if h in b._layer_start:
            lo = int(b._layer_start[int(b.norm[h]) - 1])
            reach = {k: v for k, v in reach.items() if k >= lo}
        prev = reach[int(b.parent[h])]
        ok = prev >= 0
        cur = np.full(len(varr), -1, dtype=np.int64)
        cur[ok] = b.adj[prev[ok], int(b.last[h])]
        reach[h] = cur
        hit = cur > varr
        hit[hit] = member[cur[hit]]
        for g, x in zip(varr[hit].tolist(), cur[hit].tolist()):
            cands.append((g, x, (int(atlas.type_of[g]), int(atlas.type_of[x]), h)))
    alive = auto.resolve([c[2] for c in cands])
    edges = sorted({(g, h) for g, h, st in cands if alive[st]})
    return HorosphereGraph(n, verts, edges, succ, radius)


def horosphere_tower_spec(b: CayleyBall, graphs: list[HorosphereGraph]):
    """TowerSpec whose level ``n`` is the horosphere graph ``graphs[n]`` (levels 0, 1, ...)."""
    from .towers import TowerSpec
    verts, edges, parents = [], [], []
    for n, hg in enumerate(graphs):
        if hg.level != n:
            raise ValidationError("horosphere graphs must be given for levels 0, 1, 2, ...")
        verts.append(list(hg.vertices))
        edges.append([tuple(e) for e in hg.edges])
        parents.append(dict(hg.successor))
    return TowerSpec.horosphere(verts, edges, parents)


@dataclass
class TowerReport:
    levels: list
    sizes: dict
    edge_counts: dict
    connected: dict
    contraction_ok: bool
    contraction_failures: list
    L_prime: int | None
    L_prime_bound: int
    growth_ok: bool
    growth_checks: int
    fibre_sizes: dict
    delta: float
    rho: int
    partial: bool

    def to_dict(self) -> dict:
        return {"levels": self.levels, "sizes": self.sizes, "edges": self.edge_counts,
                "connected": self.connected, "contraction_ok": self.contraction_ok,
                "contraction_failures": self.contraction_failures[:20],
                "L_prime": self.L_prime, "L_prime_bound": self.L_prime_bound,
                "growth_ok": self.growth_ok, "growth_checks": self.growth_checks,
                "fibre_sizes": self.fibre_sizes, "delta": self.delta, "rho": self.rho,
                "partial": self.partial}


def tower_report(b: CayleyBall, atlas: ConeAtlas, levels, delta=None,
                 graphs: dict | None = None, pair_samples: int = 400, seed: int = 0) -> TowerReport:
    levels = sorted(levels)
    radius = _fellow_radius(b, delta)
    dval = delta if delta is not None else b.delta
    graphs = dict(graphs or {})
    auto = None
    for n in levels:
        if n not in graphs:
            auto = auto or PairAutomaton(b, atlas, radius)
            graphs[n] = horosphere_graph(b, atlas, n, automaton=auto)
    partial = len(levels) < 2
    sizes = {n: len(graphs[n].vertices) for n in levels}
    ecount = {n: len(graphs[n].edges) for n in levels}
    conn = {n: graphs[n].connected for n in levels}
    # (a) successor sends edges to edges or points
    failures = []
    for n in levels:
        if n - 1 not in graphs or n == 0:
            continue
        below = set(map(tuple, graphs[n - 1].edges))
        for g, h in graphs[n].edges:
            sg, sh = graphs[n].successor[g], graphs[n].successor[h]
            if sg != sh and (min(sg, sh), max(sg, sh)) not in below:
                failures.append([n, g, h])
    checked_a = any(n - 1 in graphs and n > 0 for n in levels)
    # (b) least L' with the halving inequality on sampled pairs
    rng = random.Random(seed)
    bound = atlas.n_types ** 2
    Lp = None
    dists = {}
    for n in levels:
        hg = graphs[n]
        if len(hg.vertices) < 2:
            continue
        src = hg.vertices if len(hg.vertices) <= 30 else rng.sample(hg.vertices, 30)
        dists[n] = {v: hg.distances_from(v) for v in src}
    sa = successor_array(b)

    def push(g, k):
        for _ in range(k):
            g = int(sa[g])
        return g

    avail = sorted(graphs)
    for Lc in range(1, bound + 1):
        ok, tested = True, 0
        for n, table in dists.items():
            if n - Lc not in graphs:
                continue
            low = graphs[n - Lc]
            low_cache = {}
            for g, dd in table.items():
                hs = list(dd.items())
                if len(hs) > pair_samples:
                    hs = rng.sample(hs, pair_samples)
                pg = push(g, Lc)
                if pg not in low_cache:
                    low_cache[pg] = low.distances_from(pg)
                for h, d in hs:
                    if d < 1:
                        continue
                    ph = push(h, Lc)
                    dl = low_cache[pg].get(ph)
                    tested += 1
                    if dl is None or dl > -(-d // 2):
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if tested and ok:
            Lp = Lc
            break
        if not any(n - Lc in graphs for n in dists):
            break
    # (c) horosphere ball growth against C * D^k
    nS = b.n_letters
    growth_ok, checks = True, 0
    if Lp is not None and dval is not None:
        # N_k <= S^(2 delta) * (S^L')^k, compared through logarithms
        for n, table in dists.items():
            for g, dd in table.items():
                counts = defaultdict(int)
                for d in dd.values():
                    counts[d] += 1
                acc = 0
                for k in range(max(dd.values()) + 1):
                    acc += counts.get(k, 0)
                    checks += 1
                    if math.log(acc) > (2 * dval + Lp * k) * math.log(nS) + 1e-9:
                        growth_ok = False
    fibres = {}
    for n in levels:
        if n + 1 in graphs:
            cnt = defaultdict(int)
            for g in graphs[n + 1].vertices:
                cnt[graphs[n + 1].successor[g]] += 1
            hist = defaultdict(int)
            for g in graphs[n].vertices:
                hist[cnt.get(g, 0)] += 1
            fibres[n] = dict(sorted(hist.items()))
    return TowerReport(levels, sizes, ecount, conn, not failures,
                       failures, Lp, bound, growth_ok, checks, fibres,
                       dval, atlas.rho, partial or not checked_a)


def bipartite_double(b: CayleyBall) -> CayleyBall:
    """Ball in the index-2 parity cover when some relator is odd; otherwise ``b`` itself."""
    if b.pres is None or b.pres.all_even:
        return b
    S = b.n_letters
    index = {(0, 0): 0}
    order = [(0, 0)]
    norm, parent, last = [0], [-1], [-1]
    adj_rows = [[-1] * S]
    spheres = [1]
    frontier = [0]
    for n in range(b.radius):
        fresh = []
        for x in frontier:
            g, p = order[x]
            for s in range(S):
                if adj_rows[x][s] >= 0:
                    continue
                h = int(b.adj[g, s])
                if h < 0:
                    continue
                key = (h, p ^ 1)
                y = index.get(key)
                if y is None:
                    y = index[key] = len(order)
                    order.append(key)
                    norm.append(n + 1)
                    parent.append(x)
                    last.append(s)
                    adj_rows.append([-1] * S)
                    fresh.append(y)
                adj_rows[x][s] = y
                adj_rows[y][s ^ 1] = x
        # close edges among the new layer's neighbours already in the cover
        spheres.append(len(fresh))
        frontier = fresh
    cov = CayleyBall(b.pres, S, b.radius, np.array(adj_rows, dtype=np.int32),
                     np.array(norm, dtype=np.int32), np.array(parent, dtype=np.int32),
                     np.array(last, dtype=np.int16), spheres, cover=True)
    cov.base_of = np.array([g for g, _ in order], dtype=np.int64)
    return cov
