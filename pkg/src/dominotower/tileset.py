"""Tilesets enforcing the affine constraint on line towers.

A vertex record is ``(i, d, children, left, right)``: instruction, data
corner, the recorded data of its ``q`` children, and the carries on its two
horizontal half-edges.  A record is admissible when

    f_i(d) = (children[0] + ... + children[q-1]) / q + left + right

holds exactly with every carry in ``C = (1/M) Z^2 & [-L, L]^2``.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import ceil, lcm
from typing import NamedTuple

from .affine import PiecewiseAffineSystem, qstr, require_valid
from .domino import DominoInstance
from .errors import ResourceError, UnsupportedError, ValidationError

DEFAULT_COLOUR_CAP = 20_000
DEFAULT_TRIPLE_CAP = 2_000_000


@dataclass(frozen=True)
class TilesetParams:
    q: int
    M: int
    Dmax: Fraction
    K: Fraction
    L: int
    n_instructions: int

    @property
    def carry_count(self) -> int:
        return (2 * self.L * self.M + 1) ** 2

    @property
    def hall_ok(self) -> bool:
        return self.L >= self.M * self.K

    @property
    def range_ok(self) -> bool:
        return self.L >= self.M * self.Dmax

    def in_carry_set(self, c) -> bool:
        return all((x * self.M).denominator == 1 and -self.L <= x <= self.L for x in c)

    def to_dict(self) -> dict:
        return {"q": self.q, "M": self.M, "Dmax": qstr(self.Dmax), "K": qstr(self.K),
                "L": self.L, "carry_set_size": self.carry_count,
                "instructions": self.n_instructions}


def minimal_L(M: int, K: Fraction, Dmax: Fraction) -> int:
    return ceil(M * max(K, Dmax))


def compute_params(sys: PiecewiseAffineSystem, q: int, L: int | None = None) -> TilesetParams:
    """``L`` defaults to ``ceil(M * max(K, Dmax))``; an explicit value only needs to be >= 1."""
    require_valid(sys)
    if q < 1:
        raise ValidationError("q must be >= 1")
    M = q
    for m in sys.maps:
        for c in m.coefficients:
            M = lcm(M, c.denominator)
    # the sup-norm distance to an average of corners peaks at a single corner
    all_corners = [c for j in range(1, sys.size + 1) for c in sys.corners(j)]
    Dmax = Fraction(0)
    for i in range(1, sys.size + 1):
        f = sys.map(i)
        for c in sys.corners(i):
            fx, fy = f(c)
            for cx, cy in all_corners:
                Dmax = max(Dmax, abs(fx - cx), abs(fy - cy))
    K = max(m.linear_norm() for m in sys.maps) + 2
    if L is None:
        L = minimal_L(M, K, Dmax)
    elif L < 1:
        raise ValidationError("L must be a positive integer")
    return TilesetParams(q, M, Dmax, K, int(L), sys.size)


class Record(NamedTuple):
    i: int
    d: tuple
    children: tuple
    left: tuple
    right: tuple

    def name(self) -> str:
        kids = ";".join(f"{x},{y}" for x, y in self.children)
        return (f"{self.i}|{self.d[0]},{self.d[1]}|{kids}|"
                f"{qstr(self.left[0])},{qstr(self.left[1])}|{qstr(self.right[0])},{qstr(self.right[1])}")

    @classmethod
    def parse(cls, text: str) -> "Record":
        i, d, kids, left, right = text.split("|")
        pair = lambda s: tuple(Fraction(t) for t in s.split(","))
        ipair = lambda s: tuple(int(t) for t in s.split(","))
        return cls(int(i), ipair(d), tuple(ipair(k) for k in kids.split(";")), pair(left), pair(right))


class TilesetConstraints:
    """Vertex-record predicate and edge rules for a system on a q-ary line tower."""

    def __init__(self, sys: PiecewiseAffineSystem, params: TilesetParams):
        self.sys = sys
        self.params = params
        self.q = params.q
        self.corners = {i: [tuple(int(v) for v in c) for c in sys.corners(i)]
                        for i in range(1, sys.size + 1)}
        self.all_corners = sorted({c for cs in self.corners.values() for c in cs})

    def defect(self, i: int, d, children) -> tuple:
        fx, fy = self.sys.map(i)((Fraction(d[0]), Fraction(d[1])))
        q = self.q
        return (fx - Fraction(sum(c[0] for c in children), q),
                fy - Fraction(sum(c[1] for c in children), q))

    def admissible(self, r: Record) -> bool:
        if r.i not in self.corners or tuple(r.d) not in self.corners[r.i]:
            return False
        if len(r.children) != self.q or any(tuple(c) not in self.all_corners for c in r.children):
            return False
        p = self.params
        if not (p.in_carry_set(r.left) and p.in_carry_set(r.right)):
            return False
        D = self.defect(r.i, r.d, r.children)
        return D[0] == r.left[0] + r.right[0] and D[1] == r.left[1] + r.right[1]

    def horizontal_ok(self, a: Record, b: Record) -> bool:
        """``a`` sits just left of ``b``."""
        return a.i == b.i and a.right[0] == -b.left[0] and a.right[1] == -b.left[1]

    @staticmethod
    def vertical_ok(child: Record, parent: Record, j: int) -> bool:
        return tuple(parent.children[j]) == tuple(child.d)

    def _carry_range(self, D):
        """Left carries whose complement ``D - left`` is also a carry, per coordinate."""
        LM, M = self.params.L * self.params.M, self.params.M
        out = []
        for x in D:
            u = x * M
            if u.denominator != 1:
                return None
            u = int(u)
            lo, hi = max(-LM, u - LM), min(LM, u + LM)
            if lo > hi:
                return None
            out.append((lo, hi))
        return out

    def raw_record_count(self) -> int:
        """Size of the record space before the affine equation prunes it."""
        return (sum(len(c) for c in self.corners.values())
                * len(self.all_corners) ** self.q * self.params.carry_count ** 2)

    def record_count(self) -> int:
        total = 0
        for i, d, kids in self._heads():
            rng = self._carry_range(self.defect(i, d, kids))
            if rng:
                total += (rng[0][1] - rng[0][0] + 1) * (rng[1][1] - rng[1][0] + 1)
        return total

    def _heads(self):
        for i in sorted(self.corners):
            for d in self.corners[i]:
                for kids in product(self.all_corners, repeat=self.q):
                    yield i, d, kids

    def records(self):
        M = self.params.M
        for i, d, kids in self._heads():
            D = self.defect(i, d, kids)
            rng = self._carry_range(D)
            if not rng:
                continue
            for lx in range(rng[0][0], rng[0][1] + 1):
                for ly in range(rng[1][0], rng[1][1] + 1):
                    left = (Fraction(lx, M), Fraction(ly, M))
                    yield Record(i, d, kids, left, (D[0] - left[0], D[1] - left[1]))


@dataclass(frozen=True)
class SizeReport:
    params: TilesetParams
    colours: int
    triples: int
    raw_records: int

    def to_dict(self) -> dict:
        out = self.params.to_dict()
        out.update({"colours": self.colours, "triples": self.triples,
                    "raw_records": self.raw_records})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def compile_tileset(sys: PiecewiseAffineSystem, q: int, L: int | None = None) -> TilesetConstraints:
    return TilesetConstraints(sys, compute_params(sys, q, L))


def labels_for(q: int) -> list[str]:
    return ["h"] + [f"v{j}" for j in range(q)]


def explicit_dominoes(cons: TilesetConstraints, colour_cap: int = DEFAULT_COLOUR_CAP,
                      triple_cap: int = DEFAULT_TRIPLE_CAP, tower_kind: str = "line"):
    """Colours are admissible records (by name); returns ``(DominoInstance, SizeReport)``."""
    if tower_kind != "line":
        raise UnsupportedError("explicit dominoes are only built for line towers")
    count = cons.record_count()
    if count > colour_cap:
        raise ResourceError(f"{count} admissible records exceed the colour cap {colour_cap}",
                            bound=colour_cap, reached=count)
    recs = list(cons.records())
    by_left = defaultdict(list)
    by_d = defaultdict(list)
    for r in recs:
        by_left[(r.i, -r.left[0], -r.left[1])].append(r)
        by_d[tuple(r.d)].append(r)
    n_h = sum(len(by_left.get((r.i,) + tuple(r.right), ())) for r in recs)
    n_v = sum(len(by_d.get(tuple(r.children[j]), ())) for r in recs for j in range(cons.q))
    if n_h + n_v > triple_cap:
        raise ResourceError(f"{n_h + n_v} triples exceed the cap {triple_cap}",
                            bound=triple_cap, reached=n_h + n_v)
    names = {r: r.name() for r in recs}
    allowed = set()
    for a in recs:
        for b in by_left.get((a.i,) + tuple(a.right), ()):
            allowed.add((names[a], "h", names[b]))
        for j in range(cons.q):
            for child in by_d.get(tuple(a.children[j]), ()):
                allowed.add((names[child], f"v{j}", names[a]))
    inst = DominoInstance([names[r] for r in recs], labels_for(cons.q), allowed)
    report = SizeReport(cons.params, len(recs), len(allowed), cons.raw_record_count())
    return inst, report


# direct search over the constraint form ---------------------------------------

@dataclass(frozen=True)
class DirectResult:
    satisfiable: bool
    states: int
    instructions: tuple | None = None
    data: dict | None = None
    top_children: dict | None = None


def _extend(state, delta, limit):
    a, r = state
    s = a + delta
    lo = min(0, s)
    a2, r2 = s - lo, max(r, s) - lo
    return None if r2 > limit else (a2, r2)


def solve_direct(patch, cons: TilesetConstraints, state_cap: int = 5_000_000) -> DirectResult:
    """Decide a line-tower patch without materializing carries.

    Along a line the carries are forced by the defects up to one free
    offset; a choice of offset exists iff the prefix sums ``0, S_0, S_1, ...``
    of ``M * defect`` span at most ``2LM`` in each coordinate.  The search
    walks columns (a base vertex with all its descendants in the patch),
    top level first inside each column, and memoizes failed states.
    """
    if not patch.spec.is_line or patch.spec.q != cons.q:
        raise ValidationError("direct search needs a line patch with matching q")
    # fewer states: columns when the patch is wide, whole levels when it is tall
    c = max(len(v) for v in cons.corners.values())
    widths = [len(lv) for lv in patch.levels]
    by_levels = sum(c ** (a + b) for a, b in zip(widths, widths[1:])) + c ** widths[-1]
    by_columns = len(patch.levels[0]) * c ** sum(cons.q ** n for n in range(patch.height))
    if by_levels < by_columns:
        return _solve_by_levels(patch, cons, state_cap)
    return _solve_by_columns(patch, cons, state_cap)


def _line_ok(keys, limit):
    state = ((0, 0), (0, 0))
    for dx, dy in keys:
        sx = _extend(state[0], dx, limit)
        sy = sx and _extend(state[1], dy, limit)
        if sy is None:
            return False
        state = (sx, sy)
    return True


def _top_choice(opts, limit):
    """Pick one option per vertex so the prefix sums stay within ``limit``."""
    failed = set()

    def go(k, state):
        if k == len(opts):
            return []
        if (k, state) in failed:
            return None
        for (dx, dy), kids in opts[k]:
            sx = _extend(state[0], dx, limit)
            sy = sx and _extend(state[1], dy, limit)
            if sy is None:
                continue
            rest = go(k + 1, (sx, sy))
            if rest is not None:
                return [kids] + rest
        failed.add((k, state))
        return None

    return go(0, ((0, 0), (0, 0)))


def _solve_by_levels(patch, cons, state_cap):
    # level n only sees its own data and the data one level up, so a
    # top-down sweep over whole-level data vectors decides the patch
    p = cons.params
    H, q, M, limit = patch.height, cons.q, p.M, 2 * p.L * p.M
    insts = sorted(cons.corners)
    counter = 0

    def tick():
        nonlocal counter
        counter += 1
        if counter > state_cap:
            raise ResourceError(f"direct search exceeded {state_cap} states",
                                bound=state_cap, reached=counter)

    def mkey(D):
        return (int(D[0] * M), int(D[1] * M))

    top = H - 1
    w = len(patch.levels[top])
    states = {}
    for i in insts:
        opts = {}
        for d in cons.corners[i]:
            seen = {}
            for kids in product(cons.all_corners, repeat=q):
                seen.setdefault(mkey(cons.defect(i, d, kids)), kids)
            opts[d] = sorted(seen.items())
        for x in product(cons.corners[i], repeat=w):
            tick()
            if x in states:
                continue
            kids = _top_choice([opts[d] for d in x], limit)
            if kids is not None:
                states[x] = (i, kids)
    back = [None] * H
    back[top] = states
    for n in range(top - 1, -1, -1):
        w = len(patch.levels[n])
        below = back[n + 1]
        found = {}
        for i in insts:
            for x in product(cons.corners[i], repeat=w):
                if x in found:
                    continue
                for y in below:
                    tick()
                    keys = [mkey(cons.defect(i, x[v], y[q * v:q * v + q])) for v in range(w)]
                    if _line_ok(keys, limit):
                        found[x] = (i, y)
                        break
        back[n] = found
        if not found:
            return DirectResult(False, counter)
    if not back[0]:
        return DirectResult(False, counter)
    x = min(back[0])
    inst, data, top_kids = [], {}, {}
    for n in range(H):
        i, nxt = back[n][x]
        inst.append(i)
        for v, d in zip(patch.levels[n], x):
            data[(n, v)] = d
        if n == top:
            for v, kids in zip(patch.levels[n], nxt):
                top_kids[(n, v)] = kids
        else:
            x = nxt
    return DirectResult(True, counter, tuple(inst), data, top_kids)


def _solve_by_columns(patch, cons, state_cap):
    p = cons.params
    H, q, M, limit = patch.height, cons.q, p.M, 2 * p.L * p.M
    base = patch.levels[0]
    order = []
    for m in base:
        for n in range(H - 1, -1, -1):
            span = q ** n
            for v in range(m * span, (m + 1) * span):
                order.append((n, v))
    insts = sorted(cons.corners)
    # M * defect for non-top vertices, and the option sets at the top level
    top_opts = {}
    for i in insts:
        for d in cons.corners[i]:
            seen = {}
            for kids in product(cons.all_corners, repeat=q):
                D = cons.defect(i, d, kids)
                key = (int(D[0] * M), int(D[1] * M))
                seen.setdefault(key, kids)
            top_opts[(i, d)] = sorted(seen.items())
    failed = set()
    counter = [0]
    data = {}
    top_kids = {}

    def key_of(k, inst, pref):
        # later parents only read data at levels n and n+1 of the current column
        n, v = order[k]
        col = v // q ** n
        pending = []
        for lvl in (n, n + 1):
            if lvl < H:
                span = q ** lvl
                pending.extend(data.get((lvl, w)) for w in range(col * span, (col + 1) * span))
        return (k, inst, pref, tuple(pending))

    def dfs(k, inst, pref):
        counter[0] += 1
        if counter[0] > state_cap:
            raise ResourceError(f"direct search exceeded {state_cap} states",
                                bound=state_cap, reached=counter[0])
        if k == len(order):
            return True
        key = key_of(k, inst, pref)
        if key in failed:
            return False
        n, v = order[k]
        i = inst[n]
        for d in cons.corners[i]:
            if n == H - 1:
                options = top_opts[(i, d)]
            else:
                kids = tuple(data[(n + 1, q * v + j)] for j in range(q))
                D = cons.defect(i, d, kids)
                options = [((int(D[0] * M), int(D[1] * M)), None)]
            for (dx, dy), kids in options:
                sx = _extend(pref[n][0], dx, limit)
                if sx is None:
                    continue
                sy = _extend(pref[n][1], dy, limit)
                if sy is None:
                    continue
                new_pref = pref[:n] + ((sx, sy),) + pref[n + 1:]
                data[(n, v)] = d
                if kids is not None:
                    top_kids[(n, v)] = kids
                if dfs(k + 1, inst, new_pref):
                    return True
                del data[(n, v)]
                top_kids.pop((n, v), None)
        failed.add(key)
        return False

    start = tuple(((0, 0), (0, 0)) for _ in range(H))
    for inst in product(insts, repeat=H):
        if dfs(0, inst, start):
            return DirectResult(True, counter[0], inst, dict(data), dict(top_kids))
    return DirectResult(False, counter[0])


def direct_to_coloring(patch, cons: TilesetConstraints, res: DirectResult) -> list[str]:
    """Explicit colouring (record names in patch vertex order) from a direct solution."""
    p = cons.params
    M, LM, q, H = p.M, p.L * p.M, cons.q, patch.height
    rec = {}
    for n, lv in enumerate(patch.levels):
        i = res.instructions[n]
        Ds, kids_of = [], []
        for v in lv:
            kids = (res.top_children[(n, v)] if n == H - 1
                    else tuple(res.data[(n + 1, q * v + j)] for j in range(q)))
            kids_of.append(kids)
            Ds.append(cons.defect(i, res.data[(n, v)], kids))
        carries = []
        for c in range(2):
            S, pref = Fraction(0), [Fraction(0)]
            for D in Ds:
                S += D[c]
                pref.append(S)
            t = Fraction(-LM, M) - min(pref)
            carries.append([t + s for s in pref])
        for k, v in enumerate(lv):
            right = (carries[0][k + 1], carries[1][k + 1])
            left = (Ds[k][0] - right[0], Ds[k][1] - right[1])
            rec[(n, v)] = Record(i, res.data[(n, v)], kids_of[k], left, right)
    return [rec[x].name() for x in patch.vertices]
