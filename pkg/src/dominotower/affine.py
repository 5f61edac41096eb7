"""Exact rational piecewise affine systems on unit squares.

Also holds the mortality certifier (an exact convex-polygon chain) and the
compiler from Turing machines with at most three tape symbols to piecewise
affine maps.  Instructions (pieces) are numbered from 1.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import lcm
from typing import Sequence

from .errors import DomainError, OutsideDomain, ResourceError, UnsupportedError, ValidationError

DEFAULT_BIT_CAP = 4096

Vec = tuple  # pair of Fractions


def Q(x) -> Fraction:
    """Fraction from int, Fraction or a ``"p/q"`` string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise ValidationError("floats are not exact; pass 'p/q' strings or Fractions")
    return Fraction(x)


def qstr(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def vec(x, y) -> Vec:
    return (Q(x), Q(y))


@dataclass(frozen=True)
class AffineMap:
    """``(x, y) -> (a x + b y + e, c x + d y + f)``."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction
    e: Fraction
    f: Fraction

    def __post_init__(self):
        for name in "abcdef":
            object.__setattr__(self, name, Q(getattr(self, name)))

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(1, 0, 0, 1, 0, 0)

    @classmethod
    def translation(cls, tx, ty) -> "AffineMap":
        return cls(1, 0, 0, 1, tx, ty)

    @classmethod
    def diag(cls, sx, sy, tx=0, ty=0) -> "AffineMap":
        return cls(sx, 0, 0, sy, tx, ty)

    def __call__(self, p: Vec) -> Vec:
        x, y = p
        return (self.a * x + self.b * y + self.e, self.c * x + self.d * y + self.f)

    @property
    def coefficients(self) -> tuple:
        return (self.a, self.b, self.c, self.d, self.e, self.f)

    @property
    def det(self) -> Fraction:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "AffineMap":
        det = self.det
        if det == 0:
            raise DomainError("singular affine map has no inverse")
        ia, ib, ic, id_ = self.d / det, -self.b / det, -self.c / det, self.a / det
        return AffineMap(ia, ib, ic, id_, -(ia * self.e + ib * self.f), -(ic * self.e + id_ * self.f))

    def compose(self, other: "AffineMap") -> "AffineMap":
        """``self o other``."""
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        e, f = self((other.e, other.f))
        return AffineMap(a, b, c, d, e, f)

    def linear_norm(self) -> Fraction:
        """Operator norm of the linear part for the sup norm (max row sum)."""
        return max(abs(self.a) + abs(self.b), abs(self.c) + abs(self.d))

    def to_list(self) -> list[str]:
        return [qstr(x) for x in self.coefficients]

    @classmethod
    def from_list(cls, items) -> "AffineMap":
        if len(items) != 6:
            raise ValidationError("an affine map needs 6 coefficients")
        return cls(*(Q(x) for x in items))


@dataclass(frozen=True)
class PiecewiseAffineSystem:
    squares: tuple
    maps: tuple

    def __post_init__(self):
        sq = tuple((int(x), int(y)) for x, y in self.squares)
        object.__setattr__(self, "squares", sq)
        object.__setattr__(self, "maps", tuple(self.maps))
        if not sq:
            raise ValidationError("a system needs at least one square")
        if len(sq) != len(self.maps):
            raise ValidationError("squares and maps differ in length")

    @property
    def size(self) -> int:
        return len(self.squares)

    def square(self, i: int) -> tuple[int, int]:
        return self.squares[i - 1]

    def map(self, i: int) -> AffineMap:
        return self.maps[i - 1]

    def corners(self, i: int) -> list[Vec]:
        x, y = self.square(i)
        return [(Fraction(x + dx), Fraction(y + dy)) for dx in (0, 1) for dy in (0, 1)]

    def locate(self, p: Vec) -> int | None:
        x, y = p
        for i, (sx, sy) in enumerate(self.squares, 1):
            if sx <= x <= sx + 1 and sy <= y <= sy + 1:
                return i
        return None

    def to_dict(self) -> dict:
        return {"squares": [list(s) for s in self.squares],
                "maps": [m.to_list() for m in self.maps]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseAffineSystem":
        return cls([tuple(s) for s in data["squares"]],
                   [AffineMap.from_list(m) for m in data["maps"]])

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseAffineSystem":
        return cls.from_dict(json.loads(text))


def validate_system(sys: PiecewiseAffineSystem) -> list[str]:
    """Violations of closed-disjointness and exactness; empty when valid."""
    out = []
    for m in sys.maps:
        if not all(isinstance(c, Fraction) for c in m.coefficients):
            out.append(f"map {m} has non-rational coefficients")
    for (i, (x1, y1)), (j, (x2, y2)) in combinations(enumerate(sys.squares, 1), 2):
        if abs(x1 - x2) <= 1 and abs(y1 - y2) <= 1:
            out.append(f"squares {i} at {(x1, y1)} and {j} at {(x2, y2)} intersect")
    return out


def require_valid(sys: PiecewiseAffineSystem) -> None:
    bad = validate_system(sys)
    if bad:
        raise ValidationError("; ".join(bad))


def apply_piecewise(sys: PiecewiseAffineSystem, p: Vec) -> tuple[int, Vec]:
    i = sys.locate(p)
    if i is None:
        raise OutsideDomain(p)
    return i, sys.map(i)(p)


@dataclass(frozen=True)
class ImmortalUpTo:
    n: int
    trajectory: tuple


@dataclass(frozen=True)
class DiesAt:
    """``last`` is the first point outside U, reached at index ``step``."""

    step: int
    last: Vec
    trajectory: tuple = ()


def _bits(p: Vec) -> int:
    return max(max(c.numerator.bit_length(), c.denominator.bit_length()) for c in p)


def orbit(sys: PiecewiseAffineSystem, x0, n: int, bit_cap: int = DEFAULT_BIT_CAP):
    p = vec(*x0)
    if sys.locate(p) is None:
        raise OutsideDomain(p)
    traj = [p]
    for step in range(1, n + 1):
        _, p = apply_piecewise(sys, p)
        if _bits(p) > bit_cap:
            raise ResourceError(f"orbit coordinates exceed {bit_cap} bits at step {step}",
                                bound=bit_cap, reached=step)
        if sys.locate(p) is None:
            return DiesAt(step, p, tuple(traj))
        traj.append(p)
    return ImmortalUpTo(n, tuple(traj))


def orbit_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "x", "y"])
    for k, (x, y) in enumerate(result.trajectory):
        w.writerow([k, qstr(x), qstr(y)])
    if isinstance(result, DiesAt):
        w.writerow([result.step, qstr(result.last[0]), qstr(result.last[1])])
    return buf.getvalue()


# convex polygons -----------------------------------------------------------

def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull(points) -> tuple:
    """Canonical convex hull: CCW from the least point, no collinear vertices.

    Segments come back as their two endpoints, points as a 1-tuple.
    """
    pts = sorted(set(points))
    if len(pts) <= 2:
        return tuple(pts)
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    h = lower[:-1] + upper[:-1]
    return tuple(h) if len(h) > 1 else tuple(pts[:1])


def _clip_halfplane(poly, g):
    """Keep ``{p : g(p) >= 0}`` of a convex vertex cycle (closed, degenerate-safe)."""
    out = []
    n = len(poly)
    for k in range(n):
        cur, nxt = poly[k], poly[(k + 1) % n]
        gc, gn = g(cur), g(nxt)
        if gc >= 0:
            out.append(cur)
        if (gc > 0 and gn < 0) or (gc < 0 and gn > 0):
            t = gc / (gc - gn)
            out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
    return out


def clip_to_square(poly, corner) -> tuple:
    x0, y0 = corner
    pts = list(poly)
    for g in (lambda p: p[0] - x0, lambda p: x0 + 1 - p[0],
              lambda p: p[1] - y0, lambda p: y0 + 1 - p[1]):
        if not pts:
            return ()
        pts = _clip_halfplane(pts, g)
    return hull(pts) if pts else ()


@dataclass(frozen=True)
class Mortal:
    bound: int


@dataclass(frozen=True)
class Unknown:
    reason: str
    depth: int


def certify_mortal(sys: PiecewiseAffineSystem, max_depth: int = 64, polygon_cap: int = 10_000):
    """Chain ``X_0 = U``, ``X_{k+1} = f(X_k) & U`` over exact convex pieces.

    Measure-zero pieces (segments, points) are kept, since squares are closed.
    ``Mortal(n)`` means ``X_n`` is empty, so every orbit leaves U within n steps.
    """
    require_valid(sys)
    current = {(i, hull(sys.corners(i))) for i in range(1, sys.size + 1)}
    for k in range(1, max_depth + 1):
        nxt = set()
        for i, poly in current:
            image = hull(sys.map(i)(p) for p in poly)
            xs = [p[0] for p in image]
            ys = [p[1] for p in image]
            for j, (sx, sy) in enumerate(sys.squares, 1):
                if max(xs) < sx or min(xs) > sx + 1 or max(ys) < sy or min(ys) > sy + 1:
                    continue
                piece = clip_to_square(image, (sx, sy))
                if piece:
                    nxt.add((j, piece))
            if len(nxt) > polygon_cap:
                return Unknown(f"more than {polygon_cap} polygons", k)
        if not nxt:
            return Mortal(k)
        if nxt == current:
            return Unknown("region chain is stationary", k)
        current = nxt
    return Unknown("depth limit reached", max_depth)


# Turing machines -------------------------------------------------------------

LEFT, RIGHT = "L", "R"


@dataclass(frozen=True)
class TMConfig:
    """A tape window, head index into it, and state; cells outside are blank."""

    state: object
    tape: tuple
    head: int


@dataclass(frozen=True)
class TuringMachine:
    states: tuple
    symbols: tuple
    transitions: dict = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if not self.states or not self.symbols:
            raise ValidationError("a machine needs states and symbols")
        if len(self.symbols) > 3:
            raise UnsupportedError(f"{len(self.symbols)} tape symbols; at most 3 are encodable")
        if len(set(self.symbols)) != len(self.symbols) or len(set(self.states)) != len(self.states):
            raise ValidationError("duplicate states or symbols")
        for (s, r), (s2, w, mv) in self.transitions.items():
            if s not in self.states or s2 not in self.states:
                raise ValidationError(f"transition {(s, r)} uses an undeclared state")
            if r not in self.symbols or w not in self.symbols:
                raise ValidationError(f"transition {(s, r)} uses an undeclared symbol")
            if mv not in (LEFT, RIGHT):
                raise ValidationError(f"move must be L or R, got {mv!r}")

    @property
    def blank(self):
        return self.symbols[0]

    def digit(self, sym) -> int:
        return self.symbols.index(sym)

    def step(self, cfg: TMConfig) -> TMConfig | None:
        """One step, or None when the transition is undefined (halt).

        The window grows by one blank cell if the head walks off it.
        """
        tape = list(cfg.tape)
        key = (cfg.state, tape[cfg.head])
        if key not in self.transitions:
            return None
        s2, w, mv = self.transitions[key]
        tape[cfg.head] = w
        head = cfg.head + (1 if mv == RIGHT else -1)
        if head < 0:
            tape.insert(0, self.blank)
            head = 0
        elif head >= len(tape):
            tape.append(self.blank)
        return TMConfig(s2, tuple(tape), head)

    def to_dict(self) -> dict:
        return {"states": list(self.states), "symbols": list(self.symbols),
                "transitions": [{"state": s, "read": r, "next": s2, "write": w, "move": mv}
                                for (s, r), (s2, w, mv) in self.transitions.items()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "TuringMachine":
        trans = {(t["state"], t["read"]): (t["next"], t["write"], t["move"])
                 for t in data["transitions"]}
        return cls(data["states"], data["symbols"], trans)

    @classmethod
    def from_json(cls, text: str) -> "TuringMachine":
        return cls.from_dict(json.loads(text))


def right_writer() -> TuringMachine:
    return TuringMachine(["A"], [0, 1, 2], {("A", r): ("A", r, RIGHT) for r in (0, 1, 2)})


def zigzag() -> TuringMachine:
    trans = {("A", r): ("B", r, RIGHT) for r in (0, 1, 2)}
    trans.update({("B", r): ("A", r, LEFT) for r in (0, 1, 2)})
    return TuringMachine(["A", "B"], [0, 1, 2], trans)


def halter() -> TuringMachine:
    return TuringMachine(["H"], [0, 1, 2], {})


BLOCK_STRIDE = 8


@dataclass(frozen=True)
class CompiledTM:
    """System plus the square bookkeeping behind ``encode`` and ``decode``.

    Tape cells are written in base 5 with digits ``0, 2, 4`` (symbol ``t``
    becomes ``2t``): x holds the cells left of the head nearest-first, y the
    cells right of it.  Squares are indexed by (state, read symbol, direction
    of the move that entered the state); right arrivals stack their three read
    symbols vertically and left arrivals horizontally, so one affine map per
    source square lands every next read symbol in its own square.
    """

    tm: TuringMachine
    system: PiecewiseAffineSystem
    index: dict
    keys: tuple
    span: int

    def square_for(self, state, read, arrival=None) -> int:
        if arrival is None:
            for d in (RIGHT, LEFT):
                if (state, read, d) in self.index:
                    return self.index[(state, read, d)]
            raise DomainError(f"no square for state {state!r}")
        try:
            return self.index[(state, read, arrival)]
        except KeyError:
            raise DomainError(f"no square for {(state, read, arrival)!r}") from None

    def encode(self, cfg: TMConfig, arrival=None) -> Vec:
        tm = self.tm
        i = self.square_for(cfg.state, cfg.tape[cfg.head], arrival)
        x = sum(Fraction(2 * tm.digit(s), 5 ** k)
                for k, s in enumerate(reversed(cfg.tape[:cfg.head]), 1))
        y = sum(Fraction(2 * tm.digit(s), 5 ** k)
                for k, s in enumerate(cfg.tape[cfg.head + 1:], 1))
        cx, cy = self.system.square(i)
        return (cx + Fraction(x), cy + Fraction(y))

    def decode(self, p: Vec, left: int, right: int) -> TMConfig:
        """Inverse of ``encode`` for windows with ``left``/``right`` cells around the head."""
        i = self.system.locate(p)
        if i is None:
            raise OutsideDomain(p)
        state, read, _ = self.keys[i - 1]
        cx, cy = self.system.square(i)
        lcells = _digits(p[0] - cx, left, self.tm)
        rcells = _digits(p[1] - cy, right, self.tm)
        return TMConfig(state, tuple(reversed(lcells)) + (read,) + tuple(rcells), left)


def _digits(u: Fraction, count: int, tm: TuringMachine) -> list:
    out = []
    for _ in range(count):
        u *= 5
        dgt = u.numerator // u.denominator
        if dgt not in (0, 2, 4):
            raise DomainError("point does not encode a tape")
        out.append(tm.symbols[dgt // 2] if dgt // 2 < len(tm.symbols) else None)
        if out[-1] is None:
            raise DomainError("digit outside the tape alphabet")
        u -= dgt
    if u != 0:
        raise DomainError("tape content extends past the decoding window")
    return out


def compile_tm(tm: TuringMachine) -> CompiledTM:
    arrivals = {s: set() for s in tm.states}
    for (s2, _w, mv) in tm.transitions.values():
        arrivals[s2].add(mv)
    nsym = len(tm.symbols)
    keys, corners, blocks = [], [], {}
    bx = 0
    for s in tm.states:
        dirs = [d for d in (RIGHT, LEFT) if d in arrivals[s]] or [RIGHT]
        for d in dirs:
            blocks[(s, d)] = bx
            for r in range(nsym):
                keys.append((s, tm.symbols[r], d))
                corners.append((bx, 2 * r) if d == RIGHT else (bx + 2 * r, 0))
            bx += BLOCK_STRIDE
    span = bx
    maps = []
    fifth = Fraction(1, 5)
    for (s, r, _d), (cx, cy) in zip(keys, corners):
        if (s, r) not in tm.transitions:
            maps.append(AffineMap.translation(2 * span, 0))
            continue
        s2, w, mv = tm.transitions[(s, r)]
        tx = blocks[(s2, mv)]
        e = Fraction(2 * tm.digit(w), 5)
        if mv == RIGHT:
            # x' = tx + (u + 2w)/5, y' = 5 v
            maps.append(AffineMap(fifth, 0, 0, 5, tx - cx * fifth + e, -5 * cy))
        else:
            # x' = tx + 5 u, y' = (v + 2w)/5
            maps.append(AffineMap(5, 0, 0, fifth, tx - 5 * cx, -cy * fifth + e))
    system = PiecewiseAffineSystem(corners, maps)
    index = {k: i for i, k in enumerate(keys, 1)}
    return CompiledTM(tm, system, index, tuple(keys), span)


@dataclass(frozen=True)
class ConjugacyResult:
    """``status`` is ok, dies (machine halts and the orbit leaves U), mismatch or inconclusive."""

    status: str
    detail: str = ""

    @property
    def agrees(self) -> bool:
        return self.status in ("ok", "dies")


def tm_step_conjugacy(tm: TuringMachine, cfg: TMConfig, window: int | None = None,
                      compiled: CompiledTM | None = None, arrival=None) -> ConjugacyResult:
    """Compare ``decode(f(encode(cfg)))`` with the machine step, exactly."""
    if window is not None and len(cfg.tape) != window:
        raise ValidationError(f"configuration window is {len(cfg.tape)}, expected {window}")
    comp = compiled or compile_tm(tm)
    expected = tm.step(cfg)
    p = comp.encode(cfg, arrival)
    _, img = apply_piecewise(comp.system, p)
    inside = comp.system.locate(img) is not None
    if expected is None:
        if inside:
            return ConjugacyResult("mismatch", "machine halts but the orbit survives")
        return ConjugacyResult("dies", "halting pair: orbit leaves U")
    move = tm.transitions[(cfg.state, cfg.tape[cfg.head])][2]
    new_head = cfg.head + (1 if move == RIGHT else -1)
    if not 0 <= new_head < len(cfg.tape):
        return ConjugacyResult("inconclusive", "head leaves the window")
    if not inside:
        return ConjugacyResult("mismatch", "orbit dies but the machine continues")
    try:
        got = comp.decode(img, new_head, len(cfg.tape) - new_head - 1)
    except DomainError as exc:
        return ConjugacyResult("mismatch", str(exc))
    if got != expected:
        return ConjugacyResult("mismatch", f"decoded {got}, machine gives {expected}")
    if comp.encode(expected, move) != img:
        return ConjugacyResult("mismatch", "image differs from the re-encoded successor")
    return ConjugacyResult("ok")
