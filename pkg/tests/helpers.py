"""Shared generators for systems with a built-in periodic orbit."""

import random
from fractions import Fraction as F

from dominotower.affine import AffineMap, PiecewiseAffineSystem

ENTRIES = [F(0), F(1, 2), F(-1, 2), F(1), F(-1)]
POINTS = [F(0), F(1, 4), F(1, 2), F(3, 4), F(1)]


def periodic_system(rng: random.Random, period: int):
    """Squares spaced along the x-axis with f_j(x) = A_j (x - u_j) + u_{j+1}."""
    squares = [(3 * j, rng.randrange(0, 3) * 2) for j in range(period)]
    pts = [(sx + rng.choice(POINTS), sy + rng.choice(POINTS)) for sx, sy in squares]
    maps = []
    for j in range(period):
        a, b, c, d = (rng.choice(ENTRIES) for _ in range(4))
        u, v = pts[j], pts[(j + 1) % period]
        e = v[0] - (a * u[0] + b * u[1])
        f = v[1] - (c * u[0] + d * u[1])
        maps.append(AffineMap(a, b, c, d, e, f))
    return PiecewiseAffineSystem(squares, maps), pts[0]


def witness_cases(seed=2024, count=20):
    rng = random.Random(seed)
    return [periodic_system(rng, rng.randint(1, 4)) for _ in range(count)]


# (q, height, base width): the widest level stays at or below 64 vertices
SHAPES = {1: (6, 64), 2: (5, 4), 3: (4, 2)}
