"""Pure-Python reference versions of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and bit-identical results; ``kernels`` picks one at import time.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import ResourceError

SAT, UNSAT, ABORTED = 0, 1, 2
UNKNOWN_PROFILE = -128


def cayley_bfs(n_letters, walks, radius, cap):
    """Breadth-first construction of a Cayley ball.

    ``walks[s]`` lists letter sequences ``y`` such that ``s = y`` holds in the
    group; a candidate ``g*s`` is identified with the endpoint of ``y`` walked
    from ``g`` whenever every step of that walk is already known.
    """
    S = n_letters
    adj = [[-1] * S]
    norm = [0]
    parent = [-1]
    last = [-1]
    layer = [0]
    spheres = [1]
    for n in range(radius):
        fresh = []
        for g in layer:
            ag = adj[g]
            for s in range(S):
                if ag[s] != -1:
                    continue
                found = -1
                for path in walks[s]:
                    x = g
                    for t in path:
                        x = adj[x][t]
                        if x == -1:
                            break
                    if x != -1:
                        found = x
                        break
                if found == -1:
                    found = len(adj)
                    if found >= cap:
                        raise ResourceError(
                            f"Cayley ball exceeds {cap} elements at radius {n + 1}",
                            bound=cap, reached=n + 1)
                    adj.append([-1] * S)
                    norm.append(n + 1)
                    parent.append(g)
                    last.append(s)
                    fresh.append(found)
                ag[s] = found
                adj[found][s ^ 1] = g
        layer = fresh
        spheres.append(len(fresh))
    return (np.array(adj, dtype=np.int32).reshape(len(adj), S),
            np.array(norm, dtype=np.int32),
            np.array(parent, dtype=np.int32),
            np.array(last, dtype=np.int16),
            spheres)


def norm_profile(adj, norm, starts, words):
    """``out[i, j] = norm(starts[i] * words[j]) - norm(starts[i])``.

    Entries whose walk leaves the computed ball are ``UNKNOWN_PROFILE``.
    """
    adj_l = adj.tolist()
    norm_l = norm.tolist()
    out = np.full((len(starts), len(words)), UNKNOWN_PROFILE, dtype=np.int8)
    for i, g in enumerate(int(x) for x in starts):
        row = out[i]
        base = norm_l[g]
        for j, w in enumerate(words):
            x = g
            for t in w:
                x = adj_l[x][t]
                if x < 0:
                    break
            if x >= 0:
                row[j] = norm_l[x] - base
    return out


def walk_many(adj, starts, word):
    """Endpoint of ``word`` walked from each start (-1 when it leaves the ball)."""
    adj_l = adj.tolist()
    out = np.empty(len(starts), dtype=np.int32)
    for i, g in enumerate(int(x) for x in starts):
        x = g
        for t in word:
            x = adj_l[x][t]
            if x < 0:
                break
        out[i] = x
    return out


def solve_csp(domains, dep_ptr, dep_x, dep_t, sup_ptr, sup_idx, budget):
    """Arc-consistency plus chronological backtracking.

    ``domains`` is an (n, k) 0/1 array.  For variable ``y`` the arcs
    ``(dep_x[j], dep_t[j])`` for ``j in dep_ptr[y]:dep_ptr[y+1]`` say that
    every value ``a`` of ``dep_x[j]`` needs a support ``b`` in ``D(y)`` among
    ``sup_idx[sup_ptr[t*k + a] : sup_ptr[t*k + a + 1]]``.

    Returns ``(status, nodes, assignment)``.
    """
    n, k = domains.shape
    dom = [bytearray(row.tobytes()) for row in np.ascontiguousarray(domains, dtype=np.uint8)]
    size = [sum(r) for r in dom]
    dep_ptr = dep_ptr.tolist()
    dep_x = dep_x.tolist()
    dep_t = dep_t.tolist()
    sup_ptr = sup_ptr.tolist()
    sup_idx = sup_idx.tolist()
    trail = []

    def remove(x, a):
        dom[x][a] = 0
        size[x] -= 1
        trail.append((x, a))

    def undo(mark):
        while len(trail) > mark:
            x, a = trail.pop()
            dom[x][a] = 1
            size[x] += 1

    def propagate(queue):
        inq = [False] * n
        for y in queue:
            inq[y] = True
        q = deque(queue)
        while q:
            y = q.popleft()
            inq[y] = False
            dy = dom[y]
            for j in range(dep_ptr[y], dep_ptr[y + 1]):
                x = dep_x[j]
                base = dep_t[j] * k
                dx = dom[x]
                changed = False
                for a in range(k):
                    if not dx[a]:
                        continue
                    lo, hi = sup_ptr[base + a], sup_ptr[base + a + 1]
                    for p in range(lo, hi):
                        if dy[sup_idx[p]]:
                            break
                    else:
                        remove(x, a)
                        changed = True
                if changed:
                    if size[x] == 0:
                        return False
                    if not inq[x]:
                        inq[x] = True
                        q.append(x)
        return True

    def select():
        for x in range(n):
            if size[x] > 1:
                return x
        return -1

    def assignment():
        return np.array([dom[x].index(1) for x in range(n)], dtype=np.int32)

    empty = np.full(n, -1, dtype=np.int32)
    if any(s == 0 for s in size) or not propagate(list(range(n))):
        return UNSAT, 0, empty
    nodes = 0
    x = select()
    if x == -1:
        return SAT, nodes, assignment()
    stack = [[x, 0, len(trail)]]
    while stack:
        frame = stack[-1]
        x, cursor, mark = frame
        undo(mark)
        dx = dom[x]
        a = cursor
        while a < k and not dx[a]:
            a += 1
        if a >= k:
            stack.pop()
            continue
        frame[1] = a + 1
        nodes += 1
        if nodes > budget:
            return ABORTED, nodes - 1, empty
        for b in range(k):
            if b != a and dx[b]:
                remove(x, b)
        if not propagate([x]):
            continue
        y = select()
        if y == -1:
            return SAT, nodes, assignment()
        stack.append([y, 0, len(trail)])
    return UNSAT, nodes, empty
