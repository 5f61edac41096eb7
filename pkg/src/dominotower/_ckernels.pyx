# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``; same signatures, same results."""

import numpy as np
cimport numpy as cnp

from .errors import ResourceError

cnp.import_array()

DEF SAT = 0
DEF UNSAT = 1
DEF ABORTED = 2
DEF UNKNOWN_PROFILE = -128


def cayley_bfs(int n_letters, walks, int radius, long cap):
    cdef int S = n_letters
    cdef long capacity = 1024
    cdef long count = 1
    cdef long layer_lo = 0, layer_hi = 1, g, x, found, w, p
    cdef int n, s, t
    # flatten walks: gen_ptr[s]..gen_ptr[s+1] index walk ids, walk_off bounds letters
    gen_ptr_l = [0]
    walk_off_l = [0]
    flat_l = []
    for s_py in range(S):
        for path in walks[s_py]:
            flat_l.extend(path)
            walk_off_l.append(len(flat_l))
        gen_ptr_l.append(len(walk_off_l) - 1)
    cdef cnp.int64_t[::1] gen_ptr = np.array(gen_ptr_l, dtype=np.int64)
    cdef cnp.int64_t[::1] walk_off = np.array(walk_off_l, dtype=np.int64)
    cdef cnp.int32_t[::1] flat = np.array(flat_l if flat_l else [0], dtype=np.int32)

    adj_a = np.full((capacity, S), -1, dtype=np.int32)
    norm_a = np.zeros(capacity, dtype=np.int32)
    parent_a = np.full(capacity, -1, dtype=np.int32)
    last_a = np.full(capacity, -1, dtype=np.int16)
    cdef cnp.int32_t[:, ::1] adj = adj_a
    cdef cnp.int32_t[::1] norm = norm_a
    cdef cnp.int32_t[::1] parent = parent_a
    cdef cnp.int16_t[::1] last = last_a
    spheres = [1]
    for n in range(radius):
        for g in range(layer_lo, layer_hi):
            for s in range(S):
                if adj[g, s] != -1:
                    continue
                found = -1
                for w in range(gen_ptr[s], gen_ptr[s + 1]):
                    x = g
                    for p in range(walk_off[w], walk_off[w + 1]):
                        x = adj[x, flat[p]]
                        if x == -1:
                            break
                    if x != -1:
                        found = x
                        break
                if found == -1:
                    if count >= cap:
                        raise ResourceError(
                            f"Cayley ball exceeds {cap} elements at radius {n + 1}",
                            bound=cap, reached=n + 1)
                    if count >= capacity:
                        capacity *= 2
                        new_adj = np.full((capacity, S), -1, dtype=np.int32)
                        new_adj[:count] = adj_a[:count]
                        adj_a = new_adj
                        norm_a = np.resize(norm_a, capacity)
                        parent_a = np.resize(parent_a, capacity)
                        last_a = np.resize(last_a, capacity)
                        adj = adj_a
                        norm = norm_a
                        parent = parent_a
                        last = last_a
                    found = count
                    count += 1
                    norm[found] = n + 1
                    parent[found] = g
                    last[found] = s
                adj[g, s] = found
                adj[found, s ^ 1] = g
        spheres.append(count - layer_hi)
        layer_lo = layer_hi
        layer_hi = count
    return (adj_a[:count].copy(), norm_a[:count].copy(), parent_a[:count].copy(),
            last_a[:count].copy(), spheres)


def norm_profile(cnp.int32_t[:, ::1] adj, cnp.int32_t[::1] norm, starts, words):
    cdef cnp.int64_t[::1] st = np.asarray(starts, dtype=np.int64)
    off_l = [0]
    flat_l = []
    for w in words:
        flat_l.extend(w)
        off_l.append(len(flat_l))
    cdef cnp.int64_t[::1] off = np.array(off_l, dtype=np.int64)
    cdef cnp.int32_t[::1] flat = np.array(flat_l if flat_l else [0], dtype=np.int32)
    cdef long nw = len(words)
    out_a = np.full((st.shape[0], nw), UNKNOWN_PROFILE, dtype=np.int8)
    cdef cnp.int8_t[:, ::1] out = out_a
    cdef long i, j, p, x, g
    for i in range(st.shape[0]):
        g = st[i]
        for j in range(nw):
            x = g
            for p in range(off[j], off[j + 1]):
                x = adj[x, flat[p]]
                if x < 0:
                    break
            if x >= 0:
                out[i, j] = norm[x] - norm[g]
    return out_a


def walk_many(cnp.int32_t[:, ::1] adj, starts, word):
    cdef cnp.int64_t[::1] st = np.asarray(starts, dtype=np.int64)
    cdef cnp.int32_t[::1] wd = np.array(list(word) if len(word) else [0], dtype=np.int32)
    cdef long L = len(word)
    out_a = np.empty(st.shape[0], dtype=np.int32)
    cdef cnp.int32_t[::1] out = out_a
    cdef long i, p, x
    for i in range(st.shape[0]):
        x = st[i]
        for p in range(L):
            x = adj[x, wd[p]]
            if x < 0:
                break
        out[i] = x
    return out_a


cdef class _CSP:
    cdef int n, k
    cdef cnp.uint8_t[:, ::1] dom
    cdef cnp.int32_t[::1] size
    cdef cnp.int64_t[::1] dep_ptr
    cdef cnp.int32_t[::1] dep_x
    cdef cnp.int32_t[::1] dep_t
    cdef cnp.int64_t[::1] sup_ptr
    cdef cnp.int32_t[::1] sup_idx
    cdef cnp.int32_t[::1] trail_x
    cdef cnp.int32_t[::1] trail_a
    cdef long trail_len
    cdef cnp.int32_t[::1] queue
    cdef cnp.uint8_t[::1] inq

    def __init__(self, domains, dep_ptr, dep_x, dep_t, sup_ptr, sup_idx):
        self.dom = np.ascontiguousarray(domains, dtype=np.uint8).copy()
        self.n = self.dom.shape[0]
        self.k = self.dom.shape[1]
        self.size = np.asarray(np.asarray(self.dom).sum(axis=1), dtype=np.int32)
        self.dep_ptr = np.asarray(dep_ptr, dtype=np.int64)
        self.dep_x = np.asarray(dep_x, dtype=np.int32)
        self.dep_t = np.asarray(dep_t, dtype=np.int32)
        self.sup_ptr = np.asarray(sup_ptr, dtype=np.int64)
        self.sup_idx = np.asarray(sup_idx if len(sup_idx) else [0], dtype=np.int32)
        self.trail_x = np.empty(self.n * self.k + 1, dtype=np.int32)
        self.trail_a = np.empty(self.n * self.k + 1, dtype=np.int32)
        self.trail_len = 0
        self.queue = np.empty(self.n + 1, dtype=np.int32)
        self.inq = np.zeros(self.n, dtype=np.uint8)

    cdef inline void remove(self, int x, int a):
        self.dom[x, a] = 0
        self.size[x] -= 1
        self.trail_x[self.trail_len] = x
        self.trail_a[self.trail_len] = a
        self.trail_len += 1

    cdef void undo(self, long mark):
        cdef int x, a
        while self.trail_len > mark:
            self.trail_len -= 1
            x = self.trail_x[self.trail_len]
            a = self.trail_a[self.trail_len]
            self.dom[x, a] = 1
            self.size[x] += 1

    cdef bint propagate(self, int start, bint everything):
        # circular FIFO over variables, each queued at most once
        cdef int n = self.n, k = self.k
        cdef long head = 0, tail = 0, cnt = 0
        cdef int y, x, a
        cdef long j, base, p, lo, hi
        cdef bint changed, supported
        cdef bint ok = True
        if everything:
            for y in range(n):
                self.queue[tail] = y
                tail = (tail + 1) % (n + 1)
                self.inq[y] = 1
                cnt += 1
        else:
            self.queue[tail] = start
            tail = (tail + 1) % (n + 1)
            self.inq[start] = 1
            cnt += 1
        while cnt > 0:
            y = self.queue[head]
            head = (head + 1) % (n + 1)
            cnt -= 1
            self.inq[y] = 0
            for j in range(self.dep_ptr[y], self.dep_ptr[y + 1]):
                x = self.dep_x[j]
                base = <long>self.dep_t[j] * k
                changed = False
                for a in range(k):
                    if not self.dom[x, a]:
                        continue
                    lo = self.sup_ptr[base + a]
                    hi = self.sup_ptr[base + a + 1]
                    supported = False
                    for p in range(lo, hi):
                        if self.dom[y, self.sup_idx[p]]:
                            supported = True
                            break
                    if not supported:
                        self.remove(x, a)
                        changed = True
                if changed:
                    if self.size[x] == 0:
                        ok = False
                        break
                    if not self.inq[x]:
                        self.inq[x] = 1
                        self.queue[tail] = x
                        tail = (tail + 1) % (n + 1)
                        cnt += 1
            if not ok:
                break
        if not ok:
            while cnt > 0:
                self.inq[self.queue[head]] = 0
                head = (head + 1) % (n + 1)
                cnt -= 1
        return ok

    cdef int select(self):
        cdef int x
        for x in range(self.n):
            if self.size[x] > 1:
                return x
        return -1

    def assignment(self):
        out = np.empty(self.n, dtype=np.int32)
        cdef int x, a
        for x in range(self.n):
            for a in range(self.k):
                if self.dom[x, a]:
                    out[x] = a
                    break
        return out

    def run(self, long budget):
        cdef int n = self.n, k = self.k
        cdef long nodes = 0
        cdef int x, y, a, b, top
        cdef long mark
        empty = np.full(n, -1, dtype=np.int32)
        for x in range(n):
            if self.size[x] == 0:
                return UNSAT, 0, empty
        if not self.propagate(0, True):
            return UNSAT, 0, empty
        x = self.select()
        if x == -1:
            return SAT, 0, self.assignment()
        st_var = np.empty(n + 1, dtype=np.int32)
        st_cur = np.empty(n + 1, dtype=np.int32)
        st_mark = np.empty(n + 1, dtype=np.int64)
        cdef cnp.int32_t[::1] sv = st_var
        cdef cnp.int32_t[::1] sc = st_cur
        cdef cnp.int64_t[::1] sm = st_mark
        top = 0
        sv[0] = x
        sc[0] = 0
        sm[0] = self.trail_len
        while top >= 0:
            x = sv[top]
            mark = sm[top]
            self.undo(mark)
            a = sc[top]
            while a < k and not self.dom[x, a]:
                a += 1
            if a >= k:
                top -= 1
                continue
            sc[top] = a + 1
            nodes += 1
            if nodes > budget:
                return ABORTED, nodes - 1, empty
            for b in range(k):
                if b != a and self.dom[x, b]:
                    self.remove(x, b)
            if not self.propagate(x, False):
                continue
            y = self.select()
            if y == -1:
                return SAT, nodes, self.assignment()
            top += 1
            sv[top] = y
            sc[top] = 0
            sm[top] = self.trail_len
        return UNSAT, nodes, empty


def solve_csp(domains, dep_ptr, dep_x, dep_t, sup_ptr, sup_idx, budget):
    return _CSP(domains, dep_ptr, dep_x, dep_t, sup_ptr, sup_idx).run(budget)
