# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.  Mirrors ``_kernels_py`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

cdef double IMPROVE_TOL = 1e-12


cdef inline double _field(const double[::1] lin, const cnp.int64_t[::1] ptr,
                          const cnp.int32_t[::1] nbr, const double[::1] w,
                          const cnp.uint8_t[::1] xs, Py_ssize_t i) noexcept nogil:
    cdef double f = lin[i]
    cdef Py_ssize_t p
    for p in range(ptr[i], ptr[i + 1]):
        if xs[nbr[p]]:
            f += w[p]
    return f


cdef inline void _apply_flip(Py_ssize_t v, cnp.uint8_t[::1] xs, double[::1] delta,
                             const cnp.int64_t[::1] ptr, const cnp.int32_t[::1] nbr,
                             const double[::1] w) noexcept nogil:
    cdef double step = 1.0 - 2.0 * xs[v]
    cdef Py_ssize_t p, j
    xs[v] = 1 - xs[v]
    delta[v] = -delta[v]
    for p in range(ptr[v], ptr[v + 1]):
        j = nbr[p]
        if xs[j]:
            delta[j] -= step * w[p]
        else:
            delta[j] += step * w[p]


cdef void _deltas(const double[::1] lin, const cnp.int64_t[::1] ptr,
                  const cnp.int32_t[::1] nbr, const double[::1] w,
                  const cnp.uint8_t[::1] xs, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    cdef double f
    for i in range(lin.shape[0]):
        f = _field(lin, ptr, nbr, w, xs, i)
        out[i] = -f if xs[i] else f


def flip_deltas(const double[::1] linear, const cnp.int64_t[::1] indptr,
                const cnp.int32_t[::1] indices, const double[::1] weights, x):
    cdef cnp.uint8_t[::1] xs = np.ascontiguousarray(x, dtype=np.uint8)
    out = np.empty(linear.shape[0])
    _deltas(linear, indptr, indices, weights, xs, out)
    return out


def descend(const double[::1] linear, const cnp.int64_t[::1] indptr,
            const cnp.int32_t[::1] indices, const double[::1] weights, x):
    out = np.array(x, dtype=np.uint8)
    cdef cnp.uint8_t[::1] xs = out
    cdef Py_ssize_t n = linear.shape[0], i, v
    cdef double[::1] delta = np.empty(n)
    cdef double best
    _deltas(linear, indptr, indices, weights, xs, delta)
    with nogil:
        while True:
            best = -IMPROVE_TOL
            v = -1
            for i in range(n):
                if delta[i] < best:
                    best = delta[i]
                    v = i
            if v < 0:
                break
            _apply_flip(v, xs, delta, indptr, indices, weights)
    return out


def anneal(const double[::1] linear, const cnp.int64_t[::1] indptr,
           const cnp.int32_t[::1] indices, const double[::1] weights,
           x0, order, uniforms, const double[::1] temps):
    cdef const cnp.uint8_t[:, ::1] x0v = np.ascontiguousarray(x0, dtype=np.uint8)
    cdef const cnp.int32_t[:, :, ::1] ov = np.ascontiguousarray(order, dtype=np.int32)
    cdef const double[:, :, ::1] uv = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t reads = x0v.shape[0], n = x0v.shape[1], sweeps = temps.shape[0]
    best_out = np.empty((reads, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] bv = best_out
    cdef cnp.uint8_t[::1] xs = np.empty(n, dtype=np.uint8)
    cdef Py_ssize_t r, s, k, i, j
    cdef double t, f, d, energy, best_energy
    with nogil:
        for r in range(reads):
            xs[:] = x0v[r]
            bv[r, :] = xs
            energy = 0.0
            best_energy = 0.0
            for s in range(sweeps):
                t = temps[s]
                for k in range(n):
                    i = ov[r, s, k]
                    f = _field(linear, indptr, indices, weights, xs, i)
                    d = -f if xs[i] else f
                    if d <= 0.0 or uv[r, s, k] < exp(-d / t):
                        xs[i] = 1 - xs[i]
                        energy += d
                        if energy < best_energy:
                            best_energy = energy
                            for j in range(n):
                                bv[r, j] = xs[j]
    return best_out


def tabu(const double[::1] linear, const cnp.int64_t[::1] indptr,
         const cnp.int32_t[::1] indices, const double[::1] weights,
         x0, Py_ssize_t iterations, Py_ssize_t tenure):
    cdef const cnp.uint8_t[:, ::1] x0v = np.ascontiguousarray(x0, dtype=np.uint8)
    cdef Py_ssize_t reads = x0v.shape[0], n = x0v.shape[1]
    best_out = np.empty((reads, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] bv = best_out
    cdef cnp.uint8_t[::1] xs = np.empty(n, dtype=np.uint8)
    cdef double[::1] delta = np.empty(n)
    cdef cnp.int64_t[::1] until = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t r, it, i, v, fallback
    cdef double d, vd, fd, energy, best_energy
    with nogil:
        for r in range(reads):
            xs[:] = x0v[r]
            _deltas(linear, indptr, indices, weights, xs, delta)
            until[:] = 0
            bv[r, :] = xs
            energy = 0.0
            best_energy = 0.0
            for it in range(1, iterations + 1):
                v = -1
                vd = 0.0
                fallback = -1
                fd = 0.0
                for i in range(n):
                    d = delta[i]
                    if fallback < 0 or d < fd:
                        fallback = i
                        fd = d
                    if until[i] >= it and not (energy + d < best_energy - IMPROVE_TOL):
                        continue
                    if v < 0 or d < vd:
                        v = i
                        vd = d
                if v < 0:
                    v = fallback
                    vd = fd
                if v < 0:
                    break
                _apply_flip(v, xs, delta, indptr, indices, weights)
                until[v] = it + tenure
                energy += vd
                if energy < best_energy - IMPROVE_TOL:
                    best_energy = energy
                    bv[r, :] = xs
    return best_out


cdef double _bound(const double[::1] linear, const cnp.int64_t[::1] indptr,
                   const cnp.int32_t[::1] indices, const double[::1] weights,
                   const cnp.int8_t* states, Py_ssize_t n, double[::1] lin_out,
                   double* fixed_out, long* free_edges_out) noexcept nogil:
    cdef Py_ssize_t i, j, p
    cdef double fixed_value = 0.0, bound, eff
    cdef long free_edges = 0
    cdef cnp.int8_t s
    for i in range(n):
        if states[i] == 1:
            fixed_value += linear[i]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j > i and states[j] == 1:
                    fixed_value += weights[p]
    bound = fixed_value
    for i in range(n):
        if states[i] != -1:
            lin_out[i] = 0.0
            continue
        eff = linear[i]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            s = states[j]
            if s == 1:
                eff += weights[p]
            elif s == -1 and j > i:
                free_edges += 1
                if weights[p] < 0.0:
                    bound += weights[p]
        lin_out[i] = eff
        if eff < 0.0:
            bound += eff
    fixed_out[0] = fixed_value
    free_edges_out[0] = free_edges
    return bound


def node_bound(const double[::1] linear, const cnp.int64_t[::1] indptr,
               const cnp.int32_t[::1] indices, const double[::1] weights,
               const cnp.int8_t[::1] states, double[::1] lin_out):
    cdef double fixed_value = 0.0, bound
    cdef long free_edges = 0
    cdef Py_ssize_t n = states.shape[0]
    cdef const cnp.int8_t* ptr = &states[0] if n else NULL
    with nogil:
        bound = _bound(linear, indptr, indices, weights, ptr, n, lin_out, &fixed_value, &free_edges)
    return fixed_value, bound, free_edges


# ---------------------------------------------------------------------------
# branch-and-bound search loop

cdef extern from "<time.h>" nogil:
    ctypedef long time_t
    struct timespec:
        time_t tv_sec
        long tv_nsec
    int clock_gettime(int clk_id, timespec *tp)
    int CLOCK_MONOTONIC


cdef inline double _now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + ts.tv_nsec * 1e-9


cdef inline bint _before(double ka, long ia, double kb, long ib) noexcept nogil:
    return ka < kb or (ka == kb and ia < ib)


cdef class _Tree:
    """Node storage plus a binary heap of slots ordered by (key, id)."""
    cdef public object states_arr
    cdef cnp.int8_t[:, ::1] states
    cdef double[::1] bound
    cdef double[::1] key
    cdef long[::1] depth
    cdef long[::1] nid
    cdef long[::1] free_edges
    cdef long[::1] heap
    cdef long[::1] spare
    cdef Py_ssize_t cap, n, size, nspare, used

    def __init__(self, Py_ssize_t n, Py_ssize_t cap=1024):
        self.n = n
        self.cap = 0
        self.size = 0
        self.nspare = 0
        self.used = 0
        self._grow(cap)

    cdef void _grow(self, Py_ssize_t cap) except *:
        old = self.cap
        st = np.zeros((cap, max(self.n, 1)), dtype=np.int8)
        arrays = [np.zeros(cap), np.zeros(cap), np.zeros(cap, dtype=np.int_), np.zeros(cap, dtype=np.int_),
                  np.zeros(cap, dtype=np.int_), np.zeros(cap, dtype=np.int_), np.zeros(cap, dtype=np.int_)]
        if old:
            st[:old] = self.states_arr[:old]
            for a, b in zip(arrays, (self.bound, self.key, self.depth, self.nid, self.free_edges, self.heap, self.spare)):
                a[:old] = np.asarray(b)[:old]
        self.states_arr = st
        self.states = st
        self.bound, self.key, self.depth, self.nid, self.free_edges, self.heap, self.spare = arrays
        self.cap = cap

    cdef Py_ssize_t alloc(self) except -1:
        if self.nspare:
            self.nspare -= 1
            return self.spare[self.nspare]
        if self.used == self.cap:
            self._grow(2 * self.cap)
        self.used += 1
        return self.used - 1

    cdef inline void release(self, Py_ssize_t s) noexcept:
        self.spare[self.nspare] = s
        self.nspare += 1

    cdef void push(self, Py_ssize_t s) noexcept:
        cdef Py_ssize_t i = self.size, p
        self.size += 1
        while i > 0:
            p = (i - 1) >> 1
            if _before(self.key[s], self.nid[s], self.key[self.heap[p]], self.nid[self.heap[p]]):
                self.heap[i] = self.heap[p]
                i = p
            else:
                break
        self.heap[i] = s

    cdef Py_ssize_t pop(self) noexcept:
        cdef Py_ssize_t top = self.heap[0], last, i = 0, c
        self.size -= 1
        if self.size == 0:
            return top
        last = self.heap[self.size]
        while True:
            c = 2 * i + 1
            if c >= self.size:
                break
            if c + 1 < self.size and _before(self.key[self.heap[c + 1]], self.nid[self.heap[c + 1]],
                                             self.key[self.heap[c]], self.nid[self.heap[c]]):
                c += 1
            if _before(self.key[self.heap[c]], self.nid[self.heap[c]], self.key[last], self.nid[last]):
                self.heap[i] = self.heap[c]
                i = c
            else:
                break
        self.heap[i] = last
        return top


def search(const double[::1] linear, const cnp.int64_t[::1] indptr,
           const cnp.int32_t[::1] indices, const double[::1] weights, double offset,
           const cnp.int64_t[::1] order, int selection, double incumbent_value, incumbent_bits,
           pool_bits, pool_values, long node_limit, double deadline):
    """Run the node loop; see ``engine.Solver._search_py`` for the reference.

    ``selection``: 0 best-bound, 1 depth-first, 2 breadth-first.
    ``node_limit`` < 0 means unlimited.  Returns a dict of counters and the
    incumbent.
    """
    cdef Py_ssize_t n = linear.shape[0], s, c, v, k, i, p, npool
    cdef _Tree tree = _Tree(n)
    cdef double[::1] lin = np.empty(max(n, 1))
    cdef double b, fx, inc = incumbent_value, root_bound
    cdef long fe, nodes = 0, next_id = 0, cb_acc = 0, cb_rej = 0, leaves = 0
    cdef int status = 0, val
    cdef bint ok
    inc_arr = np.zeros(n, dtype=np.uint8) if incumbent_bits is None else np.array(incumbent_bits, dtype=np.uint8)
    cdef cnp.uint8_t[::1] incb = inc_arr
    cdef bint have_inc = incumbent_bits is not None
    cdef const cnp.uint8_t[:, ::1] pb
    cdef const double[::1] pv
    if pool_bits is not None and len(pool_bits):
        pb = np.ascontiguousarray(pool_bits, dtype=np.uint8)
        pv = np.ascontiguousarray(pool_values, dtype=np.float64)
        npool = pb.shape[0]
    else:
        npool = 0

    s = tree.alloc()
    tree.states[s, :] = -1
    b = _bound(linear, indptr, indices, weights, &tree.states[s, 0], n, lin, &fx, &fe)
    tree.bound[s] = b + offset
    root_bound = tree.bound[s]
    tree.depth[s] = 0
    tree.nid[s] = next_id
    next_id += 1
    tree.free_edges[s] = fe
    tree.key[s] = tree.bound[s] if selection == 0 else 0.0
    tree.push(s)

    while tree.size:
        if _now() >= deadline:
            status = 1
            break
        if node_limit >= 0 and nodes >= node_limit:
            status = 2
            break
        s = tree.pop()
        if tree.bound[s] >= inc:
            tree.release(s)
            continue
        nodes += 1

        if npool:
            for k in range(npool):
                ok = True
                for i in range(n):
                    if tree.states[s, i] != -1 and tree.states[s, i] != pb[k, i]:
                        ok = False
                        break
                if ok:
                    if pv[k] < inc:
                        inc = pv[k]
                        incb[:] = pb[k]
                        have_inc = True
                        cb_acc += 1
                    else:
                        cb_rej += 1
                    break

        if tree.free_edges[s] == 0:
            b = _bound(linear, indptr, indices, weights, &tree.states[s, 0], n, lin, &fx, &fe)
            b = b + offset
            leaves += 1
            if b < inc:
                inc = b
                for i in range(n):
                    if tree.states[s, i] == -1:
                        incb[i] = 1 if lin[i] < 0.0 else 0
                    else:
                        incb[i] = tree.states[s, i]
                have_inc = True
            tree.release(s)
            continue

        v = -1
        for k in range(n):
            if tree.states[s, order[k]] == -1:
                v = order[k]
                break
        for val in range(2):
            c = tree.alloc()
            tree.states[c, :] = tree.states[s, :]
            tree.states[c, v] = val
            b = _bound(linear, indptr, indices, weights, &tree.states[c, 0], n, lin, &fx, &fe)
            b = b + offset
            if b < tree.bound[s]:
                b = tree.bound[s]
            tree.bound[c] = b
            tree.depth[c] = tree.depth[s] + 1
            tree.nid[c] = next_id
            next_id += 1
            tree.free_edges[c] = fe
            if selection == 0:
                tree.key[c] = b
            elif selection == 1:
                tree.key[c] = -<double>tree.depth[c]
            else:
                tree.key[c] = <double>tree.depth[c]
            if b < inc:
                tree.push(c)
            else:
                tree.release(c)
        tree.release(s)

    return {
        "status": status,
        "nodes": nodes,
        "incumbent_value": inc,
        "incumbent": inc_arr if have_inc else None,
        "callback_accepted": cb_acc,
        "callback_rejected": cb_rej,
        "root_bound": root_bound,
        "frontier": tree.size,
    }
