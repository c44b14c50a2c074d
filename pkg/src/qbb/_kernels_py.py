"""Pure-Python kernels.  Reference semantics for ``_kernels.pyx``.

Both implementations perform the same floating-point operations in the same
order, so results are bit-identical across backends.  All randomness is
drawn by the caller and passed in.
"""

import math

import numpy as np

IMPROVE_TOL = 1e-12


def flip_deltas(linear, indptr, indices, weights, x):
    n = len(linear)
    lin = linear.tolist()
    ptr = indptr.tolist()
    nbr = indices.tolist()
    w = weights.tolist()
    xs = [int(v) for v in x]
    out = np.empty(n)
    for i in range(n):
        field = lin[i]
        for p in range(ptr[i], ptr[i + 1]):
            if xs[nbr[p]]:
                field += w[p]
        out[i] = -field if xs[i] else field
    return out


def descend(linear, indptr, indices, weights, x):
    ptr = indptr.tolist()
    nbr = indices.tolist()
    w = weights.tolist()
    xs = [int(v) for v in x]
    delta = flip_deltas(linear, indptr, indices, weights, x).tolist()
    n = len(xs)
    while True:
        best = -IMPROVE_TOL
        v = -1
        for i in range(n):
            if delta[i] < best:
                best = delta[i]
                v = i
        if v < 0:
            break
        _apply_flip(v, xs, delta, ptr, nbr, w)
    return np.array(xs, dtype=np.uint8)


def _apply_flip(v, xs, delta, ptr, nbr, w):
    # flipping v changes the field of each neighbour j by +-w_vj
    step = 1 - 2 * xs[v]
    xs[v] = 1 - xs[v]
    delta[v] = -delta[v]
    for p in range(ptr[v], ptr[v + 1]):
        j = nbr[p]
        if xs[j]:
            delta[j] -= step * w[p]
        else:
            delta[j] += step * w[p]


def anneal(linear, indptr, indices, weights, x0, order, uniforms, temps):
    lin = linear.tolist()
    ptr = indptr.tolist()
    nbr = indices.tolist()
    w = weights.tolist()
    reads, n = x0.shape
    sweeps = len(temps)
    best_out = np.empty((reads, n), dtype=np.uint8)
    t_list = temps.tolist()
    for r in range(reads):
        xs = [int(v) for v in x0[r]]
        best = list(xs)
        energy = 0.0
        best_energy = 0.0
        ord_r = order[r].tolist()
        u_r = uniforms[r].tolist()
        for s in range(sweeps):
            t = t_list[s]
            ord_s = ord_r[s]
            u_s = u_r[s]
            for k in range(n):
                i = ord_s[k]
                field = lin[i]
                for p in range(ptr[i], ptr[i + 1]):
                    if xs[nbr[p]]:
                        field += w[p]
                d = -field if xs[i] else field
                if d <= 0.0 or u_s[k] < math.exp(-d / t):
                    xs[i] = 1 - xs[i]
                    energy += d
                    if energy < best_energy:
                        best_energy = energy
                        best = list(xs)
        best_out[r] = best
    return best_out


def tabu(linear, indptr, indices, weights, x0, iterations, tenure):
    ptr = indptr.tolist()
    nbr = indices.tolist()
    w = weights.tolist()
    reads, n = x0.shape
    best_out = np.empty((reads, n), dtype=np.uint8)
    for r in range(reads):
        xs = [int(v) for v in x0[r]]
        delta = flip_deltas(linear, indptr, indices, weights, x0[r]).tolist()
        until = [0] * n
        best = list(xs)
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
            _apply_flip(v, xs, delta, ptr, nbr, w)
            until[v] = it + tenure
            energy += vd
            if energy < best_energy - IMPROVE_TOL:
                best_energy = energy
                best = list(xs)
        best_out[r] = best
    return best_out


def node_bound(linear, indptr, indices, weights, states, lin_out):
    """Term-wise bound of the subproblem left by ``states``.

    Writes effective linear coefficients of free variables to ``lin_out``
    and returns ``(fixed_value, bound, free_edges)`` where ``bound``
    excludes the model offset.
    """
    lin = linear.tolist()
    ptr = indptr.tolist()
    nbr = indices.tolist()
    w = weights.tolist()
    st = states.tolist()
    n = len(st)
    fixed_value = 0.0
    for i in range(n):
        if st[i] == 1:
            fixed_value += lin[i]
            for p in range(ptr[i], ptr[i + 1]):
                j = nbr[p]
                if j > i and st[j] == 1:
                    fixed_value += w[p]
    bound = fixed_value
    free_edges = 0
    for i in range(n):
        if st[i] != -1:
            lin_out[i] = 0.0
            continue
        eff = lin[i]
        for p in range(ptr[i], ptr[i + 1]):
            j = nbr[p]
            s = st[j]
            if s == 1:
                eff += w[p]
            elif s == -1 and j > i:
                free_edges += 1
                if w[p] < 0.0:
                    bound += w[p]
        lin_out[i] = eff
        if eff < 0.0:
            bound += eff
    return fixed_value, bound, free_edges
