# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: dense JV assignment, FLAS local exchanges, SOM epochs.

Each function has a twin in ``_fallback.py``; both consume the same splitmix64
stream so the two backends make identical random choices. The fallback LAP
mirrors this solver line for line on small matrices only.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport INFINITY
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()


cdef inline uint64_t _splitmix_next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline Py_ssize_t _randbelow(uint64_t* state, Py_ssize_t n) noexcept nogil:
    return <Py_ssize_t>(_splitmix_next(state) % <uint64_t>n)


cdef int _lapjv(Py_ssize_t n, const double* c, Py_ssize_t* rowsol) noexcept nogil:
    """Jonker-Volgenant shortest augmenting path on a dense n x n cost matrix.

    Returns 0 on success, -1 on allocation failure.
    """
    cdef Py_ssize_t i, j, k, i0, j1, j2, f, low, up, last, endofpath, freerow
    cdef Py_ssize_t numfree, prvnumfree, loopcnt, steps, max_steps
    cdef double h, umin, usubmin, mn, v2
    cdef bint unassignedfound
    cdef Py_ssize_t* colsol
    cdef Py_ssize_t* freelist
    cdef Py_ssize_t* collist
    cdef Py_ssize_t* matches
    cdef Py_ssize_t* pred
    cdef double* d
    cdef double* v

    if n == 1:
        rowsol[0] = 0
        return 0

    colsol = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    freelist = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    collist = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    matches = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    pred = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    d = <double*>malloc(n * sizeof(double))
    v = <double*>malloc(n * sizeof(double))
    if (colsol == NULL or freelist == NULL or collist == NULL or matches == NULL
            or pred == NULL or d == NULL or v == NULL):
        free(colsol); free(freelist); free(collist); free(matches); free(pred); free(d); free(v)
        return -1

    for i in range(n):
        matches[i] = 0
        rowsol[i] = -1

    # column reduction
    for j in range(n - 1, -1, -1):
        mn = c[j]
        i0 = 0
        for i in range(1, n):
            if c[i * n + j] < mn:
                mn = c[i * n + j]
                i0 = i
        v[j] = mn
        matches[i0] += 1
        if matches[i0] == 1:
            rowsol[i0] = j
            colsol[j] = i0
        elif v[j] < v[rowsol[i0]]:
            j1 = rowsol[i0]
            rowsol[i0] = j
            colsol[j] = i0
            colsol[j1] = -1
        else:
            colsol[j] = -1

    # reduction transfer
    numfree = 0
    for i in range(n):
        if matches[i] == 0:
            freelist[numfree] = i
            numfree += 1
        elif matches[i] == 1:
            j1 = rowsol[i]
            mn = INFINITY
            for j in range(n):
                if j != j1 and c[i * n + j] - v[j] < mn:
                    mn = c[i * n + j] - v[j]
            v[j1] = v[j1] - mn

    # augmenting row reduction, two sweeps, step-capped against float cycling
    max_steps = 8 * n + 64
    loopcnt = 0
    while loopcnt < 2 and numfree > 0:
        loopcnt += 1
        k = 0
        prvnumfree = numfree
        numfree = 0
        steps = 0
        while k < prvnumfree:
            i = freelist[k]
            k += 1
            steps += 1
            if steps > max_steps:
                freelist[numfree] = i
                numfree += 1
                continue
            umin = c[i * n] - v[0]
            j1 = 0
            j2 = 0
            usubmin = INFINITY
            for j in range(1, n):
                h = c[i * n + j] - v[j]
                if h < usubmin:
                    if h >= umin:
                        usubmin = h
                        j2 = j
                    else:
                        usubmin = umin
                        umin = h
                        j2 = j1
                        j1 = j
            i0 = colsol[j1]
            if umin < usubmin:
                v[j1] = v[j1] - (usubmin - umin)
            elif i0 > -1:
                j1 = j2
                i0 = colsol[j2]
            rowsol[i] = j1
            colsol[j1] = i
            if i0 > -1:
                rowsol[i0] = -1
                if umin < usubmin:
                    k -= 1
                    freelist[k] = i0
                else:
                    freelist[numfree] = i0
                    numfree += 1

    # augmentation
    for f in range(numfree):
        freerow = freelist[f]
        for j in range(n):
            d[j] = c[freerow * n + j] - v[j]
            pred[j] = freerow
            collist[j] = j
        low = 0
        up = 0
        last = 0
        endofpath = -1
        mn = 0.0
        unassignedfound = False
        while not unassignedfound:
            if up == low:
                last = low - 1
                mn = d[collist[up]]
                up += 1
                for k in range(up, n):
                    j = collist[k]
                    h = d[j]
                    if h <= mn:
                        if h < mn:
                            up = low
                            mn = h
                        collist[k] = collist[up]
                        collist[up] = j
                        up += 1
                for k in range(low, up):
                    if colsol[collist[k]] < 0:
                        endofpath = collist[k]
                        unassignedfound = True
                        break
            if not unassignedfound:
                j1 = collist[low]
                low += 1
                i = colsol[j1]
                h = c[i * n + j1] - v[j1] - mn
                for k in range(up, n):
                    j = collist[k]
                    v2 = c[i * n + j] - v[j] - h
                    if v2 < d[j]:
                        pred[j] = i
                        if v2 == mn:
                            if colsol[j] < 0:
                                endofpath = j
                                unassignedfound = True
                                break
                            else:
                                collist[k] = collist[up]
                                collist[up] = j
                                up += 1
                        d[j] = v2
        for k in range(last + 1):
            j1 = collist[k]
            v[j1] = v[j1] + d[j1] - mn
        while True:
            i = pred[endofpath]
            colsol[endofpath] = i
            j1 = endofpath
            endofpath = rowsol[i]
            rowsol[i] = j1
            if i == freerow:
                break

    free(colsol); free(freelist); free(collist); free(matches); free(pred); free(d); free(v)
    return 0


def lapjv(cost):
    """Column assigned to each row in the minimum-cost assignment."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    cdef cnp.ndarray[Py_ssize_t, ndim=1] rowsol = np.empty(n, dtype=np.intp)
    cdef int status
    if n == 0:
        return rowsol.astype(np.int64)
    with nogil:
        status = _lapjv(n, &c[0, 0], &rowsol[0])
    if status != 0:
        raise MemoryError("lapjv workspace allocation failed")
    return rowsol.astype(np.int64)


cdef inline Py_ssize_t _wrap(Py_ssize_t a, Py_ssize_t m) noexcept nogil:
    a = a % m
    if a < 0:
        a += m
    return a


cdef inline bint _in_list(const Py_ssize_t* xs, Py_ssize_t k, Py_ssize_t x) noexcept nogil:
    cdef Py_ssize_t t
    for t in range(k):
        if xs[t] == x:
            return True
    return False


def flas_pass(
    const double[:, ::1] inputs,
    const double[:, ::1] map_vectors,
    int64_t[::1] index_grid,
    const unsigned char[::1] swappable,
    const int64_t[::1] swappable_cells,
    Py_ssize_t width,
    Py_ssize_t height,
    bint torus,
    Py_ssize_t n_candidates,
    Py_ssize_t half_window,
    Py_ssize_t iterations,
    uint64_t rng_state,
):
    """Run ``iterations`` local exchanges in place on ``index_grid``.

    Returns the advanced RNG state.
    """
    cdef Py_ssize_t dim = inputs.shape[1]
    cdef Py_ssize_t n_swap = swappable_cells.shape[0]
    cdef Py_ssize_t it, k, a, b, t, e, seed, sx, sy, x0, y0, wx, wy, cell, tries, cap, pool_n
    cdef Py_ssize_t xx, yy, src
    cdef double acc, diff
    cdef uint64_t state = rng_state
    cdef Py_ssize_t win_cells
    cdef Py_ssize_t* cands
    cdef Py_ssize_t* rowsol
    cdef Py_ssize_t* pool
    cdef int64_t* old_idx
    cdef double* cost
    cdef int status = 0

    if n_swap < 2 or n_candidates < 2:
        return state
    win_cells = (2 * half_window + 1) * (2 * half_window + 1)
    cands = <Py_ssize_t*>malloc(n_candidates * sizeof(Py_ssize_t))
    rowsol = <Py_ssize_t*>malloc(n_candidates * sizeof(Py_ssize_t))
    old_idx = <int64_t*>malloc(n_candidates * sizeof(int64_t))
    cost = <double*>malloc(n_candidates * n_candidates * sizeof(double))
    pool = <Py_ssize_t*>malloc(win_cells * sizeof(Py_ssize_t))
    if cands == NULL or rowsol == NULL or old_idx == NULL or cost == NULL or pool == NULL:
        free(cands); free(rowsol); free(old_idx); free(cost); free(pool)
        raise MemoryError("flas workspace allocation failed")

    with nogil:
        for it in range(iterations):
            seed = swappable_cells[_randbelow(&state, n_swap)]
            sx = seed % width
            sy = seed // width
            if torus and 2 * half_window + 1 >= width:
                x0 = 0
                wx = width
            elif torus:
                x0 = sx - half_window
                wx = 2 * half_window + 1
            else:
                x0 = sx - half_window if sx - half_window > 0 else 0
                wx = (sx + half_window if sx + half_window < width - 1 else width - 1) - x0 + 1
            if torus and 2 * half_window + 1 >= height:
                y0 = 0
                wy = height
            elif torus:
                y0 = sy - half_window
                wy = 2 * half_window + 1
            else:
                y0 = sy - half_window if sy - half_window > 0 else 0
                wy = (sy + half_window if sy + half_window < height - 1 else height - 1) - y0 + 1

            cands[0] = seed
            k = 1
            tries = 0
            cap = 16 * n_candidates
            while k < n_candidates and tries < cap:
                tries += 1
                xx = _wrap(x0 + _randbelow(&state, wx), width)
                yy = _wrap(y0 + _randbelow(&state, wy), height)
                cell = yy * width + xx
                if swappable[cell] and not _in_list(cands, k, cell):
                    cands[k] = cell
                    k += 1
            if k < n_candidates:
                pool_n = 0
                for yy in range(wy):
                    for xx in range(wx):
                        cell = _wrap(y0 + yy, height) * width + _wrap(x0 + xx, width)
                        if swappable[cell] and not _in_list(cands, k, cell):
                            pool[pool_n] = cell
                            pool_n += 1
                while k < n_candidates and pool_n > 0:
                    t = _randbelow(&state, pool_n)
                    cands[k] = pool[t]
                    k += 1
                    pool_n -= 1
                    pool[t] = pool[pool_n]
            if k < 2:
                continue

            for a in range(k):
                old_idx[a] = index_grid[cands[a]]
            for a in range(k):
                src = old_idx[a]
                for b in range(k):
                    acc = 0.0
                    for e in range(dim):
                        diff = inputs[src, e] - map_vectors[cands[b], e]
                        acc = acc + diff * diff
                    cost[a * k + b] = acc
            status = _lapjv(k, cost, rowsol)
            if status != 0:
                break
            for a in range(k):
                index_grid[cands[rowsol[a]]] = old_idx[a]

    free(cands); free(rowsol); free(old_idx); free(cost); free(pool)
    if status != 0:
        raise MemoryError("lapjv workspace allocation failed")
    return state


def som_epoch(
    const double[:, ::1] inputs,
    double[:, ::1] map_vectors,
    const unsigned char[::1] active,
    const int64_t[::1] order,
    Py_ssize_t width,
    Py_ssize_t height,
    bint torus,
    Py_ssize_t radius,
    double alpha,
    bint blend,
):
    """One SOM pass: each input, in ``order``, takes the closest free active cell.

    With ``blend`` the cell's square neighborhood moves toward the input by
    ``alpha``. Returns the flat cell chosen for every input.
    """
    cdef Py_ssize_t n = inputs.shape[0]
    cdef Py_ssize_t dim = inputs.shape[1]
    cdef Py_ssize_t n_cells = width * height
    cdef Py_ssize_t t, i, cell, best, e, bx, by, ox, oy, xx, yy, tgt
    cdef double acc, diff, best_d
    cdef cnp.ndarray[int64_t, ndim=1] assign_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] assign = assign_arr
    cdef cnp.ndarray[unsigned char, ndim=1] taken_arr = np.zeros(n_cells, dtype=np.uint8)
    cdef unsigned char[::1] taken = taken_arr

    with nogil:
        for t in range(n):
            i = order[t]
            best = -1
            best_d = INFINITY
            for cell in range(n_cells):
                if not active[cell] or taken[cell]:
                    continue
                acc = 0.0
                for e in range(dim):
                    diff = map_vectors[cell, e] - inputs[i, e]
                    acc = acc + diff * diff
                if acc < best_d:
                    best_d = acc
                    best = cell
            taken[best] = 1
            assign[i] = best
            if not blend:
                continue
            bx = best % width
            by = best // width
            for oy in range(-radius, radius + 1):
                yy = by + oy
                if torus:
                    yy = _wrap(yy, height)
                elif yy < 0 or yy >= height:
                    continue
                for ox in range(-radius, radius + 1):
                    xx = bx + ox
                    if torus:
                        xx = _wrap(xx, width)
                    elif xx < 0 or xx >= width:
                        continue
                    tgt = yy * width + xx
                    for e in range(dim):
                        map_vectors[tgt, e] = alpha * inputs[i, e] + (1.0 - alpha) * map_vectors[tgt, e]
    return assign_arr
