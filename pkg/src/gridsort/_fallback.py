"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

Semantics and random-number consumption match the compiled versions, so
for tie-free inputs both backends return identical results.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix_next(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _randbelow(state: int, n: int) -> tuple[int, int]:
    state, z = splitmix_next(state)
    return state, z % n


SCALAR_LAP_LIMIT = 48


def lapjv(cost) -> np.ndarray:
    """Column assigned to each row in the minimum-cost assignment.

    Small matrices (FLAS candidate sets) go through a scalar port of the
    compiled solver, so ties are broken exactly as there. Larger ones use a
    vectorized shortest-augmenting-path solver: same optimal cost, but the
    choice among equal-cost optima may differ from the compiled backend.
    """
    c = np.ascontiguousarray(cost, dtype=np.float64)
    n = c.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    if n <= SCALAR_LAP_LIMIT:
        return np.array(_lapjv_scalar(c.tolist(), n), dtype=np.int64)
    return _lapjv_dense(c)


def _lapjv_scalar(c: list[list[float]], n: int) -> list[int]:
    inf = float("inf")
    rowsol = [-1] * n
    colsol = [-1] * n
    matches = [0] * n
    v = [0.0] * n

    # column reduction
    for j in range(n - 1, -1, -1):
        mn = c[0][j]
        i0 = 0
        for i in range(1, n):
            if c[i][j] < mn:
                mn = c[i][j]
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
    freelist = []
    for i in range(n):
        if matches[i] == 0:
            freelist.append(i)
        elif matches[i] == 1:
            j1 = rowsol[i]
            ci = c[i]
            mn = inf
            for j in range(n):
                if j != j1 and ci[j] - v[j] < mn:
                    mn = ci[j] - v[j]
            v[j1] = v[j1] - mn

    # augmenting row reduction, two sweeps, step-capped
    max_steps = 8 * n + 64
    numfree = len(freelist)
    freelist += [0] * (n - numfree)
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
            ci = c[i]
            umin = ci[0] - v[0]
            j1 = 0
            j2 = 0
            usubmin = inf
            for j in range(1, n):
                h = ci[j] - v[j]
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
    d = [0.0] * n
    pred = [0] * n
    for f in range(numfree):
        freerow = freelist[f]
        cf = c[freerow]
        for j in range(n):
            d[j] = cf[j] - v[j]
            pred[j] = freerow
        collist = list(range(n))
        low = up = last = 0
        endofpath = -1
        mn = 0.0
        found = False
        while not found:
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
                        found = True
                        break
            if not found:
                j1 = collist[low]
                low += 1
                i = colsol[j1]
                ci = c[i]
                h = ci[j1] - v[j1] - mn
                for k in range(up, n):
                    j = collist[k]
                    v2 = ci[j] - v[j] - h
                    if v2 < d[j]:
                        pred[j] = i
                        if v2 == mn:
                            if colsol[j] < 0:
                                endofpath = j
                                found = True
                                break
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
    return rowsol


def _lapjv_dense(c: np.ndarray) -> np.ndarray:
    """Shortest augmenting paths with a JV column-reduction start.

    The augmentation step is vectorized over columns; dual potentials are kept
    feasible throughout, so the result is an exact optimum.
    """
    n = c.shape[0]

    # column reduction: v_j = min_i c_ij, greedy matching where uncontested
    v = c.min(axis=0)
    u = np.zeros(n)
    rowsol = np.full(n, -1, dtype=np.int64)
    colsol = np.full(n, -1, dtype=np.int64)
    argmins = c.argmin(axis=0)
    for j in range(n - 1, -1, -1):
        i = argmins[j]
        if rowsol[i] < 0:
            rowsol[i] = j
            colsol[j] = i
    # u_i = min_j (c_ij - v_j) keeps every reduced cost nonnegative
    u = (c - v[None, :]).min(axis=1)
    for i in np.nonzero(rowsol >= 0)[0]:
        if c[i, rowsol[i]] - v[rowsol[i]] != u[i]:
            colsol[rowsol[i]] = -1
            rowsol[i] = -1

    for free_row in np.nonzero(rowsol < 0)[0]:
        dist = c[free_row] - u[free_row] - v
        pred = np.full(n, free_row, dtype=np.int64)
        scanned = np.zeros(n, dtype=bool)
        settled_order = []
        while True:
            masked = np.where(scanned, np.inf, dist)
            j = int(np.argmin(masked))
            delta = masked[j]
            scanned[j] = True
            settled_order.append(j)
            if colsol[j] < 0:
                end = j
                break
            i = colsol[j]
            cand = delta + c[i] - u[i] - v
            better = (~scanned) & (cand < dist)
            dist[better] = cand[better]
            pred[better] = i
        settled = np.array(settled_order[:-1], dtype=np.int64)
        # dual update over the settled columns keeps reduced costs >= 0
        v[settled] += dist[settled] - delta
        u[free_row] += delta
        if settled.size:
            rows = colsol[settled]
            u[rows] += delta - dist[settled]
        j = end
        while True:
            i = pred[j]
            colsol[j] = i
            j_next = rowsol[i]
            rowsol[i] = j
            if i == free_row:
                break
            j = j_next
    return rowsol


def _wrap(a: int, m: int) -> int:
    return a % m


def flas_pass(
    inputs: np.ndarray,
    map_vectors: np.ndarray,
    index_grid: np.ndarray,
    swappable: np.ndarray,
    swappable_cells: np.ndarray,
    width: int,
    height: int,
    torus: bool,
    n_candidates: int,
    half_window: int,
    iterations: int,
    rng_state: int,
) -> int:
    state = int(rng_state)
    n_swap = swappable_cells.shape[0]
    if n_swap < 2 or n_candidates < 2:
        return state
    dim = inputs.shape[1]
    for _ in range(iterations):
        state, r = _randbelow(state, n_swap)
        seed = int(swappable_cells[r])
        sx, sy = seed % width, seed // width
        if torus and 2 * half_window + 1 >= width:
            x0, wx = 0, width
        elif torus:
            x0, wx = sx - half_window, 2 * half_window + 1
        else:
            x0 = max(sx - half_window, 0)
            wx = min(sx + half_window, width - 1) - x0 + 1
        if torus and 2 * half_window + 1 >= height:
            y0, wy = 0, height
        elif torus:
            y0, wy = sy - half_window, 2 * half_window + 1
        else:
            y0 = max(sy - half_window, 0)
            wy = min(sy + half_window, height - 1) - y0 + 1

        cands = [seed]
        tries = 0
        cap = 16 * n_candidates
        while len(cands) < n_candidates and tries < cap:
            tries += 1
            state, rx = _randbelow(state, wx)
            state, ry = _randbelow(state, wy)
            cell = _wrap(y0 + ry, height) * width + _wrap(x0 + rx, width)
            if swappable[cell] and cell not in cands:
                cands.append(cell)
        if len(cands) < n_candidates:
            pool = []
            for yy in range(wy):
                for xx in range(wx):
                    cell = _wrap(y0 + yy, height) * width + _wrap(x0 + xx, width)
                    if swappable[cell] and cell not in cands:
                        pool.append(cell)
            while len(cands) < n_candidates and pool:
                state, t = _randbelow(state, len(pool))
                cands.append(pool[t])
                pool[t] = pool[-1]
                pool.pop()
        k = len(cands)
        if k < 2:
            continue
        cand_arr = np.array(cands, dtype=np.int64)
        old_idx = index_grid[cand_arr].copy()
        src = inputs[old_idx]
        dst = map_vectors[cand_arr]
        cost = np.zeros((k, k))
        for e in range(dim):
            diff = src[:, e][:, None] - dst[:, e][None, :]
            cost = cost + diff * diff
        rowsol = lapjv(cost)
        index_grid[cand_arr[rowsol]] = old_idx
    return state


def som_epoch(
    inputs: np.ndarray,
    map_vectors: np.ndarray,
    active: np.ndarray,
    order: np.ndarray,
    width: int,
    height: int,
    torus: bool,
    radius: int,
    alpha: float,
    blend: bool,
) -> np.ndarray:
    n, dim = inputs.shape
    available = active.astype(bool).copy()
    assign = np.empty(n, dtype=np.int64)
    grid_view = map_vectors.reshape(height, width, dim)
    for i in order:
        x = inputs[i]
        acc = np.zeros(width * height)
        for e in range(dim):
            diff = map_vectors[:, e] - x[e]
            acc = acc + diff * diff
        acc[~available] = np.inf
        best = int(np.argmin(acc))
        available[best] = False
        assign[i] = best
        if not blend:
            continue
        bx, by = best % width, best // width
        if torus:
            ys = np.arange(by - radius, by + radius + 1) % height
            xs = np.arange(bx - radius, bx + radius + 1) % width
        else:
            ys = np.arange(max(by - radius, 0), min(by + radius, height - 1) + 1)
            xs = np.arange(max(bx - radius, 0), min(bx + radius, width - 1) + 1)
        # torus windows wider than the grid revisit cells, as the compiled loop does
        for yy in ys:
            for xx in xs:
                grid_view[yy, xx] = alpha * x + (1.0 - alpha) * grid_view[yy, xx]
    return assign
