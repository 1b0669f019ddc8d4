"""Pure numpy implementations of the hot kernels.

Each function mirrors ``vecmap._ext`` operation for operation, including
summation order, so both backends return bit-identical floats.
"""

import numpy as np

BACKEND = "python"


def best_permutation_costs(preds, gt, perms):
    """Minimum Manhattan cost of each prediction over a permutation group.

    ``preds`` is ``(n, n_points, 2)``, ``gt`` is ``(n_points, 2)`` and
    ``perms`` is ``(k, n_points)``. Returns ``(costs, argmin)`` of length n.
    Among tied permutations the one whose target sequence ``gt[perm]`` is
    lexicographically smallest (x before y, point by point) wins, so the
    choice depends only on geometry and not on how ``gt`` is indexed.
    Identical target sequences fall back to the lowest index.
    """
    preds = np.ascontiguousarray(preds, dtype=np.float64)
    gt = np.ascontiguousarray(gt, dtype=np.float64)
    perms = np.asarray(perms, dtype=np.intp)
    absdiff = np.abs(preds[:, None, :, :] - gt[perms][None, :, :, :])
    per_point = absdiff[..., 0] + absdiff[..., 1]
    acc = np.zeros(per_point.shape[:2])
    for j in range(per_point.shape[2]):
        acc = acc + per_point[:, :, j]
    best_cost = acc.min(axis=1)
    keys = gt[perms].reshape(len(perms), -1)
    best = np.empty(len(acc), dtype=np.intp)
    for i in range(len(acc)):
        tied = np.flatnonzero(acc[i] == best_cost[i])
        if len(tied) > 1:
            # lexsort treats its last key as primary
            tied = tied[np.lexsort(keys[tied].T[::-1])]
        best[i] = tied[0]
    return best_cost, best


def _mean_nearest(a, b):
    d = np.sqrt((a[:, None, 0] - b[None, :, 0]) ** 2 + (a[:, None, 1] - b[None, :, 1]) ** 2)
    nearest = d.min(axis=1)
    return np.cumsum(nearest)[-1] / len(a)


def chamfer(a, b):
    """Symmetric mean nearest-neighbour distance between two point sets."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return 0.5 * (_mean_nearest(a, b) + _mean_nearest(b, a))


def lsa_square(cost):
    """Shortest-augmenting-path assignment on a square matrix.

    Returns ``(col_of_row, u, v)`` where ``u``/``v`` are dual potentials:
    ``cost[i, j] - u[i] - v[j] >= 0`` everywhere, with equality on the
    assignment.
    """
    a = np.ascontiguousarray(cost, dtype=np.float64)
    n = a.shape[0]
    # 1-based bookkeeping; index 0 is the virtual source column.
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of_col = np.zeros(n + 1, dtype=np.intp)
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            free = ~used[1:]
            cur = (a[i0 - 1, :] - u[i0]) - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            used_idx = np.flatnonzero(used)
            u[row_of_col[used_idx]] += delta
            v[used_idx] -= delta
            minv[~used] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while True:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.intp)
    col_of_row[row_of_col[1:] - 1] = np.arange(n)
    return col_of_row, u[1:].copy(), v[1:].copy()
