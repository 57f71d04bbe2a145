"""Offline oracles: MST weight, exact shortest covering walk, doubling walk.

All oracles first collapse the input to its distinct points (distance-0
classes), since the optimal walk is invariant under repetitions.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .metric import REL_TOL, EuclideanSpace, MatrixSpace, MetricSpace, UniformSpace

EXACT_CAP = 18
BRUTE_FORCE_CAP = 8

class OracleCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class TourBounds:
    mst: float
    lower: float
    upper: float
    exact: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


# Per-kind distance kernels over a packed per-point table `pt`:
#   euclidean: coordinates; uniform: (label, spoke); matrix: (row,) into `mtx`.
@njit(cache=True)
def _d_euclidean(pt, mtx, i, j):
    s = 0.0
    for t in range(pt.shape[1]):
        diff = pt[i, t] - pt[j, t]
        s += diff * diff
    return np.sqrt(s)


@njit(cache=True)
def _d_uniform(pt, mtx, i, j):
    if pt[i, 0] == pt[j, 0]:
        return 0.0
    return pt[i, 1] + pt[j, 1]


@njit(cache=True)
def _d_matrix(pt, mtx, i, j):
    return mtx[int(pt[i, 0]), int(pt[j, 0])]


@njit(cache=True)
def _pair_less(a, b, c, d):
    # (min(a,b), max(a,b)) < (min(c,d), max(c,d)) lexicographically
    lo1, hi1 = min(a, b), max(a, b)
    lo2, hi2 = min(c, d), max(c, d)
    return lo1 < lo2 or (lo1 == lo2 and hi1 < hi2)


@njit(cache=True)
def _swap_pos(pid, pkey, ppar, pt, i, j):
    pid[i], pid[j] = pid[j], pid[i]
    pkey[i], pkey[j] = pkey[j], pkey[i]
    ppar[i], ppar[j] = ppar[j], ppar[i]
    for t in range(pt.shape[1]):
        x = pt[i, t]
        pt[i, t] = pt[j, t]
        pt[j, t] = x


@njit(cache=True)
def _prim(dist, ids, table, mtx):
    # Vertices outside the tree occupy positions 0..m-1; all per-vertex arrays
    # are permuted in place so the inner scan reads memory sequentially.
    k = ids.shape[0]
    pid = np.arange(k)
    pkey = np.full(k, np.inf)
    ppar = np.full(k, -1, np.int64)
    pt = table.copy()
    m = k - 1
    _swap_pos(pid, pkey, ppar, pt, 0, m)  # local index 0 (smallest id) is the root
    u = m
    total = 0.0
    for step in range(1, k):
        uid = ids[pid[u]]
        best = 0
        bkey = np.inf
        for pos in range(m):
            d = dist(pt, mtx, u, pos)
            kv = pkey[pos]
            if d < kv:
                pkey[pos] = d
                ppar[pos] = pid[u]
                kv = d
            elif d == kv and _pair_less(uid, ids[pid[pos]], ids[ppar[pos]], ids[pid[pos]]):
                ppar[pos] = pid[u]
            if kv < bkey:
                best = pos
                bkey = kv
            elif kv == bkey and _pair_less(ids[ppar[pos]], ids[pid[pos]], ids[ppar[best]], ids[pid[best]]):
                best = pos
        total += pkey[best]
        m -= 1
        _swap_pos(pid, pkey, ppar, pt, best, m)
        u = m
    parent = np.full(k, -1, np.int64)
    for pos in range(k):
        parent[pid[pos]] = ppar[pos]
    order = pid[::-1].copy()
    return total, parent, order


def _kernel_args(space: MetricSpace, reps: np.ndarray):
    none = np.empty((0, 0))
    if isinstance(space, EuclideanSpace):
        return _d_euclidean, np.ascontiguousarray(space.coords[reps]), none
    if isinstance(space, UniformSpace):
        table = np.stack([space.labels[reps].astype(float), space.spokes[reps]], axis=1)
        return _d_uniform, table, none
    if isinstance(space, MatrixSpace):
        table = space.rows[reps].astype(float)[:, None]
        return _d_matrix, table, np.ascontiguousarray(space.matrix)
    raise TypeError(f"unsupported space {space!r}")


def _as_ids(X) -> np.ndarray:
    if isinstance(X, np.ndarray):
        return X.astype(np.int64, copy=False)
    return np.fromiter(X, dtype=np.int64)


def _distinct_nonempty(space, X) -> np.ndarray:
    ids = _as_ids(X)
    if ids.size == 0:
        raise ValueError("point set is empty")
    if ids.min() < 0 or ids.max() >= len(space):
        raise KeyError("point set contains unknown PointIds")
    return space.distinct(ids)


def minimum_spanning_tree(space: MetricSpace, X):
    """Prim's algorithm on the complete graph over the distinct points of ``X``.

    Returns ``(weight, edges)`` with edges as ``(parent_id, child_id)`` pairs in
    the order Prim adds them.  The root is the smallest id; among equal-weight
    candidate edges the lexicographically smaller ``(min id, max id)`` pair wins.
    """
    reps = _distinct_nonempty(space, X)
    if reps.size == 1:
        return 0.0, []
    dist, table, mtx = _kernel_args(space, reps)
    total, parent, order = _prim(dist, reps, table, mtx)
    edges = [(int(reps[parent[v]]), int(reps[v])) for v in order[1:]]
    return float(total), edges


def mst_weight(space: MetricSpace, X) -> float:
    return minimum_spanning_tree(space, X)[0]


def _distance_matrix(space, reps) -> np.ndarray:
    k = reps.size
    a = np.repeat(reps, k)
    b = np.tile(reps, k)
    return space.pair_distances(a, b).reshape(k, k)


def held_karp_path(D: np.ndarray) -> float:
    """Shortest Hamiltonian path length (free endpoints) for distance matrix ``D``."""
    k = D.shape[0]
    if k <= 1:
        return 0.0
    full = 1 << k
    dp = np.full((full, k), np.inf)
    singles = np.arange(k)
    dp[1 << singles, singles] = 0.0
    masks = np.arange(full, dtype=np.int64)
    popcount = np.zeros(full, dtype=np.int64)
    for bit in range(k):
        popcount += (masks >> bit) & 1
    for size in range(1, k):
        layer = masks[popcount == size]
        cur = dp[layer]
        for j in range(k):
            free = ((layer >> j) & 1) == 0
            src = layer[free]
            if src.size == 0:
                continue
            vals = (cur[free] + D[:, j]).min(axis=1)
            dst = src | (1 << j)
            dp[dst, j] = np.minimum(dp[dst, j], vals)
    return float(dp[full - 1].min())


def exact_opt(space: MetricSpace, X, cap: int = EXACT_CAP) -> float:
    """Length of a shortest walk visiting every point of ``X`` (Held-Karp)."""
    reps = _distinct_nonempty(space, X)
    if reps.size > cap:
        raise OracleCapExceeded(f"{reps.size} distinct points exceed the exact-OPT cap of {cap}")
    return held_karp_path(_distance_matrix(space, reps))


def brute_force_opt(space: MetricSpace, X, cap: int = BRUTE_FORCE_CAP) -> float:
    """Shortest covering walk by enumerating every visiting order."""
    reps = _distinct_nonempty(space, X)
    k = reps.size
    if k > cap:
        raise OracleCapExceeded(f"{k} distinct points exceed the brute-force cap of {cap}")
    if k == 1:
        return 0.0
    D = _distance_matrix(space, reps)
    perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
    total = D[perms[:, 0], perms[:, 1]]
    for t in range(1, k - 1):
        total = total + D[perms[:, t], perms[:, t + 1]]
    return float(total.min())


def doubling_walk(space: MetricSpace, X):
    """Preorder walk of the MST with shortcutting; length is at most 2 * MST."""
    weight, edges = minimum_spanning_tree(space, X)
    reps = space.distinct(_as_ids(X))
    root = int(reps[0])
    children: dict[int, list[int]] = {}
    for p, c in edges:
        children.setdefault(p, []).append(c)
    walk = []
    stack = [root]
    while stack:
        v = stack.pop()
        walk.append(v)
        stack.extend(sorted(children.get(v, ()), reverse=True))
    if len(walk) < 2:
        return walk, 0.0
    legs = space.pair_distances(walk[:-1], walk[1:])
    return walk, float(np.cumsum(legs)[-1])


def opt_bounds(space: MetricSpace, X, want_exact: bool = False, cap: int = EXACT_CAP) -> TourBounds:
    reps = _distinct_nonempty(space, X)
    mst = mst_weight(space, reps)
    _, walk_len = doubling_walk(space, reps)
    upper = min(2 * mst, walk_len)
    exact = None
    if want_exact and reps.size <= cap:
        exact = held_karp_path(_distance_matrix(space, reps))
    return TourBounds(mst=mst, lower=mst, upper=upper, exact=exact)


def sandwich_holds(mst: float, opt: float, rtol: float = REL_TOL) -> bool:
    slack = rtol * max(opt, mst)
    return mst <= opt + slack and opt <= 2 * mst + slack


def within_ratio(cost: float, factor: float, reference: float, rtol: float = REL_TOL) -> bool:
    """``cost <= factor * reference`` up to relative tolerance."""
    bound = factor * reference
    return cost <= bound + rtol * max(bound, cost)
