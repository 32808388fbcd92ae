"""Closed-form patch velocity field and its top-k / memory approximations.

The velocity that carries a noisy patch to the exemplar patch distribution
is a Gaussian-mixture expectation over exemplar patches:

    v(psi, t) = 1/(1-t) * sum_j w_j * (phi_j - psi),
    w_j proportional to exp(-||psi - t*phi_j||^2 / (2*(1-t)^2)).

For speed the mixture is restricted to the k nearest exemplar patches of
(1/t)*psi, searched within a random candidate subset augmented by a per-patch
memory of the best matches seen so far. Ranking by ||psi/t - phi|| is
equivalent to ranking by ||psi - t*phi|| (the two differ by the factor t).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .patches import PatchSet

# Below this time the (1/t) query is singular; the velocity falls back to the
# uniform mixture over the whole candidate pool (at t=0 all weights tie anyway).
T_EPS = 1e-6

# Cap on rows*cols of a pairwise distance block, to bound peak memory.
_BLOCK_BUDGET = 4_000_000


def sample_candidates(pset: PatchSet | np.ndarray, ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ceil(ratio * N) distinct patch indices, returned sorted ascending.

    ratio=1 returns every index without consuming the RNG.
    """
    n = len(pset) if isinstance(pset, PatchSet) else int(np.asarray(pset).shape[0])
    if n == 0:
        raise ValueError("cannot sample candidates from an empty patch set")
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    if ratio == 1:
        return np.arange(n, dtype=np.int64)
    m = int(np.ceil(ratio * n))
    idx = rng.choice(n, size=m, replace=False)
    return np.sort(idx.astype(np.int64))


def _pairwise_sqdist(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (len(queries), len(refs))."""
    q2 = np.einsum("ij,ij->i", queries, queries)
    r2 = np.einsum("ij,ij->i", refs, refs)
    d = q2[:, None] - 2.0 * (queries @ refs.T) + r2[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _merge_topk(idx_a, dist_a, idx_b, dist_b, k: int):
    """Row-wise k best of two (index, distance) candidate lists.

    Entries with index < 0 are ignored. Duplicate indices within a row keep
    their smallest distance. Order is by (distance, index) ascending, so ties
    resolve to the lower patch index. Rows with fewer than k valid entries are
    padded by repeating their best entry.
    """
    idx = np.concatenate([idx_a, idx_b], axis=1)
    dist = np.concatenate([dist_a, dist_b], axis=1).copy()
    invalid = idx < 0
    dist[invalid] = np.inf
    sort_key = np.where(invalid, np.iinfo(np.int64).max, idx)

    # Two stable passes give ordering by (index, distance); the first kept
    # duplicate of an index is then its minimum distance.
    o = np.argsort(dist, axis=1, kind="stable")
    idx = np.take_along_axis(idx, o, axis=1)
    dist = np.take_along_axis(dist, o, axis=1)
    sort_key = np.take_along_axis(sort_key, o, axis=1)
    o = np.argsort(sort_key, axis=1, kind="stable")
    idx = np.take_along_axis(idx, o, axis=1)
    dist = np.take_along_axis(dist, o, axis=1)

    dup = idx[:, 1:] == idx[:, :-1]
    dist[:, 1:][dup] = np.inf

    # Final stable sort by distance keeps index-ascending order among ties.
    o = np.argsort(dist, axis=1, kind="stable")
    idx = np.take_along_axis(idx, o, axis=1)[:, :k]
    dist = np.take_along_axis(dist, o, axis=1)[:, :k]

    pad = ~np.isfinite(dist)
    if pad.any():
        if pad[:, 0].any():
            raise ValueError("a row has no valid candidate to select from")
        idx = np.where(pad, idx[:, :1], idx)
        dist = np.where(pad, dist[:, :1], dist)
    return idx, dist


def _topk_pool(queries: np.ndarray, refs: np.ndarray, pool_idx: np.ndarray, k: int,
               workers: int = 1):
    """Exact k smallest squared distances from each query to refs[pool_idx].

    pool_idx must be sorted ascending so that distance ties resolve to the
    lower patch index under the stable sort. Returns (idx, dist) of shape
    (n_queries, min(k, pool size)).
    """
    pool = refs[pool_idx]
    m = queries.shape[0]
    kk = min(k, pool.shape[0])
    out_idx = np.empty((m, kk), dtype=np.int64)
    out_dist = np.empty((m, kk))

    # Chunk size depends only on the problem shape, never on the worker
    # count, so results are identical for any `workers`.
    chunk = max(1, min(m, _BLOCK_BUDGET // max(1, pool.shape[0])))
    starts = range(0, m, chunk)

    def run(s: int) -> None:
        e = min(m, s + chunk)
        d = _pairwise_sqdist(queries[s:e], pool)
        o = np.argsort(d, axis=1, kind="stable")[:, :kk]
        out_idx[s:e] = pool_idx[o]
        out_dist[s:e] = np.take_along_axis(d, o, axis=1)

    if workers > 1 and m > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out_idx, out_dist


def knn(query: np.ndarray, candidate_idx, pset: PatchSet | np.ndarray, k: int):
    """Exact brute-force k nearest patches among the given candidate indices.

    Returns (indices, squared_distances), each of length k, ordered by
    (distance, index). Duplicate candidate indices count once. If fewer than
    k distinct candidates exist, the best match is repeated to pad.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    refs = pset.patches if isinstance(pset, PatchSet) else np.asarray(pset, dtype=np.float64)
    cand = np.unique(np.asarray(candidate_idx, dtype=np.int64))
    if cand.size == 0:
        raise ValueError("candidate index list is empty")
    if cand.min() < 0 or cand.max() >= refs.shape[0]:
        raise ValueError("candidate index out of range")
    q = np.asarray(query, dtype=np.float64).reshape(1, -1)
    idx, dist = _topk_pool(q, refs, cand, k)
    if idx.shape[1] < k:
        reps = k - idx.shape[1]
        idx = np.concatenate([idx, np.repeat(idx[:, :1], reps, axis=1)], axis=1)
        dist = np.concatenate([dist, np.repeat(dist[:, :1], reps, axis=1)], axis=1)
    return idx[0], dist[0]


class MemoryTable:
    """Per-synthesis-patch record of the best reference matches seen so far.

    Each row holds up to k (index, squared distance) pairs sorted by distance.
    Rows are only ever improved: an update merges new matches with the stored
    ones and keeps the k best, so the per-row best distance never increases.
    """

    def __init__(self, n_rows: int, k: int):
        if n_rows < 1 or k < 1:
            raise ValueError("MemoryTable needs n_rows >= 1 and k >= 1")
        self.k = k
        self.idx = np.full((n_rows, k), -1, dtype=np.int64)
        self.sqdist = np.full((n_rows, k), np.inf)

    def __len__(self) -> int:
        return self.idx.shape[0]

    @property
    def best_sqdist(self) -> np.ndarray:
        return self.sqdist[:, 0]

    def valid_rows(self) -> np.ndarray:
        return self.idx[:, 0] >= 0

    def update(self, new_idx: np.ndarray, new_sqdist: np.ndarray) -> None:
        """Merge a (n_rows, m) batch of matches into the table, keeping the
        k best per row by stored distance."""
        new_idx = np.atleast_2d(np.asarray(new_idx, dtype=np.int64))
        new_sqdist = np.atleast_2d(np.asarray(new_sqdist, dtype=np.float64))
        if new_idx.shape != new_sqdist.shape or new_idx.shape[0] != len(self):
            raise ValueError("match arrays must share shape (n_rows, m)")
        merged_idx, merged_dist = _merge_topk(self.idx, self.sqdist, new_idx, new_sqdist, self.k)
        # _merge_topk pads short rows by repeating the best entry; the table
        # keeps explicit empties instead.
        dup = merged_idx[:, 1:] == merged_idx[:, :-1]
        merged_idx[:, 1:][dup] = -1
        merged_dist[:, 1:][dup] = np.inf
        self.idx = merged_idx
        self.sqdist = merged_dist

    def update_row(self, row: int, new_idx, new_sqdist) -> None:
        """Merge matches into a single row (same semantics as update)."""
        if not 0 <= row < len(self):
            raise ValueError(f"row {row} out of range")
        new_idx = np.asarray(new_idx, dtype=np.int64).reshape(1, -1)
        new_sqdist = np.asarray(new_sqdist, dtype=np.float64).reshape(1, -1)
        merged_idx, merged_dist = _merge_topk(
            self.idx[row : row + 1], self.sqdist[row : row + 1], new_idx, new_sqdist, self.k
        )
        dup = merged_idx[:, 1:] == merged_idx[:, :-1]
        merged_idx[:, 1:][dup] = -1
        merged_dist[:, 1:][dup] = np.inf
        self.idx[row] = merged_idx[0]
        self.sqdist[row] = merged_dist[0]


def compute_weights(psi: np.ndarray, t: float, neighbors: np.ndarray) -> np.ndarray:
    """Normalized Gaussian mixture weights of the neighbors at time t.

    w_j proportional to exp(-||psi - t*phi_j||^2 / (2*(1-t)^2)), evaluated in
    log space with max subtraction so extreme exponents cannot overflow.
    At t=0 all exponents coincide and the weights are exactly uniform.
    """
    if t >= 1:
        raise ValueError(f"t must be < 1, got {t}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    psi = np.asarray(psi, dtype=np.float64)
    neighbors = np.atleast_2d(np.asarray(neighbors, dtype=np.float64))
    diff = psi[None, :] - t * neighbors
    sq = np.einsum("ij,ij->i", diff, diff)
    return _weights_from_exponents(-sq / (2.0 * (1.0 - t) ** 2))


def _weights_from_exponents(exponents: np.ndarray) -> np.ndarray:
    e = exponents - exponents.max(axis=-1, keepdims=True)
    w = np.exp(e)
    return w / w.sum(axis=-1, keepdims=True)


def velocity(psi: np.ndarray, t: float, neighbors: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted mixture velocity 1/(1-t) * sum_j w_j * (phi_j - psi)."""
    if t >= 1:
        raise ValueError(f"t must be < 1, got {t}")
    psi = np.asarray(psi, dtype=np.float64)
    neighbors = np.atleast_2d(np.asarray(neighbors, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(neighbors)) and np.all(np.isfinite(weights))):
        raise ValueError("velocity inputs must be finite")
    return (weights @ neighbors - psi) / (1.0 - t)


def euler_step(psi: np.ndarray, t_i: float, t_next: float, v: np.ndarray) -> np.ndarray:
    """One explicit Euler update psi + (t_next - t_i) * v."""
    if not t_next > t_i:
        raise ValueError(f"t_next must exceed t_i, got {t_i} -> {t_next}")
    return np.asarray(psi, dtype=np.float64) + (t_next - t_i) * np.asarray(v, dtype=np.float64)


@dataclass
class FlowStepResult:
    """Per-patch outcome of one velocity evaluation + Euler update."""

    psi_next: np.ndarray
    velocities: np.ndarray
    neighbor_idx: np.ndarray | None
    weights: np.ndarray | None


def flow_step(
    psi: np.ndarray,
    t: float,
    t_next: float,
    ref_patches: np.ndarray,
    pool_idx: np.ndarray,
    k: int,
    memory: MemoryTable | None = None,
    workers: int = 1,
) -> FlowStepResult:
    """Advance a batch of synthesis patches from time t to t_next.

    Searches the k nearest reference patches of (1/t)*psi within the sampled
    pool united with each row's memory entries, updates the memory with the
    matches found, and applies the weighted mixture velocity with one Euler
    step. At t < T_EPS the top-k selection is skipped and the velocity is the
    uniform mixture over the whole pool.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if t >= 1:
        raise ValueError(f"t must be < 1, got {t}")
    if not t_next > t:
        raise ValueError(f"t_next must exceed t, got {t} -> {t_next}")
    psi = np.atleast_2d(np.asarray(psi, dtype=np.float64))
    ref_patches = np.asarray(ref_patches, dtype=np.float64)
    pool_idx = np.asarray(pool_idx, dtype=np.int64)
    if pool_idx.size == 0:
        raise ValueError("candidate pool is empty")
    dt = t_next - t

    if t < T_EPS:
        pool_mean = ref_patches[pool_idx].mean(axis=0)
        v = (pool_mean[None, :] - psi) / (1.0 - t)
        return FlowStepResult(psi + dt * v, v, None, None)

    queries = psi / t
    sel_idx, sel_dist = _topk_pool(queries, ref_patches, pool_idx, k, workers=workers)
    if memory is not None:
        mem_patches = ref_patches[np.maximum(memory.idx, 0)]
        diff = queries[:, None, :] - mem_patches
        mem_dist = np.einsum("mkd,mkd->mk", diff, diff)
        mem_dist[memory.idx < 0] = np.inf
        sel_idx, sel_dist = _merge_topk(sel_idx, sel_dist, memory.idx, mem_dist, k)
        memory.update(sel_idx, sel_dist)
    elif sel_idx.shape[1] < k:
        reps = k - sel_idx.shape[1]
        sel_idx = np.concatenate([sel_idx, np.repeat(sel_idx[:, :1], reps, axis=1)], axis=1)
        sel_dist = np.concatenate([sel_dist, np.repeat(sel_dist[:, :1], reps, axis=1)], axis=1)

    # Search ranks by the expanded-form distance of (1/t)*psi, but the weight
    # exponents are recomputed as ||psi - t*phi||^2 from the gathered
    # neighbors: the expanded form loses relative accuracy for near matches,
    # and the 1/(1-t) factors amplify that badly late in the schedule.
    nb = ref_patches[sel_idx]
    diff = psi[:, None, :] - t * nb
    sq = np.einsum("mkd,mkd->mk", diff, diff)
    w = _weights_from_exponents(-sq / (2.0 * (1.0 - t) ** 2))
    mix = np.einsum("mk,mkd->md", w, nb)
    v = (mix - psi) / (1.0 - t)
    return FlowStepResult(psi + dt * v, v, sel_idx, w)
