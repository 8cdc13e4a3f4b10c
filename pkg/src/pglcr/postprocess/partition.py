"""Clustering point estimates under variation of information (base-2 logs).

The posterior expected VI of a candidate partition is computed exactly
against the weighted set of distinct sampled partitions, using the
contingency identity ``N * VI(c, p) = sum_a f(n_a) + sum_b f(n_b) - 2 sum_ab f(n_ab)``
with ``f(x) = x log2 x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import DimensionError, InsufficientSamplesError, InvalidParameterError

__all__ = [
    "canonical_labels",
    "variation_of_information",
    "PartitionTrace",
    "expected_vi",
    "CredibleBall",
    "PartitionEstimate",
    "minvi_point_estimate",
    "credible_ball",
    "coclustering_matrix",
]


def canonical_labels(labels) -> np.ndarray:
    """Relabel so clusters are numbered 0, 1, ... in order of first appearance."""
    labels = np.asarray(labels)
    if labels.ndim == 1:
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return order[inv].astype(np.int64)
    return np.stack([canonical_labels(row) for row in labels])


@numba.njit(cache=True)
def _f(x):
    return x * math.log2(x) if x > 0 else 0.0


@numba.njit(cache=True)
def _vi(a, b, ka, kb):
    n = a.shape[0]
    tab = np.zeros((ka, kb))
    na = np.zeros(ka)
    nb = np.zeros(kb)
    for i in range(n):
        tab[a[i], b[i]] += 1.0
        na[a[i]] += 1.0
        nb[b[i]] += 1.0
    total = 0.0
    for x in range(ka):
        total += _f(na[x])
        for y in range(kb):
            total -= 2.0 * _f(tab[x, y])
    for y in range(kb):
        total += _f(nb[y])
    return max(total / n, 0.0)


def variation_of_information(labels_a, labels_b) -> float:
    """VI between two labelings in bits."""
    a = canonical_labels(labels_a)
    b = canonical_labels(labels_b)
    if a.shape != b.shape:
        raise DimensionError("labelings must have equal length")
    if a.size == 0:
        return 0.0
    return float(_vi(a, b, a.max() + 1, b.max() + 1))


@dataclass(frozen=True)
class PartitionTrace:
    """Distinct sampled partitions with their posterior weights.

    ``partitions`` is ``U x N`` in canonical form, ordered by first
    appearance in the trace; ``weights`` sum to one.
    """

    partitions: np.ndarray
    weights: np.ndarray
    n_clusters: np.ndarray

    @classmethod
    def from_labels(cls, labels) -> "PartitionTrace":
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise DimensionError("a partition trace is a T x N array")
        canon = canonical_labels(labels)
        uniq, first, inv, counts = np.unique(canon, axis=0, return_index=True, return_inverse=True,
                                             return_counts=True)
        order = np.argsort(first)
        parts = np.ascontiguousarray(uniq[order])
        weights = counts[order] / labels.shape[0]
        return cls(parts, weights, parts.max(axis=1) + 1)

    @property
    def n_obs(self) -> int:
        return self.partitions.shape[1]


@numba.njit(cache=True)
def _vi_to_all(c, kc, parts, ks):
    out = np.empty(parts.shape[0])
    for s in range(parts.shape[0]):
        out[s] = _vi(c, parts[s], kc, ks[s])
    return out


def _as_trace(trace) -> PartitionTrace:
    return trace if isinstance(trace, PartitionTrace) else PartitionTrace.from_labels(trace)


def expected_vi(candidate, trace) -> float:
    """Posterior expected VI of ``candidate`` over a trace of partitions."""
    pt = _as_trace(trace)
    c = canonical_labels(candidate)
    if c.shape != (pt.n_obs,):
        raise DimensionError("candidate length does not match the trace")
    return float(_vi_to_all(c, c.max() + 1, pt.partitions, pt.n_clusters) @ pt.weights)


@numba.njit(cache=True)
def _greedy(start, parts, weights, ks, kcap):
    """Local search over single-element moves and cluster merges.

    Elements are visited in index order and each moves to its best target if
    that strictly lowers the expected VI; then the best strictly improving
    merge is applied.  Repeats until neither step changes anything.
    """
    s_count, n = parts.shape
    kmax = 0
    for s in range(s_count):
        if ks[s] > kmax:
            kmax = ks[s]
    c = start.copy()
    nc = np.zeros(kcap)
    tab = np.zeros((s_count, kcap, kmax))
    for i in range(n):
        nc[c[i]] += 1.0
        for s in range(s_count):
            tab[s, c[i], parts[s, i]] += 1.0
    tol = 1e-12 * n
    changed = True
    while changed:
        changed = False
        for i in range(n):
            a = c[i]
            best_b = -1
            best = -tol
            empty_seen = False
            for b in range(kcap):
                if b == a:
                    continue
                if nc[b] == 0:
                    if empty_seen or nc[a] == 1:
                        continue
                    empty_seen = True
                delta = _f(nc[a] - 1) + _f(nc[b] + 1) - _f(nc[a]) - _f(nc[b])
                cross = 0.0
                for s in range(s_count):
                    l = parts[s, i]
                    na_l = tab[s, a, l]
                    nb_l = tab[s, b, l]
                    cross += weights[s] * (_f(na_l - 1) - _f(na_l) + _f(nb_l + 1) - _f(nb_l))
                delta -= 2.0 * cross
                if delta < best:
                    best = delta
                    best_b = b
            if best_b >= 0:
                c[i] = best_b
                nc[a] -= 1
                nc[best_b] += 1
                for s in range(s_count):
                    tab[s, a, parts[s, i]] -= 1
                    tab[s, best_b, parts[s, i]] += 1
                changed = True
        best = -tol
        best_a = -1
        best_b = -1
        for a in range(kcap):
            if nc[a] == 0:
                continue
            for b in range(a + 1, kcap):
                if nc[b] == 0:
                    continue
                delta = _f(nc[a] + nc[b]) - _f(nc[a]) - _f(nc[b])
                cross = 0.0
                for s in range(s_count):
                    acc = 0.0
                    for l in range(ks[s]):
                        acc += _f(tab[s, a, l] + tab[s, b, l]) - _f(tab[s, a, l]) - _f(tab[s, b, l])
                    cross += weights[s] * acc
                delta -= 2.0 * cross
                if delta < best:
                    best = delta
                    best_a = a
                    best_b = b
        if best_a >= 0:
            for i in range(n):
                if c[i] == best_b:
                    c[i] = best_a
            nc[best_a] += nc[best_b]
            nc[best_b] = 0
            for s in range(s_count):
                for l in range(kmax):
                    tab[s, best_a, l] += tab[s, best_b, l]
                    tab[s, best_b, l] = 0
            changed = True
    return c


@dataclass(frozen=True)
class CredibleBall:
    """VI ball around a point estimate holding ``level`` posterior mass.

    ``vertical_upper`` is the coarsest (fewest clusters) partition inside the
    ball at maximal distance, ``vertical_lower`` the finest, ``horizontal``
    any partition inside the ball at maximal distance.
    """

    radius: float
    level: float
    horizontal: np.ndarray
    vertical_upper: np.ndarray
    vertical_lower: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class PartitionEstimate:
    labels: np.ndarray
    expected_vi: float
    credible_ball: CredibleBall | None = None

    @property
    def n_clusters(self) -> int:
        return int(np.unique(self.labels).size)


def minvi_point_estimate(trace, n_starts: int = 5, max_candidates: int = 100,
                         level: float | None = 0.95) -> PartitionEstimate:
    """Partition minimising the posterior expected VI, found by greedy search.

    ``trace`` is a ``T x N`` label array or a :class:`PartitionTrace`.
    Searches start from the ``n_starts`` best sampled partitions (scored on
    an evenly spaced subset of at most ``max_candidates`` distinct ones),
    from the one-cluster partition and, for ``N <= 50``, from singletons.
    Ties keep the earliest candidate.  With ``level`` set, the credible ball
    at that level is attached.
    """
    pt = _as_trace(trace)
    raw = np.asarray(trace.partitions if isinstance(trace, PartitionTrace) else trace)
    if not isinstance(trace, PartitionTrace) and raw.shape[0] < 2:
        raise InsufficientSamplesError("at least 2 stored partitions are needed")
    n = pt.n_obs
    u = pt.partitions.shape[0]
    idx = np.unique(np.linspace(0, u - 1, min(u, max_candidates)).round().astype(np.int64))
    cand_evi = np.array([_vi_to_all(pt.partitions[k], pt.n_clusters[k], pt.partitions, pt.n_clusters) @ pt.weights
                         for k in idx])
    order = idx[np.argsort(cand_evi, kind="stable")]
    starts = [pt.partitions[k] for k in order[:n_starts]]
    starts.append(np.zeros(n, dtype=np.int64))
    if n <= 50:
        starts.append(np.arange(n, dtype=np.int64))
    kcap = int(min(n, max(int(pt.n_clusters.max()) + 5, 2 * int(pt.n_clusters.max()))))
    best_c, best_v = None, np.inf
    for start in starts:
        kc = max(kcap, int(start.max()) + 1)
        c = canonical_labels(_greedy(start.astype(np.int64), pt.partitions, pt.weights, pt.n_clusters, kc))
        v = float(_vi_to_all(c, c.max() + 1, pt.partitions, pt.n_clusters) @ pt.weights)
        if v < best_v - 1e-12:
            best_c, best_v = c, v
    ball = credible_ball(pt, best_c, level) if level is not None else None
    return PartitionEstimate(best_c, max(best_v, 0.0), ball)


def credible_ball(trace, estimate, level: float = 0.95) -> CredibleBall:
    """Smallest VI ball around ``estimate`` containing ``level`` posterior mass."""
    if not 0 < level <= 1:
        raise InvalidParameterError("level must lie in (0, 1]")
    pt = _as_trace(trace)
    labels = estimate.labels if isinstance(estimate, PartitionEstimate) else estimate
    c = canonical_labels(labels)
    if c.shape != (pt.n_obs,):
        raise DimensionError("estimate length does not match the trace")
    dist = _vi_to_all(c, c.max() + 1, pt.partitions, pt.n_clusters)
    order = np.argsort(dist, kind="stable")
    cum = np.cumsum(pt.weights[order])
    pos = int(np.searchsorted(cum, level - 1e-12))
    radius = float(dist[order[min(pos, len(order) - 1)]])
    inside = np.flatnonzero(dist <= radius)

    def farthest(members):
        return pt.partitions[members[np.argmax(dist[members])]]

    k_in = pt.n_clusters[inside]
    return CredibleBall(
        radius=radius,
        level=level,
        horizontal=farthest(inside),
        vertical_upper=farthest(inside[k_in == k_in.min()]),
        vertical_lower=farthest(inside[k_in == k_in.max()]),
        distances=dist,
    )


def coclustering_matrix(labels) -> np.ndarray:
    """Posterior similarity matrix: fraction of samples placing ``i`` and ``j`` together."""
    labels = np.asarray(labels)
    t, n = labels.shape
    out = np.zeros((n, n))
    for row in labels:
        out += row[:, None] == row[None, :]
    return out / t
