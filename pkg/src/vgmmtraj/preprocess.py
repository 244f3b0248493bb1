"""Noise removal and segmentation of raw trajectories.

K-Means gives a coarse partition of large point sets, DBSCAN labels points
as core/edge/noise so isolated fixes can be dropped, and a breadth-first
walk over consecutive-point adjacency splits each trajectory into dense runs.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Trajectory, TrajectorySegment
from .errors import AllPointsNoise, EmptyTrajectory, KTooLarge, NoSegments

DEFAULT_PARTITION_THRESHOLD = 50_000


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be a positive finite distance, got {self.eps!r}")
        if int(self.min_pts) != self.min_pts or self.min_pts < 1:
            raise ValueError(f"min_pts must be an integer >= 1, got {self.min_pts!r}")


class Role(enum.Enum):
    CORE = "core"
    EDGE = "edge"
    NOISE = "noise"


@dataclass(frozen=True)
class PointLabel:
    role: Role
    cluster_id: Optional[int] = None

    def __post_init__(self):
        if (self.role is Role.NOISE) != (self.cluster_id is None):
            raise ValueError("noise points carry no cluster id; core/edge points must")


@dataclass(frozen=True, eq=False)
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    sse: float
    sse_trace: tuple[float, ...]
    n_iter: int
    converged: bool


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from k distinct, seeded random starting points.

    An empty cluster is refilled with the point lying farthest from its
    current centroid, so SSE never increases between iterations.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the number of points ({n})")

    rng = np.random.default_rng(seed)
    _, first = np.unique(X, axis=0, return_index=True)
    distinct = np.sort(first)
    if len(distinct) >= k:
        init = rng.choice(distinct, size=k, replace=False)
    else:
        rest = np.setdiff1d(np.arange(n), distinct)
        init = np.concatenate([distinct, rng.choice(rest, size=k - len(distinct), replace=False)])
    centroids = X[init].copy()

    assign = None
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(X, centroids)
        new_assign = np.argmin(d2, axis=1)
        own = d2[np.arange(n), new_assign]
        counts = np.bincount(new_assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            movable = counts[new_assign] > 1
            cand = np.where(movable, own, -1.0)
            far = int(np.argmax(cand))
            counts[new_assign[far]] -= 1
            new_assign[far] = j
            counts[j] = 1
            own[far] = 0.0
            centroids[j] = X[far]
        for j in range(k):
            centroids[j] = X[new_assign == j].mean(axis=0)
        diff = X - centroids[new_assign]
        trace.append(float(np.einsum("nd,nd->", diff, diff)))
        if assign is not None and np.array_equal(assign, new_assign):
            assign = new_assign
            converged = True
            break
        assign = new_assign

    return KMeansResult(
        assignments=assign,
        centroids=centroids,
        sse=trace[-1],
        sse_trace=tuple(trace),
        n_iter=it,
        converged=converged,
    )


def _neighborhoods(xy: np.ndarray, eps: float) -> list[np.ndarray]:
    """Indices within ``eps`` of each point (itself included), ascending.

    Points are bucketed on an eps-sized grid so only the 3x3 block of cells
    around a point is searched.
    """
    keys = np.floor(xy / eps).astype(np.int64)
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, (cx, cy) in enumerate(keys.tolist()):
        buckets.setdefault((cx, cy), []).append(i)
    bucket_arrays = {key: np.array(v, dtype=np.int64) for key, v in buckets.items()}

    out: list[np.ndarray] = [None] * len(xy)  # type: ignore[list-item]
    for (cx, cy), members in bucket_arrays.items():
        near = [
            bucket_arrays[(cx + dx, cy + dy)]
            for dx in (-1, 0, 1)
            for dy in (-1, 0, 1)
            if (cx + dx, cy + dy) in bucket_arrays
        ]
        cand = np.sort(np.concatenate(near))
        d = np.hypot(
            xy[members, 0][:, None] - xy[cand, 0][None, :],
            xy[members, 1][:, None] - xy[cand, 1][None, :],
        )
        within = d <= eps
        for row, i in enumerate(members):
            out[i] = cand[within[row]]
    return out


def _dbscan_labels(xy: np.ndarray, params: DbscanParams) -> tuple[np.ndarray, np.ndarray]:
    """Return (role codes, cluster ids) with roles 0=core, 1=edge, 2=noise."""
    n = len(xy)
    nbrs = _neighborhoods(xy, params.eps)
    core = np.array([len(nb) >= params.min_pts for nb in nbrs], dtype=bool)
    cluster = np.full(n, -1, dtype=np.int64)

    next_id = 0
    for i in range(n):
        if not core[i] or cluster[i] >= 0:
            continue
        cluster[i] = next_id
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in nbrs[p]:
                if core[q] and cluster[q] < 0:
                    cluster[q] = next_id
                    queue.append(q)
        next_id += 1

    roles = np.where(core, 0, 2)
    for i in np.flatnonzero(~core):
        core_nbrs = nbrs[i][core[nbrs[i]]]
        if len(core_nbrs):
            roles[i] = 1
            cluster[i] = cluster[core_nbrs[0]]
    return roles, cluster


_ROLE_OF = (Role.CORE, Role.EDGE, Role.NOISE)


def dbscan(
    points,
    params: DbscanParams,
    partition_threshold: int = DEFAULT_PARTITION_THRESHOLD,
    seed: int = 0,
) -> list[PointLabel]:
    """Density-based labelling of 2-D points.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters are the connected components of cores; a
    non-core point with a core neighbour joins the cluster of its
    lowest-indexed core neighbour as an edge point; everything else is noise.
    Cluster ids follow the order in which an input-order scan first meets
    each cluster's cores.

    Above ``partition_threshold`` points, K-Means first splits the set into
    ``ceil(n / partition_threshold)`` groups and each group is clustered on
    its own.
    """
    xy = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(xy)
    if n == 0:
        return []
    if n <= partition_threshold:
        roles, cluster = _dbscan_labels(xy, params)
    else:
        parts = kmeans(xy, math.ceil(n / partition_threshold), seed=seed).assignments
        roles = np.empty(n, dtype=np.int64)
        cluster = np.full(n, -1, dtype=np.int64)
        offset = 0
        for j in np.unique(parts):
            idx = np.flatnonzero(parts == j)
            r, c = _dbscan_labels(xy[idx], params)
            roles[idx] = r
            cluster[idx] = np.where(c >= 0, c + offset, -1)
            offset += int(c.max()) + 1 if (c >= 0).any() else 0
        # renumber by first core met in global input order
        remap: dict[int, int] = {}
        for i in np.flatnonzero(roles == 0):
            remap.setdefault(int(cluster[i]), len(remap))
        cluster = np.array([remap[c] if c >= 0 else -1 for c in cluster.tolist()], dtype=np.int64)

    return [
        PointLabel(_ROLE_OF[r], None if r == 2 else int(c))
        for r, c in zip(roles.tolist(), cluster.tolist())
    ]


def denoise(
    traj: Trajectory,
    params: DbscanParams,
    partition_threshold: int = DEFAULT_PARTITION_THRESHOLD,
) -> Trajectory:
    """Drop the points DBSCAN labels as noise, keeping survivors in order."""
    labels = dbscan(traj.xy, params, partition_threshold=partition_threshold)
    kept = tuple(p for p, lab in zip(traj.points, labels) if lab.role is not Role.NOISE)
    if not kept:
        raise AllPointsNoise(f"object {traj.object_id!r}: every point is noise")
    return Trajectory(traj.object_id, kept)


def segment(traj: Trajectory, params: DbscanParams) -> list[TrajectorySegment]:
    """Split a trajectory into runs of density-connected consecutive points.

    Consecutive points closer than ``eps`` are adjacent; a breadth-first
    walk from each unvisited point collects its run. Runs shorter than
    ``min_pts`` are discarded.
    """
    n = len(traj)
    if n == 0:
        raise EmptyTrajectory("cannot segment an empty trajectory")
    gaps = np.hypot(*np.diff(traj.xy, axis=0).T) if n > 1 else np.empty(0)
    linked = gaps <= params.eps

    visited = np.zeros(n, dtype=bool)
    segments: list[TrajectorySegment] = []
    for start in range(n):
        if visited[start]:
            continue
        visited[start] = True
        run = [start]
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in (i - 1, i + 1):
                if 0 <= j < n and not visited[j] and linked[min(i, j)]:
                    visited[j] = True
                    run.append(j)
                    queue.append(j)
        if len(run) >= params.min_pts:
            lo, hi = min(run), max(run)
            segments.append(TrajectorySegment(traj.object_id, len(segments), traj.points[lo : hi + 1]))
    if not segments:
        raise NoSegments(
            f"object {traj.object_id!r}: no run of >= {params.min_pts} points with gaps <= {params.eps}"
        )
    return segments


def preprocess_trajectories(
    trajectories: Sequence[Trajectory], params: DbscanParams
) -> list[TrajectorySegment]:
    """Denoise then segment every trajectory, skipping ones with nothing left."""
    out: list[TrajectorySegment] = []
    for traj in trajectories:
        try:
            out.extend(segment(denoise(traj, params), params))
        except (AllPointsNoise, NoSegments):
            continue
    return out
