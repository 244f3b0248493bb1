"""Trajectory domain types, grid simplification and feature windowing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Sequence, TypeVar

import numpy as np

from .errors import (
    EmptyInput,
    EmptyTrajectory,
    InvalidTrajectory,
    MixedObjectIds,
    NonMonotonicTimestamps,
)

CSV_HEADER = ("object_id", "timestamp", "x", "y")

T = TypeVar("T")


@dataclass(frozen=True)
class TrackPoint:
    object_id: Hashable
    timestamp: float
    x: float
    y: float

    def __post_init__(self):
        for name in ("timestamp", "x", "y"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidTrajectory(f"{name} must be finite, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered positions of one moving object.

    Build through :func:`validate_trajectory` unless the points are already
    known to be sorted and consistent.
    """

    object_id: Hashable
    points: tuple[TrackPoint, ...]

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def xy(self) -> np.ndarray:
        arr = np.array([(p.x, p.y) for p in self.points], dtype=float).reshape(-1, 2)
        arr.flags.writeable = False
        return arr

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.points], dtype=float)


@dataclass(frozen=True)
class TrajectorySegment:
    parent_id: Hashable
    index: int
    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise EmptyTrajectory("segment must contain at least one point")

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def xy(self) -> np.ndarray:
        arr = np.array([(p.x, p.y) for p in self.points], dtype=float).reshape(-1, 2)
        arr.flags.writeable = False
        return arr


@dataclass(frozen=True)
class GridSpec:
    origin_x: float = 0.0
    origin_y: float = 0.0
    cell_size: float = 1.0

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be > 0, got {self.cell_size!r}")

    def cells(self, xy: np.ndarray) -> np.ndarray:
        """Integer (col, row) cell of each row of an (n, 2) array."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        origin = np.array([self.origin_x, self.origin_y])
        return np.floor((xy - origin) / self.cell_size).astype(np.int64)


@dataclass(frozen=True)
class GridSequence:
    cells: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One training/prediction window.

    ``history`` holds the H displacement pairs ending at ``anchor`` and
    ``future`` the F displacement pairs after it, both flattened as
    (dx1, dy1, dx2, dy2, ...).
    """

    anchor: TrackPoint
    history: np.ndarray
    future: np.ndarray

    @property
    def H(self) -> int:
        return self.history.size // 2

    @property
    def F(self) -> int:
        return self.future.size // 2

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.history, self.future])


def validate_trajectory(raw: Iterable[TrackPoint]) -> Trajectory:
    """Check a raw point sequence and wrap it as a :class:`Trajectory`.

    Raises:
        EmptyTrajectory: no points.
        MixedObjectIds: points belong to more than one object.
        NonMonotonicTimestamps: a timestamp repeats or goes backwards.
    """
    points = tuple(raw)
    if not points:
        raise EmptyTrajectory("trajectory has no points")
    oid = points[0].object_id
    for p in points:
        if p.object_id != oid:
            raise MixedObjectIds(f"object ids {oid!r} and {p.object_id!r} in one trajectory")
    for prev, cur in zip(points, points[1:]):
        if not cur.timestamp > prev.timestamp:
            raise NonMonotonicTimestamps(
                f"object {oid!r}: timestamp {cur.timestamp!r} follows {prev.timestamp!r}"
            )
    return Trajectory(oid, points)


def to_grid_sequence(traj: Trajectory | TrajectorySegment, grid: GridSpec) -> GridSequence:
    cells = grid.cells(traj.xy)
    out: list[tuple[int, int]] = []
    for c, r in cells.tolist():
        if not out or out[-1] != (c, r):
            out.append((c, r))
    return GridSequence(tuple(out))


def build_feature_vectors(
    segment: TrajectorySegment | Trajectory, H: int, F: int
) -> list[FeatureVector]:
    """Slide an (H, F) window over a segment.

    Every anchor index ``a`` with H points before it and F points after it
    yields one vector, so a segment of length L gives ``max(0, L - H - F)``.
    """
    if H < 1 or F < 1:
        raise ValueError(f"H and F must be >= 1, got H={H}, F={F}")
    xy = np.asarray(segment.xy)
    n = len(xy)
    if n - H - F <= 0:
        return []
    disp = np.diff(xy, axis=0)  # disp[i] = p[i+1] - p[i]
    out = []
    for a in range(H, n - F):
        hist = disp[a - H : a].ravel().copy()
        fut = disp[a : a + F].ravel().copy()
        hist.flags.writeable = False
        fut.flags.writeable = False
        out.append(FeatureVector(segment.points[a], hist, fut))
    return out


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into an (N, 2(H+F)) array."""
    if not vectors:
        raise EmptyInput("no feature vectors")
    return np.stack([v.values for v in vectors])


def split_dataset(items: Sequence[T], test_fraction: float, seed: int) -> tuple[list[T], list[T]]:
    """Seeded train/test partition of any sequence (feature vectors, segments...)."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction!r}")
    n = len(items)
    if n == 0:
        raise EmptyInput("cannot split an empty dataset")
    n_test = int(round(n * test_fraction))
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return [items[i] for i in train_idx], [items[i] for i in test_idx]


def read_trajectories(path: str | Path) -> list[Trajectory]:
    """Load the ``object_id,timestamp,x,y`` CSV, one trajectory per object."""
    groups: dict[str, list[TrackPoint]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise InvalidTrajectory(
                f"{path}: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise InvalidTrajectory(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            oid = row[0].strip()
            try:
                t, x, y = (float(v) for v in row[1:])
            except ValueError as exc:
                raise InvalidTrajectory(f"{path}:{lineno}: {exc}") from None
            groups.setdefault(oid, []).append(TrackPoint(oid, t, x, y))
    return [validate_trajectory(pts) for pts in groups.values()]


def write_trajectories(path: str | Path, trajectories: Iterable[Trajectory | TrajectorySegment]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for traj in trajectories:
            if isinstance(traj, TrajectorySegment):
                oid = f"{traj.parent_id}#{traj.index}"
            else:
                oid = traj.object_id
            for p in traj.points:
                writer.writerow([oid, repr(float(p.timestamp)), repr(float(p.x)), repr(float(p.y))])


def as_segment(traj: Trajectory, index: int = 0) -> TrajectorySegment:
    """View a whole trajectory as a single segment."""
    return TrajectorySegment(traj.object_id, index, traj.points)
