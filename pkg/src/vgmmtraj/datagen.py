"""Synthetic vehicle trajectories with configurable motion patterns and noise.

Coordinates are snapped to a 2**-20 m lattice so that sums and differences
of positions are exact in double precision; a noiseless straight track then
has bitwise-identical consecutive displacements.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import TrackPoint, Trajectory, validate_trajectory

TURN_RATE = math.radians(3.0)
SCURVE_AMPLITUDE = math.radians(30.0)
SCURVE_PERIOD = 40.0
STUDENT_T_DOF = 3.0
IMPULSE_REACH = 20.0
AREA = 1000.0
QUANTUM = 2.0**-20


class Pattern(str, enum.Enum):
    STRAIGHT = "Straight"
    LEFT_TURN = "LeftTurn"
    RIGHT_TURN = "RightTurn"
    SCURVE = "SCurve"


class NoiseKind(str, enum.Enum):
    GAUSSIAN = "Gaussian"
    STUDENT_T = "StudentT"
    IMPULSE = "Impulse"


@dataclass(frozen=True)
class ScenarioSpec:
    n_objects: int
    pattern_set: tuple[Pattern, ...] = tuple(Pattern)
    step_length: float = 1.0
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN
    noise_scale: float = 0.0
    impulse_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pattern_set", tuple(Pattern(p) for p in self.pattern_set))
        object.__setattr__(self, "noise_kind", NoiseKind(self.noise_kind))
        if self.n_objects < 1:
            raise ValueError(f"n_objects must be >= 1, got {self.n_objects!r}")
        if not self.pattern_set:
            raise ValueError("pattern_set must not be empty")
        if not self.step_length > 0:
            raise ValueError(f"step_length must be > 0, got {self.step_length!r}")
        if not self.noise_scale >= 0:
            raise ValueError(f"noise_scale must be >= 0, got {self.noise_scale!r}")
        if not 0 <= self.impulse_prob <= 1:
            raise ValueError(f"impulse_prob must be in [0, 1], got {self.impulse_prob!r}")


def _quantize(a: np.ndarray) -> np.ndarray:
    return np.round(a / QUANTUM) * QUANTUM


def _headings(pattern: Pattern, h0: float, n_steps: int) -> np.ndarray:
    i = np.arange(n_steps, dtype=float)
    if pattern is Pattern.STRAIGHT:
        return np.full(n_steps, h0)
    if pattern is Pattern.LEFT_TURN:
        return h0 + TURN_RATE * i
    if pattern is Pattern.RIGHT_TURN:
        return h0 - TURN_RATE * i
    return h0 + SCURVE_AMPLITUDE * np.sin(2.0 * math.pi * i / SCURVE_PERIOD)


def _noise(spec: ScenarioSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    s = spec.noise_scale
    if spec.noise_kind is NoiseKind.GAUSSIAN:
        return rng.normal(0.0, 1.0, size=(n, 2)) * s
    if spec.noise_kind is NoiseKind.STUDENT_T:
        return rng.standard_t(STUDENT_T_DOF, size=(n, 2)) * s
    hit = rng.random(n) < spec.impulse_prob
    offsets = rng.uniform(-IMPULSE_REACH * s, IMPULSE_REACH * s, size=(n, 2))
    return np.where(hit[:, None], offsets, 0.0)


def generate(spec: ScenarioSpec, points_per_traj: int) -> list[Trajectory]:
    """Draw ``spec.n_objects`` trajectories of ``points_per_traj`` points.

    Each object picks a pattern and a start pose from the path stream of
    the seed; noise comes from a separate stream, so changing only the noise
    settings leaves the underlying paths untouched.
    """
    if points_per_traj < 2:
        raise ValueError(f"points_per_traj must be >= 2, got {points_per_traj}")
    path_ss, noise_ss = np.random.SeedSequence(spec.seed).spawn(2)
    path_rng = np.random.default_rng(path_ss)
    noise_rng = np.random.default_rng(noise_ss)
    patterns = list(spec.pattern_set)

    out = []
    for obj in range(spec.n_objects):
        pattern = patterns[int(path_rng.integers(len(patterns)))]
        start = _quantize(path_rng.uniform(0.0, AREA, size=2))
        h0 = path_rng.uniform(0.0, 2.0 * math.pi)
        heads = _headings(pattern, h0, points_per_traj - 1)
        steps = _quantize(spec.step_length * np.column_stack([np.cos(heads), np.sin(heads)]))
        clean = np.vstack([start, start + np.cumsum(steps, axis=0)])
        xy = _quantize(clean + _noise(spec, noise_rng, points_per_traj))
        oid = str(obj)
        out.append(
            validate_trajectory(TrackPoint(oid, float(t), float(x), float(y)) for t, (x, y) in enumerate(xy))
        )
    return out


def spec_from_dict(doc: dict) -> tuple[ScenarioSpec, int]:
    """Parse a scenario document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ValueError("scenario must be a JSON object")
    known = {"n_objects", "pattern_set", "step_length", "noise_kind", "noise_scale", "impulse_prob", "seed", "points_per_traj"}
    for key in doc:
        if key not in known:
            raise ValueError(f"unknown field {key!r}")

    def get(name, cast, default=None):
        if name not in doc:
            if default is None:
                raise ValueError(f"missing field {name!r}")
            return default
        try:
            return cast(doc[name])
        except (TypeError, ValueError) as exc:
            raise ValueError(f"invalid field {name!r}: {exc}") from None

    def as_int(v):
        if isinstance(v, bool) or int(v) != v:
            raise ValueError(f"{v!r} is not an integer")
        return int(v)

    def as_patterns(v: Iterable):
        if isinstance(v, str):
            v = [v]
        return tuple(Pattern(p) for p in v)

    fields = dict(
        n_objects=get("n_objects", as_int),
        pattern_set=get("pattern_set", as_patterns, tuple(Pattern)),
        step_length=get("step_length", float, 1.0),
        noise_kind=get("noise_kind", NoiseKind, NoiseKind.GAUSSIAN),
        noise_scale=get("noise_scale", float, 0.0),
        impulse_prob=get("impulse_prob", float, 0.0),
        seed=get("seed", as_int, 0),
    )
    points = get("points_per_traj", as_int, 100)
    try:
        spec = ScenarioSpec(**fields)
    except ValueError as exc:
        msg = str(exc)
        name = msg.split(" ", 1)[0]
        raise ValueError(f"invalid field {name!r}: {msg}") from None
    if points < 2:
        raise ValueError("invalid field 'points_per_traj': must be >= 2")
    return spec, points
