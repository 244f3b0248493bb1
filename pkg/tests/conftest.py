import numpy as np
import pytest

from vgmmtraj.core import TrackPoint, TrajectorySegment, validate_trajectory

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def make_traj(xy, object_id="a", t0=0.0):
    return validate_trajectory(
        TrackPoint(object_id, t0 + float(t), float(x), float(y)) for t, (x, y) in enumerate(np.asarray(xy, dtype=float))
    )


def make_segment(xy, object_id="a", index=0):
    return TrajectorySegment(object_id, index, make_traj(xy, object_id).points)


def three_blobs(seed=1, n_per=100, spread=1.0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]])
    return np.concatenate([rng.normal(c, spread, size=(n_per, 2)) for c in centers])


def two_mode_segments(seed, n_obj=20, n=30):
    """Tracks whose displacements come from one of two motion modes.

    Mode A: quiet eastward drift; mode B: noisy southward drift. The modes
    differ in noise level, which a single Gaussian cannot represent.
    """
    rng = np.random.default_rng(seed)
    segs = []
    for i in range(n_obj):
        if i % 2 == 0:
            d = np.array([1.0, 0.0]) + rng.normal(0, 0.02, size=(n - 1, 2))
        else:
            d = np.array([0.0, -1.5]) + rng.normal(0, 0.3, size=(n - 1, 2))
        xy = np.vstack([[0.0, 0.0], np.cumsum(d, axis=0)]) + rng.uniform(0, 100, 2)
        segs.append(make_segment(xy, object_id=str(i)))
    return segs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
