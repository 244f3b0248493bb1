"""Prediction metrics, a constant-velocity baseline and the observable-length sweep."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .core import GridSpec, TrackPoint, TrajectorySegment
from .errors import EmptyInput, InsufficientHistory, LengthMismatch, NoTestCases
from .predict import PredictiveMixture, predict_future, to_predictive_mixture
from .vbgmm import VbGmmModel

REPORT_HEADER = "observable_length,rmse,accuracy,n_cases"

# (recent positions as an (H+1, 2) array, steps) -> (steps, 2) forecast
Forecaster = Callable[[np.ndarray, int], np.ndarray]


def _pair(predicted, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=float).reshape(-1, 2)
    a = np.asarray(actual, dtype=float).reshape(-1, 2)
    if len(p) != len(a):
        raise LengthMismatch(f"{len(p)} predicted points vs {len(a)} actual points")
    if len(p) == 0:
        raise EmptyInput("no points to compare")
    return p, a


def rmse(predicted, actual) -> float:
    """Average k-step prediction error: mean Euclidean distance per step.

    Despite the name this is (1/k) * sum_i ||p_i - a_i||, not a root of
    mean squares.
    """
    p, a = _pair(predicted, actual)
    return float(np.mean(np.hypot(p[:, 0] - a[:, 0], p[:, 1] - a[:, 1])))


def accuracy(predicted, actual, grid: GridSpec) -> float:
    """Fraction of steps whose prediction lands in the true point's grid cell."""
    p, a = _pair(predicted, actual)
    hit = np.all(grid.cells(p) == grid.cells(a), axis=1)
    return float(np.mean(hit))


def constant_velocity_baseline(recent, steps: int) -> np.ndarray:
    """Repeat the last observed displacement ``steps`` times."""
    if len(recent) and isinstance(recent[0], TrackPoint):
        xy = np.array([(p.x, p.y) for p in recent], dtype=float)
    else:
        xy = np.asarray(recent, dtype=float).reshape(-1, 2)
    if len(xy) < 2:
        raise InsufficientHistory(f"need at least 2 points, got {len(xy)}")
    step = xy[-1] - xy[-2]
    return xy[-1] + np.outer(np.arange(1, steps + 1), step)


def vgmm_forecaster(model: VbGmmModel, eta_paper_exact: Optional[bool] = None) -> Forecaster:
    """Wrap a fitted, windowed model (H and F in its metadata) as a forecaster."""
    H, F = int(model.metadata["H"]), int(model.metadata["F"])
    if eta_paper_exact is None:
        eta_paper_exact = bool(model.metadata.get("eta_paper_exact", False))
    mix: PredictiveMixture = to_predictive_mixture(model, eta_paper_exact, h_dim=2 * H)

    def forecast(recent_xy: np.ndarray, steps: int) -> np.ndarray:
        pts = predict_future(mix, recent_xy, H, F, steps)
        return np.array([(p.x, p.y) for p in pts], dtype=float).reshape(-1, 2)

    return forecast


class ReportRow(NamedTuple):
    observable_length: int
    rmse: float
    accuracy: float
    n_cases: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ReportRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(REPORT_HEADER + "\n")
        for r in self.rows:
            buf.write(f"{r.observable_length},{r.rmse:.6f},{r.accuracy:.6f},{r.n_cases}\n")
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")


def window_cases(
    segments: Iterable[TrajectorySegment], H: int, F: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """(recent H+1 positions, next F positions) for every window of every segment."""
    out = []
    for seg in segments:
        xy = np.asarray(seg.xy)
        for a in range(H, len(xy) - F):
            out.append((xy[a - H : a + 1], xy[a + 1 : a + 1 + F]))
    return out


def evaluate_cases(
    forecaster: Optional[Forecaster], cases: Sequence[tuple[np.ndarray, np.ndarray]], grid: GridSpec
) -> tuple[float, float]:
    """Mean error and mean accuracy of ``forecaster`` over ``cases``.

    A ``None`` forecaster predicts the true future (test mode).
    """
    if not cases:
        raise NoTestCases("no test cases")
    errs, accs = [], []
    for recent, actual in cases:
        pred = actual if forecaster is None else forecaster(recent, len(actual))
        errs.append(rmse(pred, actual))
        accs.append(accuracy(pred, actual, grid))
    return float(np.mean(errs)), float(np.mean(accs))


def sweep_observable_length(
    forecasters: Union[Mapping[int, Forecaster], Callable[[int], Forecaster]],
    test_segments: Sequence[TrajectorySegment],
    H_range: Iterable[int],
    F: int,
    grid: GridSpec,
    seed: int = 0,
    max_cases: Optional[int] = None,
    inject_truth: bool = False,
) -> EvalReport:
    """One report row per observable length H, ascending.

    ``forecasters`` maps H to the forecaster trained for that history
    length. ``max_cases`` caps the windows scored per row, drawn with
    ``seed``. ``inject_truth`` replaces every forecast by the true future,
    which must score zero error and full accuracy.
    """
    rows = []
    for H in sorted(set(int(h) for h in H_range)):
        cases = window_cases(test_segments, H, F)
        if not cases:
            raise NoTestCases(f"no test cases for observable length {H}")
        if max_cases is not None and len(cases) > max_cases:
            pick = np.sort(np.random.default_rng([seed, H]).choice(len(cases), size=max_cases, replace=False))
            cases = [cases[i] for i in pick]
        forecaster: Optional[Forecaster] = None
        if not inject_truth:
            forecaster = forecasters[H] if isinstance(forecasters, Mapping) else forecasters(H)
        err, acc = evaluate_cases(forecaster, cases, grid)
        rows.append(ReportRow(H, err, acc, len(cases)))
    return EvalReport(tuple(rows))
