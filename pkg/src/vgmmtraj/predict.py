"""Student-t predictive mixture, conditioning on history, and model selection."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import FeatureVector, TrackPoint, TrajectorySegment, build_feature_vectors, feature_matrix
from .errors import (
    AllFitsFailed,
    DofNotPositive,
    EmptyInput,
    InsufficientHistory,
    KTooLarge,
    NumericalFailure,
)
from .vbgmm import Hyperparameters, VbGmmModel, _cholesky, _spd_inverse, fit

TIE_TOLERANCE = 1e-12


def _lgamma_shift(a: float, d: float) -> float:
    """ln G(a + d) - ln G(a), stable for large a."""
    if a < 100.0:
        return math.lgamma(a + d) - math.lgamma(a)
    # Stirling difference; direct subtraction of two ~a ln a terms loses digits
    b = a + d
    series = (1.0 / b - 1.0 / a) / 12.0 - (1.0 / b**3 - 1.0 / a**3) / 360.0
    return (a - 0.5) * math.log1p(d / a) + d * math.log(b) - d + series


def student_t_logpdf(x, mean, precision, dof: float) -> float:
    """Log density of a multivariate Student-t parameterised by its precision.

    ln G((v+D)/2) - ln G(v/2) - (D/2) ln(v pi) + (1/2) ln|eta| - ((v+D)/2) ln(1 + delta/v)
    with delta the squared Mahalanobis distance under ``precision``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    if not dof > 0:
        raise NumericalFailure(f"dof must be > 0, got {dof!r}")
    D = mean.size
    try:
        L = np.linalg.cholesky(0.5 * (precision + precision.T))
    except np.linalg.LinAlgError:
        raise NumericalFailure("precision is not positive-definite") from None
    z = (x - mean) @ L
    delta = float(z @ z)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    out = (
        _lgamma_shift(0.5 * dof, 0.5 * D)
        - 0.5 * D * math.log(dof * math.pi)
        + 0.5 * log_det
        - 0.5 * (dof + D) * math.log1p(delta / dof)
    )
    if not math.isfinite(out):
        raise NumericalFailure("non-finite Student-t log density")
    return out


@dataclass(frozen=True, eq=False)
class StudentTComponent:
    weight: float
    mean: np.ndarray
    precision: np.ndarray
    dof: float

    @property
    def scale(self) -> np.ndarray:
        return _spd_inverse(self.precision, "precision")


@dataclass(frozen=True, eq=False)
class PredictiveMixture:
    components: tuple[StudentTComponent, ...]
    D: int
    h_dim: int
    f_dim: int

    def __post_init__(self):
        if self.h_dim + self.f_dim != self.D:
            raise ValueError(f"h_dim + f_dim = {self.h_dim + self.f_dim} != D = {self.D}")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"component weights sum to {total!r}, not 1")

    @classmethod
    def from_unnormalized(
        cls, weights, means, precisions, dofs, h_dim: int
    ) -> "PredictiveMixture":
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        comps = tuple(
            StudentTComponent(float(wk), np.asarray(m, dtype=float), np.asarray(p, dtype=float), float(v))
            for wk, m, p, v in zip(w, means, precisions, dofs)
        )
        D = comps[0].mean.size
        return cls(comps, D, h_dim, D - h_dim)

    def logpdf(self, x) -> float:
        terms = [math.log(c.weight) + student_t_logpdf(x, c.mean, c.precision, c.dof) for c in self.components if c.weight > 0]
        return _logsumexp(np.array(terms))


@dataclass(frozen=True, eq=False)
class ConditionalPrediction:
    gating: np.ndarray  # (K,)
    cond_means: np.ndarray  # (K, f_dim)
    cond_dofs: np.ndarray  # (K,)
    cond_precisions: np.ndarray  # (K, f_dim, f_dim)
    point: np.ndarray  # (f_dim,)

    def logpdf(self, x_f) -> float:
        """ln p(x_f | x_h) under the conditioned mixture."""
        terms = [
            math.log(g) + student_t_logpdf(x_f, m, p, v)
            for g, m, p, v in zip(self.gating, self.cond_means, self.cond_precisions, self.cond_dofs)
            if g > 0
        ]
        return _logsumexp(np.array(terms))


def _logsumexp(a: np.ndarray) -> float:
    top = float(np.max(a))
    return top + math.log(float(np.sum(np.exp(a - top))))


def to_predictive_mixture(
    model: VbGmmModel, eta_paper_exact: bool = False, h_dim: Optional[int] = None
) -> PredictiveMixture:
    """Posterior predictive of a fitted model as a Student-t mixture.

    Component k has weight alpha_k / sum(alpha), location m_k, dof
    v_k + 1 - D and precision (v_k + 1 - D) beta_k / (1 + beta_k) w_k. With
    ``eta_paper_exact`` the beta_k factor in the numerator is dropped.
    """
    if h_dim is None:
        h_dim = model.metadata.get("h_dim")
    if h_dim is None:
        raise ValueError("h_dim is neither given nor stored in the model metadata")
    D = model.D
    alphas = model.alphas
    comps = []
    for c, a in zip(model.components, alphas / alphas.sum()):
        dof = c.v + 1.0 - D
        if not dof > 0:
            raise DofNotPositive(f"v_k + 1 - D = {dof!r} is not positive")
        factor = dof / (1.0 + c.beta) if eta_paper_exact else dof * c.beta / (1.0 + c.beta)
        comps.append(StudentTComponent(float(a), c.m.copy(), factor * c.w, dof))
    return PredictiveMixture(tuple(comps), D, int(h_dim), D - int(h_dim))


def condition(mix: PredictiveMixture, x_h) -> ConditionalPrediction:
    """Condition the mixture on an observed history block.

    Each component's scale is split into history/future blocks; gating
    weights come from the history marginal (same dof, scale block S_hh) and
    each component's conditional mean is m_f + S_fh S_hh^-1 (x_h - m_h).
    The point forecast is the gating-weighted sum of those means.
    """
    x_h = np.asarray(x_h, dtype=float).ravel()
    h = mix.h_dim
    if x_h.size != h:
        raise ValueError(f"x_h has {x_h.size} entries, expected {h}")
    if not np.all(np.isfinite(x_h)):
        raise ValueError("x_h contains non-finite values")

    K = len(mix.components)
    log_gate = np.full(K, -np.inf)
    means = np.empty((K, mix.f_dim))
    dofs = np.empty(K)
    precs = np.empty((K, mix.f_dim, mix.f_dim))
    for k, c in enumerate(mix.components):
        S = _spd_inverse(c.precision, f"precision[{k}]")
        S_hh, S_fh, S_ff = S[:h, :h], S[h:, :h], S[h:, h:]
        L = _cholesky(S_hh, f"history scale block [{k}]")
        diff = x_h - c.mean[:h]
        # S_hh^-1 applied via the Cholesky factor
        sol = np.linalg.solve(L.T, np.linalg.solve(L, diff))
        gain = np.linalg.solve(L.T, np.linalg.solve(L, S_fh.T)).T  # S_fh S_hh^-1
        means[k] = c.mean[h:] + gain @ diff
        delta = float(diff @ sol)
        dofs[k] = c.dof + h
        schur = S_ff - gain @ S_fh.T
        precs[k] = _spd_inverse(schur * (c.dof + delta) / (c.dof + h), f"conditional scale [{k}]")
        if c.weight > 0:
            hist_prec = _spd_inverse(S_hh)
            log_gate[k] = math.log(c.weight) + student_t_logpdf(x_h, c.mean[:h], hist_prec, c.dof)
    log_gate -= _logsumexp(log_gate[np.isfinite(log_gate)])
    gating = np.exp(log_gate)
    gating /= gating.sum()
    point = gating @ means
    return ConditionalPrediction(gating, means, dofs, precs, point)


def _xy_of(recent) -> tuple[np.ndarray, Optional[TrackPoint]]:
    if len(recent) and isinstance(recent[0], TrackPoint):
        return np.array([(p.x, p.y) for p in recent], dtype=float), recent[-1]
    return np.asarray(recent, dtype=float).reshape(-1, 2), None


def predict_future(
    model: VbGmmModel | PredictiveMixture,
    recent: Sequence[TrackPoint],
    H: int,
    F: int,
    steps: int,
    eta_paper_exact: bool = False,
) -> list[TrackPoint]:
    """Forecast ``steps`` future positions from the last H+1 observed points.

    Each conditioning round yields F displacements, accumulated from the last
    known position; beyond F steps the forecasts are fed back as history.
    Timestamps continue at the last observed sampling interval.
    """
    xy, last = _xy_of(recent)
    if len(xy) < H + 1:
        raise InsufficientHistory(f"need at least H + 1 = {H + 1} points, got {len(xy)}")
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    mix = model if isinstance(model, PredictiveMixture) else to_predictive_mixture(model, eta_paper_exact, h_dim=2 * H)
    if mix.h_dim != 2 * H or mix.f_dim != 2 * F:
        raise ValueError(f"model is windowed for h_dim={mix.h_dim}, f_dim={mix.f_dim}; got H={H}, F={F}")

    track = [row for row in xy[-(H + 1) :]]
    out: list[np.ndarray] = []
    while len(out) < steps:
        x_h = np.diff(np.array(track[-(H + 1) :]), axis=0).ravel()
        disp = condition(mix, x_h).point.reshape(F, 2)
        new = track[-1] + np.cumsum(disp, axis=0)
        for p in new[: steps - len(out)]:
            out.append(p)
            track.append(p)

    if last is not None:
        oid, t0 = last.object_id, last.timestamp
        dt = recent[-1].timestamp - recent[-2].timestamp if len(recent) > 1 else 1.0
    else:
        oid, t0, dt = None, float(len(xy) - 1), 1.0
    return [TrackPoint(oid, t0 + dt * (i + 1), float(p[0]), float(p[1])) for i, p in enumerate(out)]


@dataclass(frozen=True)
class CandidateGrid:
    """Grid searched by :func:`select_model`.

    The hyperparameter overrides are scalars because the feature dimension,
    and hence m0 and w0, changes with H; unset values take the data-scaled
    defaults of :meth:`Hyperparameters.default`.
    """

    K_values: tuple[int, ...]
    H_values: tuple[int, ...]
    F: int
    alpha0: Optional[float] = None
    beta0: Optional[float] = None
    v0: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "K_values", tuple(int(k) for k in self.K_values))
        object.__setattr__(self, "H_values", tuple(int(h) for h in self.H_values))
        if not self.K_values or not self.H_values:
            raise ValueError("candidate grid must be non-empty")
        if min(self.K_values + self.H_values) < 1 or self.F < 1:
            raise ValueError("K, H and F values must all be >= 1")

    def cells(self) -> list[tuple[int, int]]:
        return list(itertools.product(self.K_values, self.H_values))


class Selection(NamedTuple):
    model: VbGmmModel
    K: int
    H: int
    score: float
    table: tuple[tuple[int, int, float], ...]  # (K, H, score); nan for failed fits


def windows(segments: Sequence[TrajectorySegment], H: int, F: int) -> list[FeatureVector]:
    return [fv for seg in segments for fv in build_feature_vectors(seg, H, F)]


def validation_score(mix: PredictiveMixture, vectors: Sequence[FeatureVector]) -> float:
    """Mean ln p(x_f | x_h) over held-out windows."""
    if not vectors:
        raise EmptyInput("no validation windows")
    return float(np.mean([condition(mix, v.history).logpdf(v.future) for v in vectors]))


def _best(entries: Sequence[tuple[int, int, float]]) -> tuple[int, int, float]:
    """Highest score; near-equal scores go to the smaller K, then smaller H."""
    finite = [e for e in entries if math.isfinite(e[2])]
    if not finite:
        raise AllFitsFailed("no candidate produced a finite validation score")
    top = max(e[2] for e in finite)
    tied = [e for e in finite if top - e[2] <= TIE_TOLERANCE * max(1.0, abs(top))]
    return min(tied, key=lambda e: (e[0], e[1]))


def select_model(
    train: Sequence[TrajectorySegment],
    validation: Sequence[TrajectorySegment],
    grid: CandidateGrid,
    tol: float = 1e-6,
    max_iter: int = 200,
    seed: int = 0,
    eta_paper_exact: bool = False,
    workers: int = 1,
) -> Selection:
    """Fit one model per (K, H) cell and keep the best held-out scorer.

    Cell i is fitted with seed ``seed + i``, so the result does not depend
    on ``workers``. The returned model carries H, F, h_dim, f_dim,
    eta_paper_exact and score in its metadata.
    """
    cells = grid.cells()

    def run(i_cell):
        i, (K, H) = i_cell
        try:
            X = feature_matrix(windows(train, H, grid.F))
            val = windows(validation, H, grid.F)
            hyper = Hyperparameters.default(X, K, alpha0=grid.alpha0, beta0=grid.beta0, v0=grid.v0)
            model = fit(X, K, hyper, tol=tol, max_iter=max_iter, seed=seed + i)
            mix = to_predictive_mixture(model, eta_paper_exact, h_dim=2 * H)
            return model, validation_score(mix, val)
        except (NumericalFailure, KTooLarge, EmptyInput):
            return None, float("nan")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, enumerate(cells)))
    else:
        results = [run(c) for c in enumerate(cells)]

    table = tuple((K, H, score) for (K, H), (_, score) in zip(cells, results))
    K, H, score = _best(table)
    model = results[cells.index((K, H))][0]
    meta = {
        "H": H,
        "F": grid.F,
        "h_dim": 2 * H,
        "f_dim": 2 * grid.F,
        "eta_paper_exact": eta_paper_exact,
        "score": score,
    }
    model = VbGmmModel(
        K=model.K,
        D=model.D,
        hyper=model.hyper,
        components=model.components,
        elbo_trace=model.elbo_trace,
        converged=model.converged,
        seed=model.seed,
        n_iter=model.n_iter,
        metadata={**model.metadata, **meta},
    )
    return Selection(model, K, H, score, table)
