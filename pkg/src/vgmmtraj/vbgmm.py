"""Variational Bayesian Gaussian mixture (Dirichlet / Normal-Wishart priors).

The posterior factorises as q(Z) q(pi) prod_k q(mu_k | Lambda_k) q(Lambda_k).
``e_step`` updates the responsibilities r = E[z], ``m_step`` the
Dirichlet and Normal-Wishart posteriors, and ``elbo`` evaluates the
variational lower bound that the alternation increases monotonically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .errors import KTooLarge, ModelParseError, NumericalFailure
from .preprocess import kmeans
from .special import (
    digamma,
    expected_log_det_wishart,
    log_dirichlet_norm,
    log_wishart_norm,
)

FORMAT_VERSION = 1
EMPTY_COMPONENT = 1e-12
JITTER_RETRIES = 3
LOG_2PI = math.log(2.0 * math.pi)


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _cholesky(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Cholesky factor of a symmetrised ``a``, adding diagonal jitter if needed."""
    a = _symmetrize(np.asarray(a, dtype=float))
    D = a.shape[0]
    jitter = 1e-9 * abs(np.trace(a)) / D
    if jitter == 0.0:
        jitter = 1e-12
    for attempt in range(JITTER_RETRIES + 1):
        try:
            return np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            if attempt == JITTER_RETRIES:
                break
            a = a + jitter * np.eye(D)
    raise NumericalFailure(f"{what} is not positive-definite")


def _spd_inverse(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    L = _cholesky(a, what)
    L_inv = np.linalg.solve(L, np.eye(len(L)))
    return _symmetrize(L_inv.T @ L_inv)


def _log_det_spd(a: np.ndarray) -> float:
    L = _cholesky(a)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    """Prior T = {alpha0, beta0, m0, w0, v0} shared by every component."""

    alpha0: float
    beta0: float
    m0: np.ndarray
    w0: np.ndarray
    v0: float

    def __post_init__(self):
        m0 = np.atleast_1d(np.asarray(self.m0, dtype=float)).copy()
        w0 = np.atleast_2d(np.asarray(self.w0, dtype=float)).copy()
        D = m0.size
        if w0.shape != (D, D):
            raise ValueError(f"w0 must be {D}x{D}, got {w0.shape}")
        if not self.alpha0 > 0:
            raise ValueError(f"alpha0 must be > 0, got {self.alpha0!r}")
        if not self.beta0 > 0:
            raise ValueError(f"beta0 must be > 0, got {self.beta0!r}")
        if not self.v0 > D - 1:
            raise ValueError(f"v0 must exceed D - 1 = {D - 1}, got {self.v0!r}")
        if not np.allclose(w0, w0.T, rtol=1e-10, atol=0.0):
            raise ValueError("w0 must be symmetric")
        try:
            np.linalg.cholesky(w0)
        except np.linalg.LinAlgError:
            raise ValueError("w0 must be positive-definite") from None
        m0.flags.writeable = False
        w0.flags.writeable = False
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "alpha0", float(self.alpha0))
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "v0", float(self.v0))

    @property
    def D(self) -> int:
        return self.m0.size

    @classmethod
    def default(
        cls,
        data: np.ndarray,
        K: int,
        alpha0: Optional[float] = None,
        beta0: Optional[float] = None,
        v0: Optional[float] = None,
    ) -> "Hyperparameters":
        """Weakly informative, data-scaled prior.

        alpha0 = 1/K, beta0 = 1, m0 = data mean, v0 = D + 2 and w0 chosen so
        that E[Lambda] = v0 * w0 is the inverse (ridge-regularised) data
        covariance.
        """
        X = np.asarray(data, dtype=float)
        N, D = X.shape
        v0 = float(D + 2) if v0 is None else float(v0)
        cov = np.cov(X.T, bias=True).reshape(D, D) if N > 1 else np.zeros((D, D))
        ridge = max(1e-6 * float(np.trace(cov)) / D, 1e-6)
        w0 = _spd_inverse(cov + ridge * np.eye(D)) / v0
        return cls(
            alpha0=1.0 / K if alpha0 is None else alpha0,
            beta0=1.0 if beta0 is None else beta0,
            m0=X.mean(axis=0),
            w0=w0,
            v0=v0,
        )


@dataclass(frozen=True, eq=False)
class SufficientStats:
    Nk: np.ndarray  # (K,)
    xbar: np.ndarray  # (K, D)
    S: np.ndarray  # (K, D, D)


@dataclass(frozen=True, eq=False)
class ComponentPosterior:
    alpha: float
    beta: float
    m: np.ndarray
    w: np.ndarray
    v: float

    @property
    def expected_precision(self) -> np.ndarray:
        return self.v * self.w


@dataclass(frozen=True, eq=False)
class VbGmmModel:
    K: int
    D: int
    hyper: Hyperparameters
    components: tuple[ComponentPosterior, ...]
    elbo_trace: tuple[float, ...]
    converged: bool
    seed: int
    n_iter: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([c.alpha for c in self.components])

    @property
    def elbo(self) -> float:
        return self.elbo_trace[-1] if self.elbo_trace else float("nan")

    @property
    def n_samples(self) -> float:
        return float(np.sum(self.alphas - self.hyper.alpha0))

    def expected_weights(self) -> np.ndarray:
        a = self.alphas
        return a / a.sum()


def init_responsibilities(data: np.ndarray, K: int, seed: int = 0) -> np.ndarray:
    """One-hot responsibilities from a seeded K-Means partition."""
    X = np.asarray(data, dtype=float)
    if K > len(X):
        raise KTooLarge(f"K={K} exceeds the number of samples ({len(X)})")
    assign = kmeans(X, K, seed=seed).assignments
    r = np.zeros((len(X), K))
    r[np.arange(len(X)), assign] = 1.0
    return r


def _stack(components: Sequence[ComponentPosterior]):
    alpha = np.array([c.alpha for c in components])
    beta = np.array([c.beta for c in components])
    m = np.stack([c.m for c in components])
    w = np.stack([c.w for c in components])
    v = np.array([c.v for c in components])
    return alpha, beta, m, w, v


def log_rho(data: np.ndarray, hyper: Hyperparameters, components: Sequence[ComponentPosterior]) -> np.ndarray:
    """Unnormalised log responsibilities ln rho_nk."""
    X = np.asarray(data, dtype=float)
    N, D = X.shape
    alpha, beta, m, w, v = _stack(components)
    e_log_pi = digamma(alpha) - digamma(alpha.sum())
    out = np.empty((N, len(components)))
    for k in range(len(components)):
        L = _cholesky(w[k], f"w[{k}]")
        log_det_w = 2.0 * float(np.sum(np.log(np.diag(L))))
        e_log_det = expected_log_det_wishart(v[k], log_det_w, D)
        proj = (X - m[k]) @ L
        quad = np.einsum("nd,nd->n", proj, proj)
        out[:, k] = e_log_pi[k] + 0.5 * e_log_det - 0.5 * D * LOG_2PI - 0.5 * (D / beta[k] + v[k] * quad)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("non-finite log responsibility")
    return out


def e_step(data: np.ndarray, hyper: Hyperparameters, components: Sequence[ComponentPosterior]) -> np.ndarray:
    lr = log_rho(data, hyper, components)
    lr -= lr.max(axis=1, keepdims=True)
    r = np.exp(lr)
    r /= r.sum(axis=1, keepdims=True)
    return r


def sufficient_stats(data: np.ndarray, r: np.ndarray, hyper: Hyperparameters) -> SufficientStats:
    X = np.asarray(data, dtype=float)
    r = np.asarray(r, dtype=float)
    K = r.shape[1]
    D = X.shape[1]
    Nk = r.sum(axis=0)
    xbar = np.empty((K, D))
    S = np.zeros((K, D, D))
    for k in range(K):
        if Nk[k] < EMPTY_COMPONENT:
            xbar[k] = hyper.m0
            continue
        xbar[k] = r[:, k] @ X / Nk[k]
        diff = X - xbar[k]
        S[k] = _symmetrize((r[:, k, None] * diff).T @ diff / Nk[k])
    return SufficientStats(Nk, xbar, S)


def m_step(
    data: np.ndarray, r: np.ndarray, hyper: Hyperparameters
) -> tuple[SufficientStats, tuple[ComponentPosterior, ...]]:
    """Posterior updates of the Dirichlet and Normal-Wishart factors."""
    stats = sufficient_stats(data, r, hyper)
    w0_inv = _spd_inverse(hyper.w0, "w0")
    comps = []
    for k in range(len(stats.Nk)):
        Nk = float(stats.Nk[k])
        if Nk < EMPTY_COMPONENT:
            comps.append(ComponentPosterior(hyper.alpha0, hyper.beta0, hyper.m0.copy(), hyper.w0.copy(), hyper.v0))
            continue
        beta = hyper.beta0 + Nk
        m = (hyper.beta0 * hyper.m0 + Nk * stats.xbar[k]) / beta
        d = stats.xbar[k] - hyper.m0
        w_inv = w0_inv + Nk * stats.S[k] + (hyper.beta0 * Nk / beta) * np.outer(d, d)
        w = _spd_inverse(w_inv, f"w[{k}]^-1")
        _cholesky(w, f"w[{k}]")
        comps.append(ComponentPosterior(hyper.alpha0 + Nk, beta, m, w, hyper.v0 + Nk))
    return stats, tuple(comps)


def elbo(
    data: np.ndarray,
    r: np.ndarray,
    hyper: Hyperparameters,
    components: Sequence[ComponentPosterior],
    stats: SufficientStats,
) -> float:
    """Variational lower bound F(q) on ln p(X)."""
    X = np.asarray(data, dtype=float)
    D = X.shape[1]
    K = len(components)
    alpha, beta, m, w, v = _stack(components)
    a0, b0, m0, w0, v0 = hyper.alpha0, hyper.beta0, hyper.m0, hyper.w0, hyper.v0
    w0_inv = _spd_inverse(w0, "w0")
    log_det_w0 = _log_det_spd(w0)

    e_log_pi = digamma(alpha) - digamma(alpha.sum())
    log_det_w = np.array([_log_det_spd(w[k]) for k in range(K)])
    e_log_det = np.array([expected_log_det_wishart(v[k], log_det_w[k], D) for k in range(K)])

    # E[ln p(X | Z, mu, Lambda)]
    lik = 0.0
    for k in range(K):
        dx = stats.xbar[k] - m[k]
        lik += 0.5 * stats.Nk[k] * (
            e_log_det[k]
            - D / beta[k]
            - v[k] * np.trace(stats.S[k] @ w[k])
            - v[k] * dx @ w[k] @ dx
            - D * LOG_2PI
        )

    # E[ln p(Z | pi)] and E[ln p(pi)]
    p_z = float(np.sum(r @ e_log_pi))
    p_pi = log_dirichlet_norm(np.full(K, a0)) + (a0 - 1.0) * float(e_log_pi.sum())

    # E[ln p(mu, Lambda)]
    p_mu_lam = 0.0
    lnB0 = log_wishart_norm(log_det_w0, v0, D)
    for k in range(K):
        dm = m[k] - m0
        p_mu_lam += 0.5 * (
            D * math.log(b0 / (2.0 * math.pi)) + e_log_det[k] - D * b0 / beta[k] - b0 * v[k] * dm @ w[k] @ dm
        )
        p_mu_lam += lnB0 + 0.5 * (v0 - D - 1.0) * e_log_det[k] - 0.5 * v[k] * np.trace(w0_inv @ w[k])

    # E[ln q(Z)], E[ln q(pi)], E[ln q(mu, Lambda)]
    with np.errstate(divide="ignore", invalid="ignore"):
        q_z = float(np.sum(np.where(r > 0, r * np.log(r), 0.0)))
    q_pi = float(np.sum((alpha - 1.0) * e_log_pi)) + log_dirichlet_norm(alpha)
    q_mu_lam = 0.0
    for k in range(K):
        entropy_lam = -log_wishart_norm(log_det_w[k], v[k], D) - 0.5 * (v[k] - D - 1.0) * e_log_det[k] + 0.5 * v[k] * D
        q_mu_lam += 0.5 * e_log_det[k] + 0.5 * D * math.log(beta[k] / (2.0 * math.pi)) - 0.5 * D - entropy_lam

    value = float(lik + p_z + p_pi + p_mu_lam - q_z - q_pi - q_mu_lam)
    if not math.isfinite(value):
        raise NumericalFailure("non-finite ELBO")
    return value


def fit(
    data: np.ndarray,
    K: int,
    hyper: Optional[Hyperparameters] = None,
    tol: float = 1e-6,
    max_iter: int = 200,
    seed: int = 0,
) -> VbGmmModel:
    """Fit a K-component variational GMM by alternating M and E steps.

    Stops once the relative ELBO change drops below ``tol`` or after
    ``max_iter`` M-steps.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"data must be an (N, D) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    N, D = X.shape
    if not 1 <= K <= N:
        raise KTooLarge(f"need 1 <= K <= N, got K={K}, N={N}")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    if hyper is None:
        hyper = Hyperparameters.default(X, K)
    if hyper.D != D:
        raise ValueError(f"hyperparameters are {hyper.D}-dimensional, data is {D}-dimensional")

    r = init_responsibilities(X, K, seed)
    trace: list[float] = []
    converged = False
    comps: tuple[ComponentPosterior, ...] = ()
    it = 0
    for it in range(1, max_iter + 1):
        stats, comps = m_step(X, r, hyper)
        trace.append(elbo(X, r, hyper, comps, stats))
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol * abs(trace[-1]):
            converged = True
            break
        r = e_step(X, hyper, comps)
    return VbGmmModel(
        K=K,
        D=D,
        hyper=hyper,
        components=comps,
        elbo_trace=tuple(trace),
        converged=converged,
        seed=seed,
        n_iter=it,
    )


def effective_components(model: VbGmmModel, weight_floor: float = 0.01) -> int:
    """Number of components whose expected share of the data is >= weight_floor."""
    if not 0 <= weight_floor < 1:
        raise ValueError(f"weight_floor must be in [0, 1), got {weight_floor!r}")
    N = model.n_samples
    if N <= 0:
        return 0
    share = (model.alphas - model.hyper.alpha0) / N
    return int(np.sum(share >= weight_floor))


# --- persistence -----------------------------------------------------------

_CORE_KEYS = {"version", "K", "D", "hyperparameters", "components", "elbo_trace", "converged", "seed", "n_iter"}


def model_to_dict(model: VbGmmModel) -> dict[str, Any]:
    h = model.hyper
    doc: dict[str, Any] = {
        "version": FORMAT_VERSION,
        "K": model.K,
        "D": model.D,
        "hyperparameters": {
            "alpha0": h.alpha0,
            "beta0": h.beta0,
            "m0": h.m0.tolist(),
            "w0": h.w0.tolist(),
            "v0": h.v0,
        },
        "components": [
            {"alpha": c.alpha, "beta": c.beta, "m": c.m.tolist(), "w": c.w.tolist(), "v": c.v}
            for c in model.components
        ],
        "elbo_trace": list(model.elbo_trace),
        "converged": model.converged,
        "seed": model.seed,
        "n_iter": model.n_iter,
    }
    for key, value in model.metadata.items():
        if key in _CORE_KEYS:
            raise ValueError(f"metadata key {key!r} clashes with a model field")
        doc[key] = value
    return doc


def model_from_dict(doc: dict[str, Any]) -> VbGmmModel:
    try:
        if doc["version"] != FORMAT_VERSION:
            raise ModelParseError(f"unsupported model version {doc['version']!r}")
        hp = doc["hyperparameters"]
        hyper = Hyperparameters(
            alpha0=float(hp["alpha0"]),
            beta0=float(hp["beta0"]),
            m0=np.array(hp["m0"], dtype=float),
            w0=np.array(hp["w0"], dtype=float),
            v0=float(hp["v0"]),
        )
        comps = tuple(
            ComponentPosterior(
                alpha=float(c["alpha"]),
                beta=float(c["beta"]),
                m=np.array(c["m"], dtype=float),
                w=np.array(c["w"], dtype=float),
                v=float(c["v"]),
            )
            for c in doc["components"]
        )
        K, D = int(doc["K"]), int(doc["D"])
        if len(comps) != K or hyper.D != D or any(c.m.shape != (D,) or c.w.shape != (D, D) for c in comps):
            raise ModelParseError("component shapes disagree with K and D")
        return VbGmmModel(
            K=K,
            D=D,
            hyper=hyper,
            components=comps,
            elbo_trace=tuple(float(e) for e in doc["elbo_trace"]),
            converged=bool(doc["converged"]),
            seed=int(doc["seed"]),
            n_iter=int(doc.get("n_iter", 0)),
            metadata={k: v for k, v in doc.items() if k not in _CORE_KEYS},
        )
    except ModelParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelParseError(f"model parse error: {exc}") from exc


def save_model(model: VbGmmModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> VbGmmModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"model parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelParseError("model parse error: top level must be an object")
    return model_from_dict(doc)
