"""Independent reference implementations used to check the package.

Each one takes a different route from the code under test: brute-force
enumeration, straight-line formulas without log-sum-exp, scipy densities,
sequential instead of batch conjugate updates, precision-form instead of
covariance-form conditioning.
"""

import math

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist
from scipy.special import digamma, multigammaln

from vgmmtraj.preprocess import PointLabel, Role


def brute_force_dbscan(xy, eps, min_pts):
    """O(n^2) DBSCAN: full distance matrix, union-find over core points."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    n = len(xy)
    adj = cdist(xy, xy) <= eps
    core = adj.sum(axis=1) >= min_pts
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if core[i] and core[j] and adj[i, j]:
                parent[find(i)] = find(j)
    ids = {}
    for i in range(n):
        if core[i]:
            ids.setdefault(find(i), len(ids))
    out = []
    for i in range(n):
        if core[i]:
            out.append(PointLabel(Role.CORE, ids[find(i)]))
            continue
        core_nbrs = [j for j in range(n) if adj[i, j] and core[j]]
        out.append(PointLabel(Role.EDGE, ids[find(core_nbrs[0])]) if core_nbrs else PointLabel(Role.NOISE))
    return out


def e_step_direct(X, alphas, betas, means, ws, vs):
    """Responsibilities by exponentiating each ln rho and dividing by the row sum."""
    X = np.asarray(X, dtype=float)
    N, D = X.shape
    K = len(alphas)
    rho = np.zeros((N, K))
    for n in range(N):
        for k in range(K):
            e_ln_pi = digamma(alphas[k]) - digamma(sum(alphas))
            e_ln_det = sum(digamma((vs[k] + 1 - i) / 2) for i in range(1, D + 1)) + D * math.log(2) + math.log(
                np.linalg.det(ws[k])
            )
            d = X[n] - means[k]
            quad = D / betas[k] + vs[k] * float(d @ ws[k] @ d)
            rho[n, k] = math.exp(e_ln_pi + 0.5 * e_ln_det - 0.5 * D * math.log(2 * math.pi) - 0.5 * quad)
    return rho / rho.sum(axis=1, keepdims=True)


def m_step_direct(X, r, alpha0, beta0, m0, w0, v0):
    """Posterior updates written out point by point."""
    X = np.asarray(X, dtype=float)
    N, D = X.shape
    out = []
    for k in range(r.shape[1]):
        Nk = sum(r[n, k] for n in range(N))
        xbar = sum(r[n, k] * X[n] for n in range(N)) / Nk
        S = sum(r[n, k] * np.outer(X[n] - xbar, X[n] - xbar) for n in range(N)) / Nk
        beta = beta0 + Nk
        m = (beta0 * np.asarray(m0) + Nk * xbar) / beta
        w_inv = np.linalg.inv(w0) + Nk * S + (beta0 * Nk / beta) * np.outer(xbar - m0, xbar - m0)
        out.append(dict(alpha=alpha0 + Nk, beta=beta, m=m, w_inv=w_inv, v=v0 + Nk))
    return out


def nw_log_evidence(X, beta0, m0, w0, v0):
    """Closed-form ln p(X) under a Normal-Wishart prior (W parameterised as scale)."""
    X = np.asarray(X, dtype=float)
    N, D = X.shape
    xbar = X.mean(axis=0)
    S = (X - xbar).T @ (X - xbar)
    betaN = beta0 + N
    vN = v0 + N
    wN_inv = np.linalg.inv(w0) + S + (beta0 * N / betaN) * np.outer(xbar - m0, xbar - m0)
    _, logdet_w0 = np.linalg.slogdet(w0)
    _, logdet_wN_inv = np.linalg.slogdet(wN_inv)
    return (
        -0.5 * N * D * math.log(math.pi)
        + 0.5 * D * math.log(beta0 / betaN)
        + multigammaln(vN / 2, D)
        - multigammaln(v0 / 2, D)
        - 0.5 * v0 * logdet_w0
        - 0.5 * vN * logdet_wN_inv
    )


def nw_log_evidence_chain(X, beta0, m0, w0, v0):
    """ln p(X) as a sum of one-step Student-t predictives (scipy densities)."""
    X = np.asarray(X, dtype=float)
    D = X.shape[1]
    beta, m, w_inv, v = beta0, np.asarray(m0, dtype=float), np.linalg.inv(w0), v0
    total = 0.0
    for x in X:
        dof = v + 1 - D
        shape = (1 + beta) / (dof * beta) * w_inv
        total += stats.multivariate_t(loc=m, shape=shape, df=dof).logpdf(x)
        d = x - m
        w_inv = w_inv + (beta / (beta + 1)) * np.outer(d, d)
        m = (beta * m + x) / (beta + 1)
        beta += 1
        v += 1
    return total


def conditional_mean_precision_form(mean, precision, x_h, h):
    """E[x_f | x_h] = m_f - P_ff^-1 P_fh (x_h - m_h), using precision blocks only."""
    P_ff = precision[h:, h:]
    P_fh = precision[h:, :h]
    return mean[h:] - np.linalg.solve(P_ff, P_fh @ (np.asarray(x_h) - mean[:h]))


def random_spd(rng, D, cond=50.0):
    Q, _ = np.linalg.qr(rng.normal(size=(D, D)))
    eig = np.exp(rng.uniform(0, math.log(cond), size=D))
    return (Q * eig) @ Q.T
