"""Coordinate-descent lasso, nodewise precision estimation and debiasing.

All solvers work on the Gram representation G = X'X/n, c = X'y/n so that a
full cyclic sweep costs O(s^2) regardless of n.  The inner loops are JIT
compiled with numba; the cross-validated nodewise fit reuses per-fold Gram
matrices so the fold loop never touches the raw data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .data import RngStream
from .errors import DegeneracyError, DegeneracyWarning, DimensionError, LinearAlgebraError

SE_FLOOR = 1e-15
TAU2_FLOOR = 1e-12


@dataclass(frozen=True)
class LassoFit:
    """Result of a penalized least-squares fit (objective |y-Xb|^2/n + 2*lam*|b|_1)."""

    coefficients: np.ndarray
    lam: float
    objective_value: float
    iterations: int
    converged: bool

    def to_dict(self):
        return {
            "coefficients": self.coefficients.tolist(),
            "lambda": self.lam,
            "objective_value": self.objective_value,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class NodewisePrecision:
    """Nodewise-lasso precision estimate M = T^{-2} N.

    thetas[j] holds the coefficients of column j regressed on the others,
    embedded in an s-vector with thetas[j, j] = 0.
    """

    M: np.ndarray
    tau2: np.ndarray
    thetas: np.ndarray
    lambdas: np.ndarray


@dataclass(frozen=True)
class DebiasedFit:
    """One-step debiased lasso estimates with coefficient-wise standard errors."""

    estimates: np.ndarray
    ses: np.ndarray
    residual_ss_over_n: float
    lasso: LassoFit

    def to_dict(self):
        return {
            "estimates": self.estimates.tolist(),
            "ses": self.ses.tolist(),
            "residual_ss_over_n": self.residual_ss_over_n,
            "lasso": self.lasso.to_dict(),
        }


@njit(cache=True)
def _cd_gram(G, c, beta, lam, tol, max_iter, skip):
    """Cyclic coordinate descent on the Gram system; beta updated in place.

    skip >= 0 pins beta[skip] = 0, which turns the full problem into the
    nodewise regression of column `skip` on the remaining columns when
    c = G[:, skip].
    """
    s = G.shape[0]
    iters = 0
    converged = False
    while iters < max_iter:
        iters += 1
        max_delta = 0.0
        for j in range(s):
            if j == skip:
                continue
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            r = c[j] + gjj * beta[j]
            for k in range(s):
                r -= G[j, k] * beta[k]
            if r > lam:
                new = (r - lam) / gjj
            elif r < -lam:
                new = (r + lam) / gjj
            else:
                new = 0.0
            d = abs(new - beta[j])
            if d > max_delta:
                max_delta = d
            beta[j] = new
        if max_delta <= tol:
            converged = True
            break
    return iters, converged


@njit(cache=True)
def _nodewise_sse(S, beta, j):
    """||X_j - X beta||^2 computed from the raw Gram S = X'X (beta[j] = 0)."""
    s = S.shape[0]
    out = S[j, j]
    for k in range(s):
        if beta[k] != 0.0:
            out -= 2.0 * beta[k] * S[k, j]
            for m in range(s):
                if beta[m] != 0.0:
                    out += beta[k] * S[k, m] * beta[m]
    return out


@njit(cache=True)
def _nodewise_cv_errors(S_folds, S_full, fold_sizes, lams, tol, max_iter):
    """Pooled held-out SSE for each candidate penalty, over all s regressions."""
    F, s, _ = S_folds.shape
    n = 0
    for f in range(F):
        n += fold_sizes[f]
    L = lams.shape[0]
    errs = np.zeros(L)
    Gtr = np.empty((s, s))
    beta = np.empty(s)
    for f in range(F):
        ntr = n - fold_sizes[f]
        for a in range(s):
            for b in range(s):
                Gtr[a, b] = (S_full[a, b] - S_folds[f, a, b]) / ntr
        for j in range(s):
            for k in range(s):
                beta[k] = 0.0
            for li in range(L):  # descending lams, warm started
                _cd_gram(Gtr, Gtr[:, j], beta, lams[li], tol, max_iter, j)
                errs[li] += _nodewise_sse(S_folds[f], beta, j)
    return errs


def _gram(X, y=None):
    n = X.shape[0]
    G = (X.T @ X) / n
    if y is None:
        return G
    return G, (X.T @ y) / n


def fit_lasso(X: np.ndarray, y: np.ndarray, lam: float,
              tol: float = 1e-7, max_iter: int = 10_000,
              beta0: Optional[np.ndarray] = None) -> LassoFit:
    """Minimize ||y - X b||^2/n + 2*lam*||b||_1 by cyclic coordinate descent."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, s = X.shape
    if s < 1:
        raise DimensionError("X needs at least one column")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    G, c = _gram(X, y)
    if lam == 0.0 and np.any(np.diag(G) <= 0.0):
        raise LinearAlgebraError("zero-variance column with lambda = 0")
    beta = np.zeros(s) if beta0 is None else np.array(beta0, dtype=float)
    iters, converged = _cd_gram(G, c, beta, lam, tol, max_iter, -1)
    resid = y - X @ beta
    objective = resid @ resid / n + 2.0 * lam * np.abs(beta).sum()
    return LassoFit(coefficients=beta, lam=lam, objective_value=objective,
                    iterations=iters, converged=converged)


def _refit_all_nodewise(S, n, lams, tol, max_iter):
    s = S.shape[0]
    G = S / n
    thetas = np.zeros((s, s))
    tau2 = np.empty(s)
    for j in range(s):
        beta = np.zeros(s)
        _cd_gram(G, G[:, j], beta, lams[j], tol, max_iter, j)
        thetas[j] = beta
        tau2[j] = _nodewise_sse(S, beta, j) / n + lams[j] * np.abs(beta).sum()
    return thetas, tau2


def fit_nodewise(X: np.ndarray, lam: Optional[float] = None,
                 cv_folds: Optional[int] = None, rng: Optional[RngStream] = None,
                 n_lambdas: int = 12, lambda_min_ratio: float = 1e-3,
                 tol: float = 1e-7, max_iter: int = 10_000) -> NodewisePrecision:
    """Nodewise lasso of each column on the others, assembled into M = T^{-2} N.

    Either a fixed penalty `lam` is applied to every regression, or
    `cv_folds` selects one shared penalty by pooled cross-validated
    prediction error across all s regressions (fold assignment drawn from
    `rng`), after which all regressions are refit at the chosen value.
    """
    X = np.ascontiguousarray(X, dtype=float)
    n, s = X.shape
    if s < 2:
        raise DimensionError(f"nodewise fit needs at least 2 columns, got {s}")
    S = X.T @ X

    if lam is not None:
        lams = np.full(s, float(lam))
    else:
        if cv_folds is None or rng is None:
            raise ValueError("either lam or (cv_folds, rng) must be given")
        G = S / n
        off = np.abs(G - np.diag(np.diag(G)))
        lam_max = off.max()
        if lam_max <= 0:
            lam_max = 1.0
        grid = lam_max * np.logspace(0, np.log10(lambda_min_ratio), n_lambdas)
        perm = rng.generator().permutation(n)
        folds = np.array_split(perm, cv_folds)
        S_folds = np.stack([X[f].T @ X[f] for f in folds])
        fold_sizes = np.array([len(f) for f in folds], dtype=np.int64)
        errs = _nodewise_cv_errors(S_folds, S, fold_sizes, grid, tol, max_iter)
        lams = np.full(s, grid[int(np.argmin(errs))])

    thetas, tau2 = _refit_all_nodewise(S, n, lams, tol, max_iter)
    bad = np.nonzero(tau2 <= TAU2_FLOOR)[0]
    if bad.size:
        raise DegeneracyError(f"nodewise residual scale tau^2 degenerate for column {bad[0]}")
    M = -thetas / tau2[:, None]
    M[np.arange(s), np.arange(s)] = 1.0 / tau2
    return NodewisePrecision(M=M, tau2=tau2, thetas=thetas, lambdas=lams)


def debias(lasso: LassoFit, precision: NodewisePrecision,
           X: np.ndarray, y: np.ndarray) -> DebiasedFit:
    """One-step correction b + M X'(y - X b)/n with coefficient-wise SEs."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, s = X.shape
    beta = lasso.coefficients
    M = precision.M
    if beta.shape[0] != s or M.shape != (s, s) or y.shape[0] != n:
        raise DimensionError("lasso fit, precision matrix and data dimensions disagree")
    resid = y - X @ beta
    estimates = beta + M @ (X.T @ resid) / n
    rss_n = resid @ resid / n
    Sigma = X.T @ X / n
    var = np.diag(M @ Sigma @ M.T) / n * rss_n
    if np.any(var <= 0.0):
        warnings.warn("degenerate standard errors floored", DegeneracyWarning)
    ses = np.sqrt(np.maximum(var, 0.0))
    ses = np.maximum(ses, SE_FLOOR)
    return DebiasedFit(estimates=estimates, ses=ses,
                       residual_ss_over_n=rss_n, lasso=lasso)


def theta_hats(X: np.ndarray, D: np.ndarray, Y: np.ndarray,
               gamma_tilde: np.ndarray, Gamma_tilde: np.ndarray):
    """Residual second moments (Theta_11, Theta_22, Theta_12).

    Theta_11 uses the outcome regression residual, Theta_22 the exposure
    residual, Theta_12 their cross moment; all normalized by n.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if X.shape[1] != len(gamma_tilde) or X.shape[1] != len(Gamma_tilde):
        raise DimensionError("coefficient lengths must match X columns")
    res_y = Y - X @ Gamma_tilde
    res_d = D - X @ gamma_tilde
    return res_y @ res_y / n, res_d @ res_d / n, res_y @ res_d / n
