"""Causal-effect estimators: 2SLS, OLS baseline, and the sample-splitting
weighted estimator with its variance and confidence interval."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.stats import norm

from .errors import DegeneracyError, DegeneracyWarning, LinearAlgebraError

VAR_FLOOR = 1e-12
SE_FLOOR = 1e-15


@dataclass(frozen=True)
class CausalEstimate:
    beta_hat: float
    se: float
    ci_low: float
    ci_high: float
    alpha: float
    method: str
    n_used: int
    instruments_used: List[int]

    def to_dict(self):
        return {
            "beta_hat": self.beta_hat,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "alpha": self.alpha,
            "method": self.method,
            "n_used": self.n_used,
            "instruments_used": list(self.instruments_used),
        }

    def summary(self) -> str:
        return (f"{self.method}: beta_hat={self.beta_hat:.6g} se={self.se:.6g} "
                f"{100 * (1 - self.alpha):g}% CI [{self.ci_low:.6g}, {self.ci_high:.6g}] "
                f"n={self.n_used} instruments={list(self.instruments_used)}")


def _normal_ci(beta, se, alpha):
    z = norm.ppf(1.0 - alpha / 2.0)
    return beta - z * se, beta + z * se


def tsls(Z_valid: np.ndarray, D: np.ndarray, Y: np.ndarray,
         alpha: float = 0.05, instruments: Optional[List[int]] = None) -> CausalEstimate:
    """Two-stage least squares via the projection on the instrument span.

    SE uses the homoskedastic structural residual Y - beta_hat * D.
    """
    Z = np.asarray(Z_valid, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    D = np.asarray(D, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, k = Z.shape
    ZtZ = Z.T @ Z
    try:
        coef_D = np.linalg.solve(ZtZ, Z.T @ D)
        coef_Y = np.linalg.solve(ZtZ, Z.T @ Y)
    except np.linalg.LinAlgError as exc:
        raise LinearAlgebraError("singular Z'Z in 2SLS") from exc
    DPD = (Z @ coef_D) @ D
    if DPD <= VAR_FLOOR:
        raise DegeneracyError("weak instruments: D'PD is numerically zero")
    beta = ((Z @ coef_Y) @ D) / DPD
    resid = Y - beta * D
    sigma2 = resid @ resid / n
    se = math.sqrt(sigma2 / DPD)
    lo, hi = _normal_ci(beta, se, alpha)
    return CausalEstimate(beta_hat=float(beta), se=se, ci_low=lo, ci_high=hi,
                          alpha=alpha, method="tsls", n_used=n,
                          instruments_used=list(instruments) if instruments is not None
                          else list(range(k)))


def ols(x: np.ndarray, y: np.ndarray, alpha: float = 0.05) -> CausalEstimate:
    """Simple regression slope of y on x (both centered), as a diagnostic."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    xtx = x @ x
    if xtx <= 0.0:
        raise DegeneracyError("zero-variance regressor in OLS")
    beta = x @ y / xtx
    resid = y - beta * x
    se = math.sqrt(max(resid @ resid / n / xtx, 0.0))
    se = max(se, SE_FLOOR)
    lo, hi = _normal_ci(beta, se, alpha)
    return CausalEstimate(beta_hat=float(beta), se=se, ci_low=lo, ci_high=hi,
                          alpha=alpha, method="ols", n_used=n, instruments_used=[])


def split_weight_matrix(Sigma_hat: np.ndarray, S4: List[int]) -> np.ndarray:
    """Schur complement of the S4 block against its complement."""
    Sigma = np.asarray(Sigma_hat, dtype=float)
    q = Sigma.shape[0]
    S4 = list(S4)
    comp = [j for j in range(q) if j not in S4]
    A = Sigma[np.ix_(S4, S4)]
    if not comp:
        return A
    B = Sigma[np.ix_(S4, comp)]
    C = Sigma[np.ix_(comp, comp)]
    try:
        solved = np.linalg.solve(C, B.T)
    except np.linalg.LinAlgError as exc:
        raise LinearAlgebraError("singular complement block in weighting matrix") from exc
    return A - B @ solved


def split_estimator(gamma2: np.ndarray, Gamma2: np.ndarray,
                    W: np.ndarray, S4: List[int]) -> float:
    """Weighted ratio gamma' W Gamma / gamma' W gamma on the S4 coordinates."""
    g = np.asarray(gamma2, dtype=float)[list(S4)]
    G = np.asarray(Gamma2, dtype=float)[list(S4)]
    denom = g @ W @ g
    if denom == 0.0:
        raise DegeneracyError("zero quadratic form gamma' W gamma")
    return float(g @ W @ G / denom)


def split_variance(beta_split: float, gamma2: np.ndarray, Gamma2: np.ndarray,
                   W: np.ndarray, S4: List[int], thetas) -> float:
    """Variance estimate (T11 + b^2 T22 - 2 b T12) / (gamma' W gamma)."""
    t11, t22, t12 = thetas
    g = np.asarray(gamma2, dtype=float)[list(S4)]
    denom = g @ W @ g
    if denom <= 0.0:
        raise DegeneracyError("nonpositive quadratic form gamma' W gamma")
    num = t11 + beta_split ** 2 * t22 - 2.0 * beta_split * t12
    if num <= 0.0:
        warnings.warn("nonpositive split variance numerator floored", DegeneracyWarning)
        num = VAR_FLOOR
    return float(num / denom)


def split_ci(beta_split: float, v_split: float, n2: int,
             alpha: float = 0.05, instruments: Optional[List[int]] = None) -> CausalEstimate:
    """Normal interval beta +- z * sqrt(v / n2)."""
    se = math.sqrt(max(v_split, 0.0) / n2)
    lo, hi = _normal_ci(beta_split, se, alpha)
    return CausalEstimate(beta_hat=float(beta_split), se=se, ci_low=lo, ci_high=hi,
                          alpha=alpha, method="split", n_used=n2,
                          instruments_used=list(instruments or []))
