"""End-to-end selection + estimation pipelines (proposed, naive, split)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .data import Dataset, RngStream, center
from .errors import DataError, DimensionError, LinearAlgebraError
from .estimation import (CausalEstimate, split_ci, split_estimator, split_variance,
                         split_weight_matrix, tsls)
from .lasso import debias, fit_lasso, fit_nodewise, theta_hats
from .selection import (SelectionTrace, ThresholdPolicy, generate_pseudos,
                        joint_threshold, marginal_screen, mode_find,
                        ratio_estimates, remove_spurious, se_ratio_difference,
                        vote_naive)


@dataclass(frozen=True)
class PipelineResult:
    trace: SelectionTrace
    estimate: Optional[CausalEstimate]
    method: str
    diagnostics: List[str] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {
            "method": self.method,
            "estimate": self.estimate.to_dict() if self.estimate else None,
            "trace": self.trace.to_dict(),
            "diagnostics": list(self.diagnostics),
            "timing": dict(self.timing),
        }


def default_screen_size(n: int, m: int) -> int:
    """floor(n / log n) rounded to the nearest 100, capped at m."""
    raw = n / math.log(n)
    s = int(round(raw / 100.0)) * 100
    if s == 0:
        s = max(1, int(raw))
    return min(s, m)


def default_lambda(p: int, n: int) -> float:
    """sqrt(log p / n) with p the pre-pseudo candidate count."""
    return math.sqrt(math.log(p) / n)


def _require_ready(ds: Dataset):
    if not ds.centered:
        raise DataError("pipeline input must be centered")
    if ds.X is not None:
        raise DataError("partial out covariates before running a pipeline")


def _fit_stage(X1, D, Y, lam, nodewise_lam, nodewise_cv, nodewise_rng):
    lasso_g = fit_lasso(X1, D, lam)
    lasso_G = fit_lasso(X1, Y, lam)
    if nodewise_lam is not None:
        prec = fit_nodewise(X1, lam=nodewise_lam)
    else:
        prec = fit_nodewise(X1, cv_folds=nodewise_cv, rng=nodewise_rng)
    dg = debias(lasso_g, prec, X1, D)
    dG = debias(lasso_G, prec, X1, Y)
    return lasso_g, lasso_G, prec, dg, dG


def _empty_result(method, S1, column_ids, pseudo_positions, S2, ratios, prange,
                  diagnostics, timing, S3=None):
    trace = SelectionTrace(S1=S1, S2=S2, S3=S3 if S3 is not None else [], S4=[],
                           ratios=ratios, pseudo_range=prange, vote_counts={},
                           pseudo_positions=frozenset(pseudo_positions),
                           column_ids=column_ids)
    return PipelineResult(trace=trace, estimate=None, method=method,
                          diagnostics=diagnostics, timing=timing)


def run_proposed(ds: Dataset, omega: float = 2.01, s: Optional[int] = None,
                 lam: Optional[float] = None, rng: RngStream = RngStream(0),
                 alpha: float = 0.05, nodewise_lam: Optional[float] = None,
                 nodewise_cv: int = 10) -> PipelineResult:
    """Pseudo-augmented pipeline: permute, screen, debias, threshold, remove
    spurious candidates, mode-find, then 2SLS on the surviving real columns."""
    _require_ready(ds)
    timing: Dict[str, float] = {}
    n, p = ds.n, ds.p

    t0 = time.perf_counter()
    Zt = np.hstack([ds.Z, generate_pseudos(ds.Z, rng.child(0))])
    timing["pseudo"] = time.perf_counter() - t0

    if s is None:
        s = default_screen_size(n, 2 * p)
    if s > 2 * p:
        raise DimensionError(f"screen size {s} exceeds expanded column count {2 * p}")
    if lam is None:
        lam = default_lambda(p, n)

    t0 = time.perf_counter()
    S1 = marginal_screen(Zt, ds.D, s)
    timing["screen"] = time.perf_counter() - t0
    X1 = np.ascontiguousarray(Zt[:, S1])
    column_ids = [c if c < p else c - p for c in S1]
    pseudo_positions = frozenset(i for i, c in enumerate(S1) if c >= p)

    t0 = time.perf_counter()
    lasso_g, lasso_G, prec, dg, dG = _fit_stage(
        X1, ds.D, ds.Y, lam, nodewise_lam, nodewise_cv, rng.child(1))
    timing["fits"] = time.perf_counter() - t0

    policy = ThresholdPolicy(omega=omega, n=n, s=s)
    S2 = joint_threshold(dg, policy)
    if not S2:
        return _empty_result("proposed", S1, column_ids, pseudo_positions, [], {},
                             None, ["no relevant candidates passed joint thresholding"],
                             timing)
    ratios = ratio_estimates(dg, dG, S2)
    S3, prange = remove_spurious(S2, ratios, pseudo_positions)
    if not S3:
        return _empty_result("proposed", S1, column_ids, pseudo_positions, S2, ratios,
                             prange, ["no valid instruments found: every candidate "
                                      "fell inside the pseudo ratio range"], timing)

    thetas = theta_hats(X1, ds.D, ds.Y, lasso_g.coefficients, lasso_G.coefficients)
    se_fn = lambda j, l: se_ratio_difference(j, l, dg, dG, prec, thetas, n)
    t0 = time.perf_counter()
    S4, votes = mode_find(S3, ratios, se_fn, policy)
    timing["mode_find"] = time.perf_counter() - t0

    cols = [column_ids[j] for j in S4]
    t0 = time.perf_counter()
    estimate = tsls(ds.Z[:, cols], ds.D, ds.Y, alpha=alpha, instruments=cols)
    timing["tsls"] = time.perf_counter() - t0

    trace = SelectionTrace(S1=S1, S2=S2, S3=S3, S4=S4, ratios=ratios,
                           pseudo_range=prange, vote_counts=votes,
                           pseudo_positions=pseudo_positions, column_ids=column_ids)
    return PipelineResult(trace=trace, estimate=estimate, method="proposed",
                          timing=timing)


def run_naive(ds: Dataset, omega: float = 2.01, s: Optional[int] = None,
              lam: Optional[float] = None, alpha: float = 0.05,
              include_pseudos: bool = False, rng: Optional[RngStream] = None,
              nodewise_lam: Optional[float] = None, nodewise_cv: int = 10) -> PipelineResult:
    """Screening + debiased fits + joint thresholding + pairwise voting + 2SLS,
    without the pseudo-based spurious-instrument removal."""
    _require_ready(ds)
    timing: Dict[str, float] = {}
    n, p = ds.n, ds.p
    if include_pseudos:
        if rng is None:
            raise ValueError("include_pseudos requires an rng")
        Zt = np.hstack([ds.Z, generate_pseudos(ds.Z, rng.child(0))])
    else:
        Zt = ds.Z
    m = Zt.shape[1]
    if s is None:
        s = default_screen_size(n, m)
    if lam is None:
        lam = default_lambda(p, n)
    nodewise_rng = (rng or RngStream(0)).child(1)

    t0 = time.perf_counter()
    S1 = marginal_screen(Zt, ds.D, s)
    timing["screen"] = time.perf_counter() - t0
    X1 = np.ascontiguousarray(Zt[:, S1])
    column_ids = [c if c < p else c - p for c in S1]
    pseudo_positions = frozenset(i for i, c in enumerate(S1) if c >= p)

    t0 = time.perf_counter()
    lasso_g, lasso_G, prec, dg, dG = _fit_stage(
        X1, ds.D, ds.Y, lam, nodewise_lam, nodewise_cv, nodewise_rng)
    timing["fits"] = time.perf_counter() - t0

    policy = ThresholdPolicy(omega=omega, n=n, s=s)
    S2 = joint_threshold(dg, policy)
    if not S2:
        return _empty_result("naive", S1, column_ids, pseudo_positions, [], {}, None,
                             ["no relevant candidates passed joint thresholding"],
                             timing)
    ratios = ratio_estimates(dg, dG, S2)
    thetas = theta_hats(X1, ds.D, ds.Y, lasso_g.coefficients, lasso_G.coefficients)
    t0 = time.perf_counter()
    S4, votes = vote_naive(S2, dg, dG, prec, thetas, policy)
    timing["vote"] = time.perf_counter() - t0

    cols = [column_ids[j] for j in S4 if j not in pseudo_positions]
    diagnostics = []
    estimate = None
    if cols:
        estimate = tsls(ds.Z[:, cols], ds.D, ds.Y, alpha=alpha, instruments=cols)
    else:
        diagnostics.append("no valid instruments found: every vote winner was a pseudo")
    trace = SelectionTrace(S1=S1, S2=S2, S3=list(S2), S4=S4, ratios=ratios,
                           pseudo_range=None, vote_counts=votes,
                           pseudo_positions=pseudo_positions, column_ids=column_ids)
    return PipelineResult(trace=trace, estimate=estimate, method="naive",
                          diagnostics=diagnostics, timing=timing)


def _ols_multi(Z, y):
    """OLS coefficients and per-coefficient SEs: sqrt([(Z'Z)^-1]_ll * |r|^2 / n)."""
    n = Z.shape[0]
    ZtZ = Z.T @ Z
    try:
        inv = np.linalg.inv(ZtZ)
    except np.linalg.LinAlgError as exc:
        raise LinearAlgebraError("singular Z'Z in second-subsample OLS") from exc
    coef = inv @ (Z.T @ y)
    resid = y - Z @ coef
    ses = np.sqrt(np.maximum(np.diag(inv) * (resid @ resid) / n, 1e-30))
    return coef, ses, resid


@dataclass(frozen=True)
class _OlsFit:
    """Minimal estimates/ses carrier so the shared selection helpers apply to
    the second-subsample OLS fits."""
    estimates: np.ndarray
    ses: np.ndarray


def run_split(ds: Dataset, omega: float = 2.01, s: Optional[int] = None,
              n1_frac: float = 0.6, lam: Optional[float] = None,
              rng: RngStream = RngStream(0), alpha: float = 0.05,
              nodewise_lam: Optional[float] = None, nodewise_cv: int = 10) -> PipelineResult:
    """Sample-splitting pipeline: spurious removal on the first half, OLS-based
    selection and the weighted ratio estimator on the second half."""
    _require_ready(ds)
    if not 0.0 < n1_frac < 1.0:
        raise ValueError("n1_frac must lie in (0, 1)")
    timing: Dict[str, float] = {}
    n, p = ds.n, ds.p
    n1 = int(round(n1_frac * n))
    n2 = n - n1
    if min(n1, n2) < 10:
        raise DataError("both halves need at least 10 observations")

    perm = rng.child(0).generator().permutation(n)
    idx1, idx2 = perm[:n1], perm[n1:]
    half1 = center(Dataset(Z=ds.Z[idx1], D=ds.D[idx1], Y=ds.Y[idx1]))

    # --- half 1: locate and remove spurious candidates ---------------------
    t0 = time.perf_counter()
    Zt1 = np.hstack([half1.Z, generate_pseudos(half1.Z, rng.child(1))])
    if s is None:
        s = default_screen_size(n1, 2 * p)
    s1 = min(s, 2 * p)
    if lam is None:
        lam = default_lambda(p, n1)
    S1 = marginal_screen(Zt1, half1.D, s1)
    X1 = np.ascontiguousarray(Zt1[:, S1])
    column_ids = [c if c < p else c - p for c in S1]
    pseudo_positions = frozenset(i for i, c in enumerate(S1) if c >= p)
    lasso_g, lasso_G, prec, dg, dG = _fit_stage(
        X1, half1.D, half1.Y, lam, nodewise_lam, nodewise_cv, rng.child(2))
    policy1 = ThresholdPolicy(omega=omega, n=n1, s=s1)
    timing["half1_fits"] = time.perf_counter() - t0

    S2 = joint_threshold(dg, policy1)
    if not S2:
        return _empty_result("split", S1, column_ids, pseudo_positions, [], {}, None,
                             ["no relevant candidates passed joint thresholding"],
                             timing)
    ratios1 = ratio_estimates(dg, dG, S2)
    S3, prange = remove_spurious(S2, ratios1, pseudo_positions)
    if not S3:
        return _empty_result("split", S1, column_ids, pseudo_positions, S2, ratios1,
                             prange, ["no valid instruments found on the first half"],
                             timing)
    cols3 = [column_ids[j] for j in S3]
    q = len(cols3)

    # --- half 2: OLS fits, second thresholding, mode finding ---------------
    t0 = time.perf_counter()
    half2 = center(Dataset(Z=ds.Z[idx2][:, cols3], D=ds.D[idx2], Y=ds.Y[idx2]))
    Z2, D2, Y2 = half2.Z, half2.D, half2.Y
    gamma2, g_ses, res_d = _ols_multi(Z2, D2)
    Gamma2, _, res_y = _ols_multi(Z2, Y2)
    thetas2 = (res_y @ res_y / n2, res_d @ res_d / n2, res_y @ res_d / n2)
    policy2 = ThresholdPolicy(omega=omega, n=n2, s=min(q, n2))
    delta2 = policy2.joint_threshold_value
    S3b = [l for l in range(q) if abs(gamma2[l]) >= delta2 * g_ses[l]]
    timing["half2_fits"] = time.perf_counter() - t0
    if not S3b:
        return _empty_result("split", S1, column_ids, pseudo_positions, S2, ratios1,
                             prange, ["no candidates passed the second-half "
                                      "joint thresholding"], timing, S3=S3)

    Sigma2 = Z2.T @ Z2 / n2
    try:
        M2 = np.linalg.inv(Sigma2)
    except np.linalg.LinAlgError as exc:
        raise LinearAlgebraError("singular sample covariance on the second half") from exc
    fit_g2 = _OlsFit(estimates=gamma2, ses=g_ses)
    fit_G2 = _OlsFit(estimates=Gamma2, ses=g_ses)
    ratios2 = {l: float(Gamma2[l] / gamma2[l]) for l in S3b}
    se_fn = lambda j, l: se_ratio_difference(j, l, fit_g2, fit_G2, M2, thetas2, n2)
    S4b, votes2 = mode_find(S3b, ratios2, se_fn, policy2)

    W = split_weight_matrix(Sigma2, S4b)
    beta = split_estimator(gamma2, Gamma2, W, S4b)
    v_hat = split_variance(beta, gamma2, Gamma2, W, S4b, thetas2)
    cols4 = [cols3[j] for j in S4b]
    estimate = split_ci(beta, v_hat, n2, alpha=alpha, instruments=cols4)

    # map second-half positions back to first-half S1 positions for the trace
    S4_trace = [S3[j] for j in S4b]
    votes_trace = {S3[j]: v for j, v in votes2.items()}
    trace = SelectionTrace(S1=S1, S2=S2, S3=S3, S4=S4_trace, ratios=ratios1,
                           pseudo_range=prange, vote_counts=votes_trace,
                           pseudo_positions=pseudo_positions, column_ids=column_ids)
    return PipelineResult(trace=trace, estimate=estimate, method="split",
                          timing=timing)
