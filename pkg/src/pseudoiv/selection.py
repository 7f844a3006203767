"""Screening, pseudo-variable generation, spurious removal and mode finding."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .data import RngStream
from .errors import DegeneracyError, DegeneracyWarning, DimensionError
from .lasso import DebiasedFit, NodewisePrecision

SE_PAIR_FLOOR = 1e-12


@dataclass(frozen=True)
class ThresholdPolicy:
    """Joint- and mode-threshold scales derived from omega, n and s."""

    omega: float
    n: int
    s: int

    @property
    def log_scale(self) -> float:
        return math.log(max(self.n, self.s))

    @property
    def joint_threshold_value(self) -> float:
        """delta_n multiplying the SE in the joint thresholding step."""
        return math.sqrt(self.omega * self.log_scale)

    @property
    def mode_threshold_value(self) -> float:
        """Pairwise-comparison threshold; omega is squared to account for the grid."""
        return math.sqrt(self.omega ** 2 * self.log_scale)


@dataclass(frozen=True)
class SelectionTrace:
    """Index sets and per-candidate statistics recorded along a pipeline run.

    S1 holds column indices into the (possibly pseudo-expanded) design; the
    later sets hold positions into S1.  column_ids maps each S1 position back
    to its original column identity, with pseudo columns flagged.
    """

    S1: List[int]
    S2: List[int]
    S3: List[int]
    S4: List[int]
    ratios: Dict[int, float]
    pseudo_range: Optional[Tuple[float, float]]
    vote_counts: Dict[int, int]
    pseudo_positions: frozenset
    column_ids: List[int] = field(default_factory=list)

    def to_dict(self):
        return {
            "S1": list(self.S1),
            "S2": list(self.S2),
            "S3": list(self.S3),
            "S4": list(self.S4),
            "ratios": {str(k): v for k, v in self.ratios.items()},
            "pseudo_range": list(self.pseudo_range) if self.pseudo_range else None,
            "vote_counts": {str(k): v for k, v in self.vote_counts.items()},
            "candidates": [
                {"position": i, "column_id": cid, "is_pseudo": i in self.pseudo_positions}
                for i, cid in enumerate(self.column_ids)
            ],
        }


def marginal_screen(Z: np.ndarray, D: np.ndarray, s: int) -> List[int]:
    """Indices of the s columns with the largest |Z_j'D| / |Z_j|^2.

    Sorted by descending statistic; ties broken by smaller column index.
    """
    Z = np.asarray(Z, dtype=float)
    m = Z.shape[1]
    if not 1 <= s <= m:
        raise DimensionError(f"screen size {s} out of range for {m} columns")
    norms = np.einsum("ij,ij->j", Z, Z)
    if np.any(norms == 0.0):
        j = int(np.nonzero(norms == 0.0)[0][0])
        raise DegeneracyError(f"zero-norm column {j} in marginal screening")
    rho = np.abs(Z.T @ D) / norms
    order = np.lexsort((np.arange(m), -rho))
    return [int(j) for j in order[:s]]


def generate_pseudos(Z: np.ndarray, rng: RngStream) -> np.ndarray:
    """Row-permuted copy of Z: one shared uniformly random permutation."""
    Z = np.asarray(Z, dtype=float)
    perm = rng.generator().permutation(Z.shape[0])
    return Z[perm]


def joint_threshold(debiased: DebiasedFit, policy: ThresholdPolicy) -> List[int]:
    """Positions whose |estimate| >= delta_n * SE, in input order."""
    est, ses = debiased.estimates, debiased.ses
    if est.shape != ses.shape:
        raise DimensionError("estimates and ses must have equal length")
    delta = policy.joint_threshold_value
    return [int(l) for l in range(len(est)) if abs(est[l]) >= delta * ses[l]]


def ratio_estimates(debiased_gamma: DebiasedFit, debiased_Gamma: DebiasedFit,
                    S2: List[int]) -> Dict[int, float]:
    """Wald ratios Gamma_l / gamma_l for each position in S2."""
    out = {}
    for l in S2:
        g = debiased_gamma.estimates[l]
        if g == 0.0:
            raise DegeneracyError(f"zero exposure coefficient at position {l}")
        out[l] = float(debiased_Gamma.estimates[l] / g)
    return out


def remove_spurious(S2: List[int], ratios: Dict[int, float],
                    pseudo_positions) -> Tuple[List[int], Optional[Tuple[float, float]]]:
    """Drop pseudo positions and real candidates inside the closed pseudo ratio range."""
    pseudo_positions = set(pseudo_positions)
    pseudo_in = [l for l in S2 if l in pseudo_positions]
    if not pseudo_in:
        return list(S2), None
    lo = min(ratios[l] for l in pseudo_in)
    hi = max(ratios[l] for l in pseudo_in)
    S3 = [l for l in S2
          if l not in pseudo_positions and not (lo <= ratios[l] <= hi)]
    return S3, (lo, hi)


def se_ratio_difference(j: int, l: int,
                        debiased_gamma: DebiasedFit, debiased_Gamma: DebiasedFit,
                        precision, thetas, n: int) -> float:
    """Standard error of the ratio difference beta^(l) - beta^(j).

    Implements sqrt((v_jj - 2 v_jl + v_ll)/n) with the v's built from the
    precision matrix entries and the residual second moments.  `precision`
    is either a NodewisePrecision or a plain precision matrix (the
    sample-splitting second half uses the inverted sample covariance).
    """
    M = precision.M if isinstance(precision, NodewisePrecision) else np.asarray(precision)
    t11, t22, t12 = thetas
    g, G = debiased_gamma.estimates, debiased_Gamma.estimates

    def v(a, b):
        ra, rb = G[a] / g[a], G[b] / g[b]
        return M[a, b] / (g[a] * g[b]) * (t11 - (ra + rb) * t12 + ra * rb * t22)

    var = (v(j, j) - 2.0 * v(j, l) + v(l, l)) / n
    if var <= 0.0:
        if j != l:
            warnings.warn(f"nonpositive pairwise variance for ({j}, {l}) floored",
                          DegeneracyWarning)
        return math.sqrt(SE_PAIR_FLOOR)
    return math.sqrt(var)


def mode_find(S3: List[int], ratios: Dict[int, float],
              se_fn: Callable[[int, int], float],
              policy: ThresholdPolicy) -> Tuple[List[int], Dict[int, int]]:
    """Count, for each candidate, how many candidates have an indistinguishable
    ratio; the argmax set is the estimated valid-instrument set."""
    if not S3:
        raise DegeneracyError("mode finding requires a nonempty candidate set")
    threshold = policy.mode_threshold_value
    votes: Dict[int, int] = {}
    for j in S3:
        count = 0
        for l in S3:
            if abs(ratios[l] - ratios[j]) <= threshold * se_fn(j, l):
                count += 1
        votes[j] = count
    best = max(votes.values())
    S4 = [j for j in S3 if votes[j] == best]
    return S4, votes


def vote_naive(S2: List[int],
               debiased_gamma: DebiasedFit, debiased_Gamma: DebiasedFit,
               precision: NodewisePrecision, thetas,
               policy: ThresholdPolicy) -> Tuple[List[int], Dict[int, int]]:
    """Pairwise voting: voter l accepts candidate j when the Wald statistic for
    H0: Gamma_j - gamma_j * (Gamma_l/gamma_l) = 0 is below the mode threshold."""
    if not S2:
        raise DegeneracyError("voting requires a nonempty candidate set")
    n = policy.n
    ratios = ratio_estimates(debiased_gamma, debiased_Gamma, S2)
    t11, t22, t12 = thetas
    g, G = debiased_gamma.estimates, debiased_Gamma.estimates
    M = precision.M
    threshold = policy.mode_threshold_value
    votes: Dict[int, int] = {j: 0 for j in S2}
    for l in S2:
        b_l = ratios[l]
        for j in S2:
            num = G[j] - g[j] * b_l
            # delta-method variance of the numerator, voter ratio treated as fixed
            var = M[j, j] * (t11 - 2.0 * b_l * t12 + b_l * b_l * t22) / n
            se = math.sqrt(max(var, SE_PAIR_FLOOR))
            if abs(num) <= threshold * se:
                votes[j] += 1
    best = max(votes.values())
    return [j for j in S2 if votes[j] == best], votes
