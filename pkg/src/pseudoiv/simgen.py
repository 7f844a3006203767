"""Synthetic-data generators for the benchmark scenarios."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .data import Dataset, RngStream
from .errors import ConfigurationError, DegeneracyError


@dataclass(frozen=True)
class ScenarioConfig:
    """Full parameterization of one data-generating scenario.

    gamma and pi are sparse maps from 0-based column index to coefficient.
    gamma_uniform, when set, is (indices, low, high): those coefficients get
    magnitudes drawn uniformly per dataset, with random signs.
    z_cov is a tuple of structure specs applied to an i.i.d. N(0,1) base
    draw, e.g. {"type": "ar1_block", "indices": [...], "rho": 0.25}.
    """

    n: int
    p: int
    beta_star: float
    gamma: Dict[int, float]
    pi: Dict[int, float]
    alpha_D: Tuple[float, ...]
    alpha_Y: Tuple[float, ...]
    Sigma_U: Tuple[Tuple[float, ...], ...]
    sigma_D2: float = 0.0
    sigma_Y2: float = 1.0
    z_cov: Tuple[dict, ...] = ({"type": "independent"},)
    gamma_uniform: Optional[Tuple[Tuple[int, ...], float, float]] = None
    psi: Tuple[float, ...] = ()
    phi: Tuple[float, ...] = ()
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        Su = np.asarray(self.Sigma_U, dtype=float)
        g = len(self.alpha_D)
        if Su.shape != (g, g) or len(self.alpha_Y) != g:
            raise ConfigurationError("alpha_D, alpha_Y and Sigma_U dimensions disagree")
        if not np.allclose(Su, Su.T) or np.any(np.linalg.eigvalsh(Su) <= 0):
            raise ConfigurationError("Sigma_U must be symmetric positive definite")
        for idx in list(self.gamma) + list(self.pi):
            if not 0 <= idx < self.p:
                raise ConfigurationError(f"coefficient index {idx} out of range for p={self.p}")
        for spec in self.z_cov:
            if spec.get("type") not in {"independent", "ar1_block", "cross_corr",
                                        "haplotype_blocks", "z_u_corr"}:
                raise ConfigurationError(f"unknown z_cov spec {spec!r}")
            rho = spec.get("rho")
            if rho is not None and not -1.0 < rho < 1.0:
                raise ConfigurationError("correlation rho must lie in (-1, 1)")

    # --- ground-truth classification -------------------------------------
    def relevant_indices(self):
        idx = set(self.gamma)
        if self.gamma_uniform:
            idx.update(self.gamma_uniform[0])
        return idx

    def invalid_indices(self):
        """Columns violating exclusion (pi != 0) or independence (correlated with U)."""
        idx = {j for j, v in self.pi.items() if v != 0.0}
        for spec in self.z_cov:
            if spec["type"] == "z_u_corr":
                idx.add(spec["z_index"])
        return idx

    def valid_indices(self):
        return self.relevant_indices() - self.invalid_indices()

    def classify(self, column: int) -> str:
        if column in self.invalid_indices():
            return "invalid"
        if column in self.relevant_indices():
            return "valid"
        return "irrelevant"

    # --- serialization -----------------------------------------------------
    def to_dict(self):
        return {
            "name": self.name, "n": self.n, "p": self.p, "beta_star": self.beta_star,
            "gamma": {str(k): v for k, v in self.gamma.items()},
            "pi": {str(k): v for k, v in self.pi.items()},
            "alpha_D": list(self.alpha_D), "alpha_Y": list(self.alpha_Y),
            "Sigma_U": [list(r) for r in self.Sigma_U],
            "sigma_D2": self.sigma_D2, "sigma_Y2": self.sigma_Y2,
            "z_cov": list(self.z_cov),
            "gamma_uniform": ([list(self.gamma_uniform[0]), self.gamma_uniform[1],
                               self.gamma_uniform[2]] if self.gamma_uniform else None),
            "psi": list(self.psi), "phi": list(self.phi), "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        gu = d.get("gamma_uniform")
        return cls(
            n=d["n"], p=d["p"], beta_star=d["beta_star"],
            gamma={int(k): float(v) for k, v in d["gamma"].items()},
            pi={int(k): float(v) for k, v in d["pi"].items()},
            alpha_D=tuple(d["alpha_D"]), alpha_Y=tuple(d["alpha_Y"]),
            Sigma_U=tuple(tuple(r) for r in d["Sigma_U"]),
            sigma_D2=d.get("sigma_D2", 0.0), sigma_Y2=d.get("sigma_Y2", 1.0),
            z_cov=tuple(d.get("z_cov", [{"type": "independent"}])),
            gamma_uniform=(tuple(gu[0]), gu[1], gu[2]) if gu else None,
            psi=tuple(d.get("psi", ())), phi=tuple(d.get("phi", ())),
            seed=d.get("seed", 0), name=d.get("name", "custom"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(s))


def _dense(sparse: Dict[int, float], p: int) -> np.ndarray:
    out = np.zeros(p)
    for k, v in sparse.items():
        out[k] = v
    return out


def _apply_z_structure(Z, U, Sigma_U, specs, gen):
    for spec in specs:
        kind = spec["type"]
        if kind == "independent":
            continue
        if kind == "ar1_block":
            idx = [j for j in spec["indices"] if j < Z.shape[1]]
            if len(idx) >= 2:
                k = len(idx)
                Sv = spec["rho"] ** np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
                Z[:, idx] = Z[:, idx] @ np.linalg.cholesky(Sv).T
        elif kind == "cross_corr":
            for noise_j, valid_j, rho in spec["pairs"]:
                if noise_j < Z.shape[1]:
                    Z[:, noise_j] = rho * Z[:, valid_j] + np.sqrt(1 - rho ** 2) * Z[:, noise_j]
        elif kind == "haplotype_blocks":
            start, size = spec["start"], spec["block_size"]
            p = Z.shape[1]
            lo = start + size  # first block stays independent
            half = size // 2
            while lo < p:
                hi = min(lo + size, p)
                for seg_lo, seg_hi, rho in ((lo, min(lo + half, hi), spec["rho_first_half"]),
                                            (min(lo + half, hi), hi, spec["rho_second_half"])):
                    w = seg_hi - seg_lo
                    if w >= 2 and rho > 0:
                        common = gen.standard_normal(Z.shape[0])
                        Z[:, seg_lo:seg_hi] = (np.sqrt(rho) * common[:, None]
                                               + np.sqrt(1 - rho) * Z[:, seg_lo:seg_hi])
                lo = hi
        elif kind == "z_u_corr":
            j, u, rho = spec["z_index"], spec.get("u_index", 0), spec["rho"]
            u_std = U[:, u] / np.sqrt(Sigma_U[u, u])
            Z[:, j] = rho * u_std + np.sqrt(1 - rho ** 2) * Z[:, j]
    return Z


def gen_dataset(cfg: ScenarioConfig, rng: RngStream, debug: bool = False):
    """Draw one dataset from the scenario's structural model.

    With debug=True also returns the latent draws (confounders, errors and
    realized coefficient vectors) so the model identity can be audited.
    """
    gen = rng.generator()
    n, p = cfg.n, cfg.p
    Sigma_U = np.asarray(cfg.Sigma_U, dtype=float)
    g = Sigma_U.shape[0]

    gamma = _dense(cfg.gamma, p)
    if cfg.gamma_uniform:
        idx, lo, hi = cfg.gamma_uniform
        idx = [j for j in idx if j < p]
        mags = gen.uniform(lo, hi, size=len(idx))
        signs = gen.choice([-1.0, 1.0], size=len(idx))
        gamma[idx] = mags * signs
    pi = _dense(cfg.pi, p)

    U = gen.standard_normal((n, g)) @ np.linalg.cholesky(Sigma_U).T
    eps_D = gen.standard_normal(n) * np.sqrt(cfg.sigma_D2)
    eps_Y = gen.standard_normal(n) * np.sqrt(cfg.sigma_Y2)
    q = len(cfg.psi)
    X = gen.standard_normal((n, q)) if q else None
    Z = gen.standard_normal((n, p))
    Z = _apply_z_structure(Z, U, Sigma_U, cfg.z_cov, gen)

    alpha_D = np.asarray(cfg.alpha_D)
    alpha_Y = np.asarray(cfg.alpha_Y)
    D = Z @ gamma + U @ alpha_D + eps_D
    if q:
        D = D + X @ np.asarray(cfg.psi)
    Y = cfg.beta_star * D + Z @ pi + U @ alpha_Y + eps_Y
    if q:
        Y = Y + X @ np.asarray(cfg.phi)

    ds = Dataset(Z=Z, D=D, Y=Y, X=X)
    if debug:
        return ds, {"U": U, "eps_D": eps_D, "eps_Y": eps_Y,
                    "gamma": gamma, "pi": pi, "X": X}
    return ds


def c_star(cfg: ScenarioConfig) -> float:
    """Center offset of spurious-instrument ratios: cov(aD'U, aY'U)/var(aD'U + eps_D)."""
    Su = np.asarray(cfg.Sigma_U)
    aD, aY = np.asarray(cfg.alpha_D), np.asarray(cfg.alpha_Y)
    denom = aD @ Su @ aD + cfg.sigma_D2
    if denom <= 0:
        raise DegeneracyError("zero variance of alpha_D'U + eps_D")
    return float(aD @ Su @ aY / denom)


def c_tilde(cfg: ScenarioConfig) -> float:
    """Concentration-width constant for spurious-instrument ratios."""
    Su = np.asarray(cfg.Sigma_U)
    aD, aY = np.asarray(cfg.alpha_D), np.asarray(cfg.alpha_Y)
    var_d = aD @ Su @ aD + cfg.sigma_D2
    if var_d <= 0:
        raise DegeneracyError("zero variance of alpha_D'U + eps_D")
    num = aY @ Su @ aY - (aD @ Su @ aY) ** 2 / var_d + cfg.sigma_Y2
    return float(8.0 * np.sqrt(num) / np.sqrt(var_d))


_MAIN_KW = dict(
    n=500, beta_star=2.0,
    gamma={j: 3.0 for j in range(9)},
    pi={0: -3.5, 1: 3.5},
    alpha_D=(4.0,), alpha_Y=(-3.0,), Sigma_U=((1.0,),),
    sigma_D2=0.0, sigma_Y2=1.0,
    z_cov=({"type": "ar1_block", "indices": list(range(2, 9)), "rho": 0.25},),
    psi=(1.5, 2.0), phi=(1.2, 1.5),
)

PRESET_NAMES = ("main", "higher_dim", "corr_with_valid_weak", "corr_with_valid_moderate",
                "corr_irrelevant", "multi_u", "weak_iv", "violate_i3",
                "no_invalid_weak_comp")


def preset(name: str, p: Optional[int] = None, sigma_D2: Optional[float] = None,
           seed: int = 0) -> ScenarioConfig:
    """Named scenario parameterizations; p can be overridden for desk scale."""
    if name == "main":
        cfg = ScenarioConfig(p=50_000, name=name, **_MAIN_KW)
    elif name == "higher_dim":
        cfg = ScenarioConfig(p=100_000, name=name, **_MAIN_KW)
    elif name in ("corr_with_valid_weak", "corr_with_valid_moderate"):
        rho = 0.2 if name.endswith("weak") else 0.6
        # 10 fresh noise columns tied to each of the valid instruments Z_3..Z_7
        pairs = [[9 + 10 * b + i, 2 + b, rho] for b in range(5) for i in range(10)]
        cfg = ScenarioConfig(
            n=500, p=50_000, beta_star=2.0, name=name,
            gamma={j: 3.0 for j in range(9)}, pi={0: 3.5, 1: 3.5},
            alpha_D=(4.0,), alpha_Y=(-3.0,), Sigma_U=((1.0,),),
            z_cov=({"type": "cross_corr", "pairs": pairs},),
        )
    elif name == "corr_irrelevant":
        cfg = ScenarioConfig(
            n=500, p=50_000, beta_star=2.0, name=name,
            gamma={j: 3.0 for j in range(9)}, pi={0: 3.5, 1: 3.5},
            alpha_D=(4.0,), alpha_Y=(-3.0,), Sigma_U=((1.0,),),
            z_cov=({"type": "haplotype_blocks", "start": 9, "block_size": 250,
                    "rho_first_half": 0.2, "rho_second_half": 0.5},),
        )
    elif name == "multi_u":
        kw = dict(_MAIN_KW)
        kw.update(alpha_D=(2.0, 2.0), alpha_Y=(-2.0, -2.0),
                  Sigma_U=((1.0, 0.0), (0.0, 1.0)))
        cfg = ScenarioConfig(p=50_000, name=name, **kw)
    elif name == "weak_iv":
        cfg = ScenarioConfig(
            n=500, p=50_000, beta_star=2.0, name=name,
            gamma={j: 3.0 for j in range(9)}, pi={0: 3.5, 1: 3.5},
            alpha_D=(4.0,), alpha_Y=(-3.0,), Sigma_U=((1.0,),),
            gamma_uniform=(tuple(range(9, 59)), 0.01, 0.3),
        )
    elif name == "violate_i3":
        cfg = ScenarioConfig(
            n=500, p=50_000, beta_star=2.0, name=name,
            gamma={j: 3.0 for j in range(9)}, pi={0: 3.5},
            alpha_D=(4.0,), alpha_Y=(-3.0,), Sigma_U=((1.0,),),
            z_cov=({"type": "z_u_corr", "z_index": 1, "u_index": 0, "rho": 0.7},),
        )
    elif name == "no_invalid_weak_comp":
        cfg = ScenarioConfig(
            n=500, p=50_000, beta_star=2.0, name=name,
            gamma={j: 2.5 for j in range(7)}, pi={},
            alpha_D=(4.0,), alpha_Y=(-3.0,), Sigma_U=((1.0,),),
        )
    else:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")

    if p is not None:
        cfg = replace(cfg, p=p)
    if sigma_D2 is not None:
        cfg = replace(cfg, sigma_D2=sigma_D2)
    return replace(cfg, seed=seed)
