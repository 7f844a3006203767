"""Monte Carlo harness: replicate generation, per-method metrics, CSV export."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import Dataset, RngStream, center, partial_out_covariates
from .errors import PseudoIVError
from .estimation import ols, tsls
from .pipeline import PipelineResult, run_naive, run_proposed, run_split
from .simgen import ScenarioConfig, gen_dataset, preset

METHODS = ("proposed", "naive", "split", "oracle", "ols")
STAGES = ("S2", "S3", "S4")
CLASSES = ("valid", "invalid", "irrelevant", "pseudo")


@dataclass(frozen=True)
class MetricsRow:
    method: str
    replicates: int
    estimates: int
    bias: float
    se_of_bias: Optional[float]
    rmse: float
    coverage: float
    mean_counts: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_dict(self):
        d = {
            "method": self.method,
            "replicates": self.replicates,
            "estimates": self.estimates,
            "bias": self.bias,
            "se_of_bias": self.se_of_bias,
            "rmse": self.rmse,
            "coverage": self.coverage,
        }
        for stage in STAGES:
            for cls in CLASSES:
                d[f"{stage}_{cls}"] = self.mean_counts.get(stage, {}).get(cls, 0.0)
        return d


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    method: str
    beta_hat: Optional[float]
    se: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    covered: Optional[bool]
    counts: Dict[str, Dict[str, int]]
    status: str
    histogram_rows: List[Tuple[int, int, str, str, float]] = field(default_factory=list)


def _stage_counts(result: PipelineResult, classify: Callable[[int], str]):
    trace = result.trace
    counts = {stage: {cls: 0 for cls in CLASSES} for stage in STAGES}
    for stage, positions in (("S2", trace.S2), ("S3", trace.S3), ("S4", trace.S4)):
        for pos in positions:
            if pos in trace.pseudo_positions:
                cls = "pseudo"
            else:
                cls = classify(trace.column_ids[pos])
            counts[stage][cls] += 1
    return counts


def _histogram_rows(replicate: int, result: PipelineResult,
                    classify: Callable[[int], str]):
    trace = result.trace
    rows = []
    for stage, positions in (("S2", trace.S2), ("S3", trace.S3), ("S4", trace.S4)):
        for pos in positions:
            if pos not in trace.ratios:
                continue
            if pos in trace.pseudo_positions:
                cls = "pseudo"
            else:
                cls = classify(trace.column_ids[pos])
            rows.append((replicate, trace.column_ids[pos], cls, stage,
                         float(trace.ratios[pos])))
    return rows


def export_histograms(rows: Sequence[Tuple[int, int, str, str, float]], out_path):
    """Write one row per (replicate, candidate, stage) with its ratio estimate."""
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "column_id", "class", "stage", "ratio"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], row[3], _fmt(row[4])])


def _run_replicate(cfg: ScenarioConfig, methods: Sequence[str], master_seed: int,
                   r: int, omega: float, s: Optional[int],
                   lam: Optional[float], alpha: float) -> List[ReplicateRecord]:
    base = RngStream(master_seed, r)
    ds = gen_dataset(cfg, base.child(0))
    ds = center(ds)
    if ds.X is not None:
        ds = partial_out_covariates(ds)
    classify = cfg.classify
    valid = sorted(cfg.valid_indices())
    records: List[ReplicateRecord] = []
    for method in methods:
        try:
            if method == "proposed":
                res = run_proposed(ds, omega=omega, s=s, lam=lam, rng=base.child(1),
                                   alpha=alpha)
            elif method == "split":
                res = run_split(ds, omega=omega, s=s, lam=lam, rng=base.child(2),
                                alpha=alpha)
            elif method == "naive":
                res = run_naive(ds, omega=omega, s=s, lam=lam, alpha=alpha,
                                rng=base.child(3))
            elif method in ("oracle", "ols"):
                if method == "oracle":
                    est = tsls(ds.Z[:, valid], ds.D, ds.Y, alpha=alpha,
                               instruments=valid)
                else:
                    est = ols(ds.D, ds.Y, alpha=alpha)
                records.append(ReplicateRecord(
                    replicate=r, method=method, beta_hat=est.beta_hat, se=est.se,
                    ci_low=est.ci_low, ci_high=est.ci_high,
                    covered=est.ci_low <= cfg.beta_star <= est.ci_high,
                    counts={}, status="ok"))
                continue
            else:
                raise ValueError(f"unknown method {method!r}")
        except PseudoIVError as exc:
            records.append(ReplicateRecord(
                replicate=r, method=method, beta_hat=None, se=None, ci_low=None,
                ci_high=None, covered=None, counts={},
                status=f"error: {exc}"))
            continue
        counts = _stage_counts(res, classify)
        hist = _histogram_rows(r, res, classify) if method == "proposed" else []
        if res.estimate is None:
            records.append(ReplicateRecord(
                replicate=r, method=method, beta_hat=None, se=None, ci_low=None,
                ci_high=None, covered=None, counts=counts,
                status="; ".join(res.diagnostics) or "no estimate",
                histogram_rows=hist))
        else:
            est = res.estimate
            records.append(ReplicateRecord(
                replicate=r, method=method, beta_hat=est.beta_hat, se=est.se,
                ci_low=est.ci_low, ci_high=est.ci_high,
                covered=est.ci_low <= cfg.beta_star <= est.ci_high,
                counts=counts, status="ok", histogram_rows=hist))
    return records


def _worker(args):
    return _run_replicate(*args)


@dataclass(frozen=True)
class MonteCarloResult:
    config: ScenarioConfig
    metrics: List[MetricsRow]
    records: List[ReplicateRecord]
    histogram_rows: List[Tuple[int, int, str, str, float]]


def monte_carlo(preset_name: str, replicates: int,
                methods: Sequence[str] = ("proposed", "naive", "split", "oracle"),
                threads: int = 1, master_seed: int = 0, omega: float = 2.01,
                s: Optional[int] = None, lam: Optional[float] = None,
                alpha: float = 0.05, p: Optional[int] = 2000,
                sigma_D2: Optional[float] = None,
                overrides: Optional[dict] = None,
                config: Optional[ScenarioConfig] = None,
                out_dir=None) -> MonteCarloResult:
    """Run `replicates` independent scenario draws and aggregate per-method
    metrics.  `p` defaults to a desk-scale 2000 candidate columns; pass
    p=None to keep the preset's own dimension."""
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if config is None:
        cfg = preset(preset_name, p=p, sigma_D2=sigma_D2, seed=master_seed)
    else:
        cfg = config
    if overrides:
        cfg = replace(cfg, **overrides)

    tasks = [(cfg, tuple(methods), master_seed, r, omega, s, lam, alpha)
             for r in range(replicates)]
    if threads <= 1:
        batches = [_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(_worker, tasks, chunksize=1))

    records: List[ReplicateRecord] = []
    for batch in batches:
        records.extend(batch)
    records.sort(key=lambda rec: (rec.replicate, rec.method))

    hist_rows: List[Tuple[int, int, str, str, float]] = []
    for rec in records:
        hist_rows.extend(rec.histogram_rows)

    metrics = []
    for method in methods:
        sub = [rec for rec in records if rec.method == method]
        est = [rec for rec in sub if rec.beta_hat is not None]
        if est:
            errs = np.array([rec.beta_hat - cfg.beta_star for rec in est])
            bias = float(errs.mean())
            rmse = float(np.sqrt((errs ** 2).mean()))
            se_of_bias = (float(errs.std(ddof=1) / math.sqrt(len(errs)))
                          if len(errs) > 1 else None)
            coverage = float(np.mean([rec.covered for rec in est]))
        else:
            bias = rmse = coverage = float("nan")
            se_of_bias = None
        mean_counts: Dict[str, Dict[str, float]] = {}
        counted = [rec for rec in sub if rec.counts]
        if counted:
            for stage in STAGES:
                mean_counts[stage] = {
                    cls: float(np.mean([rec.counts[stage][cls] for rec in counted]))
                    for cls in CLASSES}
        metrics.append(MetricsRow(method=method, replicates=len(sub),
                                  estimates=len(est), bias=bias,
                                  se_of_bias=se_of_bias, rmse=rmse,
                                  coverage=coverage, mean_counts=mean_counts))

    result = MonteCarloResult(config=cfg, metrics=metrics, records=records,
                              histogram_rows=hist_rows)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def write_outputs(result: MonteCarloResult, out_dir):
    """metrics.csv, replicates.csv, histogram.csv with full-precision floats."""
    os.makedirs(out_dir, exist_ok=True)
    mpath = os.path.join(out_dir, "metrics.csv")
    with open(mpath, "w", newline="") as fh:
        rows = [row.to_dict() for row in result.metrics]
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    rpath = os.path.join(out_dir, "replicates.csv")
    with open(rpath, "w", newline="") as fh:
        cols = ["replicate", "method", "beta_hat", "se", "ci_low", "ci_high",
                "covered", "status"]
        for stage in STAGES:
            for cls in CLASSES:
                cols.append(f"{stage}_{cls}")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for rec in result.records:
            row = [rec.replicate, rec.method, _fmt(rec.beta_hat), _fmt(rec.se),
                   _fmt(rec.ci_low), _fmt(rec.ci_high), _fmt(rec.covered),
                   rec.status]
            for stage in STAGES:
                for cls in CLASSES:
                    row.append(rec.counts.get(stage, {}).get(cls, ""))
            writer.writerow(row)
    export_histograms(result.histogram_rows, os.path.join(out_dir, "histogram.csv"))
