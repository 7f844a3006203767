"""Data model, CSV ingestion, centering and seeded random streams."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (ConfigurationError, DataError, DimensionError,
                     LinearAlgebraError, ParseError)

CENTER_TOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Candidate-instrument matrix with exposure/outcome vectors.

    Z holds the candidate instruments column-wise, D the exposure, Y the
    outcome.  X, when present, holds observed covariates that are intended to
    be partialled out before instrument selection.  pseudo_mask flags columns
    of Z that are permutation-generated pseudo variables.
    """

    Z: np.ndarray
    D: np.ndarray
    Y: np.ndarray
    X: Optional[np.ndarray] = None
    pseudo_mask: Optional[np.ndarray] = None
    centered: bool = False

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        D = np.asarray(self.D, dtype=float).ravel()
        Y = np.asarray(self.Y, dtype=float).ravel()
        if Z.ndim != 2:
            raise DataError("Z must be a 2-d matrix")
        n = Z.shape[0]
        if n < 2:
            raise DataError(f"need at least 2 rows, got {n}")
        if D.shape[0] != n or Y.shape[0] != n:
            raise DimensionError("Z, D, Y must share the same number of rows")
        X = self.X
        if X is not None:
            X = np.asarray(X, dtype=float)
            if X.ndim != 2 or X.shape[0] != n:
                raise DataError("X must be an n x q matrix")
        mask = self.pseudo_mask
        if mask is None:
            mask = np.zeros(Z.shape[1], dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (Z.shape[1],):
                raise DataError("pseudo_mask length must match Z columns")
        for name, arr in (("Z", Z), ("D", D), ("Y", Y)) + ((("X", X),) if X is not None else ()):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite values in {name}")
        if self.centered:
            for name, arr in (("Z", Z), ("D", D), ("Y", Y)):
                means = np.atleast_1d(arr.mean(axis=0))
                if np.any(np.abs(means) > CENTER_TOL):
                    raise DataError(f"{name} marked centered but has nonzero column means")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "pseudo_mask", mask)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class RngStream:
    """Counter-based splittable random stream.

    The (master_seed, stream_id) pair is hashed through numpy's SeedSequence
    spawn mechanism, so distinct stream ids give statistically independent
    generators and the same pair always reproduces the same draws.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        """Derived stream for sub-purpose k (replicates, methods, folds)."""
        return RngStream(self.master_seed, self.stream_id * 1_000_003 + k + 1)


def load_csv(path, exposure_col: str, outcome_col: str,
             covariate_cols: Sequence[str] = ()) -> Dataset:
    """Read a headed CSV into a Dataset.

    Columns not named as exposure/outcome/covariates become candidate
    instruments, in file order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = list(reader)

    covariate_cols = list(covariate_cols)
    for name in [exposure_col, outcome_col] + covariate_cols:
        if name not in header:
            raise ConfigurationError(f"column {name!r} not found in {path}")

    data = np.empty((len(rows), len(header)), dtype=float)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}",
                             row=i + 2)
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at row {i + 2}, column {header[j]!r}",
                    row=i + 2, column=header[j]) from None

    if data.shape[0] < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {data.shape[0]}")

    col_idx = {name: j for j, name in enumerate(header)}
    special = {exposure_col, outcome_col, *covariate_cols}
    z_cols = [j for j, name in enumerate(header) if name not in special]
    X = None
    if covariate_cols:
        X = data[:, [col_idx[c] for c in covariate_cols]]
    return Dataset(Z=data[:, z_cols], D=data[:, col_idx[exposure_col]],
                   Y=data[:, col_idx[outcome_col]], X=X)


def center(ds: Dataset, scale: bool = False) -> Dataset:
    """Subtract column means from Z, D, Y (and X); optionally scale Z to unit sd."""
    Z = ds.Z - ds.Z.mean(axis=0)
    if scale:
        sd = Z.std(axis=0)
        sd[sd == 0] = 1.0
        Z = Z / sd
    D = ds.D - ds.D.mean()
    Y = ds.Y - ds.Y.mean()
    X = None if ds.X is None else ds.X - ds.X.mean(axis=0)
    return replace(ds, Z=Z, D=D, Y=Y, X=X, centered=True)


def partial_out_covariates(ds: Dataset) -> Dataset:
    """Replace Z, D, Y by residuals of an OLS fit on the covariates X.

    Reduces a covariate-adjusted problem to the covariate-free one
    (Frisch-Waugh partialling out); X is dropped from the result.
    """
    if ds.X is None:
        return ds
    if not ds.centered:
        raise DataError("partial_out_covariates requires a centered dataset")
    X = ds.X
    if X.shape[1] >= ds.n or np.linalg.matrix_rank(X) < X.shape[1]:
        raise LinearAlgebraError("covariate matrix X is rank deficient")
    # hat = X (X'X)^{-1} X' applied to each target
    XtX = X.T @ X
    def resid(v):
        coef = np.linalg.solve(XtX, X.T @ v)
        return v - X @ coef
    Z = np.column_stack([resid(ds.Z[:, j]) for j in range(ds.p)]) if ds.p else ds.Z
    return replace(ds, Z=Z, D=resid(ds.D), Y=resid(ds.Y), X=None)
