"""Exact Gaussian simulation on a lattice via dense Cholesky factorization.

The field restricted to n = n_x * n_t sites is multivariate normal with
mean mu and covariance sigma2 * rho(d_t, d_x) evaluated at all site
pairs, so one lower-triangular factor L with L L^T = Sigma turns i.i.d.
standard normals z into an exact draw mu + L z.  The factor is the
expensive part; callers simulating many replications on the same
lattice should build it once and reuse it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    BudgetExceeded,
    CovarianceJitter,
    DimensionMismatch,
    NotPositiveDefinite,
)
from .model import CorrKind, FieldSample, Lattice, StouParams

__all__ = [
    "DEFAULT_MAX_POINTS",
    "CovarianceMatrix",
    "CholeskyFactor",
    "build_covariance",
    "cholesky_factor",
    "simulate_exact",
]

# Dense n x n storage grows fast; 101 x 101 sites (the largest lattice
# exercised in the source experiments) is the default ceiling.
DEFAULT_MAX_POINTS = 101 * 101

_BUILD_BLOCK_ROWS = 256


@dataclass(frozen=True)
class CovarianceMatrix:
    """Dense covariance of the field at n lattice sites, site-ordered."""

    n: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (self.n, self.n):
            raise DimensionMismatch(
                f"entries shape {entries.shape}, expected ({self.n}, {self.n})"
            )
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L L^T equal to a site covariance."""

    n: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (self.n, self.n):
            raise DimensionMismatch(
                f"entries shape {entries.shape}, expected ({self.n}, {self.n})"
            )
        object.__setattr__(self, "entries", entries)


def build_covariance(
    params: StouParams,
    lattice: Lattice,
    kind: CorrKind = CorrKind.CANONICAL,
    max_points: int = DEFAULT_MAX_POINTS,
) -> CovarianceMatrix:
    """Covariance matrix of the field at all lattice sites.

    Entries are sigma2 * rho(|t_i - t_j| dt, |x_i - x_j| dx) with rho
    the canonical or separable correlation.  Raises BudgetExceeded when
    lattice.n > max_points before allocating the n x n array.
    """
    n = lattice.n
    if n > max_points:
        raise BudgetExceeded(
            f"lattice has {n} sites, budget is {max_points}; "
            "use the grid simulator for larger lattices"
        )
    t_idx, x_idx = lattice.site_indices()
    tt = t_idx * lattice.dt
    xx = x_idx * lattice.dx

    out = np.empty((n, n), dtype=float)
    # blockwise so peak scratch stays O(block * n), not O(n^2)
    for i0 in range(0, n, _BUILD_BLOCK_ROWS):
        rows = slice(i0, min(i0 + _BUILD_BLOCK_ROWS, n))
        d_t = np.abs(tt[rows, None] - tt[None, :])
        d_x = np.abs(xx[rows, None] - xx[None, :])
        if kind is CorrKind.CANONICAL:
            d_x /= params.c
            np.maximum(d_t, d_x, out=d_t)
            d_t *= -params.lam
        elif kind is CorrKind.SEPARABLE:
            d_t *= -params.lam
            d_x *= -params.c_tilde
            d_t += d_x
        else:
            raise ValueError(f"unknown correlation kind {kind!r}")
        np.exp(d_t, out=d_t)
        d_t *= params.sigma2
        out[rows] = d_t
    return CovarianceMatrix(n=n, entries=out)


def cholesky_factor(cov: CovarianceMatrix) -> CholeskyFactor:
    """Lower Cholesky factor of a covariance matrix.

    On failure, retries once with diagonal jitter 1e-12 * max diagonal
    entry (warning CovarianceJitter); a second failure raises
    NotPositiveDefinite.
    """
    try:
        L = scipy.linalg.cholesky(cov.entries, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        jitter = 1e-12 * float(np.max(np.diagonal(cov.entries)))
        warnings.warn(
            f"covariance not positive definite, retrying with jitter {jitter:.3e}",
            CovarianceJitter,
            stacklevel=2,
        )
        bumped = cov.entries + jitter * np.eye(cov.n)
        try:
            L = scipy.linalg.cholesky(bumped, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(
                "covariance factorization failed after jitter retry"
            ) from exc
    return CholeskyFactor(n=cov.n, entries=L)


def simulate_exact(
    factor: CholeskyFactor,
    mu: float,
    lattice: Lattice,
    rng: np.random.Generator,
) -> FieldSample:
    """One exact field draw mu + L z, z i.i.d. standard normal."""
    if factor.n != lattice.n:
        raise DimensionMismatch(
            f"factor built for {factor.n} sites, lattice has {lattice.n}"
        )
    z = rng.standard_normal(factor.n)
    values = mu + factor.entries @ z
    return FieldSample(lattice=lattice, values=values.reshape(lattice.shape))
