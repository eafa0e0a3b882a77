"""Parameters, lattice geometry, and correlation structure of the
spatio-temporal Ornstein-Uhlenbeck (STOU) field.

The field is the moving-average of a homogeneous Gaussian noise basis
over a backward light cone with decay rate lam and cone slope c,

    Y_t(x) = int_{A_t(x)} exp(-lam (t - s)) L(d xi, d s),
    A_t(x) = {(xi, s) : s <= t, |xi - x| <= c (t - s)},

where L has seed mean mu_seed and seed variance tau2 per unit area.
Stationary moments and the two correlation forms used throughout:

    mu     = 2 c mu_seed / lam**2
    sigma2 = c tau2 / (2 lam**2)

    rho_canonical(d_t, d_x) = exp(-lam * max(|d_t|, |d_x| / c))
    rho_separable(d_t, d_x) = exp(-lam |d_t| - c_tilde |d_x|),   c_tilde = lam / c

The separable form coincides with the canonical one on axis-aligned
lags (d_t = 0 or d_x = 0) and bounds it from below elsewhere.  The
canonical quadruple (lam, c_tilde, sigma2, mu) is the internal
representation; (c, mu_seed, tau2) are derived views.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "StouParams",
    "Lattice",
    "FieldSample",
    "CorrKind",
    "corr_canonical",
    "corr_separable",
    "derived_moments",
]


def derived_moments(lam: float, c: float, mu_seed: float, tau2: float) -> tuple[float, float]:
    """Stationary mean and variance implied by the natural parameters."""
    mu = 2.0 * c * mu_seed / lam**2
    sigma2 = c * tau2 / (2.0 * lam**2)
    return mu, sigma2


@dataclass(frozen=True)
class StouParams:
    """STOU parameter set, stored in canonical coordinates.

    Attributes
    ----------
    lam : float
        Temporal decay rate, > 0.
    c_tilde : float
        Spatial decay rate lam / c, > 0.
    sigma2 : float
        Stationary variance, > 0.
    mu : float
        Stationary mean.
    """

    lam: float
    c_tilde: float
    sigma2: float
    mu: float

    def __post_init__(self):
        for name in ("lam", "c_tilde", "sigma2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")

    @classmethod
    def natural(cls, lam: float, c: float, mu_seed: float, tau2: float) -> "StouParams":
        """Construct from the natural parameterization (lam, c, mu_seed, tau2)."""
        if not (math.isfinite(c) and c > 0.0):
            raise ValueError(f"c must be finite and > 0, got {c!r}")
        if not (math.isfinite(tau2) and tau2 > 0.0):
            raise ValueError(f"tau2 must be finite and > 0, got {tau2!r}")
        mu, sigma2 = derived_moments(lam, c, mu_seed, tau2)
        return cls(lam=lam, c_tilde=lam / c, sigma2=sigma2, mu=mu)

    @property
    def c(self) -> float:
        return self.lam / self.c_tilde

    @property
    def tau2(self) -> float:
        return 2.0 * self.lam * self.c_tilde * self.sigma2

    @property
    def mu_seed(self) -> float:
        return self.lam * self.c_tilde * self.mu / 2.0


class CorrKind(enum.Enum):
    CANONICAL = "canonical"
    SEPARABLE = "separable"


def corr_canonical(params: StouParams, d_t, d_x):
    """exp(-lam * max(|d_t|, |d_x| / c)), elementwise over broadcast lags."""
    d_t = np.abs(np.asarray(d_t, dtype=float))
    d_x = np.abs(np.asarray(d_x, dtype=float))
    return np.exp(-params.lam * np.maximum(d_t, d_x / params.c))


def corr_separable(params: StouParams, d_t, d_x):
    """exp(-lam |d_t| - c_tilde |d_x|), elementwise over broadcast lags."""
    d_t = np.abs(np.asarray(d_t, dtype=float))
    d_x = np.abs(np.asarray(d_x, dtype=float))
    return np.exp(-params.lam * d_t - params.c_tilde * d_x)


@dataclass(frozen=True)
class Lattice:
    """Regular space-time observation grid.

    Sites are ordered time-major: site k observes time index
    k // n_x and space index k % n_x, at coordinates (t dt, x dx).
    """

    n_x: int
    n_t: int
    dx: float
    dt: float

    def __post_init__(self):
        for name in ("n_x", "n_t"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        for name in ("dx", "dt"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    @property
    def n(self) -> int:
        return self.n_x * self.n_t

    @property
    def shape(self) -> tuple[int, int]:
        """(n_t, n_x), the array shape of one field sample."""
        return (self.n_t, self.n_x)

    def site_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Time and space integer indices of all n sites in site order."""
        t_idx = np.repeat(np.arange(self.n_t), self.n_x)
        x_idx = np.tile(np.arange(self.n_x), self.n_t)
        return t_idx, x_idx


@dataclass(frozen=True)
class FieldSample:
    """One realization of the field on a lattice, shaped (n_t, n_x)."""

    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.lattice.shape:
            raise DimensionMismatch(
                f"values shape {values.shape} does not match lattice {self.lattice.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)

    def flat(self) -> np.ndarray:
        """Values in site order (time-major)."""
        return self.values.reshape(-1)
