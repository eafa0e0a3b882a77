"""Weighted pairwise composite likelihood under the separable correlation,
with analytic score, expected Hessian, window-subsampled score variance,
and sandwich confidence intervals.

For one admissible pair (y_i, y_j) at lag (d_t, d_x), write a = y_i - mu,
b = y_j - mu, rho = exp(-lam |d_t| - c_tilde |d_x|).  The pair term is

    l = -1/2 [ 2 log sigma2 + log(1 - rho^2) + B / (sigma2 (1 - rho^2)) ],
    B = a^2 + b^2 - 2 rho a b,

and the objective is pl(theta) = sum over axis-aligned pairs within the
cutoff of w * l.  On axis-aligned lags the separable and canonical
correlations coincide, so pl is the same under either form.  Score
components, with F = rho (a^2 + b^2) - (1 + rho^2) a b and
one = 1 - rho^2 (all validated against central finite differences in
the test suite):

    dl/drho    = rho / one - F / (sigma2 one^2)
    dl/dsigma2 = -1 / sigma2 + B / (2 sigma2^2 one)
    dl/dmu     = (a + b) / (sigma2 (1 + rho))

and dl/d(lam, c_tilde) follows by the chain rule with
grad rho = (-|d_t|, -|d_x|) rho.  The expected per-pair information
block (the negative expected Hessian) is deterministic,

    E[-d2l / dphi dphi'] = (1 + rho^2) / one^2 * grad_rho grad_rho^T
    E[-d2l / dphi dsigma2] = -rho / (sigma2 one) * grad_rho
    E[-d2l / dsigma2^2] = 1 / sigma2^2
    E[-d2l / dmu^2] = 2 / (sigma2 (1 + rho)),     phi = (lam, c_tilde),

with zero mu cross terms.  The score variance J is estimated by window
subsampling: windows slide over the lattice, each contributes the outer
product of its summed score scaled by its pair weight, and the sandwich
covariance of theta_hat is G_inv = W H^-1 J* H^-1 with W the total pair
weight.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.optimize
import scipy.stats

from .bootstrap import IntervalEstimate
from .errors import (
    CorrelationAtUnity,
    NoValidWindows,
    OptimizerDidNotConverge,
    SingularH,
)
from .mm import fit_mm
from .model import FieldSample, Lattice, StouParams

__all__ = [
    "PARAM_NAMES",
    "ThetaCL",
    "PairWeightSpec",
    "WindowSpec",
    "EstimationScenario",
    "SandwichResult",
    "l_pair",
    "pairwise_loglik",
    "score_u",
    "l_pair_hessian",
    "hessian_h",
    "wsev_j",
    "maximize_cl",
    "sandwich_ci",
]

# canonical coordinate order of theta
PARAM_NAMES = ("lambda", "c_tilde", "sigma2", "mu")

_RHO_TOL = 1e-12


@dataclass(frozen=True)
class ThetaCL:
    """CL parameter vector theta = (lambda, c_tilde, sigma2, mu)."""

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

    def as_array(self) -> np.ndarray:
        return np.array([self.lam, self.c_tilde, self.sigma2, self.mu])

    @classmethod
    def from_array(cls, arr) -> "ThetaCL":
        lam, c_tilde, sigma2, mu = (float(v) for v in arr)
        return cls(lam=lam, c_tilde=c_tilde, sigma2=sigma2, mu=mu)

    @classmethod
    def from_params(cls, params: StouParams) -> "ThetaCL":
        return cls(
            lam=params.lam, c_tilde=params.c_tilde, sigma2=params.sigma2, mu=params.mu
        )

    def to_params(self) -> StouParams:
        return StouParams(
            lam=self.lam, c_tilde=self.c_tilde, sigma2=self.sigma2, mu=self.mu
        )


@dataclass(frozen=True)
class PairWeightSpec:
    """Admissible-pair rule: unit weight on axis-aligned pairs separated
    by at most cutoff_d grid steps, zero otherwise."""

    cutoff_d: int = 3
    axis_aligned_only: bool = True

    def __post_init__(self):
        if not (isinstance(self.cutoff_d, (int, np.integer)) and self.cutoff_d >= 1):
            raise ValueError(f"cutoff_d must be an integer >= 1, got {self.cutoff_d!r}")
        if self.axis_aligned_only is not True:
            raise ValueError("only the axis-aligned pair rule is supported")


@dataclass(frozen=True)
class WindowSpec:
    """Sliding subsampling window: extents and strides in grid points."""

    window_nx: int
    window_nt: int
    step_x: int = 1
    step_t: int = 1

    def __post_init__(self):
        for name in ("window_nx", "window_nt"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 2):
                raise ValueError(f"{name} must be an integer >= 2, got {v!r}")
        for name in ("step_x", "step_t"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")

    def origins(self, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
        """Window origin indices (t0s, x0s); empty when no window fits."""
        t0s = np.arange(0, lattice.n_t - self.window_nt + 1, self.step_t)
        x0s = np.arange(0, lattice.n_x - self.window_nx + 1, self.step_x)
        return t0s, x0s


@dataclass(frozen=True)
class EstimationScenario:
    """Which theta coordinates are estimated; the rest are pinned.

    free may be empty (degenerate all-fixed scenario); together with
    fixed_values it must cover all four coordinates exactly once.
    """

    free: tuple[str, ...]
    fixed_values: dict[str, float] = dataclass_field(default_factory=dict)

    def __post_init__(self):
        free = tuple(n for n in PARAM_NAMES if n in set(self.free))
        unknown = set(self.free) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameter names {sorted(unknown)}")
        fixed = set(PARAM_NAMES) - set(free)
        if set(self.fixed_values) != fixed:
            raise ValueError(
                f"fixed_values must have keys {sorted(fixed)}, got {sorted(self.fixed_values)}"
            )
        for name, v in self.fixed_values.items():
            if not math.isfinite(v):
                raise ValueError(f"fixed value for {name} must be finite, got {v!r}")
            if name != "mu" and v <= 0.0:
                raise ValueError(f"fixed value for {name} must be > 0, got {v!r}")
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "fixed_values", dict(self.fixed_values))

    def free_indices(self) -> np.ndarray:
        return np.array([PARAM_NAMES.index(n) for n in self.free], dtype=int)

    def pin(self, theta: ThetaCL) -> ThetaCL:
        """theta with the fixed coordinates replaced by fixed_values."""
        vals = dict(zip(PARAM_NAMES, theta.as_array()))
        vals.update(self.fixed_values)
        return ThetaCL(
            lam=vals["lambda"],
            c_tilde=vals["c_tilde"],
            sigma2=vals["sigma2"],
            mu=vals["mu"],
        )


@dataclass(frozen=True)
class SandwichResult:
    """Sandwich-variance CI bundle at the CL maximizer.

    H and J_star are the full 4x4 expected Hessian and subsampled score
    variance; G_inv is W * H^-1 J* H^-1 restricted to the free
    coordinates (order given by free).  intervals holds one
    IntervalEstimate per free parameter plus the derived (c, tau,
    mu_seed) via the Delta method.
    """

    theta_hat: ThetaCL
    H: np.ndarray
    J_star: np.ndarray
    G_inv: np.ndarray
    W: float
    free: tuple[str, ...]
    standard_errors: dict[str, float]
    intervals: dict[str, IntervalEstimate]
    level: float


def _check_rho(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) >= 1.0 - _RHO_TOL):
        raise CorrelationAtUnity("pair correlation too close to +/-1")
    return rho


def l_pair(theta: ThetaCL, y_i, y_j, rho_ij):
    """Pair log-likelihood term, elementwise over broadcast inputs.

    Equals the bivariate normal log-density at (y_i, y_j) plus log(2 pi).
    """
    rho = _check_rho(rho_ij)
    a = np.asarray(y_i, dtype=float) - theta.mu
    b = np.asarray(y_j, dtype=float) - theta.mu
    one = 1.0 - rho * rho
    B = a * a + b * b - 2.0 * rho * a * b
    return -0.5 * (
        2.0 * math.log(theta.sigma2) + np.log(one) + B / (theta.sigma2 * one)
    )


def score_u(theta: ThetaCL, y_i, y_j, rho_ij, grad_rho) -> np.ndarray:
    """Analytic gradient of l_pair in theta, shape (..., 4).

    grad_rho holds (d rho / d lambda, d rho / d c_tilde) in the trailing
    axis; under the separable correlation at lag (d_t, d_x) it is
    (-|d_t|, -|d_x|) * rho.
    """
    rho = _check_rho(rho_ij)
    s2 = theta.sigma2
    a = np.asarray(y_i, dtype=float) - theta.mu
    b = np.asarray(y_j, dtype=float) - theta.mu
    one = 1.0 - rho * rho
    B = a * a + b * b - 2.0 * rho * a * b
    F = rho * (a * a + b * b) - (1.0 + rho * rho) * a * b

    dl_drho = rho / one - F / (s2 * one * one)
    dl_ds2 = -1.0 / s2 + B / (2.0 * s2 * s2 * one)
    dl_dmu = (a + b) / (s2 * (1.0 + rho))

    grad_rho = np.asarray(grad_rho, dtype=float)
    out = np.empty(np.broadcast(a, b, rho).shape + (4,))
    out[..., 0] = dl_drho * grad_rho[..., 0]
    out[..., 1] = dl_drho * grad_rho[..., 1]
    out[..., 2] = dl_ds2
    out[..., 3] = dl_dmu
    return out


def l_pair_hessian(theta: ThetaCL, y_i, y_j, rho_ij, grad_rho, hess_rho) -> np.ndarray:
    """Observed per-pair Hessian of l_pair in theta, shape (..., 4, 4).

    hess_rho is the 2x2 second derivative of rho in (lambda, c_tilde);
    under the separable correlation it is rho * outer((|d_t|, |d_x|),
    (|d_t|, |d_x|)).
    """
    rho = _check_rho(rho_ij)
    s2 = theta.sigma2
    a = np.asarray(y_i, dtype=float) - theta.mu
    b = np.asarray(y_j, dtype=float) - theta.mu
    one = 1.0 - rho * rho
    B = a * a + b * b - 2.0 * rho * a * b
    F = rho * (a * a + b * b) - (1.0 + rho * rho) * a * b

    dl_drho = rho / one - F / (s2 * one * one)
    l_rr = (1.0 + rho * rho) / (one * one) - (B * one + 4.0 * rho * F) / (
        s2 * one**3
    )
    l_rs = F / (s2 * s2 * one * one)
    l_rm = -(a + b) / (s2 * (1.0 + rho) ** 2)
    l_ss = 1.0 / (s2 * s2) - B / (s2**3 * one)
    l_sm = -(a + b) / (s2 * s2 * (1.0 + rho))
    l_mm = -2.0 / (s2 * (1.0 + rho))

    grad_rho = np.asarray(grad_rho, dtype=float)
    hess_rho = np.asarray(hess_rho, dtype=float)
    shape = np.broadcast(a, b, rho).shape
    out = np.empty(shape + (4, 4))
    gg = grad_rho[..., :, None] * grad_rho[..., None, :]
    out[..., :2, :2] = l_rr[..., None, None] * gg + dl_drho[..., None, None] * hess_rho
    out[..., :2, 2] = l_rs[..., None] * grad_rho
    out[..., 2, :2] = out[..., :2, 2]
    out[..., :2, 3] = l_rm[..., None] * grad_rho
    out[..., 3, :2] = out[..., :2, 3]
    out[..., 2, 2] = l_ss
    out[..., 2, 3] = l_sm
    out[..., 3, 2] = l_sm
    out[..., 3, 3] = l_mm
    return out


@dataclass(frozen=True)
class _LagGroup:
    """Sufficient statistics of all pairs sharing one axis lag."""

    d_t: float
    d_x: float
    n: int
    s_a: float
    s_b: float
    s_aa: float
    s_bb: float
    s_ab: float


def _lag_groups(field: FieldSample, weights: PairWeightSpec) -> list[_LagGroup]:
    """Per-lag pair statistics, in fixed order: temporal lags 1..d then
    spatial lags 1..d.  Groups with no pairs are omitted."""
    v = field.values
    lat = field.lattice
    groups = []
    for h in range(1, weights.cutoff_d + 1):
        if h < lat.n_t:
            yi, yj = v[:-h, :], v[h:, :]
            groups.append(_group_stats(h * lat.dt, 0.0, yi, yj))
    for h in range(1, weights.cutoff_d + 1):
        if h < lat.n_x:
            yi, yj = v[:, :-h], v[:, h:]
            groups.append(_group_stats(0.0, h * lat.dx, yi, yj))
    return groups


def _group_stats(d_t: float, d_x: float, yi: np.ndarray, yj: np.ndarray) -> _LagGroup:
    return _LagGroup(
        d_t=d_t,
        d_x=d_x,
        n=yi.size,
        s_a=float(yi.sum()),
        s_b=float(yj.sum()),
        s_aa=float((yi * yi).sum()),
        s_bb=float((yj * yj).sum()),
        s_ab=float((yi * yj).sum()),
    )


def _group_loglik(theta: ThetaCL, g: _LagGroup) -> float:
    rho = math.exp(-theta.lam * g.d_t - theta.c_tilde * g.d_x)
    if rho >= 1.0 - _RHO_TOL:
        raise CorrelationAtUnity("pair correlation too close to 1")
    mu, s2 = theta.mu, theta.sigma2
    one = 1.0 - rho * rho
    sum_a2 = g.s_aa - 2.0 * mu * g.s_a + g.n * mu * mu
    sum_b2 = g.s_bb - 2.0 * mu * g.s_b + g.n * mu * mu
    sum_ab = g.s_ab - mu * (g.s_a + g.s_b) + g.n * mu * mu
    sum_B = sum_a2 + sum_b2 - 2.0 * rho * sum_ab
    return -0.5 * (
        g.n * (2.0 * math.log(s2) + math.log(one)) + sum_B / (s2 * one)
    )


def pairwise_loglik(theta: ThetaCL, field: FieldSample, weights: PairWeightSpec) -> float:
    """Weighted pairwise log-likelihood over admissible pairs.

    Pairs are accumulated per axis lag from sufficient statistics, in a
    fixed order, so repeated evaluation is bitwise stable.
    """
    return sum(_group_loglik(theta, g) for g in _lag_groups(field, weights))


def _pair_information(theta: ThetaCL, d_t: float, d_x: float) -> np.ndarray:
    """Expected information block of one pair at the given lag."""
    rho = math.exp(-theta.lam * d_t - theta.c_tilde * d_x)
    s2 = theta.sigma2
    one = 1.0 - rho * rho
    g = np.array([-d_t * rho, -d_x * rho])
    block = np.zeros((4, 4))
    block[:2, :2] = (1.0 + rho * rho) / (one * one) * np.outer(g, g)
    block[:2, 2] = -rho / (s2 * one) * g
    block[2, :2] = block[:2, 2]
    block[2, 2] = 1.0 / (s2 * s2)
    block[3, 3] = 2.0 / (s2 * (1.0 + rho))
    return block


def _lag_counts(lattice: Lattice, weights: PairWeightSpec) -> list[tuple[float, float, int]]:
    out = []
    for h in range(1, weights.cutoff_d + 1):
        if h < lattice.n_t:
            out.append((h * lattice.dt, 0.0, (lattice.n_t - h) * lattice.n_x))
    for h in range(1, weights.cutoff_d + 1):
        if h < lattice.n_x:
            out.append((0.0, h * lattice.dx, (lattice.n_x - h) * lattice.n_t))
    return out


def total_pair_weight(lattice: Lattice, weights: PairWeightSpec) -> float:
    """Total weight W of admissible pairs on the lattice."""
    return float(sum(n for _, _, n in _lag_counts(lattice, weights)))


def hessian_h(theta: ThetaCL, lattice: Lattice, weights: PairWeightSpec) -> np.ndarray:
    """Expected Hessian H(theta): the sum over admissible weighted pairs
    of the per-pair expected information block.  Needs no data."""
    H = np.zeros((4, 4))
    for d_t, d_x, n in _lag_counts(lattice, weights):
        H += n * _pair_information(theta, d_t, d_x)
    return H


def _score_fields(
    theta: ThetaCL, field: FieldSample, weights: PairWeightSpec
) -> list[tuple[int, int, np.ndarray]]:
    """Per-lag arrays of pair scores, keyed by pair anchor position.

    Returns (h_t, h_x, U) with U shaped (4, n_t - h_t, n_x - h_x); the
    pair anchored at (t, x) joins (t, x) with (t + h_t, x + h_x).
    """
    v = field.values
    lat = field.lattice
    out = []
    for h in range(1, weights.cutoff_d + 1):
        if h < lat.n_t:
            yi, yj = v[:-h, :], v[h:, :]
            out.append((h, 0, _pair_scores(theta, h * lat.dt, 0.0, yi, yj)))
    for h in range(1, weights.cutoff_d + 1):
        if h < lat.n_x:
            yi, yj = v[:, :-h], v[:, h:]
            out.append((0, h, _pair_scores(theta, 0.0, h * lat.dx, yi, yj)))
    return out


def _pair_scores(
    theta: ThetaCL, d_t: float, d_x: float, yi: np.ndarray, yj: np.ndarray
) -> np.ndarray:
    rho = math.exp(-theta.lam * d_t - theta.c_tilde * d_x)
    grad = np.broadcast_to(
        np.array([-d_t * rho, -d_x * rho]), yi.shape + (2,)
    )
    u = score_u(theta, yi, yj, np.full(yi.shape, rho), grad)
    return np.moveaxis(u, -1, 0)


def wsev_j(
    theta_hat: ThetaCL,
    field: FieldSample,
    weights: PairWeightSpec,
    windows: WindowSpec,
) -> np.ndarray:
    """Window-subsampled empirical variance of the pair score.

    J* = (1/m) sum_k (1/W_k) S_k S_k^T, where S_k sums w * U over the
    pairs whose endpoints both lie inside window k and W_k is the
    window's pair weight; zero-weight windows are skipped.
    """
    lat = field.lattice
    t0s, x0s = windows.origins(lat)
    if t0s.size == 0 or x0s.size == 0:
        raise NoValidWindows(
            f"no {windows.window_nt}x{windows.window_nx} window fits in {lat.shape}"
        )

    # integral images over pair-anchor grids make each window rectangle O(1)
    prefixes = []
    for h_t, h_x, u in _score_fields(theta_hat, field, weights):
        p = np.zeros((4, u.shape[1] + 1, u.shape[2] + 1))
        np.cumsum(u, axis=1, out=p[:, 1:, 1:])
        np.cumsum(p[:, 1:, 1:], axis=2, out=p[:, 1:, 1:])
        prefixes.append((h_t, h_x, p))

    J = np.zeros((4, 4))
    m = 0
    for t0 in t0s:
        for x0 in x0s:
            s_k = np.zeros(4)
            w_k = 0
            for h_t, h_x, p in prefixes:
                # anchors with both endpoints inside the window
                ta, tb = t0, t0 + windows.window_nt - h_t
                xa, xb = x0, x0 + windows.window_nx - h_x
                if tb <= ta or xb <= xa:
                    continue
                s_k += (
                    p[:, tb, xb] - p[:, ta, xb] - p[:, tb, xa] + p[:, ta, xa]
                )
                w_k += (tb - ta) * (xb - xa)
            if w_k == 0:
                continue
            J += np.outer(s_k, s_k) / w_k
            m += 1
    if m == 0:
        raise NoValidWindows("every window has zero pair weight")
    return J / m


def _transform(values: np.ndarray, free_idx: np.ndarray) -> np.ndarray:
    z = values[free_idx].copy()
    for k, idx in enumerate(free_idx):
        if PARAM_NAMES[idx] != "mu":
            z[k] = math.log(z[k])
    return z


def _untransform(z: np.ndarray, free_idx: np.ndarray, pinned: np.ndarray) -> np.ndarray:
    full = pinned.copy()
    for k, idx in enumerate(free_idx):
        full[idx] = z[k] if PARAM_NAMES[idx] == "mu" else math.exp(z[k])
    return full


def maximize_cl(
    field: FieldSample,
    weights: PairWeightSpec,
    scenario: EstimationScenario,
    start: ThetaCL,
    max_iter: int = 2000,
) -> ThetaCL:
    """Maximize the pairwise log-likelihood over the free coordinates.

    Positive coordinates are optimized in log-space by Nelder-Mead
    simplex search (relative function tolerance 1e-8, one automatic
    restart from the incumbent).  Fixed coordinates are pinned to the
    scenario values.  The returned objective never falls below the
    objective at start; if the iteration budget runs out first, an
    OptimizerDidNotConverge warning is issued and the incumbent is
    returned anyway.
    """
    pinned = scenario.pin(start)
    free_idx = scenario.free_indices()
    if free_idx.size == 0:
        return pinned

    groups = _lag_groups(field, weights)
    pinned_arr = pinned.as_array()

    def neg_pl(z: np.ndarray) -> float:
        try:
            theta = ThetaCL.from_array(_untransform(z, free_idx, pinned_arr))
            return -sum(_group_loglik(theta, g) for g in groups)
        except (CorrelationAtUnity, ValueError, OverflowError):
            return math.inf

    z0 = _transform(pinned_arr, free_idx)
    f0 = neg_pl(z0)
    scale = max(1.0, abs(f0)) if math.isfinite(f0) else 1.0
    converged = True
    for _ in range(2):  # one automatic restart from the incumbent
        res = scipy.optimize.minimize(
            neg_pl,
            z0,
            method="Nelder-Mead",
            options={
                "maxiter": max_iter,
                "fatol": 1e-8 * scale,
                "xatol": 1e-6,
            },
        )
        z0 = res.x
        scale = max(1.0, abs(res.fun)) if math.isfinite(res.fun) else scale
        converged = bool(res.success)
    if not converged:
        warnings.warn(
            "simplex search exhausted its iteration budget",
            OptimizerDidNotConverge,
            stacklevel=2,
        )
    theta = ThetaCL.from_array(_untransform(z0, free_idx, pinned_arr))
    # simplex descent from the pinned start cannot do worse, but guard anyway
    if math.isfinite(f0) and neg_pl(z0) > f0:
        return pinned
    return theta


# Delta-method gradients of the derived parameters in theta order.
def _derived_params(theta: ThetaCL) -> list[tuple[str, float, np.ndarray]]:
    lam, ct, s2, mu = theta.lam, theta.c_tilde, theta.sigma2, theta.mu
    tau = math.sqrt(2.0 * lam * ct * s2)
    return [
        ("c", lam / ct, np.array([1.0 / ct, -lam / ct**2, 0.0, 0.0])),
        ("tau", tau, np.array([ct * s2 / tau, lam * s2 / tau, lam * ct / tau, 0.0])),
        ("mu_seed", lam * ct * mu / 2.0,
         np.array([ct * mu / 2.0, lam * mu / 2.0, 0.0, lam * ct / 2.0])),
    ]


def sandwich_ci(
    field: FieldSample,
    weights: PairWeightSpec,
    windows: WindowSpec,
    scenario: EstimationScenario,
    level: float = 0.95,
    start: ThetaCL | None = None,
    max_lag: int = 5,
) -> SandwichResult:
    """Asymptotic-normal CIs from the sandwich covariance at the CL
    maximizer.

    Point estimate from maximize_cl (started at the moment fit unless
    start is given); G_inv = W H^-1 J* H^-1 restricted to the free
    coordinates; each CI is estimate +/- z_(1+level)/2 * se.  Derived
    parameters (c, tau, mu_seed) get Delta-method intervals with their
    gradients restricted to the free coordinates.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level!r}")
    if not scenario.free:
        raise ValueError("scenario must leave at least one parameter free")
    if start is None:
        start = ThetaCL.from_params(fit_mm(field, max_lag=max_lag))
    theta_hat = maximize_cl(field, weights, scenario, start)

    lat = field.lattice
    H = hessian_h(theta_hat, lat, weights)

    # identifiability check first: a free rate with no pairs on its axis
    # should fail as SingularH, not as a window-geometry complaint
    free_idx = scenario.free_indices()
    sub = np.ix_(free_idx, free_idx)
    H_f = H[sub]
    if np.linalg.cond(H_f) > 1e12:
        raise SingularH("expected Hessian is numerically singular on the free set")

    J_star = wsev_j(theta_hat, field, weights, windows)
    W = total_pair_weight(lat, weights)
    H_inv = np.linalg.inv(H_f)
    G_inv = W * (H_inv @ J_star[sub] @ H_inv)

    z = float(scipy.stats.norm.ppf(0.5 * (1.0 + level)))
    ses: dict[str, float] = {}
    intervals: dict[str, IntervalEstimate] = {}
    theta_arr = theta_hat.as_array()
    for k, idx in enumerate(free_idx):
        name = PARAM_NAMES[idx]
        se = math.sqrt(max(G_inv[k, k], 0.0))
        ses[name] = se
        point = float(theta_arr[idx])
        intervals[name] = IntervalEstimate(
            parameter=name,
            point=point,
            lower=point - z * se,
            upper=point + z * se,
            median=point,
            level=level,
        )
    for name, value, grad in _derived_params(theta_hat):
        g = grad[free_idx]
        se = math.sqrt(max(g @ G_inv @ g, 0.0))
        ses[name] = se
        intervals[name] = IntervalEstimate(
            parameter=name,
            point=value,
            lower=value - z * se,
            upper=value + z * se,
            median=value,
            level=level,
        )
    return SandwichResult(
        theta_hat=theta_hat,
        H=H,
        J_star=J_star,
        G_inv=G_inv,
        W=W,
        free=scenario.free,
        standard_errors=ses,
        intervals=intervals,
        level=level,
    )
