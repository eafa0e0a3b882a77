import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stou import (
    AcfEstimate,
    DegenerateSample,
    FieldSample,
    InsufficientUsableLags,
    Lattice,
    StouParams,
    build_covariance,
    cholesky_factor,
    empirical_acf,
    fit_mm,
    mm_from_moments,
    simulate_exact,
)


def make_field(values) -> FieldSample:
    values = np.asarray(values, dtype=float)
    lat = Lattice(n_x=values.shape[1], n_t=values.shape[0], dx=0.05, dt=0.05)
    return FieldSample(lattice=lat, values=values)


def exact_acfs(lam, c_tilde, dt, dx, max_lag=5):
    lags = np.arange(1, max_lag + 1)
    acf_t = AcfEstimate(axis="temporal", lags=lags, values=np.exp(-lam * lags * dt))
    acf_x = AcfEstimate(axis="spatial", lags=lags, values=np.exp(-c_tilde * lags * dx))
    return acf_t, acf_x


class TestAcfEstimate:
    def test_rejects_unknown_axis(self):
        with pytest.raises(ValueError):
            AcfEstimate(axis="diagonal", lags=[1], values=[0.5])

    def test_rejects_non_increasing_lags(self):
        with pytest.raises(ValueError):
            AcfEstimate(axis="temporal", lags=[1, 1], values=[0.5, 0.4])
        with pytest.raises(ValueError):
            AcfEstimate(axis="temporal", lags=[0, 1], values=[0.5, 0.4])

    def test_rejects_out_of_range_values(self):
        with pytest.raises(ValueError):
            AcfEstimate(axis="spatial", lags=[1], values=[1.5])


class TestEmpiricalAcf:
    def test_perfect_temporal_persistence(self):
        # constant along time, varying in space: temporal ACF exactly 1
        row = np.arange(5.0)
        field = make_field(np.tile(row, (6, 1)))
        acf = empirical_acf(field, "temporal", 3)
        np.testing.assert_array_equal(acf.values, 1.0)

    def test_single_spike_is_nearly_uncorrelated(self):
        values = np.zeros((10, 10))
        values[4, 6] = 1.0
        field = make_field(values)
        for axis in ("temporal", "spatial"):
            acf = empirical_acf(field, axis, 3)
            assert np.all(np.abs(acf.values) < 0.05)

    def test_constant_field_degenerate(self):
        field = make_field(np.full((4, 4), 2.5))
        with pytest.raises(DegenerateSample):
            empirical_acf(field, "temporal", 2)

    def test_max_lag_bounds(self):
        field = make_field(np.random.default_rng(0).normal(size=(4, 4)))
        with pytest.raises(ValueError):
            empirical_acf(field, "temporal", 0)
        with pytest.raises(ValueError):
            empirical_acf(field, "temporal", 4)

    def test_replication_average_tracks_model(self):
        # coarse spatial spacing keeps the full-sample mean accurate, so
        # the finite-sample bias of the lag-1 value stays inside 0.01
        p = StouParams.natural(lam=1.0, c=1.0, mu_seed=0.2, tau2=0.01)
        lat = Lattice(n_x=61, n_t=61, dx=1.0, dt=0.05)
        fac = cholesky_factor(build_covariance(p, lat))
        rng = np.random.default_rng(11)
        vals = [
            empirical_acf(simulate_exact(fac, p.mu, lat, rng), "temporal", 1).values[0]
            for _ in range(500)
        ]
        assert abs(np.mean(vals) - math.exp(-0.05)) < 0.01


class TestMmFromMoments:
    def test_population_exact_inputs_invert(self):
        truth = StouParams.natural(lam=1.7, c=0.8, mu_seed=-0.3, tau2=0.02)
        acf_t, acf_x = exact_acfs(truth.lam, truth.c_tilde, 0.05, 0.05)
        fitted = mm_from_moments(acf_t, acf_x, truth.mu, truth.sigma2, 0.05, 0.05)
        assert fitted.lam == pytest.approx(truth.lam, rel=1e-10)
        assert fitted.c == pytest.approx(truth.c, rel=1e-10)
        assert fitted.mu_seed == pytest.approx(truth.mu_seed, rel=1e-10)
        assert fitted.tau2 == pytest.approx(truth.tau2, rel=1e-10)

    @given(
        lam=st.floats(min_value=0.05, max_value=20.0),
        c=st.floats(min_value=0.05, max_value=20.0),
        mu_seed=st.floats(min_value=-5.0, max_value=5.0),
        tau2=st.floats(min_value=1e-4, max_value=10.0),
    )
    @settings(max_examples=100)
    def test_inversion_roundtrip_property(self, lam, c, mu_seed, tau2):
        truth = StouParams.natural(lam=lam, c=c, mu_seed=mu_seed, tau2=tau2)
        # keep exp(-lam h dt) comfortably inside (0, 1) for all lags
        dt = min(0.05, 1.0 / lam)
        dx = min(0.05, 1.0 / truth.c_tilde)
        acf_t, acf_x = exact_acfs(truth.lam, truth.c_tilde, dt, dx)
        fitted = mm_from_moments(acf_t, acf_x, truth.mu, truth.sigma2, dt, dx)
        assert fitted.lam == pytest.approx(truth.lam, rel=1e-9)
        assert fitted.c_tilde == pytest.approx(truth.c_tilde, rel=1e-9)

    def test_degenerate_variance_rejected(self):
        acf_t, acf_x = exact_acfs(1.0, 1.0, 0.05, 0.05)
        with pytest.raises(DegenerateSample):
            mm_from_moments(acf_t, acf_x, 0.4, 0.0, 0.05, 0.05)


class TestFitMm:
    def test_requires_two_points_per_axis(self):
        field = make_field(np.random.default_rng(0).normal(size=(1, 8)) * 0 + np.arange(8.0))
        with pytest.raises(ValueError):
            fit_mm(field)

    def test_unusable_acf_raises(self):
        # alternating in time and constant in space: temporal ACF is
        # -1, +1, ... and spatial ACF is 1 at all lags
        values = np.where(np.arange(8)[:, None] % 2 == 0, 1.0, -1.0)
        field = make_field(np.tile(values, (1, 6)))
        with pytest.raises(InsufficientUsableLags):
            fit_mm(field)

    def test_max_lag_clamped_to_extent(self, small_field):
        lat = Lattice(n_x=3, n_t=9, dx=0.05, dt=0.05)
        field = FieldSample(lattice=lat, values=small_field.values[:9, :3])
        assert fit_mm(field, max_lag=5000) == fit_mm(field, max_lag=8)

    def test_scale_equivariance_exact(self, small_field):
        base = fit_mm(small_field)
        scaled = fit_mm(
            FieldSample(lattice=small_field.lattice, values=2.0 * small_field.values)
        )
        assert scaled.lam == base.lam
        assert scaled.c == base.c
        assert scaled.mu == 2.0 * base.mu
        assert scaled.sigma2 == 4.0 * base.sigma2
        assert scaled.mu_seed == 2.0 * base.mu_seed
        assert scaled.tau2 == 4.0 * base.tau2

    def test_shift_changes_only_the_mean_fits(self, small_field):
        base = fit_mm(small_field)
        shifted = fit_mm(
            FieldSample(lattice=small_field.lattice, values=small_field.values + 1.5)
        )
        assert shifted.lam == pytest.approx(base.lam, rel=1e-9)
        assert shifted.c_tilde == pytest.approx(base.c_tilde, rel=1e-9)
        assert shifted.sigma2 == pytest.approx(base.sigma2, rel=1e-9)
        assert shifted.mu == pytest.approx(base.mu + 1.5, rel=1e-9)

    def test_median_estimate_at_observation_scale(self):
        # strong decay keeps the correlation length well inside the
        # lattice, so the moment fit centres on the truth
        truth = StouParams.natural(lam=4.0, c=1.0, mu_seed=0.2, tau2=0.01)
        lat = Lattice(n_x=101, n_t=101, dx=0.05, dt=0.05)
        fac = cholesky_factor(build_covariance(truth, lat))
        rng = np.random.default_rng(2024)
        lams = [
            fit_mm(simulate_exact(fac, truth.mu, lat, rng)).lam for _ in range(100)
        ]
        assert abs(np.median(lams) - truth.lam) <= 0.10 * truth.lam
