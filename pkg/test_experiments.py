from dataclasses import dataclass

import numpy as np
import pytest

import charts
from dynsys import ConfigError, NoAnalyticDirection
from experiments import (
    attractor_points,
    convergence_study,
    error_profile,
    estimate_truth,
    fit_loglog_slope,
    sweep,
    write_csv,
)
from fd_oracle import FdConfig
from maps import AffineContractionMap, SolenoidMap

SOLENOID_TRUTH = 0.931450


@dataclass(frozen=True)
class OpaqueSolenoid(SolenoidMap):
    def analytic_shadow_direction(self, u, s):
        return None


@pytest.fixture(scope="module")
def profile():
    return error_profile(100, 2.0, seed=3)


class TestErrorProfile:

    def test_shape(self, profile):
        assert profile.e_norm.shape == (100,)
        assert np.all(np.isfinite(profile.e_norm)) and np.all(profile.e_norm >= 0)

    def test_endpoints_are_order_one(self, profile):
        assert profile.e_norm[0] >= 1e-3
        assert profile.e_norm[-1] >= 1e-3

    def test_middle_reaches_roundoff(self, profile):
        assert profile.e_norm.min() <= 1e-10
        assert np.max(profile.e_norm[33:67]) <= 1e-6
        assert profile.middle_max() <= 1e-6

    def test_head_decays_exponentially(self, profile):
        slope, correlation = profile.head_decay(2, 20)
        assert slope < 0
        assert correlation <= -0.95

    def test_frame(self, profile):
        frame = profile.to_frame()
        assert list(frame.columns) == ["i", "e_norm"]
        assert frame["i"].iloc[0] == 1 and frame["i"].iloc[-1] == 100

    def test_map_without_closed_form(self):
        with pytest.raises(NoAnalyticDirection):
            error_profile(50, 2.0, seed=0, sys=OpaqueSolenoid())

    def test_controls_have_profiles(self, cat):
        profile = error_profile(200, 0.3, seed=0, sys=cat)
        assert profile.e_norm.min() <= 1e-10

    @pytest.mark.parametrize("n", [0, 1])
    def test_too_short(self, n):
        with pytest.raises(ConfigError):
            error_profile(n, 2.0, seed=0)

    def test_negative_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            error_profile(50, 2.0, seed=-1)


class TestSweep:

    def test_affine_grid(self):
        fd = FdConfig("affine", 0.0, ensemble=4, n=100, n0=60)
        table = sweep([1.5, 0.5, 1.0], 200, 2, fd, trim=40, n0=60)
        assert list(table.columns) == ["s", "n", "rep", "lss_estimate", "fd_estimate", "fd_ci3"]
        assert list(table["s"]) == [0.5, 0.5, 1.0, 1.0, 1.5, 1.5]
        np.testing.assert_allclose(table["lss_estimate"], 2.0, atol=1e-10)
        np.testing.assert_allclose(table["fd_estimate"], 2.0, atol=1e-10)

    def test_several_lengths_and_jobs(self):
        fd = FdConfig("cat", 0.0, ensemble=4, n=100)
        serial = sweep([0.2], [100, 300], 2, fd, seed=4, jobs=1)
        parallel = sweep([0.2], [100, 300], 2, fd, seed=4, jobs=2)
        assert list(serial["n"]) == [100, 100, 300, 300]
        assert serial.equals(parallel)

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            sweep([], 100, 1, FdConfig("cat", 0.0))

    def test_short_runs_scatter_more(self):
        fd = FdConfig("solenoid", 1.0, ensemble=2, n=10)
        table = sweep([1.0], [100, 1000], 16, fd)
        spread = table.groupby("n")["lss_estimate"].std()
        assert spread[100] >= 2 * spread[1000]


class TestConvergence:

    def test_loglog_slope(self):
        n = np.array([10.0, 100.0, 1000.0])
        slope, intercept, r = fit_loglog_slope(n, 3.0 * n ** -0.5)
        assert slope == pytest.approx(-0.5)
        assert np.exp(intercept) == pytest.approx(3.0)
        assert r == pytest.approx(-1.0)
        assert np.isnan(fit_loglog_slope([10.0], [1.0])[0])

    def test_affine_study(self):
        study = convergence_study(1.0, [40, 80, 160, 320], 2, truth=2.0, trim=0, sys=AffineContractionMap(), n0=60)
        means = study.means()
        # untrimmed bias is (1 + a)/(1 - a)^2 / n = 6/n
        np.testing.assert_allclose(means["mean_abs_error"], 6.0 / means["n"], rtol=1e-6)
        assert study.slopes["all"] == pytest.approx(-1.0, abs=1e-6)
        assert study.slope_over(40, 80) == pytest.approx(-1.0, abs=1e-6)

    def test_trimming_removes_the_boundary_term(self):
        # with the boundary steps trimmed the affine runs are exact, so only
        # untrimmed runs show the O(1/n) stage
        study = convergence_study(1.0, [100, 200, 400], 2, truth=2.0, trim=40, sys=AffineContractionMap(), n0=60)
        assert np.all(study.means()["mean_abs_error"] <= 1e-10)

    def test_single_length_has_no_slope(self):
        study = convergence_study(1.0, [40], 2, truth=2.0, sys=AffineContractionMap(), n0=60)
        slopes = study.summary()["slopes"]
        assert slopes == {"small_n": None, "large_n": None, "all": None}

    def test_rows_and_summary(self, tmp_path):
        study = convergence_study(1.0, [200, 100], 3, truth=SOLENOID_TRUTH, trim=20)
        assert list(study.rows.columns) == ["n", "rep", "abs_error"]
        assert list(study.rows["n"]) == [100, 100, 100, 200, 200, 200]
        assert np.all(study.rows["abs_error"] >= 0)
        summary = study.summary()
        assert set(summary["slopes"]) == {"small_n", "large_n", "all"}
        assert set(summary["mean_abs_error"]) == {"100", "200"}
        path = write_csv(study.means(), tmp_path / "conv-mean.csv")
        assert path.read_text().splitlines()[0] == "n,mean_abs_error"

    @pytest.mark.slow
    def test_small_n_rate(self):
        study = convergence_study(1.0, [100, 200, 400, 800], 16, truth=SOLENOID_TRUTH, jobs=4)
        assert -1.4 <= study.slopes["all"] <= -0.6
        means = study.means().set_index("n")["mean_abs_error"]
        assert means[800] < means[100]

    @pytest.mark.slow
    def test_large_n_rate(self):
        study = convergence_study(1.0, [10000, 20000, 40000], 16, truth=SOLENOID_TRUTH, jobs=4)
        assert -0.8 <= study.slopes["all"] <= -0.25


class TestSupplements:

    def test_truth_estimate(self):
        truth = estimate_truth(1.0, 2000, 4, trim=20)
        assert truth.mean == pytest.approx(SOLENOID_TRUTH, abs=0.1)
        assert truth.ci3 == pytest.approx(3 * truth.sigma)
        with pytest.raises(ConfigError):
            estimate_truth(1.0, 100, 1)

    def test_attractor_points(self):
        frame = attractor_points(1.4, 500, seed=2)
        assert list(frame.columns) == ["x", "y", "z"]
        r = np.hypot(frame["x"], frame["y"])
        assert np.all(np.abs(r - 1.4) <= 1.0)
        with pytest.raises(ConfigError):
            attractor_points(1.4, 0)

    def test_charts(self, tmp_path):
        profile = error_profile(60, 2.0, seed=1).to_frame()
        fig = charts.error_profile_figure(profile)
        assert len(fig.data) == 1
        study = convergence_study(1.0, [100, 200], 2, truth=SOLENOID_TRUTH, trim=20)
        assert len(charts.convergence_figure(study.means()).data) == 3
        assert len(charts.attractor_figure(attractor_points(1.0, 100)).data) == 1
        path = charts.write_chart(fig, tmp_path / "profile.html")
        assert path.exists()
