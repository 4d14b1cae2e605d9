import math

import numpy as np
import pytest

from mzlab.interferometer import FringeModel, InterferometerGeometry, mismatch_visibility
from mzlab.signals import (
    CountTrace,
    FitConvergenceError,
    IllConditionedFitError,
    figure_of_merit,
    fit_fringes,
    fit_sinc,
    phase_sensitivity,
    synthesize_counts,
)

TABLE1_ROWS = [
    # (i0, visibility, quoted figure of merit)
    (12900.0, 0.805, 8360.0),
    (23710.0, 0.845, 16930.0),
    (14430.0, 0.490, 3465.0),
    (20180.0, 0.510, 5250.0),
    (8150.0, 0.540, 2735.0),
    (4870.0, 0.260, 304.0),
]


def july_model(phase_coeffs=(0.3, 6.0 * math.pi)):
    return FringeModel(i0=23710.0, visibility=0.845, i_b=2000.0,
                       phase_coeffs=phase_coeffs)


class TestCountTrace:
    def test_validation(self):
        with pytest.raises(ValueError):
            CountTrace(np.arange(3.0), np.array([1.0, 2.0, 3.0]))  # floats
        with pytest.raises(ValueError):
            CountTrace(np.arange(3.0), np.array([1, -2, 3]))
        with pytest.raises(ValueError):
            CountTrace(np.arange(3.0), np.array([1, 2, 3]), t_c=0.0)

    def test_csv_round_trip(self, tmp_path):
        trace = synthesize_counts(july_model(), np.linspace(0, 1, 50), seed=5)
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        back = CountTrace.from_csv(path)
        np.testing.assert_array_equal(back.counts, trace.counts)
        np.testing.assert_allclose(back.drive, trace.drive, rtol=1e-15)
        assert back.t_c == trace.t_c
        assert back.seed == trace.seed


class TestSynthesizeCounts:
    def test_poisson_mean(self):
        model = FringeModel(i0=5000.0, visibility=0.0, i_b=0.0)
        trace = synthesize_counts(model, np.linspace(0, 1, 10000),
                                  t_c=0.1, seed=1)
        mean = trace.counts.mean()
        expected = 5000.0 * 0.1
        sigma = math.sqrt(expected / trace.counts.size)
        assert abs(mean - expected) < 3.0 * sigma

    def test_deterministic_for_fixed_seed(self):
        sweep = np.linspace(0, 1, 300)
        a = synthesize_counts(july_model(), sweep, seed=42)
        b = synthesize_counts(july_model(), sweep, seed=42)
        np.testing.assert_array_equal(a.counts, b.counts)
        c = synthesize_counts(july_model(), sweep, seed=43)
        assert np.any(c.counts != a.counts)

    def test_peak_counts_magnitude(self):
        # strongest configuration peaks near (2000 + 23710*1.845)*0.1 per bin
        sweep = np.linspace(0, 1, 400)
        trace = synthesize_counts(july_model(), sweep, t_c=0.1, seed=9)
        expected_peak = (2000.0 + 23710.0 * 1.845) * 0.1
        assert trace.counts.max() == pytest.approx(expected_peak, rel=0.05)

    def test_burst_mode_off_by_default(self):
        sweep = np.linspace(0, 1, 200)
        base = synthesize_counts(july_model(), sweep, seed=7)
        with_rate = synthesize_counts(july_model(), sweep, seed=7,
                                      burst_rate=0.0)
        np.testing.assert_array_equal(base.counts, with_rate.counts)

    def test_burst_mode_adds_rare_large_events(self):
        model = FringeModel(i0=100.0, visibility=0.0, i_b=0.0)
        sweep = np.linspace(0, 1, 2000)
        quiet = synthesize_counts(model, sweep, seed=3)
        noisy = synthesize_counts(model, sweep, seed=3, burst_rate=0.5,
                                  burst_scale=200.0)
        excess = noisy.counts - quiet.counts
        assert excess.min() >= 0
        assert (excess > 100).sum() > 0          # a few bursts landed
        assert (excess > 0).sum() < 0.2 * sweep.size  # but they stay rare

    def test_too_short_sweep_rejected(self):
        with pytest.raises(ValueError):
            synthesize_counts(july_model(), np.array([0.0]))


class TestFitFringes:
    def test_noiseless_recovery(self):
        model = july_model(phase_coeffs=(0.4, 17.0, 0.9))
        x = np.linspace(0, 1, 300)
        # huge counting time makes rounding negligible: effectively noiseless
        t_c = 1e8
        counts = np.rint(model.rate(x) * t_c).astype(np.int64)
        trace = CountTrace(x, counts, t_c=t_c)
        fit = fit_fringes(trace, degree=2, i_b=2000.0)
        assert fit.i0 == pytest.approx(23710.0, rel=1e-9)
        assert fit.visibility == pytest.approx(0.845, rel=1e-9)
        assert fit.phase_coeffs[1] == pytest.approx(17.0, rel=1e-8)
        assert fit.phase_coeffs[2] == pytest.approx(0.9, rel=1e-7)

    def test_table1_conditions_within_one_percent(self):
        model = july_model()
        x = np.linspace(0, 1, 200)
        trace = synthesize_counts(model, x, t_c=0.1, seed=11)
        fit = fit_fringes(trace, degree=1, i_b=2000.0)
        assert fit.sigma("visibility") < 0.01
        assert abs(fit.visibility - 0.845) < 2.5 * fit.sigma("visibility")
        assert abs(fit.i0 - 23710.0) < 2.5 * fit.sigma("i0")
        assert fit.chi2_reduced == pytest.approx(1.0, abs=0.3)

    def test_cofit_background_identifiable_combinations(self):
        # the sinusoid pins I_B + I0 and I0 V; the split between I_B and I0
        # is a flat ridge, which is why the background is measured separately
        model = july_model()
        x = np.linspace(0, 1, 400)
        trace = synthesize_counts(model, x, t_c=0.5, seed=21)
        fit = fit_fringes(trace, degree=1, i_b=None)
        assert "i_b" in fit.param_names
        assert fit.i_b + fit.i0 == pytest.approx(2000.0 + 23710.0, rel=0.01)
        assert fit.i0 * fit.visibility == pytest.approx(23710.0 * 0.845,
                                                        rel=0.01)

    def test_pure_background_shows_no_fringe(self):
        model = FringeModel(i0=10.0, visibility=0.0, i_b=2000.0,
                            phase_coeffs=(0.0, 6.0 * math.pi))
        x = np.linspace(0, 1, 300)
        trace = synthesize_counts(model, x, t_c=0.1, seed=5)
        fit = fit_fringes(trace, degree=1, i_b=2000.0)
        amplitude = fit.i0 * fit.visibility
        sigma = math.hypot(
            fit.visibility * fit.sigma("i0"), fit.i0 * fit.sigma("visibility")
        )
        assert abs(amplitude) < 2.0 * max(sigma, 1.0)

    def test_statistical_coverage(self):
        """Round trip: the reported uncertainties cover the truth.

        With per-parameter 3-sigma intervals on (I0, V), at least 95 of 100
        seeded realizations must recover the injected model.
        """
        model = july_model()
        x = np.linspace(0, 1, 120)
        hits = 0
        for seed in range(100):
            trace = synthesize_counts(model, x, t_c=0.1, seed=seed)
            fit = fit_fringes(trace, degree=1, i_b=2000.0)
            ok_i0 = abs(fit.i0 - 23710.0) < 3.0 * fit.sigma("i0")
            ok_v = abs(fit.visibility - 0.845) < 3.0 * fit.sigma("visibility")
            hits += ok_i0 and ok_v
        assert hits >= 95

    def test_visibility_estimator_unbiased_at_high_counts(self):
        model = july_model()
        x = np.linspace(0, 1, 120)
        vs = [
            fit_fringes(synthesize_counts(model, x, t_c=0.1, seed=s),
                        degree=1, i_b=2000.0).visibility
            for s in range(100)
        ]
        assert abs(np.mean(vs) - 0.845) < 0.005

    def test_nonconvergence_raises_with_diagnostic(self):
        trace = synthesize_counts(july_model(), np.linspace(0, 1, 80), seed=2)
        with pytest.raises(FitConvergenceError, match="residual"):
            fit_fringes(trace, degree=2, i_b=2000.0, max_nfev=2)


class TestFitSinc:
    def test_mismatch_zero_position_recovery(self, geom):
        rng = np.random.default_rng(8)
        z = np.linspace(-0.015, 0.020, 36)
        z_c = 3.5e-3
        v = 0.74 * np.abs(
            np.sinc(geom.k_g * geom.e_0 * (z - z_c) / (2 * geom.l04) / math.pi)
            * np.sinc(geom.k_g * geom.e_d * (z - z_c) / (2 * geom.l04) / math.pi)
        ) + rng.normal(0.0, 0.01, z.size)
        fit = fit_sinc(z, v, law="mismatch", p=1, geom=geom)
        assert abs(fit.z_c - z_c) < 1e-4
        assert fit.v0 == pytest.approx(0.74, abs=0.02)

    def test_v0_linearity(self, geom):
        z = np.linspace(-0.015, 0.02, 30)
        v = 0.8 * np.abs(mismatch_visibility(z - 2e-3, 1, geom))
        f1 = fit_sinc(z, v, law="mismatch", geom=geom)
        f2 = fit_sinc(z, 0.5 * v, law="mismatch", geom=geom)
        assert f2.v0 == pytest.approx(0.5 * f1.v0, rel=1e-6)

    def test_tilt_scale_recovery(self, geom):
        thetas = np.linspace(-5e-5, 5e-5, 41)
        scale = 2.0 * geom.k_g * geom.h_d  # one tilted grating, order 1
        v = 0.845 * np.abs(np.sinc(scale * thetas / math.pi))
        fit = fit_sinc(thetas, v, law="tilt")
        assert fit.scale == pytest.approx(scale, rel=1e-6)

    def test_wrong_order_law_halves_the_zero(self, geom):
        # order-2 data fitted with the order-1 law: fitted zero at half the
        # true position, i.e. fitted rate parameter twice as large
        thetas = np.linspace(-4e-5, 4e-5, 61)
        scale_p2 = 2.0 * 2.0 * geom.k_g * geom.h_d
        v = np.abs(np.sinc(scale_p2 * thetas / math.pi))
        fit = fit_sinc(thetas, v, law="tilt")
        assert fit.scale == pytest.approx(scale_p2, rel=1e-6)

    def test_shuffle_invariance(self, geom):
        rng = np.random.default_rng(4)
        z = np.linspace(-0.015, 0.02, 36)
        v = 0.7 * np.abs(mismatch_visibility(z - 3.5e-3, 1, geom))
        fit_a = fit_sinc(z, v, law="mismatch", geom=geom)
        perm = rng.permutation(z.size)
        fit_b = fit_sinc(z[perm], v[perm], law="mismatch", geom=geom)
        assert fit_a.z_c == pytest.approx(fit_b.z_c, rel=1e-9)

    def test_insufficient_points(self):
        with pytest.raises(ValueError):
            fit_sinc(np.arange(4.0), np.ones(4), law="tilt")

    def test_unconstraining_span_rejected(self):
        x = np.linspace(0, 1e-6, 12)
        v = 1.0 - 1e-4 * x / x.max()
        with pytest.raises(IllConditionedFitError):
            fit_sinc(x, v, law="tilt")


class TestFigureOfMerit:
    @pytest.mark.parametrize("i0,vis,expected", [
        (12900.0, 0.805, 8359.5225),
        (23710.0, 0.845, 16929.53275),
        (8150.0, 0.540, 2376.54),
    ])
    def test_exact_arithmetic(self, i0, vis, expected):
        assert figure_of_merit(i0, vis) == pytest.approx(expected, abs=0.02)

    def test_zero_visibility(self):
        assert figure_of_merit(1e5, 0.0) == 0.0


class TestPhaseSensitivity:
    def test_reference_value(self):
        got = phase_sensitivity(23710.0, 0.845, i_b=2000.0)
        expected = math.sqrt(23710.0 + 2000.0) / (23710.0 * 0.845)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(8.0e-3, rel=0.01)

    def test_quadrupled_intensity_halves_noise(self):
        a = phase_sensitivity(1e4, 0.5)
        b = phase_sensitivity(4e4, 0.5)
        assert a / b == pytest.approx(2.0, rel=1e-12)

    def test_background_dominated_limit(self):
        i0, v, i_b = 100.0, 0.9, 1e8
        got = phase_sensitivity(i0, v, i_b=i_b)
        assert got == pytest.approx(math.sqrt(i_b) / (i0 * v), rel=1e-3)

    def test_longer_integration_improves(self):
        assert phase_sensitivity(1e4, 0.5, t=4.0) == pytest.approx(
            phase_sensitivity(1e4, 0.5) / 2.0, rel=1e-12
        )

    def test_zero_visibility_rejected(self):
        with pytest.raises(ValueError):
            phase_sensitivity(1e4, 0.0)
