import math

import numpy as np
import pytest

from cklab import (
    HypothesisError,
    ParameterError,
    Shape,
    ThetaParams,
    bbp_prediction,
    classify_outliers,
    conjugate_kernel_factor,
    d_transform,
    even_centered_monomial,
    full_spectrum,
    gaussian,
    ks_distance,
    linear_surrogate_factor,
    mixture,
    mp_cdf,
    mp_density,
    mp_edges,
    mp_zero_mass,
    outlier_from_d_transform,
    rademacher,
    wigner_identity_residual,
    wigner_rho,
)
from oracles import mp_moment, mp_quantile_sample


def tp(theta1, theta2, theta3):
    return ThetaParams(theta1, theta2, theta3, 1.0)


class TestMpLaw:
    def test_edges_square_case(self):
        assert mp_edges(1.0, 1.0) == (0.0, 4.0)

    def test_edges_narrow_case(self):
        lo, hi = mp_edges(0.1, 1.0)
        assert hi == pytest.approx((1 + math.sqrt(0.1)) ** 2, rel=1e-12)
        assert lo == pytest.approx((1 - math.sqrt(0.1)) ** 2, rel=1e-12)

    def test_edges_scale_covariance(self):
        lo1, hi1 = mp_edges(0.3, 1.0)
        lo2, hi2 = mp_edges(0.3, 2.0)
        assert (lo2, hi2) == (pytest.approx(2 * lo1), pytest.approx(2 * hi1))

    @pytest.mark.parametrize("gamma,theta1", [(0.1, 1.0), (0.5, 2.0), (1.0, 1.0), (2.5, 0.7)])
    def test_density_mass_and_moment(self, gamma, theta1):
        lo, hi = mp_edges(gamma, theta1)
        xs = np.linspace(lo, hi, 400001)
        dens = mp_density(xs, gamma, theta1)
        mass = np.trapezoid(dens, xs)
        assert mass == pytest.approx(1.0 - mp_zero_mass(gamma), abs=2e-3)
        mean = np.trapezoid(dens * xs, xs)
        assert mean == pytest.approx(theta1, abs=5e-3 * theta1)  # first moment

    @pytest.mark.parametrize("gamma", [0.1, 0.5, 1.0, 2.0])
    def test_cdf_monotone_and_normalized(self, gamma):
        lo, hi = mp_edges(gamma, 1.0)
        xs = np.linspace(-1.0, hi + 1.0, 1000)
        cdf = mp_cdf(xs, gamma, 1.0)
        assert np.all(np.diff(cdf) >= -1e-12)
        assert cdf[0] == 0.0
        assert cdf[-1] == pytest.approx(1.0, abs=1e-9)
        if gamma > 1:
            assert mp_cdf(np.array([lo / 2]), gamma, 1.0)[0] == pytest.approx(
                1 - 1 / gamma, abs=1e-9
            )

    def test_ks_distance_against_exact_quantiles(self):
        sample = mp_quantile_sample(2000, 0.5, 1.0, mp_cdf)
        assert ks_distance(sample, mp_cdf, 0.5, 1.0) < 2e-3


class TestClosedFormPrediction:
    def test_strong_spike_position(self):
        # theta = (1, 0, 1/2), kappa = 2, phi = 0.1, psi = 1:
        # a = 1 > sqrt(0.1), lambda1 -> (1+1)(0.1+1)/1 = 2.2 in both conventions
        report = bbp_prediction(tp(1.0, 0.0, 0.5), 2.0, 0.1, 1.0)
        assert report.supercritical
        assert report.alpha == pytest.approx(1.0)
        assert report.predicted_lambda1_paper == pytest.approx(2.2, rel=1e-12)
        assert report.predicted_lambda1_covariant == pytest.approx(2.2, rel=1e-12)
        assert report.predicted_lambda1 == report.predicted_lambda1_covariant

    def test_zero_kurtosis_sticks_to_edge(self):
        report = bbp_prediction(tp(1.0, 0.0, 0.5), 0.0, 0.1, 1.0)
        assert not report.supercritical
        assert report.predicted_lambda1_covariant == pytest.approx(report.bulk_edge_high)

    def test_grows_linearly_for_huge_spikes(self):
        alphas = np.logspace(0, 6, 13)
        preds = []
        for a in alphas:
            r = bbp_prediction(tp(1.0, 0.0, a), 1.0, 0.1, 1.0)  # alpha = theta3 here
            preds.append(r.predicted_lambda1_covariant)
        preds = np.array(preds)
        assert np.all(np.diff(preds) > 0)
        assert preds[-1] / alphas[-1] == pytest.approx(1.0, rel=1e-4)

    def test_covariant_branch_continuous_at_threshold(self):
        theta1, gamma = 1.7, 0.23
        alpha_star = math.sqrt(gamma) * theta1
        psi = 1.0
        r = bbp_prediction(tp(theta1, 0.0, alpha_star), 1.0, gamma * psi, psi)
        # exactly at threshold the formula is taken on the subcritical branch,
        # and the supercritical formula evaluated there coincides with the edge
        super_value = (theta1 + alpha_star) * (theta1 * gamma + alpha_star) / alpha_star
        assert super_value == pytest.approx(theta1 * (1 + math.sqrt(gamma)) ** 2, rel=1e-12)
        assert not r.supercritical

    @pytest.mark.parametrize("c", [0.3, 2.0, 11.5])
    def test_covariant_scale_covariance(self, c):
        base = bbp_prediction(tp(1.2, 0.0, 0.8), 1.5, 0.4, 1.0)
        scaled = bbp_prediction(tp(c * 1.2, 0.0, c * 0.8), 1.5, 0.4, 1.0)
        assert scaled.predicted_lambda1_covariant == pytest.approx(
            c * base.predicted_lambda1_covariant, rel=1e-12
        )
        # the literal convention is not scale covariant; flag stays visible
        if base.supercritical and c != 1.0:
            assert scaled.predicted_lambda1_paper != pytest.approx(
                c * base.predicted_lambda1_paper, rel=1e-6
            )

    def test_nonzero_slope_parameter_rejected(self):
        with pytest.raises(HypothesisError) as err:
            bbp_prediction(tp(1.0, 0.3, 0.5), 1.0, 0.5, 1.0)
        assert "d_transform" in str(err.value) or "d-transform" in str(err.value).lower()

    def test_serialization_echoes_inputs(self, tmp_path):
        report = bbp_prediction(tp(1.0, 0.0, 0.5), 2.0, 0.1, 1.0)
        doc = report.to_json(tmp_path / "r.json")
        assert doc["inputs"]["kappa"] == 2.0
        assert (tmp_path / "r.json").read_text().endswith("\n")


class TestDTransform:
    def test_point_mass_at_zero(self):
        zeros = np.zeros(100)
        for gamma in (1.0, 0.4):
            for z in (0.5, 1.0, 3.0):
                assert d_transform(zeros, z, gamma) == pytest.approx(1.0 / z**2, rel=1e-12)

    def test_large_z_expansion(self):
        sample = mp_quantile_sample(4000, 0.5, 1.0, mp_cdf)
        for z in (10.0, 20.0, 40.0):
            # D(z) = z^-2 (1 + O(z^-2)) with the coefficient set by the mean
            assert abs(d_transform(sample, z, 0.5) * z * z - 1.0) < 4.0 / z**2

    def test_strictly_decreasing(self):
        sample = mp_quantile_sample(1000, 0.3, 1.0, mp_cdf)
        zs = np.linspace(math.sqrt(sample.max()) * 1.01, 10.0, 200)
        vals = [d_transform(sample, z, 0.3) for z in zs]
        assert np.all(np.diff(vals) < 0)

    def test_rejects_z_in_support(self):
        sample = mp_quantile_sample(100, 0.5, 1.0, mp_cdf)
        with pytest.raises(ParameterError):
            d_transform(sample, math.sqrt(sample.max()) * 0.99, 0.5)


class TestOutlierFromDTransform:
    def test_matches_covariant_closed_form_on_exact_bulk(self):
        # quantile-discretized MP bulk: no sampling noise in the oracle
        gamma, theta1, alpha = 0.1, 1.0, 1.0
        sample = mp_quantile_sample(4000, gamma, theta1, mp_cdf)
        got = outlier_from_d_transform(sample, alpha, gamma)
        want = bbp_prediction(tp(theta1, 0.0, alpha), 1.0, gamma, 1.0).predicted_lambda1_covariant
        assert got == pytest.approx(want, rel=0.01)

    def test_weak_spike_returns_bulk(self):
        sample = mp_quantile_sample(2000, 0.1, 1.0, mp_cdf)
        assert outlier_from_d_transform(sample, 1e-6, 0.1) is None

    def test_monotone_in_spike_strength(self):
        sample = mp_quantile_sample(2000, 0.2, 1.0, mp_cdf)
        preds = []
        for alpha in np.linspace(0.5, 4.0, 8):
            v = outlier_from_d_transform(sample, alpha, 0.2)
            if v is not None:
                preds.append(v)
        assert len(preds) >= 6
        assert np.all(np.diff(preds) > 0)

    def test_square_convention_toggle(self):
        sample = mp_quantile_sample(1000, 0.1, 1.0, mp_cdf)
        sq = outlier_from_d_transform(sample, 1.0, 0.1, square_convention=True)
        plain = outlier_from_d_transform(sample, 1.0, 0.1, square_convention=False)
        assert sq == pytest.approx(plain**2, rel=1e-10)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ParameterError):
            outlier_from_d_transform(np.ones(10), 0.0, 0.5)


class TestClassifyOutliers:
    def test_no_outliers_below_edge(self):
        res = full_spectrum(
            linear_surrogate_factor(
                Shape(100, 500, 1000), tp(1.0, 0.0, 0.0), 0.0, 0.0, "linear-plain", seed=3
            )
        )
        hi = mp_edges(0.5, 1.0)[1]
        assert classify_outliers(res, hi).size == 0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_planted_spike_at_twice_the_edge(self, seed):
        # solve (1+a)(gamma+a)/a = 2 (1+sqrt(gamma))^2 for the spike strength
        gamma, theta1, theta3, psi = 0.5, 1.0, 0.5, 1.0
        target = 2.0 * (1 + math.sqrt(gamma)) ** 2
        b = target - 1.0 - gamma
        alpha = (b + math.sqrt(b * b - 4 * gamma)) / 2.0
        kappa = alpha * psi / theta3
        shape = Shape(n0=1000, n1=1000, m=2000)
        fac = linear_surrogate_factor(
            shape, tp(theta1, 0.0, theta3), kappa, 0.0, "info-plus-noise-j", seed=seed
        )
        res = full_spectrum(fac)
        outliers = classify_outliers(res, mp_edges(gamma, theta1)[1])
        assert outliers.size == 1
        assert outliers[0] == pytest.approx(target, rel=0.1)

    def test_two_outliers_in_wide_architecture(self):
        # phi = 0.07, psi = 1, gaussian W (excess 2), half-and-half mixture X
        # (excess 1), centered square activation: both spike channels are
        # supercritical, so two eigenvalues should separate in >= 90% of trials
        shape = Shape(n0=2000, n1=2000, m=round(2000 / 0.07))
        act = even_centered_monomial(1, normalize=True)
        hi = mp_edges(shape.gamma, 1.0)[1]
        hits = 0
        trials = 50
        for t in range(trials):
            fac = conjugate_kernel_factor(
                shape, gaussian(), mixture(0.5), act, seed=777, trial=t, dtype=np.float32
            )
            res = full_spectrum(fac)
            if classify_outliers(res, hi).size == 2:
                hits += 1
        assert hits >= 0.9 * trials, f"two outliers in only {hits}/{trials} trials"

    def test_needs_n1_for_bare_arrays(self):
        with pytest.raises(ParameterError):
            classify_outliers(np.ones(5), 1.0)
        assert classify_outliers(np.ones(5), 1.0, n1=1000).size == 0


class TestWignerCrossCheck:
    def test_unit_scale_values(self):
        assert wigner_rho(1.0, 1.0) == pytest.approx(2.0)
        # rho(sqrt(2))^2 = 4.5 = (1+2)^2/2
        assert wigner_rho(1.0, math.sqrt(2.0)) ** 2 == pytest.approx(4.5, rel=1e-12)

    def test_identity_holds_only_at_unit_scale(self):
        assert wigner_identity_residual(1.0, 1.7) == pytest.approx(0.0, abs=1e-12)
        assert abs(wigner_identity_residual(2.0, 2.0)) > 0.5

    def test_rejects_nonpositive_argument(self):
        with pytest.raises(ParameterError):
            wigner_rho(1.0, 0.0)
