import math

import numpy as np
import pytest

from cklab import (
    FactorMatrix,
    ParameterError,
    Shape,
    companion_spectrum,
    conjugate_kernel_factor,
    cos_family,
    empirical_stieltjes,
    full_spectrum,
    gaussian,
    histogram,
    linear_surrogate_factor,
    rademacher,
    ridge_loss_spectral,
    spectrum_to_csv,
    spectrum_to_json,
    top_eigenvalues,
)
from cklab.activations import ThetaParams
from cklab.theory import mp_density, mp_edges
from oracles import charpoly_eigenvalues, mp_stieltjes


def make_factor(entries, seed=0, tag="test"):
    entries = np.asarray(entries, dtype=float)
    n1, m = entries.shape
    return FactorMatrix(entries, tag, seed, Shape(2, n1, m))


class TestFullSpectrum:
    def test_zero_factor(self):
        res = full_spectrum(make_factor(np.zeros((5, 7))))
        assert np.array_equal(res.eigenvalues, np.zeros(5))

    def test_identity_factor(self):
        m = 6
        res = full_spectrum(make_factor(math.sqrt(m) * np.eye(m)))
        assert np.allclose(res.eigenvalues, 1.0, atol=1e-12)

    def test_matches_characteristic_polynomial_oracle(self):
        # oracle on the 4x4 companion side: all roots simple, so the
        # root-finding is well conditioned; the 6x6 side adds two exact zeros
        rng = np.random.default_rng(123)
        f = rng.normal(size=(6, 4))
        res = full_spectrum(make_factor(f))
        oracle = charpoly_eigenvalues((f.T @ f) / 4.0)
        expected = np.sort(np.concatenate([oracle, np.zeros(2)]))[::-1]
        assert np.allclose(res.eigenvalues, expected, atol=1e-8)

    def test_wide_and_tall_agree_on_nonzeros(self):
        rng = np.random.default_rng(5)
        f = rng.normal(size=(8, 5))
        tall = full_spectrum(make_factor(f))
        assert tall.eigenvalues.size == 8
        assert np.allclose(tall.eigenvalues[5:], 0.0, atol=1e-10)
        wide = full_spectrum(make_factor(f.T))
        # same nonzero spectrum up to the 1/m normalization ratio
        assert np.allclose(tall.eigenvalues[:5] * 5.0, wide.eigenvalues * 8.0, atol=1e-8)

    def test_descending_order(self):
        rng = np.random.default_rng(9)
        res = full_spectrum(make_factor(rng.normal(size=(30, 40))))
        assert np.all(np.diff(res.eigenvalues) <= 0)


class TestTopEigenvalues:
    def test_identity_factor(self):
        res = top_eigenvalues(make_factor(2.0 * np.eye(4)), k=1)
        assert res.eigenvalues[0] == pytest.approx(1.0, abs=1e-10)
        assert res.converged

    def test_rank_one_closed_form(self):
        rng = np.random.default_rng(3)
        u, v = rng.normal(size=37), rng.normal(size=53)
        res = top_eigenvalues(make_factor(np.outer(u, v)), k=1, tol=1e-12)
        want = (u @ u) * (v @ v) / 53.0
        assert res.eigenvalues[0] == pytest.approx(want, rel=1e-10)

    def test_agrees_with_full_spectrum_on_random_configs(self):
        rng = np.random.default_rng(2024)
        for trial in range(50):
            n1 = int(rng.integers(5, 501))
            m = int(rng.integers(4, 601))
            k = int(rng.integers(1, 1 + min(4, n1, m)))
            f = rng.normal(size=(n1, m))
            if trial % 3 == 0:
                f[: n1 // 2] *= 0.05  # cluster part of the spectrum
            fac = make_factor(f, seed=trial)
            top = top_eigenvalues(fac, k=k, tol=1e-10)
            ref = full_spectrum(fac).eigenvalues[:k]
            assert top.converged
            assert np.allclose(top.eigenvalues, ref, rtol=1e-8, atol=1e-8 * ref[0])

    def test_iteration_cap_flags_partial_result(self):
        rng = np.random.default_rng(8)
        fac = make_factor(rng.normal(size=(300, 300)))
        res = top_eigenvalues(fac, k=3, tol=1e-14, max_iterations=5)
        assert not res.converged
        assert res.eigenvalues.size == 3

    def test_k_bounds_checked(self):
        fac = make_factor(np.eye(5))
        with pytest.raises(ParameterError):
            top_eigenvalues(fac, k=6)


class TestStieltjes:
    def test_point_mass_at_zero(self):
        res = full_spectrum(make_factor(np.zeros((4, 4))))
        assert empirical_stieltjes(res, 1j) == pytest.approx(1j)

    def test_requires_upper_half_plane(self):
        res = full_spectrum(make_factor(np.eye(3)))
        with pytest.raises(ParameterError):
            empirical_stieltjes(res, 2.0 - 1j)

    def test_herglotz_property(self):
        rng = np.random.default_rng(11)
        res = full_spectrum(make_factor(rng.normal(size=(50, 70))))
        for _ in range(100):
            z = complex(rng.normal(), abs(rng.normal()) + 1e-3)
            assert empirical_stieltjes(res, z).imag > 0

    def test_oracle_self_check_and_sample_agreement(self):
        gamma, theta1 = 0.5, 1.0
        z = 2.0j
        # oracle cross-check: quadratic-branch value vs direct density quadrature
        lo, hi = mp_edges(gamma, theta1)
        xs = np.linspace(lo, hi, 200001)
        quad = np.trapezoid(mp_density(xs, gamma, theta1) / (xs - z), xs)
        closed = mp_stieltjes(z, gamma, theta1)
        assert abs(quad - closed) < 1e-4
        shape = Shape(n0=100, n1=2000, m=4000)
        fac = linear_surrogate_factor(
            shape, ThetaParams(theta1, 0.0, 0.0, 1.0), 0.0, 0.0, "linear-plain", seed=31
        )
        emp = empirical_stieltjes(full_spectrum(fac), z)
        assert abs(emp - closed) < 0.02


class TestRidgeLoss:
    def test_zero_spectrum_normalizes_to_one(self):
        assert ridge_loss_spectral(np.zeros(64), 0.37) == pytest.approx(1.0, rel=1e-14)

    def test_single_resolved_eigenvalue_arithmetic(self):
        gamma = 0.8
        m = 32
        lam = np.full(m, 1e12)
        lam[0] = gamma
        # the resolved eigenvalue contributes gamma^2/(m (2 gamma)^2) = 1/(4m)
        got = ridge_loss_spectral(lam, gamma)
        assert got == pytest.approx(1.0 / (4 * m), rel=1e-6)

    def test_matches_resolvent_derivative_oracle(self):
        rng = np.random.default_rng(7)
        lam = np.abs(rng.normal(size=200)) * 3.0
        gamma = 0.9
        h = 1e-5
        trace = lambda g: np.sum(1.0 / (lam + g))
        derivative = -(trace(gamma + h) - trace(gamma - h)) / (2 * h)
        want = gamma**2 / lam.size * derivative
        got = ridge_loss_spectral(lam, gamma)
        assert got == pytest.approx(want, rel=1e-6)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ParameterError):
            ridge_loss_spectral(np.ones(3), 0.0)
        with pytest.raises(ParameterError):
            ridge_loss_spectral(np.array([-1.0, 1.0]), 0.5)


class TestInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_trace_identity(self, seed):
        shape = Shape(n0=50, n1=40, m=60)
        fac = conjugate_kernel_factor(shape, gaussian(), rademacher(), cos_family(1.0), seed=seed)
        lam = full_spectrum(fac).eigenvalues
        direct = np.sum(fac.entries**2) / shape.m
        assert np.sum(lam) == pytest.approx(direct, rel=1e-8)

    @pytest.mark.parametrize("dims", [(40, 60), (60, 40)])
    def test_companion_spectrum_agreement(self, dims):
        n1, m = dims
        rng = np.random.default_rng(17)
        f = rng.normal(size=(n1, m))
        fac = make_factor(f)
        n_side = full_spectrum(fac)
        comp = companion_spectrum(n_side)
        direct = np.sort(np.linalg.eigvalsh((f.T @ f) / m))[::-1]
        assert comp.size == m
        r = min(n1, m)
        assert np.allclose(comp[:r], direct[:r], atol=1e-8 * max(1.0, direct[0]))


def test_histogram_density_integrates_to_one():
    rng = np.random.default_rng(23)
    vals = rng.normal(size=5000) ** 2
    for bins in ("fd", 40, "60"):
        edges, dens = histogram(vals, bins=bins)
        assert abs(np.sum(dens * np.diff(edges)) - 1.0) < 1e-6


def test_exports_are_deterministic(tmp_path):
    fac = make_factor(np.random.default_rng(2).normal(size=(12, 9)), seed=77)
    res = full_spectrum(fac)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    spectrum_to_csv(res, a)
    spectrum_to_csv(res, b)
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 12
    ja, jb = tmp_path / "a.json", tmp_path / "b.json"
    doc = spectrum_to_json(res, ja)
    spectrum_to_json(res, jb)
    assert ja.read_bytes() == jb.read_bytes()
    assert doc["count"] == 12
    assert doc["shape"]["n1"] == 12
    assert "wall" not in ja.read_text()
