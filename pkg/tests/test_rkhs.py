import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from periodic_recon.errors import (
    DegenerateMeasurementsError,
    InvalidInputError,
    InvalidParameterError,
    NotAdmissibleError,
)
from periodic_recon.rkhs import (
    MeasurementSet,
    assemble_system,
    build_kernel,
    inner_product_HL,
    kernel_signal,
    kernel_value,
    rkhs_admissible,
)
from periodic_recon.spectral import PeriodicSignal, dirac_comb, evaluate, parse_operator

from conftest import TABLE_OPERATORS, random_real_signal


def derivative_kernel_exact(t):
    """Closed form of the D kernel with gamma = 1: 1 + (t^2 - t + 1/6) / 2 on [0, 1)."""
    t = np.mod(t, 1.0)
    return 1.0 + 0.5 * (t * t - t + 1.0 / 6.0)


class TestAdmissibility:
    def test_derivative(self):
        ok, partial = rkhs_admissible(parse_operator("D", 1000), 1000)
        _, doubled = rkhs_admissible(parse_operator("D", 2000), 2000)
        assert ok
        assert (doubled - partial) / doubled < 1e-3

    def test_identity_not_admissible(self):
        ok, partial = rkhs_admissible(parse_operator("I", 100), 100)
        assert not ok
        assert partial == pytest.approx(201.0)

    def test_oscillator(self):
        ok, partial = rkhs_admissible(parse_operator("D2+4pi2I", 500), 500)
        _, doubled = rkhs_admissible(parse_operator("D2+4pi2I", 1000), 1000)
        assert ok and (doubled - partial) / doubled < 1e-3


class TestKernel:
    def test_derivative_coefficients(self):
        k = build_kernel(parse_operator("D", 10), 1.0, 10)
        assert k.coeffs[10] == 1.0
        assert k.coeffs[11] == pytest.approx(1 / (4 * math.pi**2))
        assert k.coeffs[11] == pytest.approx(2.5330e-2, rel=1e-4)

    def test_trivial_null_space_ignores_gamma(self):
        for g in (0.1, 1.0, 7.0):
            assert build_kernel(parse_operator("D+I", 5), g, 5).coeffs[5] == 1.0

    def test_null_space_gets_inverse_gamma_squared(self):
        k = build_kernel(parse_operator("D2+4pi2I", 5), 2.0, 5)
        assert k.coeffs[4] == k.coeffs[6] == 0.25

    @pytest.mark.parametrize("gamma", [0.0, -1.0, float("nan"), float("inf")])
    def test_bad_gamma(self, gamma):
        with pytest.raises(InvalidParameterError):
            build_kernel(parse_operator("D", 5), gamma, 5)

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_positive_even(self, name):
        h = build_kernel(parse_operator(name, 100), 0.3, 100).coeffs
        assert np.all(h > 0)
        np.testing.assert_array_equal(h, h[::-1])

    def test_value_at_zero(self):
        k = build_kernel(parse_operator("D", 50), 1.0, 50)
        assert kernel_value(k, 0.0) == pytest.approx(np.sum(k.coeffs))

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_even_and_periodic(self, name, rng):
        k = build_kernel(parse_operator(name, 300), 1.0, 300)
        t = rng.random(20)
        np.testing.assert_allclose(kernel_value(k, t), kernel_value(k, 1 - t), atol=1e-9)

    def test_half_period_against_high_band_reference(self):
        ref = kernel_value(build_kernel(parse_operator("D", 100_000), 1.0, 100_000), 0.5)
        assert ref == pytest.approx(23 / 24, abs=1e-9)
        assert kernel_value(build_kernel(parse_operator("D", 1000), 1.0, 1000), 0.5) == pytest.approx(ref, rel=1e-6)

    def test_closed_form_profile(self):
        k = build_kernel(parse_operator("D", 1000), 1.0, 1000)
        t = np.linspace(0, 1, 33, endpoint=False)
        # the truncated tail is bounded by 2 * sum_{k>1000} 1/(4 pi^2 k^2) ~ 5e-5
        np.testing.assert_allclose(kernel_value(k, t), derivative_kernel_exact(t), atol=6e-5)

    def test_shifted_kernel_signal(self):
        k = build_kernel(parse_operator("D", 40), 1.0, 40)
        s = kernel_signal(k, 0.3)
        assert s.real
        assert evaluate(s, 0.45).real == pytest.approx(kernel_value(k, 0.15))


class TestMeasurementSet:
    def test_time_validation(self):
        with pytest.raises(InvalidInputError):
            MeasurementSet.time_samples([0.1, 1.0])
        with pytest.raises(InvalidInputError):
            MeasurementSet.time_samples([-0.1])
        with pytest.raises(InvalidInputError):
            MeasurementSet.time_samples([0.2, 0.2])
        with pytest.raises(InvalidInputError):
            MeasurementSet.time_samples([])

    def test_fourier_validation(self):
        with pytest.raises(InvalidInputError):
            MeasurementSet.fourier_samples([1, 2, -1])
        with pytest.raises(InvalidInputError):
            MeasurementSet.fourier_samples([1, -1, 1])
        assert MeasurementSet.fourier_samples([0]).is_real
        assert not MeasurementSet.fourier_samples([-1, 1]).is_real

    def test_fourier_outside_band(self):
        with pytest.raises(InvalidInputError):
            MeasurementSet.fourier_samples([-5, 5]).functional_coeffs(4)

    def test_apply_time(self, rng):
        f = random_real_signal(rng, 20)
        meas = MeasurementSet.time_samples([0.1, 0.7])
        np.testing.assert_allclose(meas.apply(f), evaluate(f, np.array([0.1, 0.7])).real, atol=1e-12)

    def test_apply_fourier(self, rng):
        f = random_real_signal(rng, 20)
        meas = MeasurementSet.fourier_samples([-3, 3])
        np.testing.assert_allclose(meas.apply(f), [f.coef(-3), f.coef(3)])

    def test_config_round_trip(self, tmp_path):
        for meas in (MeasurementSet.time_samples([0.0, 0.25]), MeasurementSet.fourier_samples([-1, 0, 1])):
            path = tmp_path / "m.json"
            path.write_text(json.dumps(meas.to_config()))
            back = MeasurementSet.load(path)
            assert back.to_config() == meas.to_config()

    def test_generic_config(self):
        cfg = {"kind": "generic", "n_coef": 4,
               "signals": [{"k": [-1, 1], "re": [0.5, 0.5], "im": [0.0, 0.0]}, {"k": [0], "re": [1.0]}]}
        meas = MeasurementSet.from_config(cfg)
        assert meas.size == 2 and meas.is_real
        assert MeasurementSet.from_config(meas.to_config()).to_config() == meas.to_config()

    def test_unknown_kind(self):
        with pytest.raises(InvalidInputError):
            MeasurementSet.from_config({"kind": "wavelet"})


class TestAssembly:
    def test_fourier_gram_is_diagonal(self):
        op = parse_operator("D+I", 30)
        k = build_kernel(op, 1.0, 30)
        sys = assemble_system(k, MeasurementSet.fourier_samples([-2, -1, 0, 1, 2]))
        np.testing.assert_array_equal(sys.gram, np.diag(np.diag(sys.gram)))
        np.testing.assert_allclose(np.diag(sys.gram), k.coeffs[28:33])

    def test_fourier_p_matrix(self):
        op = parse_operator("D2+4pi2I", 30)
        sys = assemble_system(build_kernel(op, 1.0, 30), MeasurementSet.fourier_samples([-1, 0, 1]))
        np.testing.assert_array_equal(sys.p_matrix, [[1, 0], [0, 0], [0, 1]])

    def test_single_time_sample(self):
        k = build_kernel(parse_operator("D", 100), 1.0, 100)
        sys = assemble_system(k, MeasurementSet.time_samples([0.42]))
        np.testing.assert_allclose(sys.gram, [[kernel_value(k, 0.0)]], rtol=1e-13)

    def test_time_gram_is_kernel_of_differences(self, rng):
        k = build_kernel(parse_operator("D2", 200), 0.7, 200)
        t = np.sort(rng.random(6))
        sys = assemble_system(k, MeasurementSet.time_samples(t))
        assert sys.gram.dtype == float
        np.testing.assert_allclose(sys.gram, kernel_value(k, t[:, None] - t[None, :]), rtol=1e-12, atol=1e-14)

    def test_time_p_matrix(self):
        op = parse_operator("D2+4pi2I", 50)
        t = np.array([0.1, 0.35, 0.8])
        sys = assemble_system(build_kernel(op, 1.0, 50), MeasurementSet.time_samples(t))
        np.testing.assert_allclose(sys.p_matrix, np.exp(2j * np.pi * np.outer(t, [-1, 1])))

    def test_gram_against_double_quadrature(self):
        # combs of band limit K and a kernel of the same band: the integrand is a
        # trigonometric polynomial, so the uniform-grid rule is exact
        K, points = 12, 64
        k = build_kernel(parse_operator("D", K), 1.0, K)
        t_m = np.array([0.05, 0.4, 0.77])
        sys = assemble_system(k, MeasurementSet.time_samples(t_m))
        grid = np.arange(points) / points
        combs = np.array([evaluate(dirac_comb(K, tm), grid).real for tm in t_m])
        kern = kernel_value(k, grid[:, None] - grid[None, :])
        quad = combs @ kern @ combs.T / points**2
        np.testing.assert_allclose(sys.gram, quad, atol=1e-6)

    def test_not_admissible(self):
        op = parse_operator("I", 20)
        with pytest.raises(NotAdmissibleError):
            assemble_system(build_kernel(op, 1.0, 20), MeasurementSet.time_samples([0.1, 0.2]))

    def test_degenerate_null_space(self):
        op = parse_operator("D2+4pi2I", 20)
        with pytest.raises(DegenerateMeasurementsError):
            assemble_system(build_kernel(op, 1.0, 20), MeasurementSet.time_samples([0.0, 0.5]))
        with pytest.raises(DegenerateMeasurementsError):
            assemble_system(build_kernel(op, 1.0, 20), MeasurementSet.fourier_samples([-2, 0, 2]))

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_gram_psd(self, name, rng):
        op = parse_operator(name, 200)
        for gamma in (1e-3, 1.0, 1e3):
            sys = assemble_system(build_kernel(op, gamma, 200), MeasurementSet.time_samples(rng.random(12)))
            G = sys.gram
            np.testing.assert_array_equal(G, G.T)
            assert np.min(np.linalg.eigvalsh(G)) >= -1e-10 * np.linalg.norm(G)

    def test_gram_consistency_generic(self, rng):
        K = 25
        op = parse_operator("D2", K)
        nus = [PeriodicSignal(rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)) for _ in range(4)]
        sys = assemble_system(build_kernel(op, 0.5, K), MeasurementSet.generic(nus))
        G = sys.gram
        np.testing.assert_allclose(G, G.conj().T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(G)) >= -1e-10 * np.linalg.norm(G)
        for i, nu_i in enumerate(nus):
            for j, phi_j in enumerate(sys.basis):
                # entry (i, j) is functional i applied to basis function j
                assert G[i, j] == pytest.approx(np.sum(phi_j.coeffs * np.conj(nu_i.coeffs)), abs=1e-10)

    def test_gram_consistency_time(self, rng):
        K = 60
        sys = assemble_system(build_kernel(parse_operator("D", K), 1.0, K), MeasurementSet.time_samples(rng.random(5)))
        nu = sys.functionals
        for i in range(5):
            for j, phi in enumerate(sys.basis):
                assert sys.gram[i, j] == pytest.approx(np.sum(nu[i] * np.conj(phi.coeffs)).real, abs=1e-10)

    def test_with_gamma_matches_fresh_assembly(self, rng):
        op = parse_operator("D2+4pi2I", 100)
        meas = MeasurementSet.time_samples(rng.random(7))
        base = assemble_system(build_kernel(op, 1.0, 100), meas)
        for gamma in (1e-2, 3.0, 1e4):
            fresh = assemble_system(build_kernel(op, gamma, 100), meas)
            np.testing.assert_allclose(base.with_gamma(gamma).gram, fresh.gram, rtol=1e-12, atol=1e-14)


class TestInnerProduct:
    def test_null_atom(self):
        op = parse_operator("D", 8)
        e0 = PeriodicSignal.atom(0, 8)
        assert inner_product_HL(op, 3.0, e0, e0) == pytest.approx(9.0)

    def test_first_harmonic(self):
        e1 = PeriodicSignal.atom(1, 8)
        assert inner_product_HL(parse_operator("D", 8), 1.0, e1, e1) == pytest.approx(4 * math.pi**2)

    def test_zero(self):
        z = PeriodicSignal.zeros(8)
        assert inner_product_HL(parse_operator("D", 8), 1.0, z, z) == 0

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_positive_definite(self, name, rng):
        op = parse_operator(name, 30)
        for _ in range(5):
            f = random_real_signal(rng, 30)
            v = inner_product_HL(op, 0.5, f, f)
            assert v.real > 0 and abs(v.imag) < 1e-12 * v.real

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_reproducing_property(self, name, rng):
        K = 300
        op = parse_operator(name, K)
        k = build_kernel(op, 1.0, K)
        for _ in range(20):
            f = random_real_signal(rng, K, decay=1.5)
            t0 = rng.random()
            lhs = inner_product_HL(op, 1.0, f, kernel_signal(k, t0))
            assert abs(lhs - evaluate(f, t0)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(
    name=st.sampled_from(TABLE_OPERATORS),
    gamma=st.floats(1e-3, 1e3),
    locations=st.lists(st.floats(0, 0.999), min_size=2, max_size=8, unique=True),
)
def test_gram_psd_property(name, gamma, locations):
    locations = sorted(set(round(t, 6) for t in locations))
    if len(locations) < 2 or min(np.diff(locations)) < 1e-4:
        return
    op = parse_operator(name, 100)
    try:
        sys = assemble_system(build_kernel(op, gamma, 100), MeasurementSet.time_samples(locations))
    except DegenerateMeasurementsError:
        return
    G = sys.gram
    assert np.min(np.linalg.eigvalsh(G)) >= -1e-10 * np.linalg.norm(G)
