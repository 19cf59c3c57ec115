import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from periodic_recon.errors import InvalidOperatorError
from periodic_recon.spectral import (
    PeriodicSignal,
    PolynomialOperator,
    apply_operator,
    convolve,
    custom_operator,
    dirac_comb,
    evaluate,
    frequencies,
    make_operator,
    parse_operator,
    parseval_energy,
    project_null_space,
)

from conftest import TABLE_OPERATORS, random_real_signal

TWO_PI = 2 * math.pi


def quadrature_energy(op, f, points):
    """Mean of ``|L f|^2`` on a uniform grid; exact for band-limited integrands."""
    t = np.arange(points) / points
    values = evaluate(apply_operator(op, f), t)
    return float(np.mean(np.abs(values) ** 2))


class TestMakeOperator:
    def test_derivative_response(self):
        op = make_operator(PolynomialOperator((0.0, 1.0)), 10)
        assert op.response(np.array([1]))[0] == pytest.approx(1j * TWO_PI)

    def test_first_order_invertible(self):
        op = make_operator(PolynomialOperator((1.0, 1.0)), 10)
        assert op.response(np.array([0]))[0] == 1.0
        assert op.null_space == ()

    def test_harmonic_oscillator_null_space(self):
        op = make_operator(PolynomialOperator((4 * math.pi**2, 0.0, 1.0)), 10)
        assert op.null_space == (-1, 1)
        assert np.all(op.frequency_response(10)[[9, 11]] == 0)

    def test_second_derivative_at_two(self):
        op = parse_operator("D2", 10)
        f = PeriodicSignal.atom(2, 10)
        assert apply_operator(op, f).coef(2) == pytest.approx(-16 * math.pi**2)

    @pytest.mark.parametrize(
        "name, null",
        [("D", (0,)), ("D+I", ()), ("D2", (0,)), ("D2+4pi2I", (-1, 1)), ("I", ())],
    )
    def test_named_null_spaces(self, name, null):
        assert parse_operator(name, 1000).null_space == null

    def test_all_zero_rejected(self):
        with pytest.raises(InvalidOperatorError):
            make_operator(PolynomialOperator((0.0, 0.0)), 10)

    def test_empty_rejected(self):
        with pytest.raises(InvalidOperatorError):
            make_operator(PolynomialOperator(()), 10)

    def test_unknown_name(self):
        with pytest.raises(InvalidOperatorError):
            parse_operator("D3", 10)

    def test_poly_grammar(self):
        op = parse_operator("poly:1,0,1", 10)
        assert op.degree == 2
        assert op.response(np.array([1]))[0] == pytest.approx(1 - TWO_PI**2)

    def test_bad_poly(self):
        with pytest.raises(InvalidOperatorError):
            parse_operator("poly:1,x", 10)

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_response_hermitian(self, name):
        op = parse_operator(name, 50)
        r = op.frequency_response(50)
        np.testing.assert_array_equal(r, np.conj(r[::-1]))

    def test_custom_operator_checks(self):
        frac = custom_operator(lambda k: np.abs(TWO_PI * np.asarray(k)) ** 1.5 + 0j, (0,), "frac")
        assert frac.degree is None and frac.null_space == (0,)
        with pytest.raises(InvalidOperatorError):
            custom_operator(lambda k: 1j * np.asarray(k, float) + 1.0, (0,))
        with pytest.raises(InvalidOperatorError):
            custom_operator(lambda k: np.asarray(k, float) + 0j, (1,))


class TestSignals:
    def test_layout(self):
        f = PeriodicSignal.zeros(5)
        assert f.coeffs.size == 11
        np.testing.assert_array_equal(f.freqs, np.arange(-5, 6))

    def test_real_flag_checks_symmetry(self):
        c = np.zeros(5, dtype=complex)
        c[3] = 1.0
        with pytest.raises(ValueError):
            PeriodicSignal(c, real=True)

    def test_immutable(self):
        f = PeriodicSignal.zeros(3)
        with pytest.raises(ValueError):
            f.coeffs[0] = 1.0

    def test_constant_evaluates_to_one(self):
        f = PeriodicSignal.atom(0, 4)
        np.testing.assert_allclose(evaluate(f, np.array([0.0, 0.3, 0.9])), 1.0)

    def test_cosine_quarter_period(self):
        f = PeriodicSignal.from_mapping({1: 0.5, -1: 0.5}, 4, real=True)
        assert abs(evaluate(f, 0.25)) < 1e-15

    def test_real_sum_at_zero(self, rng):
        f = random_real_signal(rng, 30)
        v = evaluate(f, 0.0)
        assert v.real == pytest.approx(np.sum(f.coeffs).real)
        assert abs(v.imag) <= 1e-9

    def test_real_signal_real_everywhere(self, rng):
        f = random_real_signal(rng, 200)
        values = evaluate(f, rng.random(100))
        assert np.max(np.abs(values.imag)) <= 1e-9

    def test_arithmetic(self, rng):
        f, g = random_real_signal(rng, 8), random_real_signal(rng, 8)
        np.testing.assert_allclose((f + g - g).coeffs, f.coeffs)
        np.testing.assert_allclose((f * 2.0).coeffs, 2 * f.coeffs)
        np.testing.assert_allclose((-f).coeffs, -f.coeffs)


class TestOperations:
    def test_derivative_kills_constants(self):
        out = apply_operator(parse_operator("D", 5), PeriodicSignal.atom(0, 5))
        assert np.all(out.coeffs == 0)

    def test_eigenfunction(self):
        out = apply_operator(parse_operator("D+I", 5), PeriodicSignal.atom(1, 5))
        assert out.coef(1) == pytest.approx(1 + 1j * TWO_PI)

    def test_comb_is_identity(self, rng):
        f = random_real_signal(rng, 20)
        np.testing.assert_array_equal(convolve(f, dirac_comb(20)).coeffs, f.coeffs)

    def test_disjoint_spectra(self):
        out = convolve(PeriodicSignal.atom(1, 4), PeriodicSignal.atom(2, 4))
        assert np.all(out.coeffs == 0)

    def test_atom_idempotent(self):
        e1 = PeriodicSignal.atom(1, 4)
        np.testing.assert_array_equal(convolve(e1, e1).coeffs, e1.coeffs)

    def test_projection_derivative(self, rng):
        f = random_real_signal(rng, 10)
        p = project_null_space(parse_operator("D", 10), f)
        assert p.coef(0) == f.coef(0)
        assert np.count_nonzero(p.coeffs) == 1

    def test_projection_trivial(self, rng):
        p = project_null_space(parse_operator("D+I", 10), random_real_signal(rng, 10))
        assert np.all(p.coeffs == 0)

    def test_projection_oscillator(self):
        f = PeriodicSignal.from_mapping({1: 1.0, -1: 1.0, 0: 5.0}, 6, real=True)
        p = project_null_space(parse_operator("D2+4pi2I", 6), f)
        expected = PeriodicSignal.from_mapping({1: 1.0, -1: 1.0}, 6)
        np.testing.assert_array_equal(p.coeffs, expected.coeffs)

    def test_energy_of_null_signal(self):
        assert parseval_energy(parse_operator("D", 4), PeriodicSignal.atom(0, 4)) == 0.0

    def test_energy_of_first_harmonic(self):
        e = parseval_energy(parse_operator("D", 4), PeriodicSignal.atom(1, 4))
        assert e == pytest.approx(4 * math.pi**2)

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_parseval_against_quadrature(self, name, rng):
        K = 40
        op = parse_operator(name, K)
        for _ in range(3):
            f = random_real_signal(rng, K)
            assert parseval_energy(op, f) == pytest.approx(quadrature_energy(op, f, 8 * K), rel=1e-8)

    @pytest.mark.parametrize("name", TABLE_OPERATORS)
    def test_hermitian_symmetry_preserved(self, name, rng):
        op = parse_operator(name, 12)
        f, g = random_real_signal(rng, 12), random_real_signal(rng, 12)
        for out in (apply_operator(op, f), convolve(f, g), project_null_space(op, f)):
            assert out.real and out.is_hermitian(tol=0.0)


@settings(max_examples=40, deadline=None)
@given(
    coeffs=st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=4).filter(
        lambda c: any(abs(x) > 1e-3 for x in c)
    ),
    seed=st.integers(0, 2**32 - 1),
)
def test_polynomial_operators_are_consistent(coeffs, seed):
    K = 16
    op = make_operator(PolynomialOperator(tuple(coeffs)), K)
    r = op.frequency_response(K)
    np.testing.assert_allclose(r, np.conj(r[::-1]), atol=1e-9 * max(1.0, np.max(np.abs(r))))
    assert set(op.null_space) == {-k for k in op.null_space}
    f = random_real_signal(np.random.default_rng(seed), K)
    assert parseval_energy(op, f) == pytest.approx(quadrature_energy(op, f, 8 * K), rel=1e-8, abs=1e-12)


def test_frequencies():
    np.testing.assert_array_equal(frequencies(2), [-2, -1, 0, 1, 2])
