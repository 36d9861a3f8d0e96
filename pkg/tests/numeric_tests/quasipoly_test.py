import cmath
import math

import numpy as np
import pytest

from quasiperiod.errors import ConstantDerivative, InvalidObject, ParseError
from quasiperiod.utils.quasipoly import (
    PeriodicProductForm,
    Quasipolynomial,
    StripWindow,
    derivative,
    evaluate,
    evaluate_product,
    expand_product,
    log_evaluate,
    reflect,
    relative_residual,
    spectrum_bounds,
    sup_diff,
    translate,
    truncate_series,
    zero_strip,
)

TWO_COSH = Quasipolynomial(((1.0, 1), (-1.0, 1)))

EVALUATIONS = [
    (TWO_COSH, 0j, 2),
    (TWO_COSH, 1j * math.pi / 2, 0),
    (Quasipolynomial(((2.0, 1 + 1j), (0.0, -3))), 1 + 0j, (1 + 1j) * math.e**2 - 3),
]

DERIVATIVES = [
    (TWO_COSH, ((1.0, 1), (-1.0, -1))),
    (Quasipolynomial(((2.0, 3), (0.0, 7))), ((2.0, 6),)),
]

EXPANSIONS = [
    (PeriodicProductForm(2, 0.0, 1.0, (0j,)), ((1.0, 1), (-1.0, 1))),
    (PeriodicProductForm(1, 0.0, 1.0, (0j, 0j)), ((2.0, 0.25), (0.0, 0.5), (-2.0, 0.25))),
]


@pytest.mark.parametrize("qp,z,expected", EVALUATIONS)
def test_evaluate(qp, z, expected):
    assert abs(evaluate(qp, z) - expected) < 1e-12


def test_evaluate_vectorized():
    zs = np.array([0, 1j * math.pi, 0.3 - 2j])
    np.testing.assert_allclose(evaluate(TWO_COSH, zs), 2 * np.cosh(zs), rtol=1e-14)


def test_log_evaluate_survives_overflow():
    value = log_evaluate(TWO_COSH, 1000 + 0j)
    assert value.real == pytest.approx(1000, rel=1e-12)


@pytest.mark.parametrize("qp,expected", DERIVATIVES)
def test_derivative(qp, expected):
    assert derivative(qp) == Quasipolynomial(expected)


def test_derivative_of_constant():
    with pytest.raises(ConstantDerivative):
        derivative(Quasipolynomial(((0.0, 5),)))


@pytest.mark.parametrize("form,expected", EXPANSIONS)
def test_expand_product(form, expected):
    qp = expand_product(form)
    ref = Quasipolynomial(expected)
    np.testing.assert_allclose(qp.lambdas, ref.lambdas)
    np.testing.assert_allclose(qp.coeffs, ref.coeffs, atol=1e-15)


def test_expand_product_matches_direct_product():
    form = PeriodicProductForm(4, 1.0, 2.0, (1j * math.pi / 4, 0j))
    qp = expand_product(form)
    assert len(qp) <= 6
    rng = np.random.default_rng(7)
    zs = rng.uniform(-1, 1, 100) + 1j * rng.uniform(-3, 3, 100)
    direct = evaluate_product(form, zs)
    rel = np.abs(evaluate(qp, zs) - direct) / np.abs(direct)
    assert rel.max() < 1e-12


def test_canonical_offsets():
    form = PeriodicProductForm(1, 0.0, 1.0, (1.5j * math.pi,)).canonical()
    assert form.offsets[0] == pytest.approx(0.5j * math.pi)
    assert form.c == -1
    z = 0.2 + 0.7j
    assert evaluate_product(form, z) == pytest.approx(cmath.cosh(z + 1.5j * math.pi))


def test_normalized_absorbs_negative_omega():
    form = PeriodicProductForm.normalized(1, 0.0, -2.0, (0.5 + 0j,))
    assert form.omega == 2.0
    assert evaluate_product(form, 0.3j) == pytest.approx(cmath.cosh(-0.6j + 0.5))


def test_translate():
    assert translate(TWO_COSH, 0.0) == TWO_COSH
    full = translate(TWO_COSH, 2 * math.pi)
    np.testing.assert_allclose(full.coeffs, TWO_COSH.coeffs, atol=1e-15)
    half = translate(TWO_COSH, math.pi)
    np.testing.assert_allclose(half.coeffs, [-1, -1], atol=1e-15)


def test_translate_shifts_argument():
    qp = Quasipolynomial(((2.0, 1 + 1j), (0.5, -3), (-1.0, 2j)))
    z, tau = 0.4 - 1.1j, 2.3
    assert evaluate(translate(qp, tau), z) == pytest.approx(evaluate(qp, z + 1j * tau), rel=1e-13)


def test_relative_residual():
    assert relative_residual(TWO_COSH, 0j) == pytest.approx(1.0)
    assert relative_residual(TWO_COSH, 0.5j * math.pi) < 1e-15
    far = Quasipolynomial(((1.0, 1), (-1.0, math.exp(60))))
    zero = 30 + 0.5j * math.pi
    assert relative_residual(far, zero) < 1e-13
    np.testing.assert_allclose(relative_residual(TWO_COSH, np.array([0j, 2.0])), [1.0, 1.0])


def test_reflect_and_spectrum():
    qp = Quasipolynomial(((2.0, 1), (0.5, -3)))
    assert spectrum_bounds(qp) == (2.0, 0.5)
    assert spectrum_bounds(reflect(qp)) == (-0.5, -2.0)
    assert evaluate(reflect(qp), 0.3 + 0.2j) == pytest.approx(evaluate(qp, -0.3 - 0.2j))


def test_sup_diff():
    window = StripWindow(-1, 1, 0, 5)
    assert sup_diff(TWO_COSH, TWO_COSH, window) == 0
    f = Quasipolynomial(((1.0, 1),))
    g = Quasipolynomial(((1.0, 1), (0.0, 1e-3)))
    assert sup_diff(f, g, window) == pytest.approx(1e-3, rel=1e-9)
    assert sup_diff(f, g, window, certified=True) >= sup_diff(f, g, window)


def test_zero_strip():
    left, right = zero_strip(TWO_COSH)
    assert left == pytest.approx(0, abs=1e-12)
    assert right == pytest.approx(0, abs=1e-12)
    assert zero_strip(Quasipolynomial(((1.0, 1),))) is None

    qp = Quasipolynomial(((1.0, 1), (0.0, 3), (-2.0, 0.5)))
    left, right = zero_strip(qp)
    assert left < right
    # the dominant terms outweigh the rest outside the strip
    for x in (right + 0.1, left - 0.1):
        z = np.array([x + 1j * y for y in np.linspace(0, 2 * math.pi, 50)])
        assert np.abs(evaluate(qp, z)).min() > 0


def test_truncate_series():
    window = StripWindow(-1, 1, 0, 1)
    qp, tail = truncate_series([2.0, 1.0, 0.5, 0.0], [1, 1e-9, 1e-9, 1], 1e-6, window)
    assert len(qp) == 2
    assert spectrum_bounds(qp) == (2.0, 0.0)
    assert tail == pytest.approx(1e-9 * (math.e + math.exp(0.5)))
    with pytest.raises(InvalidObject):
        truncate_series([1.0, 0.0], [0, 1], 1e-6, window)


def test_quasipolynomial_invariants():
    with pytest.raises(InvalidObject):
        Quasipolynomial(())
    with pytest.raises(InvalidObject):
        Quasipolynomial(((1.0, 1), (1.0, 2)))
    combined = Quasipolynomial.from_terms([(1.0, 1), (1.0, 2), (0.0, 1), (0.0, -1)])
    assert combined == Quasipolynomial(((1.0, 3),))


def test_parse_errors_name_the_field():
    with pytest.raises(ParseError) as info:
        Quasipolynomial.from_dict({"terms": [{"lambda": 1, "re": 1, "im": 0}, {"re": 1, "im": 0}]})
    assert info.value.field_path == "terms[1].lambda"
    with pytest.raises(ParseError):
        StripWindow.from_cli("0,1,2")


def test_window_membership():
    window = StripWindow(-1, 1, 0, 10)
    assert list(window.contains(np.array([0j, 1 + 1j, 10j, -1j]))) == [True, False, True, False]
    assert window.contains_window(StripWindow(-0.5, 0.5, 2, 8), re_margin=0.5, im_margin=2)
    assert not window.contains_window(StripWindow(-0.5, 0.5, 2, 8), re_margin=0.6)
