import math

import numpy as np
import pytest

from quasiperiod.errors import EmptyClasses, InvalidObject, MarginViolation, NotAnAlmostPeriod, TooFewElements
from quasiperiod.utils.divisor_ops import (
    Divisor,
    clamped_gamma,
    common_almost_periods,
    difference_set,
    gap_trend,
    is_almost_period,
    lemma1_check,
    lemma2_gap_bound,
    match_translation,
    min_gap,
    pigeonhole_classes,
    scan_almost_periods,
    sum_set,
    translation_defect,
)
from quasiperiod.utils.quasipoly import StripWindow

STRIP = StripWindow(-1, 1, -50, 50)


def cosh_zeros(window: StripWindow, omega: float = 1.0) -> Divisor:
    """Zeros i*pi*(k + 1/2)/omega of cosh(omega z) inside window."""
    k = np.arange(-200, 200)
    return Divisor.from_points(1j * math.pi * (k + 0.5) / omega, window)


PROGRESSION = cosh_zeros(STRIP)
INNER = StripWindow(-0.5, 0.5, -20, 20)

GAMMA_CASES = [
    (3.0, 0.5),
    (0.5, 0.5),
    (0.2, 0.2),
]

LEMMA2_CASES = [
    (10.0, 0.1, [0], 20.0),
    (10.0, 0.1, [-3, 1], 50.0),
    (2.5, 0.01, [2, 0, -1], 10.0),
]


def test_difference_set_of_progression():
    Z = Divisor.from_points([1j * math.pi * (m + 0.5) for m in range(4)], StripWindow(-1, 1, 0, 20))
    diffs = difference_set(Z, Z, 10)
    np.testing.assert_allclose(diffs, 1j * math.pi * np.arange(-3, 4), atol=1e-12)
    assert difference_set(Z, Z, 5).size == 3


def test_difference_set_with_empty_divisor():
    window = StripWindow(-1, 1, -1, 1)
    Z = Divisor(((0j, 1),), window)
    W = Divisor((), window)
    assert difference_set(Z, W, 10).size == 0


def test_sum_set():
    window = StripWindow(-1, 1, -5, 5)
    Z = Divisor(((1j, 1),), window)
    W = Divisor(((2j, 1),), window)
    np.testing.assert_allclose(sum_set(Z, W, 10), [3j])


def test_min_gap():
    assert min_gap(1j * math.pi * np.arange(-3, 4)) == pytest.approx(math.pi)
    assert min_gap([0, 1e-13]) == pytest.approx(1e-13)
    with pytest.raises(TooFewElements):
        min_gap([1 + 1j, 1 + 1j])


@pytest.mark.parametrize("gap,expected", GAMMA_CASES)
def test_clamped_gamma(gap, expected):
    assert clamped_gamma(gap) == expected


def test_gap_trend_detects_accumulating_differences():
    window = StripWindow(-1, 1, 0, 60)
    Z = cosh_zeros(window)
    W = cosh_zeros(window, omega=math.sqrt(2))
    small, full = gap_trend(Z, W, window, im_bound=60)
    assert full < small / 2

    periodic = gap_trend(Z, Z, window, im_bound=60)
    assert periodic[0] == pytest.approx(math.pi)
    assert periodic[1] == pytest.approx(math.pi)


def test_progression_almost_periods():
    assert is_almost_period(PROGRESSION, 0.0, 0.1, INNER)
    assert is_almost_period(PROGRESSION, math.pi, 0.1, INNER)
    assert is_almost_period(PROGRESSION, math.pi + 0.05, 0.1, INNER)
    assert not is_almost_period(PROGRESSION, math.pi + 0.2, 0.1, INNER)
    assert not is_almost_period(PROGRESSION, 1.0, 0.1, INNER)
    assert translation_defect(PROGRESSION, 2 * math.pi, INNER) < 1e-12


def test_match_translation_pairs_each_point_with_its_translate():
    match = match_translation(PROGRESSION, math.pi + 0.05, 0.1, INNER)
    assert match.ok and match.certified
    assert match.max_displacement == pytest.approx(0.05)
    assert match.pairs
    for source, target in match.pairs:
        assert target - source == pytest.approx(1j * math.pi)


def test_match_translation_on_close_pairs_solves_assignment():
    doubled = Divisor.from_points(np.concatenate([PROGRESSION.support, PROGRESSION.support + 0.05]), STRIP)
    match = match_translation(doubled, math.pi, 0.1, INNER)
    assert match.ok
    assert not match.certified
    assert match.max_displacement < 1e-9


def test_margin_violation():
    with pytest.raises(MarginViolation):
        is_almost_period(PROGRESSION, 45.0, 0.1, INNER)


def test_scan_finds_multiples_of_pi():
    inner = STRIP.shrink(0.01, 10.01)
    report = scan_almost_periods(PROGRESSION, 0.01, inner, 10)
    np.testing.assert_allclose(report.taus, math.pi * np.arange(-3, 4), atol=1e-9)
    assert report.density_gap == pytest.approx(math.pi, abs=1e-9)
    assert report.certified
    assert len(report.displacements) == len(report.taus)
    assert report.scan_range == (-10, 10)

    common = common_almost_periods(PROGRESSION, PROGRESSION, 0.01, inner, 10)
    np.testing.assert_allclose(common.taus, report.taus)


def test_scan_rejects_coarse_step():
    with pytest.raises(InvalidObject):
        scan_almost_periods(PROGRESSION, 0.1, INNER, 5, step=0.05)


def test_lemma1_sums_and_differences():
    assert lemma1_check(PROGRESSION, math.pi, math.pi, 0.1, INNER)
    assert lemma1_check(PROGRESSION, math.pi, 2 * math.pi, 0.1, INNER)
    with pytest.raises(NotAnAlmostPeriod):
        lemma1_check(PROGRESSION, 1.0, math.pi, 0.1, INNER)


@pytest.mark.parametrize("L,eps,classes,expected", LEMMA2_CASES)
def test_lemma2_gap_bound(L, eps, classes, expected):
    assert lemma2_gap_bound(L, eps, classes) == pytest.approx(expected)


def test_lemma2_needs_classes():
    with pytest.raises(EmptyClasses):
        lemma2_gap_bound(10, 0.1, [])


def test_pigeonhole_on_equal_scans():
    taus = math.pi * np.arange(0, 10)
    classes = pigeonhole_classes(taus, taus, 5.0, 0.1)
    assert classes == [0]
    assert lemma2_gap_bound(5.0, 0.1, classes) == pytest.approx(10.0)


def test_common_density_gap_within_pigeonhole_bound():
    window = StripWindow(-2, 1, -60, 60)
    Z = cosh_zeros(window)
    W = Divisor.from_points(-1 + 1j * math.pi * (np.arange(-200, 200) + 0.5), window)
    inner = window.shrink(0.1, 20.2)
    scan_z = scan_almost_periods(Z, 0.1, inner, 20)
    scan_w = scan_almost_periods(W, 0.1, inner, 20)
    common = common_almost_periods(Z, W, 0.1, inner, 20)
    L = max(scan_z.density_gap, scan_w.density_gap)
    classes = pigeonhole_classes(scan_z.taus, scan_w.taus, L, 0.1)
    assert common.density_gap == pytest.approx(math.pi, abs=1e-9)
    assert common.density_gap <= lemma2_gap_bound(L, 0.1, classes)


def test_from_points_merges_and_drops():
    window = StripWindow(-1, 1, -2, 2)
    D = Divisor.from_points([0.5j, 0.5j + 1e-14, (1j, 2), 5 + 0j], window)
    assert len(D) == 2
    assert D.total_multiplicity == 4
    np.testing.assert_array_equal(D.multiplicities, [2, 2])
    assert D.expanded().size == 4


def test_divisor_invariants():
    window = StripWindow(-1, 1, -2, 2)
    with pytest.raises(InvalidObject):
        Divisor(((3j, 1),), window)
    with pytest.raises(InvalidObject):
        Divisor(((0j, 0),), window)
    with pytest.raises(InvalidObject):
        Divisor(((0j, 1), (0j, 2)), window)


def test_divisor_dict_round_trip():
    doc = {"points": [{"re": 0, "im": 1.5}, {"re": 0.25, "im": -1, "mult": 3}], "window": STRIP.to_dict()}
    D = Divisor.from_dict(doc)
    assert D.points == ((0.25 - 1j, 3), (1.5j, 1))
    assert Divisor.from_dict(D.to_dict()) == D
