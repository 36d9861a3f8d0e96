import math

import numpy as np
import pytest

from quasiperiod.errors import (
    EmptyDivisor,
    Incommensurable,
    InvalidObject,
    NonRealPeriod,
    NoUniqueTranslate,
    PropagationBreak,
)
from quasiperiod.utils.divisor_ops import Divisor
from quasiperiod.utils.generators import example1
from quasiperiod.utils.period_engine import (
    PeriodCertificate,
    commensurate,
    decompose,
    estimate_R,
    extract_period,
    minimal_common_period,
    minimal_period,
    verify_period,
)
from quasiperiod.utils.quasipoly import StripWindow

STRIP = StripWindow(-1, 1, -50, 50)
K = np.arange(-200, 200)
PROGRESSION = Divisor.from_points(1j * math.pi * (K + 0.5), STRIP)

COMMENSURATE_CASES = [
    ([math.pi, 2 * math.pi, 3 * math.pi], math.pi, [1, 2, 3]),
    ([1.0, 1.5], 0.5, [2, 3]),
    ([4.0, 2.0, 8.0], 2.0, [2, 1, 4]),
]


def test_estimate_R():
    assert estimate_R(PROGRESSION, PROGRESSION, STRIP) == pytest.approx(math.pi)
    sparse = Divisor.from_points(1j * math.pi * (2 * K + 0.5), STRIP)
    assert estimate_R(PROGRESSION, sparse, STRIP) == pytest.approx(2 * math.pi)
    with pytest.raises(EmptyDivisor):
        estimate_R(PROGRESSION, Divisor((), STRIP), STRIP)


def test_extract_period_progression():
    cert = extract_period(PROGRESSION, PROGRESSION, 5 * math.pi, 1.0, STRIP)
    assert cert.period == pytest.approx(5 * math.pi)
    assert cert.two_sided
    assert cert.verified_windows
    assert cert.zero_free_checks is None
    assert minimal_period(PROGRESSION, cert.period, STRIP) == pytest.approx(math.pi)


def test_extract_period_shifted_pair():
    Z = Divisor.from_points(-0.5 + 0.5j * math.pi * (K + 0.5), STRIP)
    W = Divisor.from_points(0.5j * math.pi * (K + 0.5), STRIP)
    cert = extract_period(Z, W, math.pi, 0.5, STRIP)
    assert cert.period == pytest.approx(math.pi)
    assert minimal_common_period([Z], cert.period, STRIP) == pytest.approx(math.pi / 2)


def test_extract_period_detects_displaced_point():
    pts = 1j * math.pi * (K + 0.5)
    pts = np.where(np.isclose(pts.imag, 10.5 * math.pi), pts + 0.3, pts)
    Z = Divisor.from_points(pts, STRIP)
    with pytest.raises(PropagationBreak):
        extract_period(Z, Z, math.pi, 1.0, STRIP)


def test_extract_period_needs_both_directions():
    window = StripWindow(-3, 3, -50, 50)
    Z = Divisor.from_points(np.append(1j * math.pi * (K + 0.5), 2.5 + 49j), window)
    with pytest.raises(PropagationBreak):
        extract_period(Z, Z, math.pi, 1.0, window)


def test_extract_period_slanted_lattice():
    window = StripWindow(-10, 10, -50, 50)
    k = np.arange(-15, 16)
    Z = Divisor.from_points(k * (0.1 + 1j * math.pi), window)
    with pytest.raises(NonRealPeriod):
        extract_period(Z, Z, math.pi, 1.0, window)


def test_extract_period_without_translate():
    with pytest.raises(NoUniqueTranslate):
        extract_period(PROGRESSION, PROGRESSION, 1.5 * math.pi, 1.0, STRIP)
    with pytest.raises(InvalidObject):
        extract_period(PROGRESSION, PROGRESSION, 0.5, 1.0, STRIP)


def test_extract_period_zero_free_substrip():
    cert = extract_period(PROGRESSION, PROGRESSION, math.pi, 1.0, STRIP, zero_free=StripWindow(0.5, 1, -50, 50))
    assert cert.zero_free_checks >= 1


def test_verify_period():
    assert verify_period(PROGRESSION, math.pi, STRIP)
    assert verify_period(PROGRESSION, 2 * math.pi, STRIP)
    assert not verify_period(PROGRESSION, math.pi / 2, STRIP)
    assert verify_period(Divisor((), STRIP), 1.0, STRIP)


def test_minimal_period_of_multiples():
    assert minimal_period(PROGRESSION, 3 * math.pi, STRIP) == pytest.approx(math.pi)


def test_minimal_period_respects_multiplicity():
    doubled = Divisor(tuple((p, 2) for p in PROGRESSION.support), STRIP)
    assert minimal_period(doubled, 2 * math.pi, STRIP) == pytest.approx(math.pi)

    alternating = Divisor(tuple((p, 1 + k % 2) for k, p in enumerate(PROGRESSION.support)), STRIP)
    assert minimal_period(alternating, 2 * math.pi, STRIP) == pytest.approx(2 * math.pi)


def test_minimal_period_of_union():
    pts = 1j * math.pi * (K + 0.5)
    Z = Divisor.from_points(np.concatenate([pts, pts + 1j * math.pi / 3]), STRIP)
    assert minimal_period(Z, 2 * math.pi, STRIP) == pytest.approx(math.pi)


@pytest.mark.parametrize("periods,unit,multipliers", COMMENSURATE_CASES)
def test_commensurate(periods, unit, multipliers):
    got_unit, got_multipliers = commensurate(periods)
    assert got_unit == pytest.approx(unit)
    assert got_multipliers == multipliers


def test_incommensurable():
    with pytest.raises(Incommensurable):
        commensurate([math.pi, math.sqrt(2) * math.pi])
    with pytest.raises(InvalidObject):
        commensurate([])


def test_decompose_single_substrip():
    dec_z, dec_w = decompose(PROGRESSION, PROGRESSION, [STRIP])
    assert len(dec_z.parts) == 1
    assert dec_z.parts[0].period == pytest.approx(math.pi)
    assert dec_z.common_unit == pytest.approx(math.pi)
    assert dec_z.multipliers == (1,)
    assert dec_w.parts[0].divisor == dec_z.parts[0].divisor


def test_decompose_nested_columns():
    Z = example1(3, 40)
    substrips = [Z.window.with_re(0, 3), Z.window.with_re(0, 5), Z.window.with_re(0, 9)]
    dec, _ = decompose(Z, Z, substrips)
    assert [p.period for p in dec.parts] == pytest.approx([2, 4, 8])
    assert dec.common_unit == pytest.approx(2)
    assert dec.multipliers == (1, 2, 4)
    assert [set(np.round(p.divisor.support.real)) for p in dec.parts] == [{2}, {4}, {8}]
    assert dec.union().total_multiplicity == Z.total_multiplicity


def test_decompose_rejects_unnested_substrips():
    with pytest.raises(InvalidObject):
        decompose(PROGRESSION, PROGRESSION, [STRIP, STRIP.with_re(-0.5, 0.5)])


def test_certificate_dict_round_trip():
    cert = extract_period(PROGRESSION, PROGRESSION, math.pi, 1.0, STRIP)
    again = PeriodCertificate.from_dict(cert.to_dict())
    assert again.period == cert.period
    assert again.verified_windows == cert.verified_windows
    assert again.anchor == cert.anchor
