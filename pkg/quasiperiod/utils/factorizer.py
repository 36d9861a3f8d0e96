"""Periodic factors with log-tail corrections, zero-free quotients and cosh-product fitting."""

import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from quasiperiod.consts import (
    DEFAULT_BUDGET,
    EXCLUSION_RADIUS,
    JITTER_RETRIES,
    LINE_CLUSTER_TOL,
    OFFSET_BOUNDARY_TOL,
    QUOTIENT_GRID,
    SPACING_RTOL,
    SPECTRUM_TOL,
    TAIL_SAMPLES,
    TOL_ZERO,
    ZERO_MATCH_TOL,
)
from quasiperiod.errors import (
    BoundViolated,
    InvalidObject,
    NoLineStructure,
    OffsetOnBoundary,
    RadiusTooLarge,
    SpacingMismatch,
    SpectrumMismatch,
    ZeroMismatch,
    ZeroOnBoundary,
)
from quasiperiod.utils.common import complex_from_dict, complex_to_dict, parallel_map, require_list, require_number
from quasiperiod.utils.divisor_ops import Divisor
from quasiperiod.utils.quasipoly import (
    PeriodicProductForm,
    Quasipolynomial,
    StripWindow,
    expand_product,
    log_evaluate,
    sup_diff,
)
from quasiperiod.utils.zero_finder import ZeroList, contour_winding, find_zeros, jittered_window

logger = logging.getLogger(__name__)

INSIDE = "inside"
RIGHT = "right"  # offset right of the window: series in w = exp(2 pi z / T)
LEFT = "left"  # offset left of the window: series in 1/w
_ORIENTATIONS = (INSIDE, RIGHT, LEFT)
_MAX_SPECTRUM_DENOMINATOR = 64


def _log_one_minus_exp(s: np.ndarray) -> np.ndarray:
    """log(1 - e^s) up to multiples of 2 pi i, finite for large Re s."""
    s = np.asarray(s, dtype=complex)
    out = np.empty_like(s)
    small = s.real < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[small] = np.log1p(-np.exp(s[small]))
        big = ~small
        out[big] = s[big] + 1j * math.pi + np.log1p(-np.exp(-s[big]))
    return out


def _log_cosh(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    flip = np.where(u.real >= 0, 1.0, -1.0)
    v = flip * u
    return v + np.log1p(np.exp(-2 * v)) - math.log(2)


@dataclass(frozen=True)
class PeriodicFactor:
    """Product over offsets a_j of (1 - exp(2 pi (z - a_j) / T)) exp(-P_j), iT-periodic.

    Offsets left of the orientation window use 1 - exp(2 pi (a_j - z) / T) instead, with P_j a
    polynomial in exp(-2 pi z / T).
    """

    period: float
    offsets: tuple[complex, ...]
    orientations: tuple[str, ...]
    corrections: tuple[tuple[complex, ...], ...]
    bounds: tuple[float | None, ...]
    window: StripWindow

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidObject(f"Period must be positive, got {self.period}")
        n = len(self.offsets)
        if not (len(self.orientations) == len(self.corrections) == len(self.bounds) == n):
            raise InvalidObject("Offsets, orientations, corrections and bounds must align")
        if any(o not in _ORIENTATIONS for o in self.orientations):
            raise InvalidObject(f"Unknown orientation in {self.orientations}")
        for a in self.offsets:
            if not (0 <= a.imag < self.period):
                raise InvalidObject(f"Offset {a} is not normalized to 0 <= Im a < {self.period}")
        for bound, coeffs in zip(self.bounds, self.corrections):
            if coeffs and not (bound is not None and bound > 0):
                raise InvalidObject("Every correction polynomial needs a positive certified bound")

    @property
    def total_bound(self) -> float:
        """Sum of the certified tail bounds."""
        return float(sum(b for b in self.bounds if b is not None))

    def term_log(self, j: int, z) -> np.ndarray:
        """log of the j-th term h_j exp(-P_j), up to multiples of 2 pi i."""
        z = np.asarray(z, dtype=complex)
        a, scale = self.offsets[j], 2 * math.pi / self.period
        if self.orientations[j] == LEFT:
            value = _log_one_minus_exp(scale * (a - z))
            u = np.exp(-scale * z)
        else:
            value = _log_one_minus_exp(scale * (z - a))
            u = np.exp(scale * z)
        coeffs = self.corrections[j]
        if coeffs:
            # coeffs[m - 1] multiplies u^m
            poly = np.polynomial.polynomial.polyval(u, np.concatenate([[0j], np.asarray(coeffs, dtype=complex)]))
            value = value - poly
        return value

    def log_evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        total = np.zeros(z.shape, dtype=complex)
        for j in range(len(self.offsets)):
            total = total + self.term_log(j, z)
        return total

    def evaluate(self, z):
        arr = np.asarray(z, dtype=complex)
        value = np.exp(self.log_evaluate(arr))
        return complex(value) if arr.ndim == 0 else value

    def zeros_in(self, window: StripWindow) -> np.ndarray:
        """The translates a_j + iTm inside window, with repetition for repeated offsets."""
        points = []
        for a in self.offsets:
            if not window.re_min < a.real < window.re_max:
                continue
            m_lo = math.ceil((window.im_min - a.imag) / self.period)
            m_hi = math.floor((window.im_max - a.imag) / self.period)
            points.extend(a + 1j * self.period * m for m in range(m_lo, m_hi + 1))
        return np.array(points, dtype=complex)

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "offsets": [complex_to_dict(a) for a in self.offsets],
            "orientations": list(self.orientations),
            "corrections": [[[c.real, c.imag] for c in coeffs] for coeffs in self.corrections],
            "bounds": list(self.bounds),
            "window": self.window.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "PeriodicFactor":
        prefix = f"{path}." if path else ""
        offsets = tuple(
            complex_from_dict(a, f"{prefix}offsets[{i}]") for i, a in enumerate(require_list(doc, "offsets", path))
        )
        corrections = tuple(
            tuple(complex(re, im) for re, im in coeffs) for coeffs in doc.get("corrections", [[]] * len(offsets))
        )
        return cls(
            period=require_number(doc, "period", path),
            offsets=offsets,
            orientations=tuple(doc.get("orientations", [INSIDE] * len(offsets))),
            corrections=corrections,
            bounds=tuple(doc.get("bounds", [None] * len(offsets))),
            window=StripWindow.from_dict(doc.get("window"), f"{prefix}window"),
        )


@dataclass(frozen=True)
class TailCorrection:
    coeffs: tuple[complex, ...]
    bound: float
    ratio: float

    @property
    def degree(self) -> int:
        return len(self.coeffs)


def _geometric_tail(ratio: float, degree: int) -> float:
    """Upper bound on sum_{m > degree} ratio^m / m."""
    if degree == 0:
        return -math.log1p(-ratio)
    return ratio ** (degree + 1) / ((degree + 1) * (1 - ratio))


def tail_correction(a: complex, T: float, radius: float, eps: float, orientation: str = RIGHT) -> TailCorrection:
    """Truncated series of log(1 - u c) with c = exp(-/+ 2 pi a / T), certified for |u| <= radius.

    Returns the coefficients of u^1 .. u^d for the smallest d whose tail bound is below eps.
    """
    if orientation not in (RIGHT, LEFT):
        raise InvalidObject(f"Corrections need a right or left orientation, got {orientation}")
    if not (T > 0 and radius > 0 and eps > 0):
        raise InvalidObject(f"T, radius and eps must be positive, got {T}, {radius}, {eps}")
    sign = -1.0 if orientation == RIGHT else 1.0
    log_c = sign * 2 * math.pi * complex(a) / T
    ratio = radius * math.exp(log_c.real)
    if ratio >= 1:
        raise RadiusTooLarge(f"Series ratio {ratio:.6g} is not below 1 for offset {a}")
    degree = 0
    if math.isfinite(eps):
        while _geometric_tail(ratio, degree) >= eps:
            degree += 1
    coeffs = tuple(-complex(np.exp(m * log_c)) / m for m in range(1, degree + 1))
    return TailCorrection(coeffs, _geometric_tail(ratio, degree), ratio)


def _orientation(a: complex, window: StripWindow, tol: float) -> str:
    if min(abs(a.real - window.re_min), abs(a.real - window.re_max)) < tol:
        raise OffsetOnBoundary(f"Offset {a} sits on the edge of {window.to_dict()}")
    if a.real > window.re_max:
        return RIGHT
    if a.real < window.re_min:
        return LEFT
    return INSIDE


def normalize_offsets(offsets: Iterable[complex], T: float) -> list[complex]:
    """Reduce offsets to 0 <= Im a < T."""
    out = []
    for a in offsets:
        a = complex(a)
        im = a.imag % T
        if im >= T:
            im = 0.0
        out.append(complex(a.real, im))
    return out


def build_factor(
    offsets: Iterable[complex],
    T: float,
    window: StripWindow,
    eps_budget: list[float] | float | None = None,
    tol: float = OFFSET_BOUNDARY_TOL,
) -> PeriodicFactor:
    """Periodic factor vanishing on {a_j + iTm}; offsets off the window get log-tail corrections.

    eps_budget is a per-offset list, or a total split evenly over the offsets (default 1e-6).
    """
    if not T > 0:
        raise InvalidObject(f"Period must be positive, got {T}")
    offsets = normalize_offsets(offsets, T)
    n = len(offsets)
    if eps_budget is None or isinstance(eps_budget, (int, float)):
        total = DEFAULT_BUDGET if eps_budget is None else float(eps_budget)
        budgets = [total / max(n, 1)] * n
    else:
        budgets = [float(e) for e in eps_budget]
        if len(budgets) != n:
            raise InvalidObject(f"{len(budgets)} budgets for {n} offsets")
    orientations = [_orientation(a, window, tol) for a in offsets]
    scale = 2 * math.pi / T
    radii = {RIGHT: math.exp(scale * window.re_max), LEFT: math.exp(-scale * window.re_min)}

    def correct(j: int) -> TailCorrection | None:
        if orientations[j] == INSIDE:
            return None
        return tail_correction(offsets[j], T, radii[orientations[j]], budgets[j], orientations[j])

    results = parallel_map(correct, range(n))
    return PeriodicFactor(
        period=T,
        offsets=tuple(offsets),
        orientations=tuple(orientations),
        corrections=tuple(r.coeffs if r is not None else () for r in results),
        bounds=tuple(r.bound if r is not None else None for r in results),
        window=window,
    )


def factor_from_divisor(Z: Divisor, T: float, window: StripWindow, eps_budget: float | None = None) -> PeriodicFactor:
    """Factor whose zeros are the iT-periodic extension of Z: one offset per point and multiplicity, taken mod T."""
    classes: list[tuple[complex, int]] = []
    for z, m in Z.points:
        a = normalize_offsets([z], T)[0]
        if not any(_same_class(a, b, T) for b, _ in classes):
            classes.append((a, m))
    return build_factor([a for a, m in classes for _ in range(m)], T, window, eps_budget)


def _same_class(a: complex, b: complex, T: float) -> bool:
    d = a - b
    return abs(d.real) < ZERO_MATCH_TOL and min(abs(d.imag), T - abs(d.imag)) < ZERO_MATCH_TOL


def verify_tail_bound(factor: PeriodicFactor, window: StripWindow | None = None, samples: int = TAIL_SAMPLES) -> float:
    """Sample each corrected term over one period on the window edge nearest its offset.

    Every sampled |h_j exp(-P_j)| must lie in (exp(-eps_j), exp(eps_j)); returns the largest
    deviation of the modulus from 1.
    """
    window = factor.window if window is None else window
    ys = window.im_min + factor.period * np.arange(samples) / samples
    worst = 0.0
    for j, (orientation, bound) in enumerate(zip(factor.orientations, factor.bounds)):
        if orientation == INSIDE or bound is None:
            continue
        edge = window.re_max if orientation == RIGHT else window.re_min
        z = edge + 1j * ys
        moduli = np.exp(factor.term_log(j, z).real)
        outside = (moduli >= math.exp(bound)) | (moduli <= math.exp(-bound))
        if outside.any():
            bad = complex(z[np.flatnonzero(outside)[0]])
            raise BoundViolated(f"Term {j} leaves its certified band e^(+/-{bound:.3e}) at {bad}", z=bad)
        worst = max(worst, float(np.abs(moduli - 1).max()))
    return worst


def _check_zero_match(zeros: ZeroList, factor_zeros: np.ndarray, tol: float) -> None:
    expected = zeros.to_divisor().expanded()
    if expected.size != factor_zeros.size:
        raise ZeroMismatch(f"{expected.size} zeros in the window but the factors vanish {factor_zeros.size} times")
    if expected.size == 0:
        return
    tree = cKDTree(np.column_stack([factor_zeros.real, factor_zeros.imag]))
    for entry in zeros.entries:
        near = tree.query_ball_point([entry.point.real, entry.point.imag], tol)
        if len(near) != entry.multiplicity:
            raise ZeroMismatch(f"Zero {entry.point} (mult {entry.multiplicity}) matches {len(near)} factor zeros")


def quotient_certify(
    f: Quasipolynomial,
    factors: list[PeriodicFactor],
    window: StripWindow,
    tol_zero: float = TOL_ZERO,
    grid: int = QUOTIENT_GRID,
) -> tuple[float, int]:
    """Min |f / prod factors| on a grid avoiding the cancelling zeros, and the zero count of the quotient."""
    zeros = find_zeros(f, window, tol_zero)
    window = zeros.window
    factor_zeros = np.concatenate([fac.zeros_in(window) for fac in factors]) if factors else np.zeros(0, dtype=complex)
    _check_zero_match(zeros, factor_zeros, ZERO_MATCH_TOL)

    def log_quotient(z: np.ndarray) -> np.ndarray:
        value = log_evaluate(f, z)
        for fac in factors:
            value = value - fac.log_evaluate(z)
        return value

    pts = window.grid(window.diameter / grid).ravel()
    if factor_zeros.size:
        dist, _ = cKDTree(np.column_stack([factor_zeros.real, factor_zeros.imag])).query(
            np.column_stack([pts.real, pts.imag])
        )
        pts = pts[dist > EXCLUSION_RADIUS]
    min_modulus = float(np.exp(log_quotient(pts).real.min()))

    gamma = 1e-3 * min(window.width, window.height)
    for k in range(JITTER_RETRIES + 1):
        try:
            count = contour_winding(log_quotient, jittered_window(window, k, gamma))
            break
        except ZeroOnBoundary:
            logger.info("Quotient contour touches a zero; jittering")
    else:
        raise ZeroOnBoundary(f"Could not place a clear contour around {window.to_dict()}")
    if count != 0 or not min_modulus > 0:
        logger.warning(f"Quotient is not certified zero-free: count={count}, min modulus={min_modulus:.3e}")
    return min_modulus, count


@dataclass(frozen=True)
class LineCluster:
    re: float
    count: int
    spacing: float

    def to_dict(self) -> dict:
        return {"re": self.re, "count": self.count, "spacing": self.spacing}


@dataclass(frozen=True)
class FitResult:
    form: PeriodicProductForm
    residual: float
    cluster_report: tuple[LineCluster, ...]

    def to_dict(self) -> dict:
        return {
            "form": self.form.to_dict(),
            "residual": self.residual,
            "cluster_report": [c.to_dict() for c in self.cluster_report],
        }


def _spectrum_denominator(qp: Quasipolynomial) -> int:
    """Smallest N with every frequency on the grid bottom + j (top - bottom) / N."""
    lams = qp.lambdas
    top, bottom = lams[0], lams[-1]
    if top == bottom:
        raise SpectrumMismatch("A single frequency has no cosh-product form with zeros")
    ratios = (lams - bottom) / (top - bottom)
    for n in range(1, _MAX_SPECTRUM_DENOMINATOR + 1):
        if np.abs(ratios * n - np.round(ratios * n)).max() < SPECTRUM_TOL * n:
            return n
    raise SpectrumMismatch(f"Frequencies {lams.tolist()} are not an arithmetic progression")


def _line_clusters(zeros: ZeroList) -> list[list]:
    entries = sorted(zeros.entries, key=lambda e: e.point.real)
    lines = [[entries[0]]]
    for e in entries[1:]:
        if e.point.real - lines[-1][-1].point.real > LINE_CLUSTER_TOL:
            lines.append([e])
        else:
            lines[-1].append(e)
    return lines


def _fit_progression(ims: np.ndarray) -> float:
    """Spacing of an arithmetic progression through the sorted values."""
    first = float(np.median(np.diff(ims)))
    index = np.round((ims - ims[0]) / first)
    if np.unique(index).size != index.size:
        raise NoLineStructure("Zeros on a line are not an arithmetic progression")
    slope, _ = np.polyfit(index, ims, 1)
    if np.abs(ims - ims[0] - slope * index).max() > SPACING_RTOL * max(1.0, abs(slope) * index.max()):
        raise NoLineStructure("Zeros on a line deviate from an arithmetic progression")
    return float(slope)


def _far_point(window: StripWindow, points: np.ndarray) -> complex:
    """Grid point of the window farthest from the given points."""
    grid = window.shrink(0.05 * window.width, 0.05 * window.height).grid(min(window.width, window.height) / 32).ravel()
    dist, _ = cKDTree(np.column_stack([points.real, points.imag])).query(np.column_stack([grid.real, grid.imag]))
    return complex(grid[np.argmax(dist)])


def fit_cosh_form(qp: Quasipolynomial, zeros: ZeroList, window: StripWindow) -> FitResult:
    """Recover C e^(beta z) prod cosh(omega z + b_k) from the spectrum and the zeros."""
    if len(zeros) == 0:
        raise NoLineStructure("No zeros to fit")
    _spectrum_denominator(qp)

    lines = _line_clusters(zeros)
    report, spacings = [], []
    for line in lines:
        if len(line) < 2:
            raise NoLineStructure(f"Line at Re={line[0].point.real:.6g} holds a single zero")
        if len({e.multiplicity for e in line}) != 1:
            raise NoLineStructure(f"Mixed multiplicities on the line at Re={line[0].point.real:.6g}")
        ims = np.sort([e.point.imag for e in line])
        spacing = _fit_progression(ims)
        spacings.append(spacing)
        report.append(LineCluster(float(np.mean([e.point.real for e in line])), len(line), spacing))
    s = float(np.mean(spacings))
    if max(abs(sp - s) for sp in spacings) > SPACING_RTOL * s:
        raise SpacingMismatch(f"Lines disagree on the spacing: {spacings}")

    top, bottom = qp.lambdas[0], qp.lambdas[-1]
    n_factors = sum(line[0].multiplicity for line in lines)
    half_spread = 0.5 * (top - bottom)
    if abs(n_factors * math.pi / s - half_spread) > SPECTRUM_TOL * max(1.0, half_spread):
        raise SpectrumMismatch(f"{n_factors} factors of frequency {math.pi / s} do not span the spectrum {half_spread}")
    omega = half_spread / n_factors
    beta = 0.5 * (top + bottom)

    offsets = []
    for line, cluster in zip(lines, report):
        ims = np.array([e.point.imag for e in line])
        # zeros at Im z = (pi (m + 1/2) - Im b) / omega, so Im b = pi/2 - omega Im z mod pi
        phase = np.angle(np.mean(np.exp(2j * (math.pi / 2 - omega * ims)))) / 2
        b = complex(-cluster.re * omega, phase % math.pi)
        offsets.extend([b] * line[0].multiplicity)

    z_star = _far_point(window, zeros.points)
    u = omega * z_star + np.array(offsets)
    log_c = log_evaluate(qp, z_star) - beta * z_star - complex(_log_cosh(u).sum())
    form = PeriodicProductForm.normalized(complex(np.exp(log_c)), beta, omega, offsets)
    residual = sup_diff(qp, expand_product(form), window)
    logger.info(f"Fitted {form.n_factors} cosh factors with omega={omega:.12g}, residual {residual:.3e}")
    return FitResult(form, residual, tuple(report))
