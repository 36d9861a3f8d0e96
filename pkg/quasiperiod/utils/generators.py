"""Reference divisors (periodic columns, rotated lattice), Kronecker solutions and seeded random instances."""

import logging
import math
from dataclasses import dataclass

import mpmath
import numpy as np
import sympy

from quasiperiod.consts import ALPHA_WHITELIST, MP_DPS
from quasiperiod.errors import InvalidObject
from quasiperiod.utils.common import max_consecutive_gap
from quasiperiod.utils.divisor_ops import Divisor
from quasiperiod.utils.quasipoly import PeriodicProductForm, Quasipolynomial, StripWindow

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RotatedLattice:
    """Angle alpha given by an exact cot(alpha) from the whitelist."""

    alpha_tag: str
    strip_halfwidth: float = 1.0
    im_bound: float = 20.0

    def __post_init__(self):
        if self.alpha_tag not in ALPHA_WHITELIST:
            raise InvalidObject(f"Unknown angle construction '{self.alpha_tag}'; choose from {sorted(ALPHA_WHITELIST)}")
        if not (self.strip_halfwidth > 0 and self.im_bound > 0):
            raise InvalidObject("Strip half-width and im_bound must be positive")

    @property
    def cot(self) -> sympy.Expr:
        return sympy.sympify(ALPHA_WHITELIST[self.alpha_tag])

    def trig(self) -> tuple[mpmath.mpf, mpmath.mpf, mpmath.mpf]:
        """(cot, cos, sin) of alpha in extended precision, from the exact expressions."""
        cot = self.cot
        sin = 1 / sympy.sqrt(1 + cot**2)
        cos = sympy.simplify(cot * sin)
        return tuple(mpmath.mpf(str(sympy.N(e, MP_DPS + 10))) for e in (cot, cos, sin))

    def to_dict(self) -> dict:
        return {
            "alpha_tag": self.alpha_tag,
            "cot_alpha": ALPHA_WHITELIST[self.alpha_tag],
            "strip_halfwidth": self.strip_halfwidth,
            "im_bound": self.im_bound,
        }


def example1(k_max: int, im_bound: float) -> Divisor:
    """Columns Re z = 2^k, k = 1..k_max, each an exact vertical progression of step 2^k."""
    if k_max < 1:
        raise InvalidObject(f"k_max must be at least 1, got {k_max}")
    if not im_bound > 0:
        raise InvalidObject(f"im_bound must be positive, got {im_bound}")
    points = []
    for k in range(1, k_max + 1):
        step = 2**k
        n_max = int(im_bound // step)
        points.extend(complex(step, n * step) for n in range(-n_max, n_max + 1))
    window = StripWindow(0.0, float(2 ** (k_max + 1)), -float(im_bound), float(im_bound))
    return Divisor.from_points(points, window, merge_tol=0.0)


def example2(alpha_tag: str, im_bound: float, strip_halfwidth: float = 1.0) -> Divisor:
    """Lattice points (m + in) e^(i alpha) with |Re| < strip_halfwidth and |Im| <= im_bound.

    Rows in m are scanned over |m| <= strip_halfwidth + im_bound; within a row the n-range comes from
    the strip inequality and every comparison is made in extended precision.
    """
    lattice = RotatedLattice(alpha_tag, strip_halfwidth, im_bound)
    points = []
    with mpmath.workdps(MP_DPS):
        _, cos, sin = lattice.trig()
        width, bound = mpmath.mpf(strip_halfwidth), mpmath.mpf(im_bound)
        m_max = int(math.ceil(strip_halfwidth + im_bound))
        for m in range(-m_max, m_max + 1):
            n_lo = int(mpmath.floor((m * cos - width) / sin))
            n_hi = int(mpmath.ceil((m * cos + width) / sin))
            for n in range(n_lo, n_hi + 1):
                re = m * cos - n * sin
                im = m * sin + n * cos
                if abs(re) < width and abs(im) <= bound:
                    points.append(complex(float(re), float(im)))
    window = StripWindow(-strip_halfwidth, strip_halfwidth, -float(im_bound), float(im_bound))
    logger.debug(f"Rotated lattice '{alpha_tag}' holds {len(points)} points")
    return Divisor.from_points(points, window, merge_tol=0.0)


@dataclass(frozen=True)
class KroneckerSolution:
    m: int
    n: int
    value: float

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "value": self.value}


@dataclass(frozen=True)
class KroneckerReport:
    solutions: tuple[KroneckerSolution, ...]
    max_gap: float

    def to_dict(self) -> dict:
        return {"solutions": [s.to_dict() for s in self.solutions], "max_gap": self.max_gap}


def kronecker_solutions(alpha_tag: str, delta: float, m_max: int) -> KroneckerReport:
    """All (m, n) with |m| <= m_max and |m cos(alpha) - n sin(alpha)| < delta.

    For each m only the nearest integer to m cot(alpha) can qualify, so one candidate per row is exhaustive.
    """
    if not delta > 0:
        raise InvalidObject(f"delta must be positive, got {delta}")
    lattice = RotatedLattice(alpha_tag)
    solutions = []
    with mpmath.workdps(MP_DPS):
        cot, cos, sin = lattice.trig()
        bound = mpmath.mpf(delta)
        for m in range(-m_max, m_max + 1):
            n = int(mpmath.nint(m * cot))
            value = m * cos - n * sin
            if abs(value) < bound:
                solutions.append(KroneckerSolution(m, n, float(value)))
    return KroneckerReport(tuple(solutions), max_consecutive_gap(s.m for s in solutions))


def almost_period_from_solution(m: int, n: int, alpha_tag: str) -> float:
    """tau = m sin(alpha) + n cos(alpha)."""
    with mpmath.workdps(MP_DPS):
        _, cos, sin = RotatedLattice(alpha_tag).trig()
        return float(m * sin + n * cos)


def random_quasipolynomial(n_terms: int, lambda_span: float, seed: int) -> Quasipolynomial:
    """Frequencies uniform in [-span, span], coefficients on the annulus 0.5 <= |a| <= 2."""
    if n_terms < 2:
        raise InvalidObject(f"n_terms must be at least 2, got {n_terms}")
    rng = np.random.default_rng(seed)
    lambdas = np.unique(rng.uniform(-lambda_span, lambda_span, n_terms))
    moduli = rng.uniform(0.5, 2.0, lambdas.size)
    phases = rng.uniform(0.0, 2 * math.pi, lambdas.size)
    coeffs = moduli * np.exp(1j * phases)
    return Quasipolynomial(tuple((float(lam), complex(a)) for lam, a in zip(lambdas, coeffs)))


def random_product_form(
    n_factors: int, seed: int, separation: float = 0.4, re_span: float = 2.0
) -> PeriodicProductForm:
    """Seeded cosh product whose zero lines Re z = -Re(b_k) / omega lie in [-re_span, re_span], pairwise separated."""
    if n_factors < 1:
        raise InvalidObject(f"n_factors must be at least 1, got {n_factors}")
    if (n_factors - 1) * separation > 2 * re_span:
        raise InvalidObject("Cannot place that many separated lines in the span")
    rng = np.random.default_rng(seed)
    omega = float(rng.uniform(0.5, 2.5))
    while True:
        lines = np.sort(rng.uniform(-re_span, re_span, n_factors))
        if n_factors == 1 or np.diff(lines).min() > separation:
            break
    offsets = [complex(-rho * omega, float(rng.uniform(0.0, math.pi))) for rho in lines]
    beta = float(rng.uniform(-1.0, 1.0))
    c = complex(rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0.0, 2 * math.pi)))
    return PeriodicProductForm(c, beta, omega, tuple(offsets))


def product_form_zeros(form: PeriodicProductForm, window: StripWindow) -> Divisor:
    """Analytic zeros (i pi (m + 1/2) - b_k) / omega inside the window."""
    points = []
    for b in form.offsets:
        re = -b.real / form.omega
        m_lo = math.floor((form.omega * window.im_min + b.imag) / math.pi - 0.5) - 1
        m_hi = math.ceil((form.omega * window.im_max + b.imag) / math.pi - 0.5) + 1
        points.extend(complex(re, (math.pi * (m + 0.5) - b.imag) / form.omega) for m in range(m_lo, m_hi + 1))
    return Divisor.from_points(points, window)
