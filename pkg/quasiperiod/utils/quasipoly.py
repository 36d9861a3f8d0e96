"""Finite exponential sums, cosh-product forms and the rectangles they are studied on."""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from quasiperiod.consts import CANCELLATION_THRESHOLD, SUP_GRID_DIVISIONS
from quasiperiod.errors import ConstantDerivative, InvalidObject, ParseError
from quasiperiod.utils.common import complex_from_dict, complex_to_dict, require_list, require_number

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StripWindow:
    """The rectangle {re_min < Re z < re_max, im_min <= Im z <= im_max}."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        """Validate bounds."""
        bounds = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(math.isfinite(b) for b in bounds):
            raise InvalidObject(f"Window bounds must be finite: {bounds}")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise InvalidObject(f"Window bounds are not ordered: {bounds}")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def contains(self, z):
        """Membership with an open real range and a closed imaginary range (vectorized)."""
        z = np.asarray(z, dtype=complex)
        return (self.re_min < z.real) & (z.real < self.re_max) & (self.im_min <= z.imag) & (z.imag <= self.im_max)

    def contains_window(self, other: "StripWindow", re_margin: float = 0.0, im_margin: float = 0.0) -> bool:
        """Whether other, grown by the margins, still fits inside this window (up to rounding)."""
        slack = 1e-12 * max(1.0, abs(self.re_min), abs(self.re_max), abs(self.im_min), abs(self.im_max))
        return (
            other.re_min - re_margin >= self.re_min - slack
            and other.re_max + re_margin <= self.re_max + slack
            and other.im_min - im_margin >= self.im_min - slack
            and other.im_max + im_margin <= self.im_max + slack
        )

    def expand(self, margin: float, im_margin: float | None = None) -> "StripWindow":
        im_margin = margin if im_margin is None else im_margin
        return StripWindow(self.re_min - margin, self.re_max + margin, self.im_min - im_margin, self.im_max + im_margin)

    def shrink(self, margin: float, im_margin: float | None = None) -> "StripWindow":
        im_margin = margin if im_margin is None else im_margin
        return self.expand(-margin, -im_margin)

    def shifted(self, dy: float) -> "StripWindow":
        """Vertical translate by i*dy."""
        return StripWindow(self.re_min, self.re_max, self.im_min + dy, self.im_max + dy)

    def with_im(self, im_min: float, im_max: float) -> "StripWindow":
        return StripWindow(self.re_min, self.re_max, im_min, im_max)

    def with_re(self, re_min: float, re_max: float) -> "StripWindow":
        return StripWindow(re_min, re_max, self.im_min, self.im_max)

    def grid(self, step: float) -> np.ndarray:
        """Rectangular grid of pitch at most step covering the closed rectangle."""
        nx = max(2, int(math.ceil(self.width / step)) + 1)
        ny = max(2, int(math.ceil(self.height / step)) + 1)
        xs = np.linspace(self.re_min, self.re_max, nx)
        ys = np.linspace(self.im_min, self.im_max, ny)
        return xs[None, :] + 1j * ys[:, None]

    def to_dict(self) -> dict:
        return {"re_min": self.re_min, "re_max": self.re_max, "im_min": self.im_min, "im_max": self.im_max}

    @classmethod
    def from_dict(cls, doc: dict, path: str = "window") -> "StripWindow":
        return cls(*(require_number(doc, key, path) for key in ("re_min", "re_max", "im_min", "im_max")))

    @classmethod
    def from_cli(cls, text: str) -> "StripWindow":
        """Parse the CLI syntax re_min,re_max,im_min,im_max."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ParseError(f"Window must be re_min,re_max,im_min,im_max, got '{text}'", field_path="--window")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as exc:
            raise ParseError(f"Window bounds must be numbers, got '{text}'", field_path="--window") from exc


@dataclass(frozen=True)
class Quasipolynomial:
    """A finite sum of a_n exp(lambda_n z), terms sorted by lambda strictly descending."""

    terms: tuple[tuple[float, complex], ...]

    def __post_init__(self):
        """Normalize ordering and check invariants."""
        terms = tuple(sorted(((float(lam), complex(a)) for lam, a in self.terms), key=lambda t: -t[0]))
        if not terms:
            raise InvalidObject("A quasipolynomial needs at least one term")
        lams = [t[0] for t in terms]
        if len(set(lams)) != len(lams):
            raise InvalidObject(f"Frequencies must be pairwise distinct: {lams}")
        for lam, a in terms:
            if not (math.isfinite(lam) and math.isfinite(a.real) and math.isfinite(a.imag)):
                raise InvalidObject(f"Non-finite term ({lam}, {a})")
            if a == 0:
                raise InvalidObject(f"Coefficient of frequency {lam} is zero")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, complex]]) -> "Quasipolynomial":
        """Build from possibly repeated frequencies, combining them and dropping exact zeros."""
        combined: dict[float, complex] = {}
        for lam, a in terms:
            combined[float(lam)] = combined.get(float(lam), 0j) + complex(a)
        return cls(tuple((lam, a) for lam, a in combined.items() if a != 0))

    @cached_property
    def lambdas(self) -> np.ndarray:
        return np.array([t[0] for t in self.terms], dtype=float)

    @cached_property
    def coeffs(self) -> np.ndarray:
        return np.array([t[1] for t in self.terms], dtype=complex)

    @property
    def max_coeff(self) -> float:
        return float(np.abs(self.coeffs).max())

    def __len__(self) -> int:
        return len(self.terms)

    def to_dict(self) -> dict:
        return {"terms": [{"lambda": lam, "re": a.real, "im": a.imag} for lam, a in self.terms]}

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "Quasipolynomial":
        terms = []
        for i, term in enumerate(require_list(doc, "terms", path)):
            term_path = f"{path + '.' if path else ''}terms[{i}]"
            terms.append((require_number(term, "lambda", term_path), complex_from_dict(term, term_path)))
        return cls(tuple(terms))


@dataclass(frozen=True)
class PeriodicProductForm:
    """C exp(beta z) prod_k cosh(omega z + b_k)."""

    c: complex
    beta: float
    omega: float
    offsets: tuple[complex, ...] = field(default_factory=tuple)

    def __post_init__(self):
        """Check invariants."""
        object.__setattr__(self, "offsets", tuple(complex(b) for b in self.offsets))
        object.__setattr__(self, "c", complex(self.c))
        if not self.offsets:
            raise InvalidObject("A product form needs at least one cosh factor")
        if not self.omega > 0:
            raise InvalidObject(f"omega must be positive, got {self.omega}")
        if self.c == 0:
            raise InvalidObject("The scale C must be nonzero")

    @classmethod
    def normalized(cls, c: complex, beta: float, omega: float, offsets: Iterable[complex]) -> "PeriodicProductForm":
        """Absorb a negative omega through the evenness of cosh, then canonicalize."""
        offsets = [complex(b) for b in offsets]
        if omega < 0:
            omega, offsets = -omega, [-b for b in offsets]
        return cls(c, beta, omega, tuple(offsets)).canonical()

    def canonical(self) -> "PeriodicProductForm":
        """Reduce Im b_k into [0, pi), absorbing cosh(x - i pi) = -cosh(x) into C; sort offsets."""
        c = self.c
        reduced = []
        for b in self.offsets:
            k = math.floor(b.imag / math.pi)
            reduced.append(complex(b.real, b.imag - k * math.pi))
            if k % 2:
                c = -c
        reduced.sort(key=lambda b: (b.real, b.imag))
        return PeriodicProductForm(c, self.beta, self.omega, tuple(reduced))

    @property
    def n_factors(self) -> int:
        return len(self.offsets)

    def to_dict(self) -> dict:
        return {
            "c_re": self.c.real,
            "c_im": self.c.imag,
            "beta": self.beta,
            "omega": self.omega,
            "offsets": [complex_to_dict(b) for b in self.offsets],
        }

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "PeriodicProductForm":
        prefix = f"{path}." if path else ""
        raw = require_list(doc, "offsets", path)
        offsets = [complex_from_dict(b, f"{prefix}offsets[{i}]") for i, b in enumerate(raw)]
        return cls(
            complex(require_number(doc, "c_re", path), require_number(doc, "c_im", path)),
            require_number(doc, "beta", path),
            require_number(doc, "omega", path),
            tuple(offsets),
        )


def _scaled_sum(qp: Quasipolynomial, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum with the dominant real exponent factored out: Q(z) = S(z) * exp(shift)."""
    flat = z.ravel()
    x = flat.real
    shift = np.where(x >= 0, qp.lambdas[0] * x, qp.lambdas[-1] * x)
    exponents = qp.lambdas[:, None] * flat[None, :] - shift[None, :]
    scaled = (qp.coeffs[:, None] * np.exp(exponents)).sum(axis=0)
    return scaled.reshape(z.shape), shift.reshape(z.shape)


def evaluate(qp: Quasipolynomial, z):
    """Q(z); vectorized over arrays, a Python complex for scalar input."""
    arr = np.asarray(z, dtype=complex)
    scaled, shift = _scaled_sum(qp, arr)
    with np.errstate(over="ignore"):
        value = scaled * np.exp(shift)
    return complex(value) if arr.ndim == 0 else value


def log_evaluate(qp: Quasipolynomial, z):
    """log Q(z) = log|Q| + i arg Q without forming Q, so it survives where Q overflows."""
    arr = np.asarray(z, dtype=complex)
    scaled, shift = _scaled_sum(qp, arr)
    with np.errstate(divide="ignore"):
        value = np.log(scaled) + shift
    return complex(value) if arr.ndim == 0 else value


def scaled_evaluate(qp: Quasipolynomial, z) -> np.ndarray:
    """Q(z) * exp(-max_n lambda_n Re z): same phase as Q, magnitude comparable to the coefficients."""
    return _scaled_sum(qp, np.asarray(z, dtype=complex))[0]


def relative_residual(qp: Quasipolynomial, z):
    """|Q(z)| / sum_n |a_n exp(lambda_n z)|, which stays at rounding level near zeros far from Re z = 0."""
    arr = np.asarray(z, dtype=complex)
    scaled, shift = _scaled_sum(qp, arr)
    x = arr.real.ravel()
    weights = np.abs(qp.coeffs)[:, None] * np.exp(qp.lambdas[:, None] * x[None, :] - shift.ravel()[None, :])
    value = np.abs(scaled).ravel() / weights.sum(axis=0)
    return float(value[0]) if arr.ndim == 0 else value.reshape(arr.shape)


def derivative(qp: Quasipolynomial) -> Quasipolynomial:
    """Term (lambda, a) maps to (lambda, lambda * a); constant terms vanish."""
    terms = tuple((lam, lam * a) for lam, a in qp.terms if lam != 0)
    if not terms:
        raise ConstantDerivative("Derivative of a constant quasipolynomial is identically zero")
    return Quasipolynomial(terms)


def translate(qp: Quasipolynomial, tau: float) -> Quasipolynomial:
    """The shift z -> z + i tau."""
    return Quasipolynomial(tuple((lam, a * complex(math.cos(lam * tau), math.sin(lam * tau))) for lam, a in qp.terms))


def reflect(qp: Quasipolynomial) -> Quasipolynomial:
    """z -> -z."""
    return Quasipolynomial(tuple((-lam, a) for lam, a in qp.terms))


def spectrum_bounds(qp: Quasipolynomial) -> tuple[float, float]:
    """Top and bottom frequencies."""
    return float(qp.lambdas[0]), float(qp.lambdas[-1])


def evaluate_product(form: PeriodicProductForm, z):
    """Direct evaluation of the product form."""
    arr = np.asarray(z, dtype=complex)
    value = form.c * np.exp(form.beta * arr)
    for b in form.offsets:
        value = value * np.cosh(form.omega * arr + b)
    return complex(value) if arr.ndim == 0 else value


def expand_product(form: PeriodicProductForm) -> Quasipolynomial:
    """Exact expansion of the cosh product into a sum over exponents beta + s*omega, s = -N, -N+2, ..., N."""
    # index j of the running array carries the exponent beta + omega * (2j - n)
    coeffs = np.array([1.0 + 0j])
    for b in form.offsets:
        coeffs = np.convolve(coeffs, np.array([np.exp(-b), np.exp(b)]) / 2)
    coeffs = form.c * coeffs
    n = form.n_factors
    threshold = CANCELLATION_THRESHOLD * np.abs(coeffs).max()
    terms = []
    for j, a in enumerate(coeffs):
        lam = form.beta + form.omega * (2 * j - n)
        if abs(a) < threshold:
            if a != 0:
                logger.warning(f"Dropping cancelled coefficient {abs(a):.3e} at frequency {lam}")
            continue
        terms.append((lam, complex(a)))
    return Quasipolynomial(tuple(terms))


def _window_weights(lambdas: np.ndarray, window: StripWindow) -> np.ndarray:
    """max over the window of exp(lambda Re z)."""
    return np.maximum(np.exp(lambdas * window.re_min), np.exp(lambdas * window.re_max))


def gradient_bound(f: Quasipolynomial, g: Quasipolynomial, window: StripWindow) -> float:
    """Bound on |(f - g)'| over the window: sum |a_n| |lambda_n| max exp(lambda_n Re z)."""
    combined: dict[float, complex] = dict(f.terms)
    for lam, a in g.terms:
        combined[lam] = combined.get(lam, 0j) - a
    lams = np.array(list(combined.keys()), dtype=float)
    amps = np.abs(np.array(list(combined.values()), dtype=complex))
    return float((amps * np.abs(lams) * _window_weights(lams, window)).sum())


def sup_diff(
    f: Quasipolynomial, g: Quasipolynomial, window: StripWindow, grid_step: float | None = None, certified: bool = False
) -> float:
    """Max |f - g| over a grid covering the window.

    The sampled value is a lower bound on the true sup. With certified=True the gradient bound
    times the half cell diagonal is added, turning it into an upper bound.
    """
    step = window.diameter / SUP_GRID_DIVISIONS if grid_step is None else grid_step
    if not step > 0:
        raise InvalidObject(f"grid_step must be positive, got {step}")
    zz = window.grid(step)
    sampled = float(np.abs(evaluate(f, zz) - evaluate(g, zz)).max())
    if certified:
        sampled += gradient_bound(f, g, window) * step * math.sqrt(2) / 2
    return sampled


def zero_strip(qp: Quasipolynomial) -> tuple[float, float] | None:
    """Vertical strip [x_left, x_right] containing every zero; None when qp has no zeros.

    Right of x_right the top term outweighs the sum of all others, left of x_left the bottom term does.
    """
    if len(qp) == 1:
        return None
    lams, amps = qp.lambdas, np.abs(qp.coeffs)

    def right_excess(x: float) -> float:
        return logsumexp((lams[1:] - lams[0]) * x, b=amps[1:]) - math.log(amps[0])

    def left_excess(x: float) -> float:
        return logsumexp((lams[:-1] - lams[-1]) * x, b=amps[:-1]) - math.log(amps[-1])

    return _bracketed_root(left_excess, increasing=True), _bracketed_root(right_excess, increasing=False)


def _bracketed_root(func, increasing: bool) -> float:
    lo, hi = -1.0, 1.0
    while (func(lo) > 0) == increasing:
        lo *= 2
    while (func(hi) < 0) == increasing:
        hi *= 2
    return float(brentq(func, lo, hi, xtol=1e-14))


def truncate_series(
    lambdas: Iterable[float], coeffs: Iterable[complex], tail_budget: float, window: StripWindow
) -> tuple[Quasipolynomial, float]:
    """Finite stand-in for an absolutely convergent exponential series.

    The extreme frequencies are always kept and must carry nonzero coefficients. Other terms are
    dropped smallest-first while the sup over the window of the dropped part stays within budget.
    Returns the truncation and that sup bound.
    """
    lams = np.asarray(list(lambdas), dtype=float)
    amps = np.asarray(list(coeffs), dtype=complex)
    if lams.size == 0 or lams.size != amps.size:
        raise InvalidObject("Series needs matching, nonempty frequency and coefficient lists")
    top, bottom = int(np.argmax(lams)), int(np.argmin(lams))
    if amps[top] == 0 or amps[bottom] == 0:
        raise InvalidObject("The extreme frequencies must carry nonzero coefficients")
    weights = np.abs(amps) * _window_weights(lams, window)
    order = np.argsort(weights, kind="stable")
    dropped = np.zeros(lams.size, dtype=bool)
    tail = 0.0
    for idx in order:
        if idx in (top, bottom):
            continue
        if tail + weights[idx] > tail_budget:
            break
        tail += weights[idx]
        dropped[idx] = True
    kept = [(lams[i], amps[i]) for i in range(lams.size) if not dropped[i]]
    return Quasipolynomial.from_terms(kept), float(tail)
