"""Zeros of quasipolynomials inside a rectangle by phase tracking and Newton refinement."""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from quasiperiod.consts import (
    BOUNDARY_CLEARANCE,
    CLUSTER_NOISE_DIAMETER,
    INITIAL_SIDE_SAMPLES,
    JITTER_FRACTION,
    JITTER_RETRIES,
    MAX_PHASE_DOUBLINGS,
    MAX_SEGMENT_REFINEMENTS,
    MAX_SUBDIVISION_DEPTH,
    NEWTON_MAX_HALVINGS,
    NEWTON_MAX_ITER,
    PHASE_STEP_LIMIT,
    ROUNDING_MARGIN,
    SPLIT_JITTER_FRACTION,
    TOL_CLUSTER,
    TOL_ZERO,
)
from quasiperiod.errors import (
    ConstantDerivative,
    InvalidObject,
    NonConvergence,
    NumericalError,
    PhaseAmbiguity,
    ZeroOnBoundary,
)
from quasiperiod.utils.common import parallel_map, require_list, require_number
from quasiperiod.utils.divisor_ops import Divisor
from quasiperiod.utils.quasipoly import (
    Quasipolynomial,
    StripWindow,
    derivative,
    evaluate,
    relative_residual,
    scaled_evaluate,
)

logger = logging.getLogger(__name__)

_MIN_SEGMENT = 1e-13  # contour parameter units (one side has length 1)


@dataclass(frozen=True)
class ZeroEntry:
    point: complex
    multiplicity: int
    residual: float

    def to_dict(self) -> dict:
        return {"re": self.point.real, "im": self.point.imag, "mult": self.multiplicity, "residual": self.residual}


@dataclass(frozen=True)
class ZeroList:
    """Zeros found in a window, sorted by (Im, Re); residuals are relative_residual values."""

    entries: tuple[ZeroEntry, ...]
    window: StripWindow
    tol_zero: float = TOL_ZERO
    isolation_radius: float = math.inf

    @property
    def points(self) -> np.ndarray:
        return np.array([e.point for e in self.entries], dtype=complex)

    @property
    def total_multiplicity(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def to_divisor(self) -> Divisor:
        return Divisor(tuple((e.point, e.multiplicity) for e in self.entries), self.window)

    def to_dict(self) -> dict:
        return {
            "zeros": [e.to_dict() for e in self.entries],
            "window": self.window.to_dict(),
            "tol_zero": self.tol_zero,
        }

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "ZeroList":
        prefix = f"{path}." if path else ""
        window = StripWindow.from_dict(doc.get("window") if isinstance(doc, dict) else None, f"{prefix}window")
        entries = []
        for i, z in enumerate(require_list(doc, "zeros", path)):
            z_path = f"{prefix}zeros[{i}]"
            entries.append(
                ZeroEntry(
                    complex(require_number(z, "re", z_path), require_number(z, "im", z_path)),
                    int(z.get("mult", 1)),
                    float(z.get("residual", 0.0)),
                )
            )
        return cls(tuple(entries), window, float(doc.get("tol_zero", TOL_ZERO)))


### Contour winding ###
def _contour_points(rect: StripWindow, t: np.ndarray) -> np.ndarray:
    """Counterclockwise boundary parametrized by t in [0, 4], one unit per side."""
    side = np.minimum(np.floor(t), 3).astype(int)
    frac = t - side
    x0, x1, y0, y1 = rect.re_min, rect.re_max, rect.im_min, rect.im_max
    sides = [side == 0, side == 1, side == 2]
    re = np.select(sides, [x0 + frac * (x1 - x0), np.full_like(t, x1), x1 - frac * (x1 - x0)], x0)
    im = np.select(sides, [np.full_like(t, y0), y0 + frac * (y1 - y0), np.full_like(t, y1)], y1 - frac * (y1 - y0))
    return re + 1j * im


def _wrap(phase: np.ndarray) -> np.ndarray:
    return (phase + math.pi) % (2 * math.pi) - math.pi


def contour_winding(
    log_fn: Callable[[np.ndarray], np.ndarray],
    rect: StripWindow,
    clearance: float = BOUNDARY_CLEARANCE,
    samples_per_side: int = INITIAL_SIDE_SAMPLES,
) -> int:
    """Winding number around the rectangle of a function given through its complex logarithm.

    Segments are bisected until every phase step is below pi/2 and agrees with its midpoint.
    The modulus must stay above clearance times its maximum on the contour.
    """
    samples = samples_per_side
    for _ in range(MAX_PHASE_DOUBLINGS):
        t = np.linspace(0.0, 4.0, 4 * samples + 1)
        logs = log_fn(_contour_points(rect, t))
        for _ in range(MAX_SEGMENT_REFINEMENTS):
            _check_clearance(logs, clearance, rect)
            steps = _wrap(np.diff(logs.imag))
            t_mid = 0.5 * (t[:-1] + t[1:])
            logs_mid = log_fn(_contour_points(rect, t_mid))
            halves = _wrap(logs_mid.imag - logs[:-1].imag) + _wrap(logs[1:].imag - logs_mid.imag)
            bad = (np.abs(steps) >= PHASE_STEP_LIMIT) | (np.abs(halves - steps) > 1e-9)
            if not bad.any():
                break
            if np.diff(t)[bad].min() < _MIN_SEGMENT:
                raise ZeroOnBoundary(f"Phase cannot be resolved on the contour of {rect.to_dict()}")
            order = np.argsort(np.concatenate([t, t_mid[bad]]), kind="stable")
            t = np.concatenate([t, t_mid[bad]])[order]
            logs = np.concatenate([logs, logs_mid[bad]])[order]
        else:
            raise PhaseAmbiguity(f"Phase refinement did not settle on {rect.to_dict()}")
        total = _wrap(np.diff(logs.imag)).sum() / (2 * math.pi)
        winding = round(total)
        if abs(total - winding) < ROUNDING_MARGIN:
            return int(winding)
        logger.debug(f"Winding {total:.4f} not near an integer; doubling samples")
        samples *= 2
    raise PhaseAmbiguity(f"Winding number on {rect.to_dict()} stayed ambiguous after {MAX_PHASE_DOUBLINGS} doublings")


def _check_clearance(logs: np.ndarray, clearance: float, rect: StripWindow) -> None:
    moduli = logs.real
    if not np.isfinite(moduli).all() or moduli.min() < moduli.max() + math.log(clearance):
        raise ZeroOnBoundary(f"Function too small on the contour of {rect.to_dict()}")


def _scaled_log(qp: Quasipolynomial) -> Callable[[np.ndarray], np.ndarray]:
    def log_fn(z: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(scaled_evaluate(qp, z))

    return log_fn


def count_zeros(qp: Quasipolynomial, rect: StripWindow) -> int:
    """Number of zeros inside rect, with multiplicity."""
    if len(qp) == 1:
        return 0
    return contour_winding(_scaled_log(qp), rect)


def jittered_window(rect: StripWindow, k: int, gamma: float) -> StripWindow:
    d = k * gamma / 7
    return StripWindow(rect.re_min + d, rect.re_max + d, rect.im_min + d, rect.im_max + d)


def count_zeros_jittered(qp: Quasipolynomial, rect: StripWindow, gamma: float | None = None) -> tuple[int, StripWindow]:
    """count_zeros, moving the rectangle by k*gamma/7 along both axes when a zero sits on its edge."""
    gamma = JITTER_FRACTION * min(rect.width, rect.height) if gamma is None else gamma
    for k in range(JITTER_RETRIES + 1):
        candidate = jittered_window(rect, k, gamma)
        try:
            return count_zeros(qp, candidate), candidate
        except ZeroOnBoundary:
            logger.info(f"Zero near the boundary of {candidate.to_dict()}; jittering")
    raise ZeroOnBoundary(f"Boundary clearance still violated after {JITTER_RETRIES} jitters of {rect.to_dict()}")


### Newton ###
def newton_polish(
    qp: Quasipolynomial, z0: complex, tol_zero: float = TOL_ZERO, max_iter: int = NEWTON_MAX_ITER
) -> complex:
    """Damped Newton iteration until the relative residual of Q at z drops below tol_zero."""
    dq = derivative(qp)
    z = complex(z0)
    fz = evaluate(qp, z)
    for _ in range(max_iter):
        if relative_residual(qp, z) < tol_zero:
            return z
        dfz = evaluate(dq, z)
        if dfz == 0 or not np.isfinite(dfz):
            raise NonConvergence(f"Vanishing derivative at {z}")
        step = fz / dfz
        for _ in range(NEWTON_MAX_HALVINGS):
            candidate = z - step
            f_candidate = evaluate(qp, candidate)
            if abs(f_candidate) < abs(fz):
                break
            step /= 2
        else:
            raise NonConvergence(f"Newton stalled at {z} with |Q| = {abs(fz):.3e}")
        z, fz = candidate, f_candidate
    if relative_residual(qp, z) < tol_zero:
        return z
    raise NonConvergence(f"Newton did not reach {tol_zero} in {max_iter} iterations from {z0}")


def _restart_points(cell: StripWindow) -> list[complex]:
    c = cell.center
    dx, dy = cell.width / 4, cell.height / 4
    return [c, c + dx + 1j * dy, c - dx + 1j * dy, c - dx - 1j * dy, c + dx - 1j * dy]


def _polish_simple(qp: Quasipolynomial, cell: StripWindow, tol_zero: float) -> ZeroEntry:
    for start in _restart_points(cell):
        try:
            z = newton_polish(qp, start, tol_zero)
        except NonConvergence:
            continue
        if cell.contains(z):
            return ZeroEntry(z, 1, relative_residual(qp, z))
    raise NonConvergence(f"No Newton restart converged inside {cell.to_dict()}")


def _resolve_multiple(qp: Quasipolynomial, cell: StripWindow, m: int, tol_zero: float) -> ZeroEntry | None:
    """A single zero of multiplicity m: a simple zero of Q^(m-1) where Q, ..., Q^(m-2) vanish."""
    chain = [qp]
    try:
        for _ in range(m - 1):
            chain.append(derivative(chain[-1]))
    except ConstantDerivative:
        return None
    for start in _restart_points(cell):
        try:
            z = newton_polish(chain[-1], start, tol_zero)
        except NonConvergence:
            continue
        if cell.contains(z) and all(relative_residual(q, z) < tol_zero for q in chain[:-1]):
            return ZeroEntry(z, m, relative_residual(qp, z))
    return None


### Subdivision ###
@dataclass(frozen=True)
class _Cell:
    rect: StripWindow
    count: int
    depth: int


def _split(qp: Quasipolynomial, cell: _Cell) -> list[_Cell]:
    rect = cell.rect
    gamma = SPLIT_JITTER_FRACTION * min(rect.width, rect.height)
    for k in range(JITTER_RETRIES + 1):
        mx = 0.5 * (rect.re_min + rect.re_max) + k * gamma / 7
        my = 0.5 * (rect.im_min + rect.im_max) + k * gamma / 7
        quads = [
            StripWindow(rect.re_min, mx, rect.im_min, my),
            StripWindow(mx, rect.re_max, rect.im_min, my),
            StripWindow(rect.re_min, mx, my, rect.im_max),
            StripWindow(mx, rect.re_max, my, rect.im_max),
        ]
        try:
            counts = [count_zeros(qp, q) for q in quads]
        except (ZeroOnBoundary, PhaseAmbiguity):
            continue
        if sum(counts) == cell.count:
            return [_Cell(q, c, cell.depth + 1) for q, c in zip(quads, counts)]
        logger.debug(f"Child counts {counts} do not add to {cell.count}; moving split lines")
    raise ZeroOnBoundary(f"Could not split {rect.to_dict()} with conserved counts")


def _process(qp: Quasipolynomial, cell: _Cell, tol_zero: float, tol_cluster: float) -> list[ZeroEntry] | list[_Cell]:
    """A leaf entry, or the children that still need work."""
    rect = cell.rect
    if cell.count == 1:
        try:
            return [_polish_simple(qp, rect, tol_zero)]
        except NonConvergence:
            if rect.diameter < tol_cluster or cell.depth >= MAX_SUBDIVISION_DEPTH:
                raise
            return [c for c in _split(qp, cell) if c.count > 0]
    if rect.diameter < tol_cluster:
        return [ZeroEntry(rect.center, cell.count, relative_residual(qp, rect.center))]
    resolved = _resolve_multiple(qp, rect, cell.count, tol_zero)
    if resolved is not None:
        return [resolved]
    if cell.depth >= MAX_SUBDIVISION_DEPTH:
        raise NonConvergence(f"Subdivision depth exhausted on {rect.to_dict()}")
    try:
        return [c for c in _split(qp, cell) if c.count > 0]
    except ZeroOnBoundary:
        if rect.diameter < CLUSTER_NOISE_DIAMETER:
            logger.warning(f"Reporting an unresolved cluster of {cell.count} zeros at {rect.center}")
            return [ZeroEntry(rect.center, cell.count, relative_residual(qp, rect.center))]
        raise


def find_zeros(
    qp: Quasipolynomial, rect: StripWindow, tol_zero: float = TOL_ZERO, tol_cluster: float = TOL_CLUSTER
) -> ZeroList:
    """All zeros in rect with multiplicities, by quadrisection down to cells holding one zero."""
    if not tol_zero > 0:
        raise InvalidObject(f"tol_zero must be positive, got {tol_zero}")
    total, rect = count_zeros_jittered(qp, rect)
    logger.debug(f"{total} zeros in {rect.to_dict()}")
    entries: list[ZeroEntry] = []
    cells = [_Cell(rect, total, 0)] if total > 0 else []
    while cells:
        results = parallel_map(lambda c: _process(qp, c, tol_zero, tol_cluster), cells)
        cells = []
        for result in results:
            for item in result:
                (entries if isinstance(item, ZeroEntry) else cells).append(item)
    entries.sort(key=lambda e: (e.point.imag, e.point.real))
    if sum(e.multiplicity for e in entries) != total:
        raise NumericalError(f"Located multiplicities do not add up to the count {total}")
    pts = np.array([e.point for e in entries], dtype=complex)
    isolation = math.inf
    if pts.size > 1:
        isolation = 0.5 * float(np.abs(pts[:, None] - pts[None, :])[~np.eye(pts.size, dtype=bool)].min())
    return ZeroList(tuple(entries), rect, tol_zero, isolation)
