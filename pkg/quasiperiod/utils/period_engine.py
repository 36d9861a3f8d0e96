"""Exact vertical periods from almost-period matchings, and periodic decompositions of divisors."""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.spatial import cKDTree

from quasiperiod.consts import (
    DEDUP_TOL,
    Q_MAX,
    R_MARGIN,
    SLAB_HEIGHT_FACTOR,
    SLAB_OVERLAP_FACTOR,
    TOL_PROPAGATION,
    TOL_REAL_PERIOD,
    TOL_VERIFY_PERIOD,
)
from quasiperiod.errors import (
    DecompositionIncomplete,
    EmptyDivisor,
    Incommensurable,
    InvalidObject,
    NonRealPeriod,
    NoUniqueTranslate,
    PropagationBreak,
    TooFewElements,
)
from quasiperiod.utils.common import complex_from_dict, complex_to_dict, parallel_map, require_list, require_number
from quasiperiod.utils.divisor_ops import Divisor, clamped_gamma, common_almost_periods, difference_set, min_gap
from quasiperiod.utils.quasipoly import StripWindow

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodCertificate:
    """An extracted period T with the windows on which Z + iT = Z was checked."""

    period: float
    anchor: complex
    tau_used: float
    gamma: float
    verified_windows: tuple[StripWindow, ...]
    two_sided: bool
    zero_free_checks: int | None = None

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidObject(f"Period must be positive, got {self.period}")

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "anchor": complex_to_dict(self.anchor),
            "tau_used": self.tau_used,
            "gamma": self.gamma,
            "verified_windows": [w.to_dict() for w in self.verified_windows],
            "two_sided": self.two_sided,
            "zero_free_checks": self.zero_free_checks,
        }

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "PeriodCertificate":
        prefix = f"{path}." if path else ""
        return cls(
            period=require_number(doc, "period", path),
            anchor=complex_from_dict(doc.get("anchor"), f"{prefix}anchor"),
            tau_used=require_number(doc, "tau_used", path),
            gamma=require_number(doc, "gamma", path),
            verified_windows=tuple(
                StripWindow.from_dict(w, f"{prefix}verified_windows[{i}]")
                for i, w in enumerate(require_list(doc, "verified_windows", path))
            ),
            two_sided=bool(doc.get("two_sided", False)),
            zero_free_checks=doc.get("zero_free_checks"),
        )


@dataclass(frozen=True)
class DecompositionPart:
    divisor: Divisor
    period: float
    substrip: StripWindow

    def to_dict(self) -> dict:
        return {"divisor": self.divisor.to_dict(), "period": self.period, "substrip": self.substrip.to_dict()}


@dataclass(frozen=True)
class Decomposition:
    """Disjoint periodic parts whose periods are integer multiples of a common unit."""

    parts: tuple[DecompositionPart, ...]
    common_unit: float
    multipliers: tuple[int, ...]
    certificates: tuple[PeriodCertificate, ...] = field(default_factory=tuple)

    def union(self) -> Divisor:
        merged = self.parts[0].divisor
        for part in self.parts[1:]:
            merged = merged.union(part.divisor)
        return merged

    def to_dict(self) -> dict:
        return {
            "parts": [p.to_dict() for p in self.parts],
            "common_unit": self.common_unit,
            "multipliers": list(self.multipliers),
            "certificates": [c.to_dict() for c in self.certificates],
        }


def _distinct_im(Z: Divisor, window: StripWindow) -> np.ndarray:
    pts = Z.support
    return np.unique(pts[window.contains(pts)].imag) if pts.size else np.zeros(0)


def estimate_R(Z: Divisor, W: Divisor, window: StripWindow) -> float:
    """Smallest height such that every horizontal slab of that height in the window meets both divisors."""
    gaps = []
    for name, D in (("Z", Z), ("W", W)):
        ims = _distinct_im(D, window)
        if ims.size == 0:
            raise EmptyDivisor(f"Divisor {name} has no points in {window.to_dict()}")
        gaps.append(float(np.diff(ims).max()) if ims.size > 1 else window.height)
    return max(gaps)


def _unique_neighbors(tree: cKDTree, targets: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Index of the unique point within radius of each target, -1 when there is none and -2 when several."""
    dist, idx = tree.query(np.column_stack([targets.real, targets.imag]), k=2, distance_upper_bound=radius)
    dist = np.atleast_2d(dist)
    idx = np.atleast_2d(idx)
    hits = np.isfinite(dist) & (dist < radius)
    out = np.where(hits[:, 0], idx[:, 0], -1)
    out = np.where(hits[:, 1], -2, out)
    return out, dist[:, 0]


def _slabs(anchor_im: float, window: StripWindow, height: float, stride: float) -> Iterator[tuple[float, float]]:
    """Overlapping slabs covering the window, ordered outward from the anchor."""
    j_low = math.floor((window.im_min - anchor_im) / stride) - 1
    j_high = math.ceil((window.im_max - anchor_im) / stride) + 1
    for j in sorted(range(j_low, j_high + 1), key=lambda j: (abs(j), j)):
        lo = max(anchor_im + j * stride, window.im_min)
        hi = min(anchor_im + j * stride + height, window.im_max)
        if lo < hi:
            yield lo, hi


def _zero_free_translates(anchor: complex, d: complex, window: StripWindow, zero_free: StripWindow) -> int:
    """Check that the translates anchor + M d, |M| up to the window height over |Im d|, avoid the zero-free substrip."""
    m_max = max(1, int(window.height // abs(d.imag)))
    for m in range(1, m_max + 1):
        for sign in (1, -1):
            x = (anchor + sign * m * d).real
            if zero_free.re_min < x < zero_free.re_max:
                raise NonRealPeriod(
                    f"Translate by {sign * m} steps of {d} enters the zero-free substrip "
                    f"({zero_free.re_min}, {zero_free.re_max})"
                )
    return m_max


def extract_period(
    Z: Divisor,
    W: Divisor,
    tau: float,
    gamma: float,
    window: StripWindow,
    anchor: complex | None = None,
    zero_free: StripWindow | None = None,
    tol_real: float = TOL_REAL_PERIOD,
    tol: float = TOL_PROPAGATION,
) -> PeriodCertificate:
    """Turn a common gamma/2-almost-period tau of Z and W into an exact vertical period of Z.

    The anchor's translate z + i tau has a unique partner z' in Z; T = Im(z' - z). The translation
    is then carried slab by slab through the window, checking at every point that the partner
    moves by the same z' - z and that differences with the nearest point of W are preserved.
    """
    if not tau > 1:
        raise InvalidObject(f"tau must exceed 1, got {tau}")
    if not gamma > 0:
        raise InvalidObject(f"gamma must be positive, got {gamma}")
    pts, w_pts = Z.support, W.support
    inside = pts[window.contains(pts)] if pts.size else pts
    if inside.size == 0 or w_pts.size == 0:
        raise EmptyDivisor(f"Nothing to anchor on in {window.to_dict()}")
    z_tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    w_tree = cKDTree(np.column_stack([w_pts.real, w_pts.imag]))

    # anchor and its unique translate
    target = window.center if anchor is None else complex(anchor)
    z_n = complex(inside[np.argmin(np.abs(inside - target))])
    partner, _ = _unique_neighbors(z_tree, np.array([z_n + 1j * tau]), gamma / 2)
    if partner[0] < 0:
        found = "several points" if partner[0] == -2 else "no point"
        raise NoUniqueTranslate(f"{found} within gamma/2={gamma / 2} of {z_n} + i*{tau}")
    d = complex(pts[partner[0]]) - z_n
    if abs(d.real) >= tol_real:
        raise NonRealPeriod(f"Translate of {z_n} moves horizontally by {d.real:.3e}")
    checks = _zero_free_translates(z_n, d, window, zero_free) if zero_free is not None else None
    T = d.imag
    logger.debug(f"Anchor {z_n}, candidate period {T}")

    # propagate through overlapping slabs
    R = estimate_R(Z, W, window)
    height = SLAB_HEIGHT_FACTOR * R
    stride = height - SLAB_OVERLAP_FACTOR * R
    lim = Z.window
    verified = []
    for lo, hi in _slabs(z_n.imag, window, height, stride):
        slab = window.with_im(lo, hi)
        zs = inside[(inside.imag >= lo) & (inside.imag <= hi)]
        zs = zs[(zs.imag + tau + gamma / 2 <= lim.im_max) & (zs.imag + tau - gamma / 2 >= lim.im_min)]
        if zs.size:
            idx, _ = _unique_neighbors(z_tree, zs + 1j * tau, gamma / 2)
            if (idx < 0).any():
                bad = complex(zs[np.flatnonzero(idx < 0)[0]])
                raise PropagationBreak(f"No unique translate of {bad} in slab [{lo:.4g}, {hi:.4g}]")
            moved = pts[idx] - zs
            if np.abs(moved - d).max() > tol:
                bad = complex(zs[np.argmax(np.abs(moved - d))])
                raise PropagationBreak(f"Translate of {bad} drifts from {d} in slab [{lo:.4g}, {hi:.4g}]")
            _check_differences(zs, pts[idx], w_tree, w_pts, tau, gamma, W.window, tol, lo, hi)
        verified.append(slab)

    two_sided = verify_period(Z.restrict(window) if Z.window != window else Z, T, window, TOL_VERIFY_PERIOD)
    if not two_sided:
        raise PropagationBreak(f"Period {T} does not map Z onto itself in both directions on {window.to_dict()}")
    return PeriodCertificate(T, z_n, tau, gamma, tuple(verified), two_sided, checks)


def _check_differences(zs, z_primes, w_tree, w_pts, tau, gamma, w_window, tol, lo, hi) -> None:
    """z - w = z' - w' for the nearest w in W and its own translate w'."""
    _, w_idx = w_tree.query(np.column_stack([zs.real, zs.imag]))
    ws = w_pts[w_idx]
    keep = (ws.imag + tau + gamma / 2 <= w_window.im_max) & (ws.imag + tau - gamma / 2 >= w_window.im_min)
    if not keep.any():
        return
    w_idx2, _ = _unique_neighbors(w_tree, ws[keep] + 1j * tau, gamma / 2)
    if (w_idx2 < 0).any():
        raise PropagationBreak(f"W has no unique translate in slab [{lo:.4g}, {hi:.4g}]")
    drift = np.abs((zs[keep] - ws[keep]) - (z_primes[keep] - w_pts[w_idx2]))
    if drift.max() > 2 * tol:
        raise PropagationBreak(
            f"Differences z - w not preserved (drift {drift.max():.3e}) in slab [{lo:.4g}, {hi:.4g}]"
        )


def verify_period(Z: Divisor, T: float, window: StripWindow, tol: float = TOL_VERIFY_PERIOD) -> bool:
    """Every point of Z in the window maps under +/- iT onto a point of Z with equal multiplicity.

    Images leaving the divisor's Im range are allowed.
    """
    if not T > 0:
        raise InvalidObject(f"Period must be positive, got {T}")
    pts, mults = Z.support, Z.multiplicities
    if pts.size == 0:
        return True
    sel = window.contains(pts)
    src, src_m = pts[sel], mults[sel]
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    lim = Z.window
    for sign in (1.0, -1.0):
        images = src + sign * 1j * T
        stays = (images.imag >= lim.im_min) & (images.imag <= lim.im_max)
        if not stays.any():
            continue
        dist, idx = tree.query(np.column_stack([images[stays].real, images[stays].imag]))
        if (dist > tol).any() or (mults[idx] != src_m[stays]).any():
            return False
    return True


def _period_candidates(Z: Divisor, T: float, window: StripWindow, tol: float) -> list[float]:
    pts = Z.support
    inside = pts[window.contains(pts)]
    cands = {T / q for q in range(1, 65)}
    if inside.size:
        ref = inside[np.argmin(np.abs(inside - window.center))]
        same_column = pts[np.abs(pts.real - ref.real) <= tol]
        diffs = same_column.imag - ref.imag
        cands.update(float(d) for d in diffs if tol < d <= T + tol)
    return sorted(cands)


def minimal_period(Z: Divisor, T: float, window: StripWindow, tol: float = TOL_VERIFY_PERIOD) -> float:
    """Smallest verified period among T/q and the same-column Im differences up to T."""
    return minimal_common_period([Z], T, window, tol)


def minimal_common_period(
    divisors: Iterable[Divisor], T: float, window: StripWindow, tol: float = TOL_VERIFY_PERIOD
) -> float:
    """Smallest candidate period verified for every divisor; T when nothing smaller verifies."""
    divisors = list(divisors)
    for cand in _period_candidates(divisors[0], T, window, tol):
        if cand >= T - tol:
            break
        if all(verify_period(D, cand, window, tol) for D in divisors):
            return cand
    return T


def _continued_fraction(x: float) -> Iterator[int]:
    """Partial quotients of x > 0, stopping once the remainder vanishes."""
    while True:
        a = math.floor(x)
        yield a
        rem = x - a
        if rem < 1e-15:
            return
        x = 1.0 / rem


def _rational(x: float, tol: float, q_max: int) -> tuple[int, int] | None:
    """First convergent p/q of x with |q x - p| < tol and q <= q_max."""
    h_prev, h = 1, 0
    k_prev, k = 0, 1
    for a in _continued_fraction(x):
        h_prev, h = a * h_prev + h, h_prev
        k_prev, k = a * k_prev + k, k_prev
        if k_prev > q_max:
            return None
        if abs(k_prev * x - h_prev) < tol:
            return h_prev, k_prev
    return None


def commensurate(periods: Iterable[float], tol: float = 1e-9, q_max: int = Q_MAX) -> tuple[float, list[int]]:
    """Common unit T0 and integers q_k with T_k = q_k T0 within tol * T0."""
    periods = [float(p) for p in periods]
    if not periods:
        raise InvalidObject("No periods to compare")
    if any(not p > 0 for p in periods):
        raise InvalidObject(f"Periods must be positive: {periods}")
    ref = periods[0]
    fractions = []
    for p in periods:
        frac = _rational(p / ref, tol, q_max)
        if frac is None:
            raise Incommensurable(f"{p} / {ref} has no convergent within {tol} at denominator <= {q_max}")
        fractions.append(frac)
    denom = math.lcm(*(q for _, q in fractions))
    multipliers = [p * (denom // q) for p, q in fractions]
    g = math.gcd(*multipliers)
    multipliers = [m // g for m in multipliers]
    unit = ref * g / denom
    for p, m in zip(periods, multipliers):
        if abs(p - m * unit) >= tol * unit:
            raise Incommensurable(f"{p} is not {m} x {unit} within {tol}")
    return unit, multipliers


def _extract_on(Z, W, substrip, gamma, tau_max, merge_tol):
    """Period of Z and W restricted to one substrip."""
    Zk, Wk = Z.restrict(substrip), W.restrict(substrip)
    if len(Zk) == 0 or len(Wk) == 0:
        raise DecompositionIncomplete(f"Substrip {substrip.to_dict()} holds no points")
    R = estimate_R(Zk, Wk, substrip)
    if gamma is None:
        try:
            gamma = clamped_gamma(0.5 * min_gap(difference_set(Zk, Wk, 2 * R + R_MARGIN, merge_tol)))
        except TooFewElements as exc:
            raise DecompositionIncomplete(f"No gap estimate on {substrip.to_dict()}") from exc
    eps = gamma / 2
    tau_max = min(tau_max, 0.5 * substrip.height - 2 * eps)
    inner = substrip.shrink(eps, tau_max + eps)
    report = common_almost_periods(Zk, Wk, eps, inner, tau_max)
    taus = [t for t in report.taus if t > 1]
    if not taus:
        raise DecompositionIncomplete(f"No almost period above 1 on {substrip.to_dict()}")
    try:
        cert = extract_period(Zk, Wk, taus[0], gamma, substrip)
    except (NoUniqueTranslate, PropagationBreak) as exc:
        raise DecompositionIncomplete(f"Extraction failed on {substrip.to_dict()}: {exc}") from exc
    period = minimal_common_period([Zk, Wk], cert.period, substrip)
    return cert, period


def decompose(
    Z: Divisor,
    W: Divisor,
    substrips: list[StripWindow],
    gamma_list: list[float | None] | None = None,
    tau_max: float | None = None,
    tol: float = 1e-9,
    merge_tol: float = DEDUP_TOL,
) -> tuple[Decomposition, Decomposition]:
    """Split Z and W into the parts between consecutive nested substrips, each with its own period.

    merge_tol is handed to the difference sets behind the per-substrip gap estimates.
    """
    if not substrips:
        raise InvalidObject("At least one substrip is required")
    for inner, outer in zip(substrips, substrips[1:]):
        if not (outer.re_min <= inner.re_min and inner.re_max <= outer.re_max):
            raise InvalidObject("Substrips must be nested and increasing")
    gamma_list = list(gamma_list) if gamma_list is not None else [None] * len(substrips)
    if len(gamma_list) != len(substrips):
        raise InvalidObject("gamma_list must match the substrips")
    tau_max = 0.25 * min(s.height for s in substrips) if tau_max is None else tau_max

    results = parallel_map(
        lambda k: _extract_on(Z, W, substrips[k], gamma_list[k], tau_max, merge_tol), range(len(substrips))
    )
    certs = tuple(c for c, _ in results)
    periods = [p for _, p in results]
    unit, multipliers = commensurate(periods, tol)

    def parts_of(D: Divisor) -> tuple[DecompositionPart, ...]:
        parts, previous = [], None
        for strip, period in zip(substrips, periods):
            piece = D.restrict(strip)
            if previous is not None:
                piece = Divisor(tuple(p for p in piece.points if not previous.contains(p[0])), strip)
            parts.append(DecompositionPart(piece, period, strip))
            previous = strip
        return tuple(parts)

    return (
        Decomposition(parts_of(Z), unit, tuple(multipliers), certs),
        Decomposition(parts_of(W), unit, tuple(multipliers), certs),
    )
