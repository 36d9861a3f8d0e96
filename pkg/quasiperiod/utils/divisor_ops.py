"""Divisor algebra: difference sets, gap estimates and epsilon-almost-period verification."""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from quasiperiod.consts import DEDUP_TOL, GAMMA_CAP, GAP_TREND_SCALES, SCAN_REFINE_XATOL
from quasiperiod.errors import EmptyClasses, InvalidObject, MarginViolation, NotAnAlmostPeriod, TooFewElements
from quasiperiod.utils.common import max_consecutive_gap, parallel_map, require, require_list, require_number
from quasiperiod.utils.quasipoly import StripWindow

logger = logging.getLogger(__name__)

_INFEASIBLE = 1e6


def _as_xy(values: np.ndarray) -> np.ndarray:
    return np.column_stack([values.real, values.imag])


def _cluster_labels(values: np.ndarray, tol: float) -> np.ndarray:
    """Connected components of the 'closer than tol' graph."""
    n = values.size
    if n < 2:
        return np.zeros(n, dtype=int)
    pairs = cKDTree(_as_xy(values)).query_pairs(tol, output_type="ndarray")
    if not len(pairs):
        return np.arange(n)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return connected_components(graph, directed=False)[1]


def dedup(values: Iterable[complex], tol: float = DEDUP_TOL) -> np.ndarray:
    """Collapse values closer than tol onto their first representative; sorted by (Im, Re)."""
    values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=complex)
    if values.size == 0:
        return values
    labels = _cluster_labels(values, tol)
    _, first = np.unique(labels, return_index=True)
    return sort_points(values[np.sort(first)])


def sort_points(values: np.ndarray) -> np.ndarray:
    return values[np.lexsort((values.real, values.imag))]


@dataclass(frozen=True)
class Divisor:
    """A finite multiset of points inside a window, sorted by (Im, Re)."""

    points: tuple[tuple[complex, int], ...]
    window: StripWindow

    def __post_init__(self):
        """Sort and check invariants."""
        pts = tuple(sorted(((complex(z), int(m)) for z, m in self.points), key=lambda p: (p[0].imag, p[0].real)))
        for z, m in pts:
            if m < 1:
                raise InvalidObject(f"Multiplicity must be positive at {z}")
            if not self.window.contains(z):
                raise InvalidObject(f"Point {z} lies outside the divisor window")
        if len({z for z, _ in pts}) != len(pts):
            raise InvalidObject("Divisor points must be pairwise distinct")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points: Iterable, window: StripWindow, merge_tol: float = DEDUP_TOL) -> "Divisor":
        """Build from complex values or (value, multiplicity) pairs.

        Points outside the window are dropped and points closer than merge_tol are merged with
        their multiplicities added.
        """
        zs, ms = [], []
        for p in points:
            z, m = (p, 1) if not isinstance(p, tuple) else p
            zs.append(complex(z))
            ms.append(int(m))
        values = np.array(zs, dtype=complex)
        mults = np.array(ms, dtype=int)
        inside = window.contains(values) if values.size else np.zeros(0, dtype=bool)
        values, mults = values[inside], mults[inside]
        labels = _cluster_labels(values, merge_tol)
        merged = []
        for label in np.unique(labels):
            members = np.flatnonzero(labels == label)
            merged.append((complex(values[members[0]]), int(mults[members].sum())))
        return cls(tuple(merged), window)

    @property
    def support(self) -> np.ndarray:
        return np.array([z for z, _ in self.points], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self.points], dtype=int)

    @property
    def total_multiplicity(self) -> int:
        return int(sum(m for _, m in self.points))

    def expanded(self) -> np.ndarray:
        """Each point repeated by its multiplicity."""
        return np.repeat(self.support, self.multiplicities)

    def __len__(self) -> int:
        return len(self.points)

    def restrict(self, window: StripWindow) -> "Divisor":
        """Points inside window, re-windowed."""
        return Divisor(tuple(p for p in self.points if window.contains(p[0])), window)

    def restrict_re(self, re_min: float, re_max: float) -> "Divisor":
        """Points with re_min < Re z < re_max, keeping the window."""
        return Divisor(tuple(p for p in self.points if re_min < p[0].real < re_max), self.window)

    def negated(self) -> "Divisor":
        w = self.window
        return Divisor(tuple((-z, m) for z, m in self.points), StripWindow(-w.re_max, -w.re_min, -w.im_max, -w.im_min))

    def union(self, other: "Divisor") -> "Divisor":
        """Sum of divisors over the smallest window holding both."""
        a, b = self.window, other.window
        window = StripWindow(
            min(a.re_min, b.re_min), max(a.re_max, b.re_max), min(a.im_min, b.im_min), max(a.im_max, b.im_max)
        )
        return Divisor.from_points(list(self.points) + list(other.points), window, merge_tol=0.0)

    def to_dict(self) -> dict:
        return {
            "points": [{"re": z.real, "im": z.imag, "mult": m} for z, m in self.points],
            "window": self.window.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "Divisor":
        prefix = f"{path}." if path else ""
        window = StripWindow.from_dict(doc.get("window") if isinstance(doc, dict) else None, f"{prefix}window")
        points = []
        for i, p in enumerate(require_list(doc, "points", path)):
            p_path = f"{prefix}points[{i}]"
            z = complex(require_number(p, "re", p_path), require_number(p, "im", p_path))
            mult = int(require_number(p, "mult", p_path)) if "mult" in p else 1
            points.append((z, mult))
        return cls(tuple(points), window)


@dataclass(frozen=True)
class TranslationMatch:
    """One-directional matching of Z + i tau against Z."""

    tau: float
    ok: bool
    certified: bool
    max_displacement: float
    pairs: tuple[tuple[complex, complex], ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class AlmostPeriodReport:
    """Verified translation numbers found on a scan range."""

    epsilon: float
    taus: tuple[float, ...]
    displacements: tuple[float, ...]
    density_gap: float
    scan_range: tuple[float, float]
    inner_window: StripWindow
    certified: bool = True

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "taus": list(self.taus),
            "displacements": list(self.displacements),
            "density_gap": self.density_gap,
            "scan_range": list(self.scan_range),
            "inner_window": self.inner_window.to_dict(),
            "certified": self.certified,
        }

    @classmethod
    def from_dict(cls, doc: dict, path: str = "") -> "AlmostPeriodReport":
        prefix = f"{path}." if path else ""
        taus = tuple(float(t) for t in require_list(doc, "taus", path))
        return cls(
            epsilon=require_number(doc, "epsilon", path),
            taus=taus,
            displacements=tuple(float(d) for d in doc.get("displacements", [0.0] * len(taus))),
            density_gap=float(require(doc, "density_gap", path)),
            scan_range=tuple(float(v) for v in require_list(doc, "scan_range", path)),
            inner_window=StripWindow.from_dict(doc.get("inner_window"), f"{prefix}inner_window"),
            certified=bool(doc.get("certified", True)),
        )


def difference_set(Z: Divisor, W: Divisor, im_bound: float, merge_tol: float = DEDUP_TOL) -> np.ndarray:
    """Distinct values z - w with |Im(z - w)| <= im_bound, sorted by (Im, Re).

    Values closer than merge_tol count as one; computed zeros need a merge_tol near their cluster tolerance.
    """
    if not im_bound > 0:
        raise InvalidObject(f"im_bound must be positive, got {im_bound}")
    z, w = Z.support, W.support
    if z.size == 0 or w.size == 0:
        return np.zeros(0, dtype=complex)
    w = w[np.argsort(w.imag, kind="stable")]
    chunks = []
    for start in range(0, z.size, 512):
        block = z[start : start + 512, None] - w[None, :]
        chunks.append(block[np.abs(block.imag) <= im_bound])
    return dedup(np.concatenate(chunks), merge_tol)


def sum_set(Z: Divisor, W: Divisor, im_bound: float, merge_tol: float = DEDUP_TOL) -> np.ndarray:
    """Distinct values z + w with |Im(z + w)| <= im_bound."""
    return difference_set(Z, W.negated(), im_bound, merge_tol)


def min_gap(diffs: Iterable[complex]) -> float:
    """Minimum distance between distinct elements."""
    values = np.unique(np.asarray(list(diffs) if not isinstance(diffs, np.ndarray) else diffs, dtype=complex))
    if values.size < 2:
        raise TooFewElements(f"min_gap needs at least two distinct values, got {values.size}")
    dist, _ = cKDTree(_as_xy(values)).query(_as_xy(values), k=2)
    return float(dist[:, 1].min())


def clamped_gamma(gap: float) -> float:
    """The gap parameter normalized into (0, 1/2]."""
    return min(gap, GAMMA_CAP)


def gap_trend(
    Z: Divisor,
    W: Divisor,
    window: StripWindow,
    im_bound: float,
    scales: Iterable[float] = GAP_TREND_SCALES,
    merge_tol: float = DEDUP_TOL,
) -> list[float]:
    """min_gap of the difference set on centered Im-windows of growing height."""
    center = window.center.imag
    gaps = []
    for scale in scales:
        half = 0.5 * window.height * scale
        sub = window.with_im(center - half, center + half)
        try:
            gaps.append(min_gap(difference_set(Z.restrict(sub), W.restrict(sub), im_bound, merge_tol)))
        except TooFewElements:
            gaps.append(math.inf)
    return gaps


def _check_margins(Z: Divisor, inner: StripWindow, tau: float, epsilon: float) -> None:
    if not Z.window.contains_window(inner, re_margin=epsilon, im_margin=abs(tau) + epsilon):
        raise MarginViolation(
            f"Inner window {inner.to_dict()} translated by {tau} with margin {epsilon} "
            f"leaves the divisor window {Z.window.to_dict()}"
        )


def _deep(inner: StripWindow, epsilon: float) -> StripWindow | None:
    """Points of inner at distance >= epsilon from its boundary are mandatory in matchings."""
    try:
        return inner.shrink(epsilon)
    except InvalidObject:
        return None


def _support_gap(Z: Divisor) -> float:
    return min_gap(Z.support) if len(Z) >= 2 else math.inf


def match_translation(Z: Divisor, tau: float, epsilon: float, inner: StripWindow) -> TranslationMatch:
    """Match Z + i tau against Z, moving every mandatory point by less than epsilon.

    Mandatory sources lie epsilon-deep inside inner; mandatory targets are points whose preimage
    does. Points in the epsilon band around inner may stay unmatched.
    """
    _check_margins(Z, inner, tau, epsilon)
    if _support_gap(Z) > 2 * epsilon:
        return _nearest_neighbor_match(Z, tau, epsilon, inner)
    logger.debug(f"Support gap <= 2*eps={2 * epsilon}; solving assignment (uncertified geometry)")
    return _assignment_match(Z, tau, epsilon, inner)


def _nearest_neighbor_match(Z: Divisor, tau: float, epsilon: float, inner: StripWindow) -> TranslationMatch:
    pts, mults = Z.support, Z.multiplicities
    deep = _deep(inner, epsilon)
    if deep is None or pts.size == 0:
        return TranslationMatch(tau, True, True, 0.0)
    tree = cKDTree(_as_xy(pts))
    shift = 1j * tau

    # mandatory sources
    src = np.flatnonzero(deep.contains(pts))
    d_src, j_src = tree.query(_as_xy(pts[src] + shift)) if src.size else (np.zeros(0), np.zeros(0, dtype=int))
    ok_src = (d_src < epsilon) & (mults[src] <= mults[j_src]) if src.size else np.zeros(0, dtype=bool)

    # mandatory targets: their preimage must be matched
    tgt = np.flatnonzero(deep.contains(pts - shift))
    d_tgt, i_tgt = tree.query(_as_xy(pts[tgt] - shift)) if tgt.size else (np.zeros(0), np.zeros(0, dtype=int))
    ok_tgt = (d_tgt < epsilon) & (mults[i_tgt] >= mults[tgt]) if tgt.size else np.zeros(0, dtype=bool)

    ok = bool(ok_src.all() and ok_tgt.all())
    displacements = np.concatenate([d_src, d_tgt])
    pairs = tuple((complex(pts[s]), complex(pts[j])) for s, j, good in zip(src, j_src, ok_src) if good)
    return TranslationMatch(tau, ok, True, float(displacements.max()) if displacements.size else 0.0, pairs)


def _assignment_match(Z: Divisor, tau: float, epsilon: float, inner: StripWindow) -> TranslationMatch:
    deep = _deep(inner, epsilon)
    copies = Z.expanded()
    if deep is None or copies.size == 0:
        return TranslationMatch(tau, True, False, 0.0)
    shift = 1j * tau
    band = inner.expand(epsilon)
    src = copies[band.contains(copies)]
    tgt = copies[inner.expand(2 * epsilon).contains(copies - shift)]
    src_mandatory = deep.contains(src)
    tgt_mandatory = deep.contains(tgt - shift)
    if src.size == 0 or tgt.size == 0:
        ok = not (src_mandatory.any() or tgt_mandatory.any())
        return TranslationMatch(tau, ok, False, 0.0)

    edges = cKDTree(_as_xy(src + shift)).sparse_distance_matrix(cKDTree(_as_xy(tgt)), epsilon, output_type="coo_matrix")
    keep = edges.data < epsilon
    rows, cols, dist = edges.row[keep], edges.col[keep], edges.data[keep]
    n_s, n_t = src.size, tgt.size
    graph = coo_matrix((np.ones(rows.size), (rows, cols + n_s)), shape=(n_s + n_t, n_s + n_t))
    _, labels = connected_components(graph, directed=False)
    edge_labels = labels[rows]

    ok, worst, pairs = True, 0.0, []
    for label in np.unique(labels):
        s_idx = np.flatnonzero(labels[:n_s] == label)
        t_idx = np.flatnonzero(labels[n_s:] == label)
        sel = edge_labels == label
        cost = np.full((s_idx.size + t_idx.size, t_idx.size + s_idx.size), _INFEASIBLE)
        s_pos = {s: k for k, s in enumerate(s_idx)}
        t_pos = {t: k for k, t in enumerate(t_idx)}
        for r, c, d in zip(rows[sel], cols[sel], dist[sel]):
            cost[s_pos[r], t_pos[c]] = d
        for k, s in enumerate(s_idx):
            cost[k, t_idx.size + k] = _INFEASIBLE if src_mandatory[s] else 0.0
        for k, t in enumerate(t_idx):
            cost[s_idx.size + k, k] = _INFEASIBLE if tgt_mandatory[t] else 0.0
        cost[s_idx.size :, t_idx.size :] = 0.0
        r_opt, c_opt = linear_sum_assignment(cost)
        chosen = cost[r_opt, c_opt]
        if chosen.max() >= _INFEASIBLE:
            ok = False
        for r, c, d in zip(r_opt, c_opt, chosen):
            if r < s_idx.size and c < t_idx.size and d < _INFEASIBLE:
                worst = max(worst, float(d))
                pairs.append((complex(src[s_idx[r]]), complex(tgt[t_idx[c]])))
    return TranslationMatch(tau, ok, False, worst, tuple(pairs))


def is_almost_period(Z: Divisor, tau: float, epsilon: float, inner: StripWindow) -> bool:
    """Two-sided check: Z + i tau and Z - i tau both match Z within epsilon on inner."""
    forward = match_translation(Z, tau, epsilon, inner)
    if not forward.ok:
        return False
    backward = match_translation(Z, -tau, epsilon, inner)
    if not (forward.certified and backward.certified):
        logger.debug(f"tau={tau} verified with uncertified geometry")
    return backward.ok


class _DefectObjective:
    """Max distance from the mandatory points, shifted by +/- i tau, to the divisor."""

    def __init__(self, Z: Divisor, inner: StripWindow, epsilon: float):
        pts = Z.support
        self.tree = cKDTree(_as_xy(pts)) if pts.size else None
        deep = _deep(inner, epsilon)
        self.mandatory = pts[deep.contains(pts)] if (deep is not None and pts.size) else np.zeros(0, dtype=complex)

    def __call__(self, tau: float) -> float:
        if self.mandatory.size == 0:
            return 0.0
        shifted = np.concatenate([self.mandatory + 1j * tau, self.mandatory - 1j * tau])
        dist, _ = self.tree.query(_as_xy(shifted))
        return float(dist.max())


def translation_defect(Z: Divisor, tau: float, inner: StripWindow, epsilon: float = 0.0) -> float:
    """Largest nearest-point displacement of the mandatory points under +/- i tau."""
    return _DefectObjective(Z, inner, epsilon)(tau)


def _golden_min(func, lo: float, hi: float, xatol: float, max_iter: int = 200) -> float:
    """Golden-section minimum of a unimodal func on [lo, hi], bracketed down to xatol."""
    inv_phi = (math.sqrt(5) - 1) / 2
    c, d = hi - inv_phi * (hi - lo), lo + inv_phi * (hi - lo)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if hi - lo <= xatol:
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = func(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = func(d)
    return 0.5 * (lo + hi)


def _scan(divisors: list[Divisor], epsilon: float, inner: StripWindow, tau_max: float, step: float | None):
    step = epsilon / 4 if step is None else step
    if not (0 < step <= epsilon / 4 + 1e-15):
        raise InvalidObject(f"step must lie in (0, epsilon/4], got {step} for epsilon {epsilon}")
    for Z in divisors:
        _check_margins(Z, inner, tau_max, epsilon)
    objectives = [_DefectObjective(Z, inner, epsilon) for Z in divisors]

    def defect(tau: float) -> float:
        return max(o(tau) for o in objectives)

    def verified(tau: float) -> bool:
        return all(is_almost_period(Z, tau, epsilon, inner) for Z in divisors)

    # the defect is even in tau, so scan tau >= 0 and mirror
    grid = np.arange(int(math.floor(tau_max / step)) + 1) * step
    chunks = np.array_split(grid, max(1, min(64, grid.size // 256)))
    defects = np.concatenate(parallel_map(lambda c: np.array([defect(t) for t in c]), chunks))
    hit_idx = np.flatnonzero(defects < epsilon)

    taus, disps = [], []
    for run in np.split(hit_idx, np.flatnonzero(np.diff(hit_idx) > 1) + 1) if hit_idx.size else []:
        if run[0] == 0:
            candidates = [0.0]
        else:
            lo, hi = grid[run[0]] - step, min(grid[run[-1]] + step, tau_max)
            candidates = [_golden_min(defect, lo, hi, SCAN_REFINE_XATOL), float(grid[run[np.argmin(defects[run])]])]
        for tau in candidates:
            if tau <= tau_max and verified(tau):
                taus.append(tau)
                disps.append(defect(tau))
                break
    full = sorted(set([-t for t in taus if t > 0] + taus))
    disp_map = {t: d for t, d in zip(taus, disps)}
    displacements = tuple(disp_map[abs(t)] for t in full)
    certified = all(_support_gap(Z) > 2 * epsilon for Z in divisors)
    if not certified:
        logger.warning(f"Matching at eps={epsilon} ran outside the 2*eps gap regime; results are uncertified")
    return AlmostPeriodReport(
        epsilon=epsilon,
        taus=tuple(full),
        displacements=displacements,
        density_gap=max_consecutive_gap(full),
        scan_range=(-tau_max, tau_max),
        inner_window=inner,
        certified=certified,
    )


def scan_almost_periods(
    Z: Divisor, epsilon: float, inner: StripWindow, tau_max: float, step: float | None = None
) -> AlmostPeriodReport:
    """All verified epsilon-almost-periods in [-tau_max, tau_max], one refined value per grid run."""
    return _scan([Z], epsilon, inner, tau_max, step)


def common_almost_periods(
    Z: Divisor, W: Divisor, epsilon: float, inner: StripWindow, tau_max: float, step: float | None = None
) -> AlmostPeriodReport:
    """Translation numbers verified simultaneously for Z and W."""
    return _scan([Z, W], epsilon, inner, tau_max, step)


def lemma1_check(Z: Divisor, tau1: float, tau2: float, epsilon: float, inner: StripWindow) -> bool:
    """Differences and sums of two epsilon-almost-periods are 2*epsilon-almost-periods."""
    outer = inner.expand(epsilon)
    for tau in (tau1, tau2):
        if not is_almost_period(Z, tau, epsilon, outer):
            raise NotAnAlmostPeriod(f"tau={tau} is not an {epsilon}-almost-period on {outer.to_dict()}")
    return is_almost_period(Z, tau1 - tau2, 2 * epsilon, inner) and is_almost_period(Z, tau1 + tau2, 2 * epsilon, inner)


def lemma2_gap_bound(L: float, epsilon: float, classes_used: Iterable[int]) -> float:
    """Relative-density gap guaranteed by the pigeonhole construction: L * (max |k_s| + 2)."""
    classes = list(classes_used)
    if not classes:
        raise EmptyClasses("No pigeonhole classes supplied")
    if not (L > 0 and epsilon > 0):
        raise InvalidObject(f"L and epsilon must be positive, got {L}, {epsilon}")
    return L * (max(abs(int(k)) for k in classes) + 2)


def pigeonhole_classes(taus_Z: Iterable[float], taus_W: Iterable[float], L: float, epsilon: float) -> list[int]:
    """Representatives k_s of the classes of n(k) - m(k) over all fully scanned intervals [kL, kL + L].

    n(k) and m(k) place the first translation number of each divisor in [kL, kL + L] on the
    epsilon/2 grid; the representative of each class is the k of smallest |k|.
    """
    taus_Z, taus_W = np.sort(np.asarray(list(taus_Z))), np.sort(np.asarray(list(taus_W)))
    if taus_Z.size == 0 or taus_W.size == 0:
        return []
    n_max = math.ceil(2 * L / epsilon)
    lo = max(taus_Z[0], taus_W[0])
    hi = min(taus_Z[-1], taus_W[-1])
    representatives: dict[int, int] = {}
    for k in range(math.ceil(lo / L), math.floor(hi / L)):
        in_z = taus_Z[(taus_Z >= k * L) & (taus_Z <= k * L + L)]
        in_w = taus_W[(taus_W >= k * L) & (taus_W <= k * L + L)]
        if in_z.size == 0 or in_w.size == 0:
            continue
        n_k = min(n_max, max(0, round((in_z[0] - k * L) / (epsilon / 2))))
        m_k = min(n_max, max(0, round((in_w[0] - k * L) / (epsilon / 2))))
        diff = n_k - m_k
        if diff not in representatives or abs(k) < abs(representatives[diff]):
            representatives[diff] = k
    return sorted(representatives.values())
