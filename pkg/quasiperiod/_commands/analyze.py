"""End-to-end periodicity analysis of a zero set or a divisor pair."""

import argparse
import logging
import math
from dataclasses import dataclass, field

from quasiperiod.consts import (
    DEFAULT_EPS,
    DEFAULT_TAU_FRACTION,
    EXIT_NEGATIVE,
    EXIT_OK,
    GAP_DROP_FACTOR,
    R_MARGIN,
    TOL_CLUSTER,
    TOL_VERIFY_PERIOD,
    TOL_ZERO,
    VERDICT_INCONCLUSIVE,
    VERDICT_NON_DISCRETE,
    VERDICT_PERIODIC,
)
from quasiperiod.errors import (
    DecompositionIncomplete,
    EmptyDivisor,
    Incommensurable,
    InputError,
    NoAlmostPeriod,
    NonRealPeriod,
    NoUniqueTranslate,
    PropagationBreak,
    TooFewElements,
)
from quasiperiod.utils.common import complex_to_dict
from quasiperiod.utils.divisor_ops import (
    AlmostPeriodReport,
    Divisor,
    clamped_gamma,
    common_almost_periods,
    difference_set,
    gap_trend,
    lemma2_gap_bound,
    min_gap,
    pigeonhole_classes,
    scan_almost_periods,
    sum_set,
)
from quasiperiod.utils.jinja import render_template
from quasiperiod.utils.period_engine import (
    Decomposition,
    PeriodCertificate,
    commensurate,
    decompose,
    estimate_R,
    extract_period,
    minimal_common_period,
)
from quasiperiod.utils.quasipoly import StripWindow, reflect
from quasiperiod.utils.zero_finder import find_zeros
from quasiperiod._commands.report import RunReport, load_divisor, load_function, parse_substrip

logger = logging.getLogger(__name__)

DIAGNOSTIC_ERRORS = (
    NoUniqueTranslate,
    NonRealPeriod,
    PropagationBreak,
    DecompositionIncomplete,
    Incommensurable,
    EmptyDivisor,
    TooFewElements,
    NoAlmostPeriod,
)


def _intersection(a: StripWindow, b: StripWindow) -> StripWindow:
    return StripWindow(
        max(a.re_min, b.re_min), min(a.re_max, b.re_max), max(a.im_min, b.im_min), min(a.im_max, b.im_max)
    )


@dataclass
class DivisorAnalysis:
    """The analyze pipeline: gap trend, almost periods, extracted and reduced periods."""

    Z: Divisor
    W: Divisor
    window: StripWindow
    eps: float = DEFAULT_EPS
    tau_max: float | None = None
    tol: float = TOL_VERIFY_PERIOD
    zero_free: StripWindow | None = None
    substrips: list[StripWindow] = field(default_factory=list)
    merge_tol: float = TOL_CLUSTER

    verdict: str = VERDICT_INCONCLUSIVE
    gaps: list[float] = field(default_factory=list)
    gamma: float | None = None
    epsilon: float | None = None
    scan: AlmostPeriodReport | None = None
    certificates: list[PeriodCertificate] = field(default_factory=list)
    periods: list[float] = field(default_factory=list)
    common_unit: float | None = None
    multipliers: list[int] = field(default_factory=list)
    decomposition: Decomposition | None = None
    diagnostic: dict | None = None
    differences: list = field(default_factory=list)
    sum_set_gap: float | None = None
    density_bound: dict | None = None

    @property
    def same_pair(self) -> bool:
        return self.W is self.Z

    @property
    def period(self) -> float | None:
        """Common period of the whole pair: the unit times the lcm of the multipliers."""
        if self.common_unit is None:
            return None
        return self.common_unit * math.lcm(*self.multipliers)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.verdict == VERDICT_PERIODIC else EXIT_NEGATIVE

    def run(self) -> "DivisorAnalysis":
        try:
            self._discreteness()
            if self.verdict == VERDICT_NON_DISCRETE:
                return self
            if self.substrips:
                self._decompose()
            else:
                self._extract()
            if not all(c.two_sided for c in self.certificates):
                raise PropagationBreak("A certificate did not verify in both vertical directions")
            self.verdict = VERDICT_PERIODIC
        except DIAGNOSTIC_ERRORS as exc:
            logger.info(f"Analysis inconclusive: {exc}")
            self.verdict = VERDICT_INCONCLUSIVE
            self.diagnostic = {"code": exc.code, "message": str(exc)}
        return self

    def _discreteness(self) -> None:
        R = estimate_R(self.Z, self.W, self.window)
        im_bound = 2 * R + R_MARGIN
        self.gaps = gap_trend(self.Z, self.W, self.window, im_bound, merge_tol=self.merge_tol)
        self.differences = [complex_to_dict(d) for d in difference_set(self.Z, self.W, im_bound, self.merge_tol)]
        try:
            self.sum_set_gap = min_gap(sum_set(self.Z, self.W, im_bound, self.merge_tol))
        except TooFewElements:
            self.sum_set_gap = None
        if math.isinf(self.gaps[-1]):
            raise TooFewElements("The difference set holds fewer than two values")
        if math.isfinite(self.gaps[0]) and self.gaps[0] / self.gaps[-1] >= GAP_DROP_FACTOR:
            self.verdict = VERDICT_NON_DISCRETE
            return
        self.gamma = clamped_gamma(0.5 * self.gaps[-1])
        self.epsilon = min(self.eps, 0.5 * self.gamma)

    def _extract(self) -> None:
        eps = self.epsilon
        tau_max = DEFAULT_TAU_FRACTION * self.window.height if self.tau_max is None else self.tau_max
        tau_max = min(tau_max, 0.5 * self.window.height - 2 * eps)
        inner = self.window.shrink(eps, tau_max + eps)
        self.scan = common_almost_periods(self.Z, self.W, eps, inner, tau_max)
        taus = [t for t in self.scan.taus if t > 1]
        if not taus:
            raise NoAlmostPeriod(f"No common {eps}-almost-period above 1 up to {tau_max}")
        self.density_bound = self._density_bound(inner, tau_max)

        pairs = [(self.Z, self.W)] if self.same_pair else [(self.Z, self.W), (self.W, self.Z)]
        for D, E in pairs:
            cert = extract_period(D, E, taus[0], self.gamma, self.window, zero_free=self.zero_free)
            self.certificates.append(cert)
            self.periods.append(minimal_common_period([D], cert.period, self.window, self.tol))
        unit, multipliers = commensurate(self.periods)
        self.common_unit, self.multipliers = unit, multipliers

    def _density_bound(self, inner: StripWindow, tau_max: float) -> dict | None:
        """Pigeonhole bound on the common density gap built from the scans of Z and W alone."""
        scan_z = scan_almost_periods(self.Z, self.epsilon, inner, tau_max)
        scan_w = scan_z if self.same_pair else scan_almost_periods(self.W, self.epsilon, inner, tau_max)
        L = max(scan_z.density_gap, scan_w.density_gap)
        if not math.isfinite(L):
            return None
        classes = pigeonhole_classes(scan_z.taus, scan_w.taus, L, self.epsilon)
        if not classes:
            return None
        bound = lemma2_gap_bound(L, self.epsilon, classes)
        if self.scan.density_gap > bound:
            logger.warning(f"Common density gap {self.scan.density_gap} exceeds the pigeonhole bound {bound}")
        return {
            "L": L,
            "classes": classes,
            "bound": bound,
            "within_bound": self.scan.density_gap <= bound,
        }

    def _decompose(self) -> None:
        dec_z, _ = decompose(self.Z, self.W, self.substrips, tau_max=self.tau_max, merge_tol=self.merge_tol)
        self.decomposition = dec_z
        self.certificates = list(dec_z.certificates)
        self.periods = [p.period for p in dec_z.parts]
        self.common_unit, self.multipliers = dec_z.common_unit, list(dec_z.multipliers)

    def outputs(self) -> dict:
        return {
            "verdict": self.verdict,
            "gap_trend": self.gaps,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "sum_set_gap": self.sum_set_gap,
            "almost_periods": self.scan.to_dict() if self.scan is not None else None,
            "density_bound": self.density_bound,
            "certificates": [c.to_dict() for c in self.certificates],
            "periods": self.periods,
            "period": self.period,
            "common_unit": self.common_unit,
            "multipliers": self.multipliers,
            "parts": self.decomposition.to_dict()["parts"] if self.decomposition is not None else [],
            "diagnostic": self.diagnostic,
            "differences": self.differences,
        }

    def summary(self) -> str:
        return render_template(
            "analyze_summary.md",
            {
                "verdict": self.verdict,
                "period": self.period,
                "common_unit": self.common_unit,
                "multipliers": self.multipliers,
                "n_slabs": sum(len(c.verified_windows) for c in self.certificates),
                "gaps": self.gaps,
                "diagnostic": self.diagnostic,
                "epsilon": self.epsilon,
                "gamma": self.gamma,
                "n_taus": len(self.scan.taus) if self.scan is not None else 0,
                "density_gap": self.scan.density_gap if self.scan is not None else None,
                "density_bound": self.density_bound,
            },
        )


def register(subparsers) -> None:
    parser = subparsers.add_parser("analyze", help="Decide whether a zero set (or divisor pair) is periodic.")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--qp", help="Quasipolynomial or product-form JSON file; its zeros form Z.")
    source.add_argument("--divisor", help="Divisor JSON file used as Z.")
    partner = parser.add_mutually_exclusive_group()
    partner.add_argument("--qp-w", help="Second function; its zeros form W.")
    partner.add_argument("--divisor-w", help="Divisor JSON file used as W.")
    partner.add_argument(
        "--reflect", action="store_true", help="Use the zeros of Q(-z) as W, so the difference set is the sum set."
    )
    parser.add_argument("--window", help="re_min,re_max,im_min,im_max (required with --qp).")
    parser.add_argument("--eps", type=float, default=DEFAULT_EPS, help="Upper bound on the scan tolerance.")
    parser.add_argument("--tau-max", type=float, default=None, help="Largest translation number scanned.")
    parser.add_argument("--tol", type=float, default=TOL_VERIFY_PERIOD, help="Period verification tolerance.")
    parser.add_argument("--tol-zero", type=float, default=TOL_ZERO, help="Residual tolerance for zero finding.")
    parser.add_argument("--zero-free", help="re_min,re_max,im_min,im_max of a substrip free of zeros.")
    parser.add_argument(
        "--substrip", action="append", default=[], help="re_min,re_max of a nested substrip (repeat, innermost first)."
    )
    parser.set_defaults(handler=run)


def _zeros_of(path: str, window: StripWindow, tol_zero: float, reflected: bool = False) -> Divisor:
    qp, _ = load_function(path)
    if reflected:
        qp = reflect(qp)
    return find_zeros(qp, window, tol_zero, TOL_CLUSTER).to_divisor()


def run(args: argparse.Namespace) -> RunReport:
    window = StripWindow.from_cli(args.window) if args.window else None
    if args.qp:
        if window is None:
            raise InputError("--window is required with --qp")
        Z = _zeros_of(args.qp, window, args.tol_zero)
    else:
        Z = load_divisor(args.divisor)
        window = window or Z.window

    if args.qp_w:
        W = _zeros_of(args.qp_w, window, args.tol_zero)
    elif args.divisor_w:
        W = load_divisor(args.divisor_w)
    elif args.reflect and args.qp:
        W = _zeros_of(args.qp, Z.negated().window, args.tol_zero, reflected=True)
    elif args.reflect:
        W = Z.negated()
    else:
        W = Z

    base = _intersection(_intersection(window, Z.window), W.window)
    analysis = DivisorAnalysis(
        Z=Z,
        W=W,
        window=base,
        eps=args.eps,
        tau_max=args.tau_max,
        tol=args.tol,
        zero_free=StripWindow.from_cli(args.zero_free) if args.zero_free else None,
        substrips=[parse_substrip(s, base) for s in args.substrip],
    ).run()

    report = RunReport(
        command="analyze",
        inputs={
            "qp": args.qp,
            "divisor": args.divisor,
            "qp_w": args.qp_w,
            "divisor_w": args.divisor_w,
            "reflect": args.reflect,
            "window": base.to_dict(),
            "eps": args.eps,
            "tau_max": args.tau_max,
            "tol": args.tol,
            "tol_zero": args.tol_zero,
            "merge_tol": analysis.merge_tol,
            "substrips": [s.to_dict() for s in analysis.substrips],
        },
        outputs=analysis.outputs(),
        exit_code=analysis.exit_code,
    )
    report.summary = analysis.summary()
    return report
