"""
Band/gap structure of the necklace Laplacian and the breather frequency rule.

The trace of the monodromy decides everything here: lambda is in the spectrum
exactly when |tr M(lambda)| <= 2.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any

import numpy as np
from scipy import optimize

from src.config import config
from src.errors import ConfigurationError
from src.floquet import (
    FloquetCase,
    classify_trace,
    trace_derivative,
    trace_formula,
    trace_formula_lambda,
)
from src.graph_core import Geometry

logger = logging.getLogger(__name__)

EDGE_XTOL = 1e-10
# denominators tried when deciding whether a float link multiplier is rational
MAX_DENOMINATOR = 1000


class IntervalKind(str, Enum):
    BAND = "band"
    GAP = "gap"


@dataclass(frozen=True)
class SpectralInterval:
    lo: float
    hi: float
    kind: IntervalKind

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class BandScan:
    """Trace sweep over a lambda grid with refined band/gap intervals"""

    geometry: Geometry
    lam: np.ndarray
    trace: np.ndarray
    classes: list[FloquetCase]
    intervals: list[SpectralInterval]
    edges: list[float]
    touchings: list[float]
    warnings: list[str] = field(default_factory=list)

    @property
    def gaps(self) -> list[tuple[float, float]]:
        return [(iv.lo, iv.hi) for iv in self.intervals if iv.kind is IntervalKind.GAP]

    @property
    def bands(self) -> list[tuple[float, float]]:
        return [(iv.lo, iv.hi) for iv in self.intervals if iv.kind is IntervalKind.BAND]

    def classify_point(self, lam: float) -> IntervalKind:
        for iv in self.intervals:
            if iv.lo <= lam <= iv.hi:
                return iv.kind
        raise ValueError(f"lambda={lam} outside the scanned range")

    def csv_rows(self) -> list[tuple[float, float, str]]:
        return [(float(x), float(t), c.value) for x, t, c in zip(self.lam, self.trace, self.classes)]


def _edge_function(geometry: Geometry):
    return lambda lam: abs(float(trace_formula_lambda(lam, geometry))) - 2.0


def scan_bands(
    geometry: Geometry,
    lam_min: float,
    lam_max: float,
    n: int,
    tol: float | None = None,
) -> BandScan:
    """
    Sample tr M on an even grid, refine every sign change of |tr| - 2 by
    bisection and detect tangential touchings from extrema of tr.

    Extrema of tr are located from sign changes of the analytic derivative.
    An extremum that pokes across |tr| = 2 between two grid points of the same
    class marks a band or gap narrower than the grid; both of its edges are
    recovered and a coarse-grid warning is recorded.
    """
    if not (math.isfinite(lam_min) and math.isfinite(lam_max)) or lam_max <= lam_min:
        raise ConfigurationError(f"invalid lambda range [{lam_min}, {lam_max}]")
    if n < 2:
        raise ConfigurationError(f"grid size must be >= 2, got {n}")
    tol = config.numerics.scan_edge_tol if tol is None else tol

    lam = np.linspace(lam_min, lam_max, n)
    trace = np.asarray(trace_formula_lambda(lam, geometry))
    classes = [classify_trace(float(t), geometry.P, tol).case for t in trace]
    f = np.abs(trace) - 2.0
    f_edge = _edge_function(geometry)
    spacing = lam[1] - lam[0]
    warnings: list[str] = []

    edges: list[float] = []
    for i in range(n - 1):
        a, b = f[i], f[i + 1]
        if a == 0.0:
            edges.append(float(lam[i]))
        elif a * b < 0.0:
            edges.append(optimize.bisect(f_edge, lam[i], lam[i + 1], xtol=EDGE_XTOL, maxiter=100))
    if f[-1] == 0.0:
        edges.append(float(lam[-1]))

    touchings: list[float] = []
    d = np.asarray(trace_derivative(lam, geometry))
    for i in np.flatnonzero(d[:-1] * d[1:] < 0.0):
        lo, hi = lam[i], lam[i + 1]
        peak = optimize.brentq(lambda x: float(trace_derivative(x, geometry)), lo, hi, xtol=1e-14)
        f_peak = f_edge(peak)
        if abs(f_peak) <= config.numerics.edge_tol:
            touchings.append(float(peak))
        elif f_peak * f[i] < 0.0 and f_peak * f[i + 1] < 0.0:
            # both edges of a narrow band or gap fall inside one grid cell
            left = optimize.bisect(f_edge, lo, peak, xtol=EDGE_XTOL, maxiter=100)
            right = optimize.bisect(f_edge, peak, hi, xtol=EDGE_XTOL, maxiter=100)
            edges.extend([left, right])
            message = f"grid too coarse: edges {left:.6g} and {right:.6g} lie within one grid cell"
            logger.warning(message)
            warnings.append(message)

    # touchings are resolved separately; drop bisection hits on them
    edges = sorted(e for e in edges if all(abs(e - t) > 1e-6 for t in touchings))
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a < spacing:
            message = f"grid too coarse: edges {a:.6g} and {b:.6g} are closer than the grid spacing"
            if message not in warnings:
                logger.warning(message)
                warnings.append(message)

    bounds = sorted({lam_min, lam_max, *edges, *touchings})
    intervals = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo <= 0.0:
            continue
        mid = 0.5 * (lo + hi)
        kind = IntervalKind.GAP if f_edge(mid) > 0.0 else IntervalKind.BAND
        intervals.append(SpectralInterval(float(lo), float(hi), kind))

    logger.debug(
        f"scan l={geometry.l} [{lam_min}, {lam_max}] n={n}: "
        f"{len(edges)} edges, {len(touchings)} touchings"
    )
    return BandScan(geometry, lam, trace, classes, intervals, edges, touchings, warnings)


@dataclass(frozen=True)
class ModeRecord:
    m: int
    lam: float
    trace: float
    margin: float
    case: FloquetCase

    def to_dict(self) -> dict[str, Any]:
        return {
            "m": self.m,
            "lambda": self.lam,
            "trace": self.trace,
            "margin": self.margin,
            "class": self.case.value,
        }


@dataclass
class FrequencyReport:
    """Per-mode Floquet data for the breather frequency omega = k/2"""

    k: int
    l: float
    omega: float
    alpha: float
    m_check: int
    modes: list[ModeRecord]
    valid: bool
    reasons: list[str]
    limit_trace: float | None

    @property
    def verdict(self) -> str:
        return "valid" if self.valid else "invalid"

    @property
    def min_gap_margin(self) -> float:
        """Smallest |tr| - 2 over the slaved modes m >= 3"""
        return min(rec.margin for rec in self.modes if rec.m >= 3)

    def mode(self, m: int) -> ModeRecord:
        for rec in self.modes:
            if rec.m == m:
                return rec
        raise KeyError(m)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "l": self.l,
            "omega": self.omega,
            "alpha": self.alpha,
            "modes": [rec.to_dict() for rec in self.modes],
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "limit_trace": self.limit_trace,
        }


def limit_trace(k: int, geometry: Geometry) -> float | None:
    """
    Limit of tr M(m^2 omega^2 - alpha) as odd m grows, for omega = k/2.

    sqrt(m^2 omega^2 - alpha) - m omega -> 0, so the limit is the trace at
    omega_m = m k / 2, which is independent of odd m for integer l. Non-integer
    l has no limit.
    """
    if not geometry.is_integer:
        return None
    return float(trace_formula(k / 2.0, geometry))


def validate_frequency(
    k: int,
    l: float,
    m_check: int = 99,
    alpha: float | None = None,
    tol: float | None = None,
) -> FrequencyReport:
    """
    Check the gap condition for omega = k/2: lambda_1 must lie in the
    spectrum and every slaved mode lambda_m (odd m >= 3) in a gap.

    alpha defaults to omega^2, which places lambda_1 = 0 on the band edge.
    """
    if k < 1 or k % 2 == 0:
        raise ConfigurationError(f"k must be an odd positive integer, got {k}")
    if m_check < 3 or m_check % 2 == 0:
        raise ConfigurationError(f"M_check must be odd and >= 3, got {m_check}")
    tol = config.numerics.edge_tol if tol is None else tol

    geometry = Geometry(l)
    omega = k / 2.0
    alpha = omega * omega if alpha is None else alpha

    reasons: list[str] = []
    if not geometry.breather_admissible:
        reasons.append(
            f"l={l} is not an odd integer: the trace map has no -5/2 limit along "
            "the odd harmonics and the gap condition cannot hold for all modes"
        )

    modes = []
    for m in range(1, m_check + 1, 2):
        lam = m * m * omega * omega - alpha
        tr = float(trace_formula_lambda(lam, geometry))
        cls = classify_trace(tr, geometry.P, tol)
        modes.append(ModeRecord(m, lam, tr, abs(tr) - 2.0, cls.case))
        if m == 1 and not cls.case.in_spectrum:
            reasons.append(f"m=1: lambda={lam:.6g} is not in the spectrum (tr={tr:.6g})")
        elif m >= 3 and not cls.case.is_gap:
            reasons.append(f"m={m}: lambda={lam:.6g} is not in a gap (tr={tr:.6g})")

    report = FrequencyReport(
        k=k,
        l=l,
        omega=omega,
        alpha=alpha,
        m_check=m_check,
        modes=modes,
        valid=not reasons,
        reasons=reasons,
        limit_trace=limit_trace(k, geometry),
    )
    logger.info(f"validate-freq k={k} l={l} alpha={alpha:g}: {report.verdict}")
    for reason in reasons:
        logger.debug(reason)
    return report


@dataclass(frozen=True)
class RationalityReport:
    """Whether the two trace frequencies (L+pi) and (L-pi) are commensurate"""

    l_text: str
    l_value: float
    ratio: Fraction | None
    periodic: bool
    exact: bool
    trace_period: Fraction | None
    note: str

    @property
    def ratio_value(self) -> float:
        if self.ratio is not None:
            return float(self.ratio)
        return (self.l_value - 1.0) / (self.l_value + 1.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "l": self.l_text,
            "l_value": self.l_value,
            "ratio": None if self.ratio is None else str(self.ratio),
            "ratio_value": self.ratio_value,
            "periodic": self.periodic,
            "exact": self.exact,
            "trace_period": None if self.trace_period is None else str(self.trace_period),
            "note": self.note,
        }


_SQRT_PATTERN = re.compile(r"^\s*sqrt\(\s*(\d+)\s*\)\s*$")


def _parse_multiplier(l: Fraction | int | float | str) -> tuple[Fraction | None, float, bool]:
    """(exact value or None, float value, decision is exact)"""
    if isinstance(l, Fraction | int):
        return Fraction(l), float(l), True
    if isinstance(l, str):
        match = _SQRT_PATTERN.match(l)
        if match:
            n = int(match.group(1))
            root = math.isqrt(n)
            if root * root == n:
                return Fraction(root), float(root), True
            return None, math.sqrt(n), True
        try:
            value = Fraction(l.strip())
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse link multiplier {l!r}") from exc
        return value, float(value), True
    x = float(l)
    if x.is_integer():
        return Fraction(int(x)), x, True
    approx = Fraction(x).limit_denominator(MAX_DENOMINATOR)
    if abs(float(approx) - x) <= 1e-12 * abs(x):
        return approx, x, False
    return None, x, False


def _fraction_lcm(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(math.lcm(a.numerator, b.numerator), math.gcd(a.denominator, b.denominator))


def rationality_check(l: Fraction | int | float | str) -> RationalityReport:
    """
    Decide whether tr M(omega^2) is periodic in omega.

    The trace mixes cos((l+1) pi w) and cos((l-1) pi w); it is periodic iff
    (l-1)/(l+1) is rational, i.e. iff l is. Exact for Fraction, int and
    decimal / fraction / sqrt(n) strings; floats are matched against fractions
    with denominator <= 1000.
    """
    exact_l, value, exact = _parse_multiplier(l)
    if value <= 0:
        raise ConfigurationError(f"link multiplier must be positive, got {l}")
    text = str(l)

    if exact_l is None:
        note = "irrational l: non-periodic trace"
        report = RationalityReport(text, value, None, False, exact, None, note)
    else:
        ratio = (exact_l - 1) / (exact_l + 1)
        p, q = exact_l.numerator, exact_l.denominator
        period = Fraction(2 * q, p + q)
        if p != q:
            period = _fraction_lcm(period, Fraction(2 * q, abs(p - q)))
        note = "rational l: periodic trace"
        if not exact:
            note += f" (float matched to {exact_l})"
        report = RationalityReport(text, value, ratio, True, exact, period, note)

    logger.info(f"rationality l={text}: {report.note}")
    return report
