"""
Unit tests for band scans, frequency validation and the rationality check.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from src.errors import ConfigurationError
from src.floquet import FloquetCase, trace_formula
from src.graph_core import Geometry
from src.spectrum import IntervalKind, limit_trace, rationality_check, scan_bands, validate_frequency


def _trace_at(omega: float, l: int = 1) -> float:
    """Independent evaluation of (9 cos((L+pi) w) - cos((L-pi) w)) / 4"""
    L = l * math.pi
    return (9 * math.cos((L + math.pi) * omega) - math.cos((L - math.pi) * omega)) / 4


class TestScanBands:
    """Tests for the band/gap sweep."""

    def test_zero_touches_spectrum(self, geometry_pi: Geometry) -> None:
        """lambda = 0 is the lower band edge; the negative axis is a gap."""
        scan = scan_bands(geometry_pi, -0.5, 0.5, 1001)
        assert scan.classify_point(-0.25) is IntervalKind.GAP
        assert scan.classify_point(0.01) is IntervalKind.BAND
        assert any(abs(e) < 1e-8 for e in scan.edges)
        assert scan.classes[0] is FloquetCase.GAP_POSITIVE

    def test_edges_are_refined(self, geometry_pi: Geometry) -> None:
        """The first tr = -2 crossing matches the analytic root."""
        scan = scan_bands(geometry_pi, -0.5, 10.0, 2001)
        omega = math.acos(-7 / 9) / (2 * math.pi)
        assert min(abs(e - omega**2) for e in scan.edges) < 1e-8
        assert scan.classify_point(2.0) is IntervalKind.GAP

    def test_tangential_touching_l1(self, geometry_pi: Geometry) -> None:
        """tr reaches its maximum 2 at lambda = 1 for L = pi."""
        scan = scan_bands(geometry_pi, 0.5, 1.5, 401)
        assert any(abs(t - 1.0) < 1e-6 for t in scan.touchings)
        assert all(iv.kind is IntervalKind.BAND for iv in scan.intervals if iv.lo >= 0.5 and iv.hi <= 1.5)

    def test_tangential_touching_l2(self) -> None:
        """tr reaches its minimum -2 at lambda = 1 for L = 2 pi."""
        scan = scan_bands(Geometry(2), 0.8, 1.2, 401)
        assert any(abs(t - 1.0) < 1e-6 for t in scan.touchings)

    def test_intervals_cover_range(self, geometry_3pi: Geometry) -> None:
        """Intervals tile the scanned range and alternate band and gap."""
        scan = scan_bands(geometry_3pi, -0.5, 6.0, 1501)
        assert scan.intervals[0].lo == -0.5
        assert scan.intervals[-1].hi == 6.0
        for a, b in zip(scan.intervals[:-1], scan.intervals[1:]):
            assert a.hi == b.lo
        assert scan.bands and scan.gaps

    def test_csv_rows(self, geometry_pi: Geometry) -> None:
        """One (lambda, trace, class) row per grid point."""
        scan = scan_bands(geometry_pi, 0.0, 1.0, 11)
        rows = scan.csv_rows()
        assert len(rows) == 11
        assert rows[0][1] == pytest.approx(2.0)
        assert rows[0][2] == "edge"

    def test_invalid_arguments(self, geometry_pi: Geometry) -> None:
        """Empty ranges and single-point grids are refused."""
        with pytest.raises(ConfigurationError):
            scan_bands(geometry_pi, 1.0, 1.0, 10)
        with pytest.raises(ConfigurationError):
            scan_bands(geometry_pi, 0.0, 1.0, 1)

    def test_point_outside_scan(self, geometry_pi: Geometry) -> None:
        """classify_point only answers inside the range."""
        scan = scan_bands(geometry_pi, 0.0, 1.0, 11)
        with pytest.raises(ValueError):
            scan.classify_point(5.0)


class TestValidateFrequency:
    """Tests for the breather frequency rule."""

    def test_k1_l1_is_valid(self) -> None:
        """omega = 1/2 on the L = pi necklace passes the gap condition."""
        report = validate_frequency(1, 1)
        assert report.valid
        assert report.verdict == "valid"
        first = report.mode(1)
        assert first.lam == 0.0
        assert first.case is FloquetCase.EDGE
        assert first.trace == pytest.approx(2.0, abs=1e-12)

    def test_gap_margins(self) -> None:
        """Margins at m = 3 and m = 5 match direct evaluation."""
        report = validate_frequency(1, 1)
        for m, approx in ((3, 0.179), (5, 0.387)):
            omega_m = math.sqrt(m * m / 4 - 1 / 4)
            expected = abs(_trace_at(omega_m)) - 2
            assert report.mode(m).margin == pytest.approx(expected, abs=1e-12)
            assert report.mode(m).margin == pytest.approx(approx, abs=1e-2)
            assert report.mode(m).case is FloquetCase.GAP_NEGATIVE
        assert report.min_gap_margin > 0.1

    def test_trace_converges_to_limit(self) -> None:
        """tr(lambda_m) approaches -5/2 along the odd harmonics."""
        report = validate_frequency(1, 1, m_check=199)
        assert report.limit_trace == pytest.approx(-2.5)
        for rec in report.modes:
            if rec.m >= 53:
                assert abs(rec.trace + 2.5) <= 1e-3
        assert abs(report.mode(99).trace + 2.5) < 1e-3

    def test_even_link_is_invalid(self) -> None:
        """l = 2 puts lambda_m into a band and is not admissible."""
        report = validate_frequency(1, 2, m_check=9)
        assert not report.valid
        assert report.verdict == "invalid"
        assert any("odd integer" in r for r in report.reasons)
        assert trace_formula(0.5, Geometry(2)) == pytest.approx(0.0, abs=1e-15)

    def test_k3_is_invalid(self) -> None:
        """With alpha = omega^2 the k = 3 frequency puts lambda_3 = 18 in a band."""
        report = validate_frequency(3, 1)
        assert not report.valid
        assert report.mode(3).case is FloquetCase.BAND
        assert any(r.startswith("m=3") for r in report.reasons)

    @pytest.mark.parametrize("k", [1, 3])
    def test_alpha_zero_periodicity(self, k: int) -> None:
        """With alpha = 0 the per-mode traces depend on m only through its parity."""
        report = validate_frequency(k, 1, m_check=21, alpha=0.0)
        assert all(rec.trace == pytest.approx(-2.5, abs=1e-12) for rec in report.modes)

    def test_invalid_arguments(self) -> None:
        """Even k and bad M_check are configuration errors."""
        with pytest.raises(ConfigurationError):
            validate_frequency(2, 1)
        with pytest.raises(ConfigurationError):
            validate_frequency(1, 1, m_check=10)

    def test_to_dict(self) -> None:
        """The report serializes its per-mode table."""
        data = validate_frequency(1, 1, m_check=5).to_dict()
        assert data["verdict"] == "valid"
        assert [row["m"] for row in data["modes"]] == [1, 3, 5]
        assert data["modes"][0]["class"] == "edge"


class TestLimitTrace:
    """Tests for the large-m limit."""

    @pytest.mark.parametrize("l, expected", [(1, -2.5), (3, 2.5), (2, 0.0), (4, 0.0)])
    def test_integer_links(self, l: int, expected: float) -> None:
        """-5/2 for l = 1, +5/2 for l = 3, 0 for even l."""
        assert limit_trace(1, Geometry(l)) == pytest.approx(expected, abs=1e-14)

    def test_non_integer_link(self) -> None:
        """No limit without an integer link multiplier."""
        assert limit_trace(1, Geometry(1.5)) is None


class TestRationality:
    """Tests for trace periodicity in the link multiplier."""

    def test_l1(self) -> None:
        """l = 1: ratio 0, period 1."""
        report = rationality_check(1)
        assert report.periodic and report.exact
        assert report.ratio == 0
        assert report.trace_period == 1

    def test_l3(self) -> None:
        """l = 3: ratio 1/2."""
        report = rationality_check("3")
        assert report.ratio == Fraction(1, 2)
        assert report.trace_period == 1

    def test_sqrt2_is_irrational(self) -> None:
        """sqrt(2) is decided exactly as non-periodic."""
        report = rationality_check("sqrt(2)")
        assert not report.periodic
        assert report.exact
        assert report.ratio is None
        assert report.ratio_value == pytest.approx((math.sqrt(2) - 1) / (math.sqrt(2) + 1))

    def test_perfect_square_root(self) -> None:
        """sqrt(9) is the integer 3."""
        assert rationality_check("sqrt(9)").ratio == Fraction(1, 2)

    def test_fraction_period_is_a_period(self) -> None:
        """The reported period really is a period of the trace."""
        report = rationality_check("3/2")
        assert report.trace_period == 4
        geometry = Geometry(1.5)
        omega = np.linspace(0.0, 3.0, 301)
        shifted = trace_formula(omega + float(report.trace_period), geometry)
        assert np.allclose(trace_formula(omega, geometry), shifted, atol=1e-10)

    def test_float_heuristic(self) -> None:
        """Floats are matched to small fractions but flagged as inexact."""
        report = rationality_check(0.5)
        assert report.periodic
        assert not report.exact
        assert report.ratio == Fraction(-1, 3)
        assert not rationality_check(math.pi).periodic

    def test_invalid_input(self) -> None:
        """Unparseable and non-positive multipliers are refused."""
        with pytest.raises(ConfigurationError):
            rationality_check("abc")
        with pytest.raises(ConfigurationError):
            rationality_check("-1")

    def test_to_dict(self) -> None:
        """Fractions are serialized as text."""
        data = rationality_check(3).to_dict()
        assert data["ratio"] == "1/2"
        assert data["trace_period"] == "1"
