"""
Unit tests for transfer matrices, monodromy and Floquet classification.
"""

import math

import numpy as np
import pytest

from src.errors import NecklaceError, StepSizeError
from src.floquet import (
    FloquetCase,
    Monodromy,
    classify,
    classify_trace,
    cos_like,
    monodromy,
    monodromy_by_integration,
    multipliers_from_trace,
    sinc_like,
    stable_direction,
    trace_derivative,
    trace_formula,
    trace_formula_lambda,
    transfer,
)
from src.graph_core import Geometry


class TestTransfer:
    """Tests for single-segment propagators."""

    def test_zero_lambda(self) -> None:
        """transfer(s, 0) is the free-particle matrix."""
        assert np.allclose(transfer(1.7, 0.0).entries, [[1.0, 1.7], [0.0, 1.0]])

    def test_half_turn(self) -> None:
        """transfer(pi, 1) = -I."""
        assert np.allclose(transfer(math.pi, 1.0).entries, -np.eye(2), atol=1e-15)

    def test_semigroup(self, rng: np.random.Generator) -> None:
        """T(s1 + s2) = T(s2) T(s1)."""
        for s1, s2, lam in zip(rng.uniform(0.1, 4, 50), rng.uniform(0.1, 4, 50), rng.uniform(-5, 20, 50)):
            combined = transfer(s1 + s2, lam).entries
            product = transfer(s2, lam).entries @ transfer(s1, lam).entries
            assert np.allclose(combined, product, rtol=1e-10, atol=1e-10)

    def test_unit_determinant(self) -> None:
        """Transfer matrices are unimodular."""
        for lam in (-3.0, -1e-9, 0.0, 1e-9, 2.5, 40.0):
            assert transfer(2.0, lam).det == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_positive_length(self) -> None:
        """Segment lengths must be positive."""
        with pytest.raises(NecklaceError):
            transfer(0.0, 1.0)

    def test_series_branch_matches_closed_form(self) -> None:
        """Just inside the Taylor cutoff the series agrees with cos / cosh."""
        s = 3.0
        lam = 0.9999e-4 / (s * s)
        assert cos_like(s, lam) == pytest.approx(math.cos(math.sqrt(lam) * s), abs=1e-15)
        assert cos_like(s, -lam) == pytest.approx(math.cosh(math.sqrt(lam) * s), abs=1e-15)
        k = math.sqrt(lam) * s
        assert sinc_like(s, lam) == pytest.approx(math.sin(k) / k, abs=1e-15)
        assert sinc_like(s, -lam) == pytest.approx(math.sinh(k) / k, abs=1e-15)
        assert cos_like(s, 0.0) == 1.0
        assert sinc_like(s, 0.0) == 1.0

    def test_vectorized(self) -> None:
        """cos_like accepts arrays."""
        lam = np.array([-1.0, 0.0, 1.0])
        assert np.allclose(cos_like(math.pi, lam), [math.cosh(math.pi), 1.0, -1.0])


class TestMonodromy:
    """Tests for the one-period propagator."""

    def test_zero_lambda(self, geometry_pi: Geometry) -> None:
        """M(0) = [[1, L + pi/2], [0, 1]] with trace 2."""
        M = monodromy(0.0, geometry_pi)
        assert np.allclose(M.entries, [[1.0, geometry_pi.L + math.pi / 2], [0.0, 1.0]])
        assert M.trace == pytest.approx(2.0)

    def test_determinant_and_base_point_invariance(self, rng: np.random.Generator) -> None:
        """det M = 1 and tr M does not depend on the base point (relative to |M|^2)."""
        for l in (1, 3):
            geometry = Geometry(l)
            lams = rng.uniform(-10.0, 100.0, 5000)
            bases = rng.uniform(0.0, geometry.P, 5000)
            for lam, base in zip(lams, bases):
                M0 = monodromy(lam, geometry)
                Mb = monodromy(lam, geometry, base)
                scale = max(1.0, float(np.max(np.abs(M0.entries))) ** 2)
                assert abs(M0.det - 1.0) <= 1e-10 * scale
                assert abs(Mb.trace - M0.trace) <= 1e-10 * scale

    def test_integer_base_point(self, geometry_pi: Geometry) -> None:
        """An int base point behaves like the equal float."""
        for base in (0, 1, 3):
            M_int = monodromy(2.0, geometry_pi, base)
            M_float = monodromy(2.0, geometry_pi, float(base))
            assert np.array_equal(M_int.entries, M_float.entries)
        assert monodromy(2.0, Geometry(1), 0).trace == pytest.approx(monodromy(2.0, Geometry(1)).trace)

    def test_base_point_outside_cell(self, geometry_pi: Geometry) -> None:
        """The base point must lie in [0, P)."""
        with pytest.raises(NecklaceError):
            monodromy(1.0, geometry_pi, geometry_pi.P)

    @pytest.mark.parametrize("lam", [-2.0, 0.0, 0.5, 2.0, 10.0])
    def test_integration_agrees_with_closed_form(self, geometry_pi: Geometry, lam: float) -> None:
        """RK4 with vertex jumps reproduces the matrix product."""
        closed = monodromy(lam, geometry_pi, 1.0)
        integrated = monodromy_by_integration(lam, geometry_pi, 1.0, h=1e-3)
        assert np.allclose(integrated.entries, closed.entries, rtol=0, atol=1e-8)

    def test_exact_steps(self, geometry_pi: Geometry) -> None:
        """A step that does not divide the segments is refused on request."""
        with pytest.raises(StepSizeError):
            monodromy_by_integration(1.0, geometry_pi, h=0.3, exact_steps=True)
        M = monodromy_by_integration(1.0, geometry_pi, h=math.pi / 400, exact_steps=True)
        assert M.trace == pytest.approx(monodromy(1.0, geometry_pi).trace, abs=1e-8)
        with pytest.raises(StepSizeError):
            monodromy_by_integration(1.0, geometry_pi, h=0.0)


class TestTraceFormula:
    """Tests for the closed-form trace."""

    def test_special_values(self, geometry_pi: Geometry) -> None:
        """tr = 2 at 0, -5/2 at 1/2, (9 cos(2 pi sqrt 2) - 1)/4 at sqrt 2."""
        assert trace_formula(0.0, geometry_pi) == pytest.approx(2.0)
        assert trace_formula(0.5, geometry_pi) == pytest.approx(-2.5)
        expected = (9 * math.cos(2 * math.pi * math.sqrt(2)) - 1) / 4
        assert trace_formula(math.sqrt(2), geometry_pi) == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(-2.179, abs=5e-3)

    @pytest.mark.parametrize("k", [1, 3])
    def test_breather_frequency_traces(self, geometry_pi: Geometry, k: int) -> None:
        """With alpha = 0: -5/2 on odd harmonics, 2 on even ones."""
        omega = k / 2
        for m in range(1, 40):
            tr = monodromy((m * omega) ** 2, geometry_pi).trace
            assert tr == pytest.approx(-2.5 if m % 2 else 2.0, abs=1e-12)

    @pytest.mark.parametrize("l", [1, 3])
    def test_formula_matches_matrix_product(self, rng: np.random.Generator, l: int) -> None:
        """Closed-form trace equals tr of the product over a dense sweep."""
        geometry = Geometry(l)
        lams = rng.uniform(0.0, 100.0, 10_000)
        formula = trace_formula(np.sqrt(lams), geometry)
        product = np.array([monodromy(lam, geometry).trace for lam in lams])
        assert np.max(np.abs(formula - product)) <= 1e-10

    def test_hyperbolic_continuation(self, geometry_pi: Geometry) -> None:
        """tr M(-eps^2) = (9 cosh(2 pi eps) - 1)/4 for L = pi."""
        eps = 0.1
        expected = (9 * math.cosh(2 * math.pi * eps) - 1) / 4
        assert trace_formula_lambda(-eps * eps, geometry_pi) == pytest.approx(expected, abs=1e-12)
        assert monodromy(-eps * eps, geometry_pi).trace == pytest.approx(expected, abs=1e-10)

    def test_negative_axis_is_gap(self, geometry_pi: Geometry) -> None:
        """tr > 2 for every lambda < 0."""
        lams = -np.logspace(-6, 2, 200)
        assert np.all(trace_formula_lambda(lams, geometry_pi) > 2.0)

    def test_derivative(self, geometry_3pi: Geometry) -> None:
        """Analytic derivative against central differences, through lambda = 0."""
        h = 1e-6
        for lam in (-2.0, -1e-7, 0.0, 0.3, 5.0):
            fd = (trace_formula_lambda(lam + h, geometry_3pi) - trace_formula_lambda(lam - h, geometry_3pi)) / (2 * h)
            assert trace_derivative(lam, geometry_3pi) == pytest.approx(fd, rel=1e-5, abs=1e-6)


class TestClassification:
    """Tests for the four Floquet cases."""

    def test_gap_negative(self) -> None:
        """tr = -5/2 gives multipliers -2 and -1/2."""
        cls = classify_trace(-2.5, 2 * math.pi)
        assert cls.case is FloquetCase.GAP_NEGATIVE
        assert sorted(m.real for m in cls.multipliers) == pytest.approx([-2.0, -0.5])
        assert cls.exponent == pytest.approx(math.log(2.0) / (2 * math.pi))

    def test_edge(self) -> None:
        """tr = 2 is a band edge with a double multiplier 1."""
        cls = classify_trace(2.0, 2 * math.pi)
        assert cls.case is FloquetCase.EDGE
        assert cls.multipliers == (1.0, 1.0)
        assert cls.degenerate_edge
        assert cls.case.in_spectrum

    def test_band(self) -> None:
        """tr = 0 gives multipliers +-i."""
        cls = classify_trace(0.0, 2 * math.pi)
        assert cls.case is FloquetCase.BAND
        assert {cls.multipliers[0], cls.multipliers[1]} == {1j, -1j}
        assert cls.exponent == 0.0

    def test_gap_positive(self) -> None:
        """tr > 2 is the positive gap."""
        assert classify_trace(3.0, 1.0).case is FloquetCase.GAP_POSITIVE

    def test_multiplier_product(self) -> None:
        """mu1 mu2 = 1 and mu1 + mu2 = tr."""
        for tr in (-7.0, -2.1, 0.3, 2.5, 100.0):
            a, b = multipliers_from_trace(tr)
            assert a * b == pytest.approx(1.0)
            assert (a + b).real == pytest.approx(tr)

    def test_classify_monodromy(self, geometry_pi: Geometry) -> None:
        """classify reads the trace of a unimodular matrix."""
        assert classify(monodromy(2.0, geometry_pi)).case is FloquetCase.GAP_NEGATIVE
        assert classify(monodromy(1 / 16, geometry_pi)).case is FloquetCase.BAND

    def test_classify_rejects_non_unimodular(self, geometry_pi: Geometry) -> None:
        """det M != 1 is an error."""
        bad = Monodromy(np.diag([2.0, 1.0]), 0.0, 0.0, geometry_pi)
        with pytest.raises(NecklaceError):
            classify(bad)


class TestStableDirection:
    """Tests for the Floquet splitting inside a gap."""

    def test_eigenvectors(self, geometry_pi: Geometry) -> None:
        """M stable = mu_s stable with |mu_s| < 1, unstable grows."""
        lam = -0.01
        split = stable_direction(lam, geometry_pi)
        M = monodromy(lam, geometry_pi).entries
        assert abs(split.mu_stable) < 1.0
        assert np.allclose(M @ split.stable, split.mu_stable * split.stable)
        assert split.stable[0] > 0 and split.unstable[0] > 0
        grown = M @ split.unstable
        assert np.allclose(grown, (1.0 / split.mu_stable) * split.unstable)

    def test_projection(self, geometry_pi: Geometry) -> None:
        """project_stable removes the unstable component."""
        split = stable_direction(-0.04, geometry_pi)
        state = 0.3 * split.stable + 0.7 * split.unstable
        c_s, c_u = split.components(state)
        assert (c_s, c_u) == (pytest.approx(0.3), pytest.approx(0.7))
        assert np.allclose(split.project_stable(state), 0.3 * split.stable)

    def test_band_is_rejected(self, geometry_pi: Geometry) -> None:
        """No splitting inside a band."""
        with pytest.raises(NecklaceError):
            stable_direction(1 / 16, geometry_pi)
