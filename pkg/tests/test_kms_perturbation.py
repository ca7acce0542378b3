"""
Unit tests for kms_perturbation.py

Full first-order corrections and the flux checks integrate over the
strip and a deformed radial contour; they carry the ``slow`` marker.
"""

import math

import numpy as np
import pytest

from src.config import Config
from src.exceptions import DomainError, PreconditionError
from src.kms_perturbation import (
    InteractionSpec,
    KMSSettings,
    SimplexDomain,
    TimeSmearing,
    VanHoveProfile,
    boundary_integrand,
    first_order_correction,
    graded_edges,
    insertion_density,
    observable_name,
    parse_index_range,
    profile_independence_check,
    radial_contour,
    reordering_coefficients,
    second_order_correction,
    second_order_geometry,
    second_order_integrand,
    t_shift_invariance,
    thermal_mass,
    van_hove_limit,
    van_hove_sweep,
    wick_reordering_check,
)
from src.propagators import ComplexTimeDisplacement, FieldParams, kms_two_point
from src.quadrature import gauss_legendre
from src.wick_algebra import CorrelationProblem, WickMonomial, connected_oracle

THERMAL = FieldParams(1.0, 2.0)
VACUUM = FieldParams(1.0)
UNIT_BETA = FieldParams(1.0, 1.0)
PHI2 = InteractionSpec(2)
PHI4 = InteractionSpec(4)


class TestDomainTypes:
    """Interaction, smearing and cutoff types."""

    @pytest.mark.parametrize("power", [1, 3, 8, 0])
    def test_interaction_power(self, power):
        with pytest.raises(DomainError, match="even in \\[2, 6\\]"):
            InteractionSpec(power)

    def test_interaction_name(self):
        assert PHI4.name == "phi4"
        assert observable_name(0) == "1"
        assert observable_name(2) == "phi2"

    @pytest.mark.parametrize("profile", ["poly2", "poly3"])
    def test_smearing_normalized(self, profile):
        """Smearing weights integrate to 1 on (-2 eps, -eps)."""
        smearing = TimeSmearing(0.1, profile)
        times, weights = smearing.nodes(12)
        assert np.sum(weights) == pytest.approx(1.0, rel=1e-12)
        assert np.all((times > -0.2) & (times < -0.1))

    def test_smearing_density_support(self):
        smearing = TimeSmearing(0.1)
        assert smearing.density(-0.05) == 0.0
        assert smearing.density(-0.25) == 0.0
        assert smearing.density(-0.15) > 0.0

    def test_delta_mode(self):
        smearing = TimeSmearing(0.2, mode="delta")
        times, weights = smearing.nodes(12)
        assert times.tolist() == [pytest.approx(-0.3)]
        assert weights.tolist() == [1.0]
        assert smearing.label == "delta"

    def test_smearing_validation(self):
        with pytest.raises(DomainError, match="epsilon must be positive"):
            TimeSmearing(0.0)
        with pytest.raises(DomainError, match="Unknown smearing profile"):
            TimeSmearing(0.1, "gaussian")
        with pytest.raises(DomainError, match="Unknown smearing mode"):
            TimeSmearing(0.1, "poly2", "half")

    def test_van_hove_profile(self):
        h = VanHoveProfile(2)
        assert h(np.array([0.0, 2.0, 2.5, 3.0, 4.0])).tolist() == [1.0, 1.0, 0.5, 0.0, 0.0]
        with pytest.raises(DomainError, match=">= 1"):
            VanHoveProfile(0)

    def test_simplex_domain(self):
        simplex = SimplexDomain(2, 2.0)
        assert simplex.volume == 2.0
        mapped = simplex.map_cube(np.array([[0.7, 0.2]]))
        assert mapped.tolist() == [[pytest.approx(0.4), pytest.approx(1.4)]]

    def test_settings_from_config(self):
        config = Config("nonexistent.json")
        config.set("kms.t_order", 8)
        config.set("kms.seed", 11)
        settings = KMSSettings.from_config(config)
        assert settings.t_order == 8
        assert settings.seed == 11
        assert settings.tolerance == 1e-6


class TestContour:
    """Radial contour and panel grading."""

    def test_graded_edges(self):
        edges = graded_edges(1.0, 0.01, 0.25)
        widths = np.diff(edges)
        assert edges[0] == 0.0 and edges[-1] == 1.0
        assert widths[0] == pytest.approx(0.01)
        assert np.max(widths) <= 0.25 + 1e-15

    def test_contour_integrates_polynomial(self):
        """The deformation leaves analytic integrands unchanged: int 4 pi r^2 h(r) dr."""
        h = VanHoveProfile(2)
        contour = radial_contour(-0.15, -1, h, 2.0, 16)
        exact = 4.0 * math.pi * (8.0 / 3.0 + (27.0 - 8.0) / 3.0 * 3.0 - (81.0 - 16.0) / 4.0)
        assert complex(np.sum(contour.weights)) == pytest.approx(exact, rel=1e-10)
        assert contour.plateau == 1.0
        assert contour.depth == 0.5

    def test_contour_leaves_real_axis(self):
        contour = radial_contour(0.3, 1, VanHoveProfile(2), 2.0, 8)
        assert np.max(contour.nodes.imag) > 0
        assert np.min(contour.nodes.imag) >= 0

    def test_contour_needs_room(self):
        with pytest.raises(PreconditionError, match="too small"):
            radial_contour(1.5, 1, VanHoveProfile(2), 2.0, 8)

    def test_contour_rejects_zero_time(self):
        with pytest.raises(PreconditionError):
            radial_contour(0.0, 1, VanHoveProfile(2), 2.0, 8)


class TestFirstOrderCheap:
    """First-order cases that need no quadrature."""

    @pytest.mark.parametrize("observable", [0, 1, 3])
    def test_no_connected_graph_is_exact_zero(self, observable):
        """The identity and odd total degrees have no connected graph."""
        report = first_order_correction(observable, PHI4, TimeSmearing(), VanHoveProfile(2), THERMAL)
        assert report.value == 0.0
        assert report.error_estimate == 0.0
        assert report.certified

    def test_report_fields(self):
        report = first_order_correction(0, PHI4, TimeSmearing(0.2), VanHoveProfile(3), THERMAL)
        data = report.as_dict()
        assert set(data) == {"observable", "interaction", "order", "beta", "mass", "epsilon",
                             "profile_index", "value", "error_estimate", "certified"}
        assert data["observable"] == "1"
        assert data["interaction"] == "phi4"
        assert data["profile_index"] == 3

    def test_massless_rejected(self):
        with pytest.raises(DomainError, match="positive mass"):
            first_order_correction(2, PHI2, TimeSmearing(), VanHoveProfile(2), FieldParams(0.0, 2.0))

    def test_insertion_density_at_zero(self):
        with pytest.raises(PreconditionError, match="t = 0"):
            insertion_density(2, PHI2, THERMAL, 0.0, VanHoveProfile(2))


class TestVanHoveLimit:
    """Extrapolation of van Hove sequences."""

    def test_geometric_sequence(self):
        values = {n: 1.0 - 0.5 ** n for n in range(2, 6)}
        report = van_hove_limit(values)
        assert report.certified
        assert report.limit == pytest.approx(1.0, rel=1e-12)
        assert report.ratios == pytest.approx((0.5, 0.5))

    def test_converged_sequence(self):
        report = van_hove_limit({2: 1.0, 3: 1.0, 4: 1.0})
        assert report.certified
        assert report.limit == 1.0
        assert report.reason == "differences below tolerance"

    def test_growing_differences(self):
        report = van_hove_limit({2: 0.0, 3: 1.0, 4: 3.0, 5: 6.0})
        assert not report.certified
        assert report.reason == "differences do not decay geometrically"

    def test_needs_three_indices(self):
        with pytest.raises(DomainError, match="at least 3"):
            van_hove_limit({2: 1.0, 3: 1.5})

    def test_parse_index_range(self):
        assert parse_index_range("2..5") == [2, 3, 4, 5]
        for text in ("5..2", "0..3", "two..five", "3"):
            with pytest.raises(DomainError):
                parse_index_range(text)


class TestThermalMassAndReordering:
    """c(beta) and the vacuum-to-thermal reordering constants."""

    def test_massless_thermal_mass(self):
        report = thermal_mass(FieldParams(0.0, 2.0))
        assert report.value == pytest.approx(1.0 / 48.0, rel=1e-9)
        assert report.massless_value == pytest.approx(1.0 / 48.0)
        assert report.as_dict()["printed_massless"] == "1/(12 pi^2 beta^2)"

    def test_massive_has_no_closed_form(self):
        assert thermal_mass(THERMAL).massless_value is None

    def test_reordering_coefficients(self):
        assert reordering_coefficients(4) == {0: 1, 1: 6, 2: 3}
        assert reordering_coefficients(6) == {0: 1, 1: 15, 2: 45, 3: 15}

    def test_quartic_reordering(self):
        """q2 = 6 c and q0 = 3 c^2 for :phi^4:."""
        report = wick_reordering_check(THERMAL, 4)
        assert report.q2_over_c == pytest.approx(6.0, rel=1e-10)
        assert report.q0_over_c2 == pytest.approx(3.0, rel=1e-10)
        assert report.discrepancy <= 1e-9
        assert report.passed

    def test_massless_reordering(self):
        report = wick_reordering_check(FieldParams(0.0, 1.0), 4)
        assert report.q0_over_c2 == pytest.approx(3.0)
        assert report.direct_square is None
        assert report.passed

    def test_reordering_needs_thermal(self):
        with pytest.raises(DomainError, match="finite beta"):
            wick_reordering_check(VACUUM, 4)

    def test_reordering_power(self):
        with pytest.raises(DomainError, match="even"):
            wick_reordering_check(THERMAL, 3)


class TestSecondOrder:
    """Two-insertion term."""

    POINT = np.array([[0.2, 0.7, 0.3, 0.6, 0.4, 0.5, 0.3]])

    def _problem(self, geometry, powers):
        x1, x2 = geometry.positions(0)
        monomials = [WickMonomial(1, powers[-2], ComplexTimeDisplacement(float(geometry.t1[0]),
                                                                         float(geometry.u1[0]), x1)),
                     WickMonomial(2, powers[-1], ComplexTimeDisplacement(float(geometry.t2[0]),
                                                                         float(geometry.u2[0]), x2))]
        if len(powers) == 3:
            monomials.insert(0, WickMonomial(0, powers[0]))
        return CorrelationProblem(tuple(monomials), THERMAL)

    def test_geometry(self):
        smearing, h = TimeSmearing(0.1), VanHoveProfile(1)
        geometry = second_order_geometry(self.POINT, smearing, h, 2.0)
        assert geometry.u1[0] == pytest.approx(0.4)
        assert geometry.u2[0] == pytest.approx(1.4)
        assert geometry.t1[0] == pytest.approx(-0.17)
        assert geometry.r2[0] == pytest.approx(1.0)
        assert geometry.weight[0] > 0

    @pytest.mark.parametrize("observable,interaction", [(2, PHI2), (0, PHI2), (2, PHI4)])
    def test_integrand_matches_moebius_oracle(self, observable, interaction):
        """The vectorized graph sum equals the oracle cumulant at the sampled points."""
        smearing, h = TimeSmearing(0.1), VanHoveProfile(1)
        geometry = second_order_geometry(self.POINT, smearing, h, 2.0)
        k = interaction.power
        powers = (observable, k, k) if observable else (k, k)
        expected = geometry.weight[0] * connected_oracle(self._problem(geometry, powers))
        value = second_order_integrand(self.POINT, observable, interaction, smearing, h, THERMAL)[0]
        assert value == pytest.approx(expected, rel=1e-8)

    def test_qmc_estimate(self):
        settings = KMSSettings(qmc_points_log2=6, qmc_replicas=4)
        result = second_order_correction(2, PHI2, TimeSmearing(0.1), VanHoveProfile(1), THERMAL, settings)
        assert result.samples == 256
        assert math.isfinite(result.value)
        assert result.stderr > 0
        report = result.as_report(2, PHI2, TimeSmearing(0.1), VanHoveProfile(1), THERMAL)
        assert report.order == 2

    def test_no_connected_graph(self):
        result = second_order_correction(1, PHI2, TimeSmearing(0.1), VanHoveProfile(1), THERMAL)
        assert result.value == 0.0 and result.certified

    def test_vacuum_rejected(self):
        with pytest.raises(DomainError, match="thermal states only"):
            second_order_correction(2, PHI2, TimeSmearing(), VanHoveProfile(1), VACUUM)

    def test_delta_rejected(self):
        with pytest.raises(DomainError, match="full time smearing"):
            second_order_correction(2, PHI2, TimeSmearing(mode="delta"), VanHoveProfile(1), THERMAL)


class TestChecksPreconditions:
    """Shift and profile checks reject inadmissible input before integrating."""

    def test_shift_vacuum(self):
        with pytest.raises(DomainError, match="thermal states"):
            t_shift_invariance(2, PHI2, VACUUM, [-0.3, -0.2])

    def test_shift_zero(self):
        with pytest.raises(PreconditionError, match="t = 0"):
            t_shift_invariance(2, PHI2, THERMAL, [-0.3, -0.15, 0.0])

    def test_shift_positive(self):
        with pytest.raises(DomainError, match="negative"):
            t_shift_invariance(2, PHI2, THERMAL, [-0.3, 0.2])

    def test_profiles_need_common_support(self):
        with pytest.raises(DomainError, match="same support"):
            profile_independence_check(2, PHI2, THERMAL, [TimeSmearing(0.1), TimeSmearing(0.2)])

    def test_profiles_need_two(self):
        with pytest.raises(DomainError, match="at least two"):
            profile_independence_check(2, PHI2, THERMAL, [TimeSmearing(0.1)])


@pytest.mark.slow
class TestFirstOrderIntegration:
    """Corrections that integrate the insertion density."""

    def test_thermal_first_order_certified(self):
        report = first_order_correction(2, PHI2, TimeSmearing(0.1), VanHoveProfile(2), THERMAL)
        assert report.certified
        assert math.isfinite(report.value)
        assert report.error_estimate <= 1e-6 * abs(report.value)

    def test_insertion_density_is_real(self):
        """T_h(t) is real for real t off the observable."""
        value = insertion_density(2, PHI2, THERMAL, -0.15, VanHoveProfile(2))
        assert abs(value.imag) <= 1e-8 * abs(value.real)

    def test_vacuum_first_order(self):
        report = first_order_correction(2, PHI2, TimeSmearing(0.1), VanHoveProfile(2), VACUUM)
        assert math.isinf(report.beta)
        assert math.isfinite(report.value)

    def test_shift_flux_identity(self):
        report = t_shift_invariance(2, PHI2, THERMAL, [-0.3, -0.2, -0.15], VanHoveProfile(2))
        assert report.passed
        assert len(report.predicted_differences) == 2

    def test_profile_flux_compensation(self):
        smearings = [TimeSmearing(0.1, "poly2"), TimeSmearing(0.1, "poly3"), TimeSmearing(0.1, mode="delta")]
        report = profile_independence_check(2, PHI2, THERMAL, smearings, VanHoveProfile(2),
                                            KMSSettings(t_order=8))
        assert report.passed
        assert report.labels == ("poly2", "poly3", "delta")


@pytest.mark.slow
class TestQuarticFirstOrder:
    """phi4 observable with a phi4 interaction at m = 1, beta = 1."""

    def test_van_hove_sweep_converges(self):
        """Values over n = 2..5 stabilize to 1e-4 relative and the limit is certified."""
        reports, limit = van_hove_sweep(4, PHI4, TimeSmearing(0.1), [2, 3, 4, 5], UNIT_BETA)
        assert all(r.certified for r in reports)
        assert limit.certified
        assert limit.indices == (2, 3, 4, 5)
        for value, difference in zip(limit.values[1:], limit.differences):
            assert abs(difference) < 1e-4 * abs(value)
        assert limit.limit == pytest.approx(limit.values[-1], rel=1e-4)

    def test_shift_flux_identity(self):
        report = t_shift_invariance(4, PHI4, UNIT_BETA, [-0.3, -0.2, -0.15], VanHoveProfile(2))
        assert report.passed
        assert report.discrepancy < 1e-4

    def test_profile_independence(self):
        """poly2, poly3 and delta agree after flux compensation."""
        smearings = [TimeSmearing(0.1, "poly2"), TimeSmearing(0.1, "poly3"), TimeSmearing(0.1, mode="delta")]
        report = profile_independence_check(4, PHI4, UNIT_BETA, smearings, VanHoveProfile(2),
                                            KMSSettings(t_order=8))
        assert report.passed
        base = report.compensated[0]
        for value in report.compensated[1:]:
            assert value == pytest.approx(base, rel=1e-4)

    def test_delta_against_full_smearing(self):
        """Point evaluation at -3 eps / 2 and the full smearing agree to 1e-3 once flux is compensated."""
        smearings = [TimeSmearing(0.1), TimeSmearing(0.1, mode="delta")]
        report = profile_independence_check(4, PHI4, UNIT_BETA, smearings, VanHoveProfile(2),
                                            tolerance=1e-3)
        assert report.passed
        full, delta = report.compensated
        assert abs(full - delta) <= 1e-3 * abs(full)
        # the delta value carries no flux term of its own
        assert delta == pytest.approx(report.values[1], rel=1e-12)

    def test_cold_state_approaches_vacuum(self):
        """At beta = 10 / m the correction differs from the vacuum one by an e^{-beta m} sized amount."""
        smearing, h = TimeSmearing(0.1), VanHoveProfile(2)
        cold = first_order_correction(4, PHI4, smearing, h, FieldParams(1.0, 10.0))
        vacuum = first_order_correction(4, PHI4, smearing, h, VACUUM)
        assert cold.certified
        assert math.isfinite(vacuum.value)
        assert abs(cold.value - vacuum.value) <= 25.0 * math.exp(-10.0) * abs(vacuum.value)

    def test_strip_interior_against_monte_carlo(self):
        """The contour integral over u in [0.3, 0.7] matches plain real-axis sampling.

        Away from the strip edges the radial integrand is regular on the
        real axis, so uniform samples of 24 * 4 pi r^2 h(r) D(t - iu, r)^4
        with the split propagator give an independent estimate.
        """
        t, h = -0.15, VanHoveProfile(2)
        lower, upper, r_max = 0.3, 0.7, 3.0
        x, w = gauss_legendre(16)
        half = 0.5 * (upper - lower)
        u = lower + half * (x + 1.0)
        g = boundary_integrand(t, u, 4, PHI4, UNIT_BETA, h, KMSSettings(), direction=-1)
        reference = complex(np.sum(half * w * g))

        rng = np.random.default_rng(1729)
        samples = 8000
        us = rng.uniform(lower, upper, samples)
        rs = rng.uniform(0.0, r_max, samples)
        values = np.array([
            24.0 * 4.0 * math.pi * r * r * float(h(r))
            * kms_two_point(ComplexTimeDisplacement(t, ui, r), UNIT_BETA) ** 4
            for ui, r in zip(us, rs)
        ]) * (upper - lower) * r_max
        estimate = complex(np.mean(values))
        stderr = float(np.std(values, ddof=1)) / math.sqrt(samples)
        assert stderr > 0
        assert abs(estimate - reference) <= 5.0 * stderr
