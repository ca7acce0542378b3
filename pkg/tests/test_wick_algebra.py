"""
Unit tests for wick_algebra.py
"""

import pytest

from src.exceptions import CapacityError, DomainError
from src.propagators import ComplexTimeDisplacement, FieldParams, vac_two_point
from src.wick_algebra import (
    CorrelationProblem,
    Multigraph,
    WickMonomial,
    connected_correlation,
    connected_oracle,
    connected_terms,
    enumerate_graphs,
    full_correlation,
    graph_weight,
    pairing_oracle,
    set_partitions,
)

VACUUM = FieldParams(1.0)
THERMAL = FieldParams(1.0, 2.0)


def _unit(d):
    return 1.0


def _synthetic(d):
    """Distinct, displacement-dependent line values."""
    return complex(1.0 / (1.0 + d.r + d.u), 0.1 * d.r)


def _problem(powers, state=VACUUM, spacing=1.0, u_step=0.0):
    monomials = tuple(
        WickMonomial(i, a, ComplexTimeDisplacement(0.0, i * u_step, (0.0, 0.3 * i, i * spacing)))
        for i, a in enumerate(powers)
    )
    return CorrelationProblem(monomials, state)


class TestGraphEnumeration:
    """Multigraphs with prescribed degrees."""

    def test_two_vertices(self):
        graphs = enumerate_graphs([2, 2])
        assert len(graphs) == 1
        assert graphs[0].multiplicity(0, 1) == 2

    def test_odd_total_degree(self):
        assert enumerate_graphs([1, 2]) == []

    def test_triangle_is_only_222_graph(self):
        """Without loops, (2,2,2) admits only the triangle."""
        terms = connected_terms([2, 2, 2])
        assert len(terms) == 1
        coefficient, graph = terms[0]
        assert coefficient == 8
        assert all(l == 1 for _, _, l in graph.lines)

    def test_four_legs_disconnected(self):
        """(1,1,1,1) has three matchings, none connected."""
        assert len(enumerate_graphs([1, 1, 1, 1])) == 3
        assert connected_terms([1, 1, 1, 1]) == []

    def test_loops_only_where_allowed(self):
        graphs = enumerate_graphs([4], loops=[0])
        assert len(graphs) == 1
        assert graphs[0].lines == ((0, 0, 2),)
        assert graphs[0].combinatorial_factor() == 3

    def test_graphs_enumerated_once(self):
        graphs = enumerate_graphs([2, 2, 2, 2])
        assert len({g.lines for g in graphs}) == len(graphs)

    def test_negative_degree(self):
        with pytest.raises(DomainError, match="non-negative"):
            enumerate_graphs([-1, 1])

    def test_connectivity(self):
        assert Multigraph(3, ((0, 1, 1), (1, 2, 1))).is_connected()
        assert not Multigraph(3, ((0, 1, 2),)).is_connected()

    def test_set_partitions_count(self):
        """Bell number B_4 = 15."""
        assert len(list(set_partitions([0, 1, 2, 3]))) == 15


class TestCorrelationProblem:
    """Validation of correlation problems."""

    def test_duplicate_labels(self):
        with pytest.raises(DomainError, match="labels must be unique"):
            CorrelationProblem((WickMonomial(0, 2), WickMonomial(0, 2)), VACUUM)

    def test_power_bound(self):
        with pytest.raises(DomainError, match="outside"):
            CorrelationProblem((WickMonomial(0, 7),), VACUUM)

    def test_imaginary_time_order(self):
        with pytest.raises(DomainError, match="ordered"):
            CorrelationProblem((WickMonomial(0, 2, ComplexTimeDisplacement(0.0, 1.0, 0.0)),
                                WickMonomial(1, 2, ComplexTimeDisplacement(0.0, 0.5, 1.0))), VACUUM)

    def test_imaginary_time_spread(self):
        with pytest.raises(DomainError, match="below beta"):
            CorrelationProblem((WickMonomial(0, 2, ComplexTimeDisplacement(0.0, 0.0, 0.0)),
                                WickMonomial(1, 2, ComplexTimeDisplacement(0.0, 2.0, 1.0))), THERMAL)

    def test_line_displacement(self):
        problem = _problem([1, 1], u_step=0.25)
        d = problem.line_displacement(0, 1)
        assert d.u == 0.25
        assert d.r == pytest.approx((0.3 ** 2 + 1.0) ** 0.5)


class TestCorrelations:
    """Graph sums against the independent oracles."""

    def test_unit_line_counts(self):
        """With every line equal to 1, sums count weighted graphs."""
        assert full_correlation(_problem([2, 2]), _unit) == 2
        assert full_correlation(_problem([1, 1, 1, 1]), _unit) == 3
        assert connected_correlation(_problem([1, 1, 1, 1]), _unit) == 0
        assert connected_correlation(_problem([2, 2, 2]), _unit) == 8

    def test_degree_zero_factor(self):
        """The identity is connected to nothing."""
        assert connected_correlation(_problem([0, 2]), _unit) == 0
        assert full_correlation(_problem([0, 2, 2]), _unit) == 2

    def test_odd_total_power(self):
        assert full_correlation(_problem([1, 2]), _synthetic) == 0

    @pytest.mark.parametrize("powers", [[2, 2], [1, 2, 1], [2, 2, 2], [1, 1, 1, 1], [4, 2, 2], [3, 2, 1]])
    def test_connected_matches_moebius_oracle(self, powers):
        problem = _problem(powers)
        graph_sum = connected_correlation(problem, _synthetic)
        oracle = connected_oracle(problem, _synthetic)
        assert graph_sum == pytest.approx(oracle, rel=1e-12, abs=1e-14)

    @pytest.mark.parametrize("powers", [[2, 2], [2, 2, 2], [3, 1, 2], [4, 4]])
    def test_full_matches_pairing_oracle(self, powers):
        problem = _problem(powers)
        assert full_correlation(problem, _synthetic) == pytest.approx(pairing_oracle(problem, _synthetic),
                                                                       rel=1e-12)

    def test_vacuum_two_point(self):
        """<:phi^2: :phi^2:> = 2 D^2 in the vacuum."""
        problem = _problem([2, 2], u_step=0.5)
        line = vac_two_point(problem.line_displacement(0, 1), VACUUM)
        assert full_correlation(problem) == pytest.approx(2 * line ** 2, rel=1e-12)

    def test_graph_weight_degree_mismatch(self):
        with pytest.raises(DomainError, match="do not match"):
            graph_weight(Multigraph(2, ((0, 1, 1),)), _problem([2, 2]), _unit)


class TestThermalLoops:
    """Vacuum-ordered monomials in a thermal state keep self-contractions."""

    def test_quadratic_tadpole(self):
        problem = CorrelationProblem((WickMonomial(0, 2, vacuum_ordered=True),), THERMAL)
        assert full_correlation(problem, _unit, tadpole=0.5) == pytest.approx(0.5)

    def test_quartic_tadpole(self):
        """:phi^4:_vac has expectation 3 c^2."""
        problem = CorrelationProblem((WickMonomial(0, 4, vacuum_ordered=True),), THERMAL)
        assert full_correlation(problem, _unit, tadpole=0.5) == pytest.approx(0.75)
        assert pairing_oracle(problem, _unit, tadpole=0.5) == pytest.approx(0.75)

    def test_loops_ignored_in_vacuum(self):
        problem = CorrelationProblem((WickMonomial(0, 2, vacuum_ordered=True),), VACUUM)
        assert full_correlation(problem, _unit, tadpole=0.5) == 0


class TestCapacity:
    """Combinatorial guards."""

    def test_pairing_oracle_leg_limit(self):
        with pytest.raises(CapacityError, match="legs"):
            pairing_oracle(_problem([6, 6, 2]), _unit)

    def test_moebius_oracle_factor_limit(self):
        with pytest.raises(CapacityError, match="factors"):
            connected_oracle(_problem([1, 1, 1]), _unit, max_factors=2)
