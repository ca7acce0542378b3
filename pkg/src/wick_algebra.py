"""
Wick Algebra

Correlation functions of Wick monomials :phi^a: at labeled points in a
quasi-free state, computed as sums over loop-free multigraphs whose
vertex degrees equal the field powers. Connected correlation functions
keep only connected graphs; a Moebius inversion over set partitions and
a brute-force leg-pairing sum serve as independent oracles.

Operator order is carried by the displacements: the line (i, j), i < j,
is evaluated at (t_j - t_i) - i (u_j - u_i), x_j - x_i.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np
from networkx.utils import UnionFind

# Handle both direct execution and package imports
try:
    from .exceptions import CapacityError, DomainError
    from .propagators import ComplexTimeDisplacement, FieldParams, thermal_mass_integral, two_point
    from .quadrature import QuadratureConfig
except ImportError:
    from exceptions import CapacityError, DomainError
    from propagators import ComplexTimeDisplacement, FieldParams, thermal_mass_integral, two_point
    from quadrature import QuadratureConfig

logger = logging.getLogger(__name__)

DEFAULT_MAX_POWER = 6
DEFAULT_ORACLE_MAX_FACTORS = 8
PAIRING_ORACLE_MAX_LEGS = 12

Propagator = Callable[[ComplexTimeDisplacement], complex]


@dataclass(frozen=True)
class WickMonomial:
    """Normal-ordered power :phi^a: translated by (t - iu, x).

    A ``vacuum_ordered`` monomial evaluated in a thermal state keeps its
    self-contractions relative to the thermal ordering.
    """
    label: int
    power: int
    displacement: ComplexTimeDisplacement = field(default_factory=ComplexTimeDisplacement)
    vacuum_ordered: bool = False

    @property
    def position(self) -> np.ndarray:
        x = self.displacement.x
        if isinstance(x, (int, float)):
            return np.array([0.0, 0.0, float(x)])
        return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Multigraph:
    """Vertices 0..n-1 with line multiplicities; ``lines`` holds (i, j, l), i <= j, l > 0."""
    vertex_count: int
    lines: Tuple[Tuple[int, int, int], ...]

    def multiplicity(self, i: int, j: int) -> int:
        a, b = min(i, j), max(i, j)
        for p, q, l in self.lines:
            if (p, q) == (a, b):
                return l
        return 0

    def degree(self, i: int) -> int:
        total = 0
        for p, q, l in self.lines:
            if p == i:
                total += l
            if q == i:
                total += l
        return total

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(self.degree(i) for i in range(self.vertex_count))

    @property
    def has_loops(self) -> bool:
        return any(p == q for p, q, _ in self.lines)

    def is_connected(self) -> bool:
        """Connectivity through lines between distinct vertices."""
        if self.vertex_count <= 1:
            return True
        components = UnionFind(range(self.vertex_count))
        for p, q, _ in self.lines:
            if p != q:
                components.union(p, q)
        root = components[0]
        return all(components[i] == root for i in range(1, self.vertex_count))

    def combinatorial_factor(self) -> int:
        """Number of leg pairings realizing the graph: prod a_i! / (prod l_ij! prod l_ii! 2^l_ii)."""
        numerator = 1
        for a in self.degrees:
            numerator *= math.factorial(a)
        denominator = 1
        for p, q, l in self.lines:
            denominator *= math.factorial(l)
            if p == q:
                denominator *= 2 ** l
        return numerator // denominator


@dataclass(frozen=True)
class CorrelationProblem:
    """Ordered Wick monomials evaluated in a quasi-free state."""
    monomials: Tuple[WickMonomial, ...]
    state: FieldParams
    max_power: int = DEFAULT_MAX_POWER

    def __post_init__(self):
        object.__setattr__(self, "monomials", tuple(self.monomials))
        labels = [m.label for m in self.monomials]
        if len(set(labels)) != len(labels):
            raise DomainError(f"Monomial labels must be unique, got {labels}")
        for m in self.monomials:
            if not 0 <= m.power <= self.max_power:
                raise DomainError(f"Power {m.power} of monomial {m.label} outside [0, {self.max_power}]")
        us = [m.displacement.u for m in self.monomials]
        if any(b < a for a, b in zip(us, us[1:])):
            raise DomainError(f"Imaginary times must be ordered along the simplex, got {us}")
        if us and not self.state.is_vacuum and us[-1] - us[0] >= self.state.beta:
            raise DomainError(f"Imaginary-time spread {us[-1] - us[0]} must stay below beta")

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(m.power for m in self.monomials)

    def loop_vertices(self) -> Set[int]:
        """Vertices whose self-contractions survive in this state."""
        if self.state.is_vacuum:
            return set()
        return {i for i, m in enumerate(self.monomials) if m.vacuum_ordered}

    def line_displacement(self, i: int, j: int) -> ComplexTimeDisplacement:
        """Displacement of vertex j relative to vertex i (i < j)."""
        a, b = self.monomials[i], self.monomials[j]
        dx = b.position - a.position
        return ComplexTimeDisplacement(
            t=b.displacement.t - a.displacement.t,
            u=b.displacement.u - a.displacement.u,
            x=tuple(float(c) for c in dx),
        )

    def sub_problem(self, indices: Iterable[int]) -> "CorrelationProblem":
        return CorrelationProblem(tuple(self.monomials[i] for i in sorted(indices)),
                                  self.state, self.max_power)


class _CachedPropagator:
    """Memoizes propagator values by displacement."""

    def __init__(self, propagator: Propagator):
        self._propagator = propagator
        self._values: Dict[ComplexTimeDisplacement, complex] = {}

    def __call__(self, d: ComplexTimeDisplacement) -> complex:
        if d not in self._values:
            self._values[d] = complex(self._propagator(d))
        return self._values[d]


def _default_propagator(state: FieldParams, quad: Optional[QuadratureConfig]) -> Propagator:
    return lambda d: two_point(d, state, quad)


def _complex_fsum(values: Iterable[complex]) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


# --- Graph enumeration -----------------------------------------------------

def enumerate_graphs(degrees: Sequence[int], loops: Optional[Iterable[int]] = None) -> List[Multigraph]:
    """All multigraphs with the prescribed vertex degrees, each exactly once.

    Loops are forbidden except at the vertices listed in ``loops``. Lines
    are assigned by lexicographic backtracking over the vertex pairs.
    """
    degrees = [int(a) for a in degrees]
    if any(a < 0 for a in degrees):
        raise DomainError(f"Degrees must be non-negative, got {degrees}")
    if sum(degrees) % 2:
        return []
    n = len(degrees)
    loop_ok = set(loops or ())
    pairs = [(i, j) for i in range(n) for j in range(i, n) if i != j or i in loop_ok]
    row_end = [k == len(pairs) - 1 or pairs[k + 1][0] != pairs[k][0] for k in range(len(pairs))]
    remaining = list(degrees)
    chosen: List[Tuple[int, int, int]] = []
    results: List[Multigraph] = []

    def backtrack(k: int) -> None:
        if k == len(pairs):
            if not any(remaining):
                results.append(Multigraph(n, tuple(chosen)))
            return
        i, j = pairs[k]
        if i == j:
            upper = remaining[i] // 2
        else:
            upper = min(remaining[i], remaining[j])
        for l in range(upper + 1):
            used = 2 * l if i == j else l
            remaining[i] -= used
            if i != j:
                remaining[j] -= l
            if not (row_end[k] and remaining[i]):
                if l:
                    chosen.append((i, j, l))
                backtrack(k + 1)
                if l:
                    chosen.pop()
            remaining[i] += used
            if i != j:
                remaining[j] += l

    backtrack(0)
    if not pairs and not any(remaining):
        results.append(Multigraph(n, ()))
    return results


def connected_terms(degrees: Sequence[int]) -> List[Tuple[int, Multigraph]]:
    """(combinatorial factor, graph) for every connected loop-free graph."""
    return [(g.combinatorial_factor(), g) for g in enumerate_graphs(degrees) if g.is_connected()]


# --- Weights and correlators -----------------------------------------------

def _tadpole(problem: CorrelationProblem, tadpole: Optional[complex],
             quad: Optional[QuadratureConfig]) -> complex:
    if tadpole is not None:
        return complex(tadpole)
    if not problem.loop_vertices():
        return 0j
    return complex(thermal_mass_integral(problem.state, quad).value)


def graph_weight(graph: Multigraph, problem: CorrelationProblem,
                 propagator: Optional[Propagator] = None, tadpole: Optional[complex] = None,
                 quad: Optional[QuadratureConfig] = None) -> complex:
    """Wick weight of one graph: its pairing count times the product of line values."""
    if graph.degrees != problem.degrees or graph.vertex_count != len(problem.monomials):
        raise DomainError(f"Graph degrees {graph.degrees} do not match powers {problem.degrees}")
    propagator = propagator or _default_propagator(problem.state, quad)
    value = complex(graph.combinatorial_factor())
    loop_value = None
    for i, j, l in graph.lines:
        if i == j:
            if i not in problem.loop_vertices():
                raise DomainError(f"Vertex {i} does not admit self-contractions")
            if loop_value is None:
                loop_value = _tadpole(problem, tadpole, quad)
            value *= loop_value ** l
        else:
            value *= propagator(problem.line_displacement(i, j)) ** l
    return value


def _graph_sum(problem: CorrelationProblem, connected: bool, propagator: Optional[Propagator],
               tadpole: Optional[complex], quad: Optional[QuadratureConfig]) -> complex:
    if sum(problem.degrees) % 2:
        return 0j
    graphs = enumerate_graphs(problem.degrees, problem.loop_vertices())
    if connected:
        graphs = [g for g in graphs if g.is_connected()]
    if not graphs:
        return 0j
    cached = _CachedPropagator(propagator or _default_propagator(problem.state, quad))
    loop_value = _tadpole(problem, tadpole, quad) if any(g.has_loops for g in graphs) else None
    return _complex_fsum(graph_weight(g, problem, cached, loop_value, quad) for g in graphs)


def full_correlation(problem: CorrelationProblem, propagator: Optional[Propagator] = None,
                     tadpole: Optional[complex] = None,
                     quad: Optional[QuadratureConfig] = None) -> complex:
    """omega(A_0 A_1 ... A_n) as a sum over all graphs."""
    return _graph_sum(problem, False, propagator, tadpole, quad)


def connected_correlation(problem: CorrelationProblem, propagator: Optional[Propagator] = None,
                          tadpole: Optional[complex] = None,
                          quad: Optional[QuadratureConfig] = None) -> complex:
    """Truncated correlation omega^c(A_0 x ... x A_n) as a sum over connected graphs."""
    return _graph_sum(problem, True, propagator, tadpole, quad)


# --- Oracles -----------------------------------------------------------------

def set_partitions(items: Sequence[int]) -> Iterator[List[List[int]]]:
    """All set partitions of ``items``; blocks keep the input order."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in set_partitions(rest):
        yield [[first]] + partition
        for k in range(len(partition)):
            yield partition[:k] + [[first] + partition[k]] + partition[k + 1:]


def connected_oracle(problem: CorrelationProblem, propagator: Optional[Propagator] = None,
                     tadpole: Optional[complex] = None, quad: Optional[QuadratureConfig] = None,
                     max_factors: int = DEFAULT_ORACLE_MAX_FACTORS) -> complex:
    """omega^c by Moebius inversion of full correlations over set partitions."""
    n = len(problem.monomials)
    if n > max_factors:
        raise CapacityError(f"Connected oracle is limited to {max_factors} factors, got {n}")
    cached = _CachedPropagator(propagator or _default_propagator(problem.state, quad))
    loop_value = _tadpole(problem, tadpole, quad)
    blocks: Dict[FrozenSet[int], complex] = {}

    def block_value(block: List[int]) -> complex:
        key = frozenset(block)
        if key not in blocks:
            blocks[key] = full_correlation(problem.sub_problem(block), cached, loop_value, quad)
        return blocks[key]

    terms = []
    for partition in set_partitions(list(range(n))):
        k = len(partition)
        product = complex((-1) ** (k - 1) * math.factorial(k - 1))
        for block in partition:
            product *= block_value(block)
            if product == 0:
                break
        terms.append(product)
    return _complex_fsum(terms)


def pairing_oracle(problem: CorrelationProblem, propagator: Optional[Propagator] = None,
                   tadpole: Optional[complex] = None,
                   quad: Optional[QuadratureConfig] = None) -> complex:
    """Brute-force sum over perfect matchings of labeled legs."""
    legs = [i for i, m in enumerate(problem.monomials) for _ in range(m.power)]
    if len(legs) > PAIRING_ORACLE_MAX_LEGS:
        raise CapacityError(f"Pairing oracle is limited to {PAIRING_ORACLE_MAX_LEGS} legs")
    if len(legs) % 2:
        return 0j
    cached = _CachedPropagator(propagator or _default_propagator(problem.state, quad))
    loops = problem.loop_vertices()
    loop_value = _tadpole(problem, tadpole, quad)

    def contraction(i: int, j: int) -> Optional[complex]:
        if i == j:
            return loop_value if i in loops else None
        a, b = min(i, j), max(i, j)
        return cached(problem.line_displacement(a, b))

    def matchings(remaining: List[int]) -> complex:
        if not remaining:
            return 1 + 0j
        head, rest = remaining[0], remaining[1:]
        total = 0j
        for k, other in enumerate(rest):
            value = contraction(head, other)
            if value is None:
                continue
            total += value * matchings(rest[:k] + rest[k + 1:])
        return total

    return matchings(legs)
