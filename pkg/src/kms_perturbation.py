"""
Perturbative KMS Corrections

Low-order terms of the connected-correlation expansion of the interacting
KMS state (and of the ground state as beta -> inf) for a Wick monomial
observable at the origin and an interaction density :phi^k: smeared in
time by a unit-normalized profile on (-2 eps, -eps) and in space by a
van Hove cutoff h_n.

The first-order term needs the insertion density

    T_h(t) = int_0^beta du int d^3x h(|x|) omega^c(A x alpha_{t+iu,x}(:phi^k:)),

whose radial integrand D(t - iu, r)^l is not locally integrable at the
light cone r = |t| as u -> 0. The radial integral is taken along a
contour that leaves the real axis on [0, R1], where h = 1, and returns
to it before the cutoff ramp; the integral is the boundary value of an
analytic function, so the deformation does not change it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

# Handle both direct execution and package imports
try:
    from .exceptions import DomainError, PreconditionError
    from .propagators import (
        ComplexTimeDisplacement, FieldParams, bessel_kernel, bose_mirror_grid, bose_mirror_values,
        thermal_mass_integral,
    )
    from .quadrature import QuadratureConfig, composite_rule, gauss_legendre, uniform_edges
    from .wick_algebra import (
        CorrelationProblem, WickMonomial, connected_terms, full_correlation,
    )
except ImportError:
    from exceptions import DomainError, PreconditionError
    from propagators import (
        ComplexTimeDisplacement, FieldParams, bessel_kernel, bose_mirror_grid, bose_mirror_values,
        thermal_mass_integral,
    )
    from quadrature import QuadratureConfig, composite_rule, gauss_legendre, uniform_edges
    from wick_algebra import (
        CorrelationProblem, WickMonomial, connected_terms, full_correlation,
    )

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
PROFILE_SHAPES = {"poly2": (2, 30.0), "poly3": (3, 140.0)}
SMEARING_MODES = ("full", "delta")
PRINTED_THERMAL_MASS_MASSLESS = "1/(12 pi^2 beta^2)"
PRINTED_REORDERING_CONSTANT = "6c(beta)"


# --- Domain types ------------------------------------------------------------

@dataclass(frozen=True)
class InteractionSpec:
    """Interaction density :phi^k:; corrections are reported per order."""
    power: int = 4

    def __post_init__(self):
        if self.power % 2 or not 2 <= self.power <= 6:
            raise DomainError(f"Interaction power must be even in [2, 6], got {self.power}")

    @property
    def name(self) -> str:
        return f"phi{self.power}"


@dataclass(frozen=True)
class TimeSmearing:
    """Unit-normalized density on (-2 eps, -eps), or a point evaluation at -3 eps / 2."""
    epsilon: float = 0.1
    profile: str = "poly2"
    mode: str = "full"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if self.profile not in PROFILE_SHAPES:
            raise DomainError(f"Unknown smearing profile {self.profile!r}")
        if self.mode not in SMEARING_MODES:
            raise DomainError(f"Unknown smearing mode {self.mode!r}")

    @property
    def label(self) -> str:
        return "delta" if self.mode == "delta" else self.profile

    @property
    def centre(self) -> float:
        return -1.5 * self.epsilon

    def density(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        eps = self.epsilon
        power, norm = PROFILE_SHAPES[self.profile]
        inside = (t > -2 * eps) & (t < -eps)
        bump = ((t + 2 * eps) * (-eps - t)) ** power * norm / eps ** (2 * power + 1)
        return np.where(inside, bump, 0.0)

    def nodes(self, order: int) -> Tuple[np.ndarray, np.ndarray]:
        """Times and weights w_j rho(t_j) whose sum approximates int rho(t) f(t) dt."""
        if self.mode == "delta":
            return np.array([self.centre]), np.array([1.0])
        x, w = gauss_legendre(order)
        half = 0.5 * self.epsilon
        t = self.centre + half * x
        return t, half * w * self.density(t)


@dataclass(frozen=True)
class VanHoveProfile:
    """h_n(r) = 1 for r <= n, linear to 0 at n + 1."""
    index: int = 2

    def __post_init__(self):
        if self.index < 1:
            raise DomainError(f"van Hove index must be >= 1, got {self.index}")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.clip(self.index + 1.0 - r, 0.0, 1.0)


@dataclass(frozen=True)
class SimplexDomain:
    """Ordered imaginary times 0 <= u_1 <= ... <= u_order <= scale."""
    order: int
    scale: float

    @property
    def volume(self) -> float:
        return self.scale ** self.order / math.factorial(self.order)

    def map_cube(self, points: np.ndarray) -> np.ndarray:
        """Order statistics of scaled cube points; the Jacobian is ``volume`` times n!."""
        return np.sort(np.asarray(points, dtype=float), axis=1) * self.scale


@dataclass(frozen=True)
class KMSSettings:
    """Resolution of the nested quadratures and the quasi-Monte Carlo budget."""
    t_order: int = 12
    u_order: int = 16
    r_order: int = 16
    p_order: int = 16
    tail_tol: float = 1e-12
    tolerance: float = 1e-6
    qmc_points_log2: int = 10
    qmc_replicas: int = 8
    seed: int = 1729

    @classmethod
    def from_config(cls, config) -> "KMSSettings":
        return cls(
            t_order=int(config.get("kms.t_order", cls.t_order)),
            u_order=int(config.get("kms.u_order", cls.u_order)),
            r_order=int(config.get("kms.r_order", cls.r_order)),
            p_order=int(config.get("kms.p_order", cls.p_order)),
            tail_tol=float(config.get("kms.tail_tol", cls.tail_tol)),
            tolerance=float(config.get("kms.tolerance", cls.tolerance)),
            qmc_points_log2=int(config.get("kms.qmc_points_log2", cls.qmc_points_log2)),
            qmc_replicas=int(config.get("kms.qmc_replicas", cls.qmc_replicas)),
            seed=int(config.get("kms.seed", cls.seed)),
        )


@dataclass(frozen=True)
class KMSReport:
    observable: str
    interaction: str
    order: int
    beta: float
    mass: float
    epsilon: float
    profile_index: int
    value: float
    error_estimate: float
    certified: bool
    profile: str = "poly2"

    def as_dict(self) -> dict:
        return {
            "observable": self.observable, "interaction": self.interaction, "order": self.order,
            "beta": self.beta, "mass": self.mass, "epsilon": self.epsilon,
            "profile_index": self.profile_index, "value": self.value,
            "error_estimate": self.error_estimate, "certified": self.certified,
        }


def observable_name(power: int) -> str:
    return "1" if power == 0 else f"phi{power}"


def _insertion_terms(observable_power: int, interaction: InteractionSpec) -> List[Tuple[int, int]]:
    """(coefficient, line multiplicity) of the connected two-vertex graphs."""
    terms = []
    for coefficient, graph in connected_terms((observable_power, interaction.power)):
        terms.append((coefficient, graph.multiplicity(0, 1)))
    return terms


# --- Deformed radial contour -------------------------------------------------

@dataclass(frozen=True)
class RadialContour:
    nodes: np.ndarray
    weights: np.ndarray
    plateau: float
    depth: float


def radial_contour(t: float, direction: int, h: VanHoveProfile, beta: float, order: int,
                   refine: int = 0) -> RadialContour:
    """Nodes and weights (including 4 pi r^2 h(r) dr) for the radial integral.

    The path r(s) = s + i direction d sin(pi s / R1) on [0, R1] avoids the
    light-cone singularity near r = |t|; beyond R1 it is the real axis.
    """
    if t == 0:
        raise PreconditionError("The insertion density diverges at t = 0")
    plateau = min(float(h.index), max(1.0, 4.0 * abs(t)))
    if plateau <= 2.0 * abs(t):
        raise PreconditionError(f"Cutoff plateau n={h.index} too small for |t|={abs(t)}")
    depth = min(beta / 4.0, plateau / 2.0)
    clearance = depth * math.sin(math.pi * abs(t) / plateau)
    width = min(0.25, 0.5 * clearance) / 2 ** refine
    s, w = composite_rule(uniform_edges(0.0, plateau, width), order)
    phase = math.pi * s / plateau
    r_def = s + 1j * direction * depth * np.sin(phase)
    jac = 1.0 + 1j * direction * depth * (math.pi / plateau) * np.cos(phase)
    pieces_r, pieces_w = [r_def], [w * jac * FOUR_PI * r_def ** 2]
    real_width = 0.25 / 2 ** refine
    for lower, upper in ((plateau, float(h.index)), (float(h.index), h.index + 1.0)):
        if upper > lower:
            x, wx = composite_rule(uniform_edges(lower, upper, real_width), order)
            pieces_r.append(x.astype(complex))
            pieces_w.append((wx * FOUR_PI * x * x * h(x)).astype(complex))
    return RadialContour(np.concatenate(pieces_r), np.concatenate(pieces_w), plateau, depth)


def graded_edges(length: float, smallest: float, widest: float) -> np.ndarray:
    """Panel edges on [0, length] doubling from ``smallest`` near 0 up to ``widest``."""
    edges = [0.0]
    width = smallest
    while edges[-1] + width < length:
        edges.append(edges[-1] + width)
        width = min(2.0 * width, widest)
    edges.append(length)
    return np.array(edges)


def _two_point_matrix(t: float, u: np.ndarray, r: np.ndarray, params: FieldParams,
                      settings: KMSSettings) -> np.ndarray:
    """D(t - iu_j, r_i) on the (r x u) grid using the mirror representation."""
    tau = u + 1j * t
    values = bessel_kernel(tau[None, :], r[:, None], params.mass)
    if params.is_vacuum:
        return values
    values = values + bessel_kernel(params.beta - tau[None, :], r[:, None], params.mass)
    return values + bose_mirror_grid(tau, r, params, abs_tol=settings.tail_tol, order=settings.p_order)


def boundary_integrand(t: float, u: np.ndarray, observable_power: int, interaction: InteractionSpec,
                       params: FieldParams, h: VanHoveProfile, settings: KMSSettings,
                       direction: int, refine: int = 0) -> np.ndarray:
    """G(t, u) = int d^3x h omega^c(...) at the given imaginary times on one contour."""
    terms = _insertion_terms(observable_power, interaction)
    beta = params.beta if not params.is_vacuum else math.inf
    contour = radial_contour(t, direction, h, beta, settings.r_order, refine)
    d = _two_point_matrix(t, np.asarray(u, dtype=float), contour.nodes, params, settings)
    total = np.zeros(d.shape[1], dtype=complex)
    for coefficient, lines in terms:
        total += coefficient * (contour.weights @ d ** lines)
    return total


def _sign(x: float) -> int:
    return 1 if x > 0 else -1


def insertion_density(observable_power: int, interaction: InteractionSpec, params: FieldParams,
                      t: float, h: VanHoveProfile, settings: Optional[KMSSettings] = None,
                      refine: int = 0) -> complex:
    """T_h(t); in the vacuum the symmetric limit int_0^Tmax [G(t, u) + G(-t, u)] du."""
    settings = settings or KMSSettings()
    params.require_massive()
    if t == 0:
        raise PreconditionError("The insertion density diverges at t = 0 (coinciding points)")
    terms = _insertion_terms(observable_power, interaction)
    if not terms:
        return 0j
    smallest = 0.01 / 2 ** refine
    if params.is_vacuum:
        lines = min(l for _, l in terms)
        t_max = math.log(1.0 / settings.tail_tol) / (lines * params.mass)
        u, w = composite_rule(graded_edges(t_max, smallest, 1.0 / 2 ** refine), settings.u_order)
        value = 0j
        for argument in (t, -t):
            g = boundary_integrand(argument, u, observable_power, interaction, params, h, settings,
                                   _sign(argument), refine)
            value += complex(np.sum(w * g))
        return value
    half = 0.5 * params.beta
    u, w = composite_rule(graded_edges(half, smallest, 0.25 / 2 ** refine), settings.u_order)
    lower = boundary_integrand(t, u, observable_power, interaction, params, h, settings, _sign(t), refine)
    upper = boundary_integrand(t, params.beta - u, observable_power, interaction, params, h, settings,
                               -_sign(t), refine)
    return complex(np.sum(w * lower) + np.sum(w * upper))


def boundary_flux(t: float, observable_power: int, interaction: InteractionSpec, params: FieldParams,
                  h: VanHoveProfile, settings: KMSSettings, refine: int = 0) -> complex:
    """dT/dt = i [G(t, beta) - G(t, 0)], the flux through the two edges of the strip."""
    at_zero = boundary_integrand(t, np.array([0.0]), observable_power, interaction, params, h, settings,
                                 _sign(t), refine)[0]
    at_beta = boundary_integrand(t, np.array([params.beta]), observable_power, interaction, params, h,
                                 settings, -_sign(t), refine)[0]
    return 1j * (at_beta - at_zero)


def flux_difference(t1: float, t2: float, observable_power: int, interaction: InteractionSpec,
                    params: FieldParams, h: VanHoveProfile, settings: KMSSettings) -> complex:
    """i int_{t1}^{t2} [G(s, beta) - G(s, 0)] ds."""
    if t1 == t2:
        return 0j
    x, w = gauss_legendre(settings.t_order)
    mid, half = 0.5 * (t1 + t2), 0.5 * (t2 - t1)
    return sum(half * wj * boundary_flux(mid + half * xj, observable_power, interaction, params, h, settings)
               for xj, wj in zip(x, w))


# --- First order -------------------------------------------------------------


def first_order_correction(observable_power: int, interaction: InteractionSpec, smearing: TimeSmearing,
                           h: VanHoveProfile, params: FieldParams,
                           settings: Optional[KMSSettings] = None) -> KMSReport:
    """-int dt rho(t) T_h(t), with an error estimate from a run at doubled resolution."""
    settings = settings or KMSSettings()
    params.require_massive()
    beta = params.beta

    def report(value: float, error: float, certified: bool) -> KMSReport:
        return KMSReport(observable_name(observable_power), interaction.name, 1, beta, params.mass,
                         smearing.epsilon, h.index, value, error, certified, smearing.label)

    if not _insertion_terms(observable_power, interaction):
        logger.info(f"first order: no connected graph for degrees ({observable_power}, {interaction.power}); exact 0")
        return report(0.0, 0.0, True)

    times, weights = smearing.nodes(settings.t_order)

    def integrate(refine: int) -> complex:
        return -sum(w * insertion_density(observable_power, interaction, params, t, h, settings, refine)
                    for t, w in zip(times, weights))

    coarse = integrate(0)
    fine = integrate(1)
    error = max(abs(fine - coarse), abs(fine.imag))
    certified = error <= settings.tolerance * max(abs(fine.real), 1e-300)
    logger.info(
        f"first order {observable_name(observable_power)}/{interaction.name} n={h.index} "
        f"{params.describe()} {smearing.label}: {fine.real:.10e} +- {error:.2e}"
    )
    return report(float(fine.real), float(error), certified)


# --- Second order ------------------------------------------------------------

@dataclass(frozen=True)
class SecondOrderResult:
    value: float
    stderr: float
    samples: int
    certified: bool

    def as_report(self, observable_power: int, interaction: InteractionSpec, smearing: TimeSmearing,
                  h: VanHoveProfile, params: FieldParams) -> KMSReport:
        return KMSReport(observable_name(observable_power), interaction.name, 2, params.beta, params.mass,
                         smearing.epsilon, h.index, self.value, self.stderr, self.certified, smearing.label)


@dataclass(frozen=True)
class SecondOrderGeometry:
    """Physical points for cube samples together with the Jacobian weight."""
    u1: np.ndarray
    u2: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    cos_theta: np.ndarray
    weight: np.ndarray

    def positions(self, k: int) -> Tuple[Tuple[float, float, float], Tuple[float, float, float]]:
        """x1 along z and x2 in the x-z plane for sample k."""
        c = float(self.cos_theta[k])
        s = math.sqrt(max(0.0, 1.0 - c * c))
        return (0.0, 0.0, float(self.r1[k])), (float(self.r2[k]) * s, 0.0, float(self.r2[k]) * c)


def second_order_geometry(points: np.ndarray, smearing: TimeSmearing, h: VanHoveProfile,
                          beta: float) -> SecondOrderGeometry:
    """Map unit-cube points (u1, u2, t1, t2, r1, r2, cos) to the integration domain."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    simplex = SimplexDomain(2, beta)
    u = simplex.map_cube(points[:, :2])
    eps = smearing.epsilon
    t = -2.0 * eps + eps * points[:, 2:4]
    reach = h.index + 1.0
    r = reach * points[:, 4:6]
    cos_theta = 2.0 * points[:, 6] - 1.0
    spatial = 8.0 * math.pi ** 2 * reach ** 2 * 2.0 * r[:, 0] ** 2 * r[:, 1] ** 2 * h(r[:, 0]) * h(r[:, 1])
    temporal = eps ** 2 * smearing.density(t[:, 0]) * smearing.density(t[:, 1])
    weight = simplex.volume * temporal * spatial
    return SecondOrderGeometry(u[:, 0], u[:, 1], t[:, 0], t[:, 1], r[:, 0], r[:, 1], cos_theta, weight)


def _mirror_two_point(t: np.ndarray, u: np.ndarray, r: np.ndarray, params: FieldParams,
                      settings: KMSSettings) -> np.ndarray:
    tau = u + 1j * t
    values = bessel_kernel(tau, r, params.mass) + bessel_kernel(params.beta - tau, r, params.mass)
    return values + bose_mirror_values(tau, r, params, abs_tol=settings.tail_tol, order=settings.p_order)


def second_order_integrand(points: np.ndarray, observable_power: int, interaction: InteractionSpec,
                           smearing: TimeSmearing, h: VanHoveProfile, params: FieldParams,
                           settings: Optional[KMSSettings] = None) -> np.ndarray:
    """Weighted omega^c(A x alpha_{iu1}(K) x alpha_{iu2}(K)) at cube points."""
    settings = settings or KMSSettings()
    geometry = second_order_geometry(points, smearing, h, params.beta)
    k = interaction.power
    with_observable = observable_power > 0
    degrees = (observable_power, k, k) if with_observable else (k, k)
    terms = connected_terms(degrees)
    r12 = np.sqrt(np.maximum(geometry.r1 ** 2 + geometry.r2 ** 2
                             - 2.0 * geometry.r1 * geometry.r2 * geometry.cos_theta, 0.0))
    line_12 = _mirror_two_point(geometry.t2 - geometry.t1, geometry.u2 - geometry.u1, r12, params, settings)
    if with_observable:
        line_01 = _mirror_two_point(geometry.t1, geometry.u1, geometry.r1, params, settings)
        line_02 = _mirror_two_point(geometry.t2, geometry.u2, geometry.r2, params, settings)
        lines = {(0, 1): line_01, (0, 2): line_02, (1, 2): line_12}
    else:
        lines = {(0, 1): line_12}
    total = np.zeros(geometry.weight.shape, dtype=complex)
    for coefficient, graph in terms:
        product = np.full(geometry.weight.shape, complex(coefficient))
        for i, j, l in graph.lines:
            product = product * lines[(i, j)] ** l
        total += product
    return geometry.weight * total


def second_order_correction(observable_power: int, interaction: InteractionSpec, smearing: TimeSmearing,
                            h: VanHoveProfile, params: FieldParams,
                            settings: Optional[KMSSettings] = None) -> SecondOrderResult:
    """The two-insertion simplex term by randomized quasi-Monte Carlo.

    Scrambled Sobol replicas give the estimate and its standard error; the
    result is certified only when the standard error meets the tolerance.
    For the unit observable the two-insertion cumulant is returned.
    """
    settings = settings or KMSSettings()
    params.require_massive()
    if params.is_vacuum:
        raise DomainError("Second-order corrections are evaluated in thermal states only")
    if smearing.mode == "delta":
        raise DomainError("Second order needs the full time smearing (coinciding insertion times diverge)")
    if observable_power > 0 and not connected_terms((observable_power, interaction.power, interaction.power)):
        logger.info("second order: no connected graph; exact 0")
        return SecondOrderResult(0.0, 0.0, 0, True)
    estimates = []
    samples = 0
    for replica in range(settings.qmc_replicas):
        sampler = qmc.Sobol(d=7, scramble=True, seed=settings.seed + replica)
        points = sampler.random_base2(m=settings.qmc_points_log2)
        values = second_order_integrand(points, observable_power, interaction, smearing, h, params, settings)
        estimates.append(float(np.mean(values).real))
        samples += len(points)
    estimates = np.array(estimates)
    value = float(np.mean(estimates))
    stderr = float(np.std(estimates, ddof=1) / math.sqrt(len(estimates))) if len(estimates) > 1 else math.inf
    certified = stderr <= settings.tolerance * abs(value)
    if not certified:
        logger.warning(f"second order not certified: {value:.6e} +- {stderr:.2e}")
    return SecondOrderResult(value, stderr, samples, certified)


# --- Van Hove limit -------------------------------------------------------------

@dataclass(frozen=True)
class VanHoveReport:
    indices: Tuple[int, ...]
    values: Tuple[float, ...]
    differences: Tuple[float, ...]
    ratios: Tuple[float, ...]
    limit: float
    error_bound: float
    certified: bool
    reason: str = ""

    def as_dict(self) -> dict:
        return {"indices": list(self.indices), "values": list(self.values),
                "differences": list(self.differences), "ratios": list(self.ratios),
                "limit": self.limit, "error_bound": self.error_bound, "certified": self.certified,
                "reason": self.reason}


def van_hove_limit(values: Mapping[int, float], tolerance: float = 1e-10) -> VanHoveReport:
    """Extrapolate a van Hove sequence; certified when its differences shrink geometrically."""
    if len(values) < 3:
        raise DomainError(f"A van Hove extrapolation needs at least 3 indices, got {len(values)}")
    indices = tuple(sorted(values))
    sequence = tuple(float(values[n]) for n in indices)
    differences = tuple(b - a for a, b in zip(sequence, sequence[1:]))
    scale = max(abs(v) for v in sequence) or 1.0
    noise = tolerance * scale
    last = differences[-1]
    if all(abs(d) <= noise for d in differences[-2:]):
        return VanHoveReport(indices, sequence, differences, (), sequence[-1], abs(last), True,
                             "differences below tolerance")
    ratios = tuple(b / a for a, b in zip(differences, differences[1:]) if a != 0)
    if not ratios:
        return VanHoveReport(indices, sequence, differences, ratios, sequence[-1], abs(last), False,
                             "no usable difference ratios")
    q = ratios[-1]
    geometric = all(abs(r) < 1 for r in ratios) and all(
        abs(b) <= abs(a) + noise for a, b in zip(differences, differences[1:]))
    if not geometric or abs(q) >= 1:
        return VanHoveReport(indices, sequence, differences, ratios, sequence[-1], abs(last), False,
                             "differences do not decay geometrically")
    tail = last * q / (1.0 - q)
    limit = sequence[-1] + tail
    logger.info(f"van Hove limit {limit:.10e} (ratio {q:.3f}, tail {tail:.2e})")
    return VanHoveReport(indices, sequence, differences, ratios, limit, abs(tail) + noise, True,
                         "geometric decay")


def parse_index_range(text: str) -> List[int]:
    """'2..5' -> [2, 3, 4, 5]."""
    try:
        lower, upper = (int(part) for part in text.split(".."))
    except ValueError as e:
        raise DomainError(f"Expected a range like 2..5, got {text!r}") from e
    if lower < 1 or upper < lower:
        raise DomainError(f"Invalid van Hove range {text!r}")
    return list(range(lower, upper + 1))


def van_hove_sweep(observable_power: int, interaction: InteractionSpec, smearing: TimeSmearing,
                   indices: Sequence[int], params: FieldParams,
                   settings: Optional[KMSSettings] = None) -> Tuple[List[KMSReport], VanHoveReport]:
    settings = settings or KMSSettings()
    reports = [first_order_correction(observable_power, interaction, smearing, VanHoveProfile(n), params,
                                      settings) for n in indices]
    limit = van_hove_limit({r.profile_index: r.value for r in reports}, settings.tolerance)
    return reports, limit


# --- Thermal mass and Wick reordering ---------------------------------------------

@dataclass(frozen=True)
class ThermalMassReport:
    value: float
    error: float
    massless_value: Optional[float]
    printed_massless: str = PRINTED_THERMAL_MASS_MASSLESS

    def as_dict(self) -> dict:
        return {"value": self.value, "error": self.error, "massless_value": self.massless_value,
                "printed_massless": self.printed_massless}


def thermal_mass(params: FieldParams, quad: Optional[QuadratureConfig] = None) -> ThermalMassReport:
    """c(beta), the coincident-point difference of thermal and vacuum two-point functions."""
    result = thermal_mass_integral(params, quad)
    massless = 1.0 / (12.0 * params.beta ** 2) if params.mass == 0 else None
    return ThermalMassReport(float(result.value.real), float(result.error), massless)


def reordering_coefficients(power: int) -> Dict[int, int]:
    """:phi^k:_vac = sum_j C_j c^j :phi^{k-2j}:_beta with C_j = k! / ((k-2j)! j! 2^j)."""
    return {j: math.factorial(power) // (math.factorial(power - 2 * j) * math.factorial(j) * 2 ** j)
            for j in range(power // 2 + 1)}


@dataclass(frozen=True)
class ReorderingReport:
    thermal_mass: float
    q2: float
    q0: float
    q2_over_c: Optional[float]
    q0_over_c2: Optional[float]
    predicted_q2_over_c: int
    predicted_q0_over_c2: int
    direct_square: Optional[complex]
    reordered_square: Optional[complex]
    discrepancy: float
    passed: bool
    printed_q2_over_c: int = 6
    printed_constant: str = PRINTED_REORDERING_CONSTANT

    def as_dict(self) -> dict:
        return {
            "thermal_mass": self.thermal_mass, "q2": self.q2, "q0": self.q0,
            "q2_over_c": self.q2_over_c, "q0_over_c2": self.q0_over_c2,
            "predicted_q2_over_c": self.predicted_q2_over_c,
            "predicted_q0_over_c2": self.predicted_q0_over_c2,
            "direct_square": self.direct_square, "reordered_square": self.reordered_square,
            "discrepancy": self.discrepancy, "passed": self.passed,
            "printed_q2_over_c": self.printed_q2_over_c, "printed_constant": self.printed_constant,
        }


def wick_reordering_check(params: FieldParams, power: int = 4, quad: Optional[QuadratureConfig] = None,
                          tolerance: float = 1e-9) -> ReorderingReport:
    """Fix (q2, q0) in :phi^k:_vac = :phi^k:_beta + q2 :phi^{k-2}:_beta + ... + q0 from thermal expectations.

    q0 = omega_beta(:phi^k:_vac); q2 follows from omega_beta(:phi^k:_vac x :phi^{k-2}:_beta).
    The pair is then tested on omega_beta(:phi^k:_vac x :phi^k:_vac), evaluated
    directly with self-contractions and through the full reordering.
    """
    if params.is_vacuum:
        raise DomainError("Wick reordering needs a finite beta")
    if power % 2 or power < 2:
        raise DomainError(f"Reordering power must be even and >= 2, got {power}")
    c = thermal_mass(params, quad).value
    coefficients = reordering_coefficients(power)
    origin = ComplexTimeDisplacement(0.0, 0.0, (0.0, 0.0, 0.0))
    single = CorrelationProblem((WickMonomial(0, power, origin, vacuum_ordered=True),), params,
                                max_power=power)
    q0 = full_correlation(single, tadpole=c, quad=quad).real

    q2, direct, reordered, discrepancy = coefficients[1] * c, None, None, 0.0
    if params.mass > 0:
        apart = ComplexTimeDisplacement(0.0, 0.5 * params.beta, (0.0, 0.0, 1.0))
        lowered = power - 2

        def pair(first: WickMonomial, second_power: int, second_vac: bool) -> complex:
            problem = CorrelationProblem((first, WickMonomial(1, second_power, apart, second_vac)),
                                         params, max_power=power)
            return full_correlation(problem, tadpole=c, quad=quad)

        observable = WickMonomial(0, power, origin, vacuum_ordered=True)
        mixed = pair(observable, lowered, False)
        norm = pair(WickMonomial(0, lowered, origin), lowered, False)
        q2 = (mixed / norm).real
        direct = pair(observable, power, True)
        d = pair(WickMonomial(0, 1, origin), 1, False)
        reordered = sum((coefficients[j] * c ** j) ** 2 * math.factorial(power - 2 * j) * d ** (power - 2 * j)
                        for j in coefficients)
        discrepancy = abs(direct - reordered) / max(abs(direct), 1e-300)

    predicted_q2, predicted_q0 = coefficients[1], coefficients[power // 2]
    q2_over_c = q2 / c if c > 0 else None
    q0_over_c2 = q0 / c ** (power // 2) if c > 0 else None
    passed = discrepancy <= tolerance
    if q2_over_c is not None:
        passed = passed and abs(q2_over_c - predicted_q2) <= tolerance * predicted_q2
        passed = passed and abs(q0_over_c2 - predicted_q0) <= tolerance * predicted_q0
    logger.info(f"reordering k={power}: q2/c={q2_over_c} q0/c^{power // 2}={q0_over_c2} passed={passed}")
    return ReorderingReport(c, q2, q0, q2_over_c, q0_over_c2, predicted_q2, predicted_q0, direct, reordered,
                            discrepancy, passed)


# --- Shift and profile checks -------------------------------------------------

@dataclass(frozen=True)
class ShiftReport:
    shifts: Tuple[float, ...]
    densities: Tuple[complex, ...]
    predicted_differences: Tuple[complex, ...]
    discrepancy: float
    raw_spread: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {"shifts": list(self.shifts), "densities": list(self.densities),
                "predicted_differences": list(self.predicted_differences),
                "discrepancy": self.discrepancy, "raw_spread": self.raw_spread,
                "tolerance": self.tolerance, "passed": self.passed}


def t_shift_invariance(observable_power: int, interaction: InteractionSpec, params: FieldParams,
                       shifts: Sequence[float], h: VanHoveProfile = VanHoveProfile(2),
                       settings: Optional[KMSSettings] = None,
                       tolerance: float = 1e-4) -> ShiftReport:
    """Check T(t2) - T(t1) = i int [G(s, beta) - G(s, 0)] ds between consecutive shifts."""
    settings = settings or KMSSettings()
    if params.is_vacuum:
        raise DomainError("Shift invariance is a statement about thermal states")
    shifts = tuple(sorted(float(t) for t in shifts))
    if any(t == 0 for t in shifts):
        raise PreconditionError("Shift t = 0 puts the insertion on the observable (divergent)")
    if any(t > 0 for t in shifts):
        raise DomainError(f"Shifts must be negative, got {shifts}")
    densities = tuple(insertion_density(observable_power, interaction, params, t, h, settings) for t in shifts)
    predicted = tuple(flux_difference(a, b, observable_power, interaction, params, h, settings)
                      for a, b in zip(shifts, shifts[1:]))
    scale = max((abs(v) for v in densities), default=1.0) or 1.0
    discrepancy = max((abs((d2 - d1) - p) / scale for d1, d2, p in zip(densities, densities[1:], predicted)),
                      default=0.0)
    reals = [v.real for v in densities]
    raw_spread = (max(reals) - min(reals)) / scale if densities else 0.0
    passed = discrepancy <= tolerance
    logger.info(f"shift check {shifts}: discrepancy={discrepancy:.3e} raw spread={raw_spread:.3e} passed={passed}")
    return ShiftReport(shifts, densities, predicted, discrepancy, raw_spread, tolerance, passed)


@dataclass(frozen=True)
class ProfileComparison:
    labels: Tuple[str, ...]
    values: Tuple[float, ...]
    compensated: Tuple[float, ...]
    predicted_differences: Tuple[float, ...]
    discrepancy: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {"profiles": list(self.labels), "values": list(self.values),
                "compensated": list(self.compensated),
                "predicted_differences": list(self.predicted_differences),
                "discrepancy": self.discrepancy, "tolerance": self.tolerance, "passed": self.passed}


def profile_independence_check(observable_power: int, interaction: InteractionSpec, params: FieldParams,
                               smearings: Sequence[TimeSmearing], h: VanHoveProfile = VanHoveProfile(2),
                               settings: Optional[KMSSettings] = None,
                               tolerance: float = 1e-4) -> ProfileComparison:
    """Compare first-order values across smearings against the boundary-flux prediction.

    With Phi(t) = T(t) - T(t0) at the common centre t0, each value equals
    -T(t0) - int rho Phi, so the flux-compensated values -int rho (T - Phi)
    coincide and differences are fixed by Phi alone.
    """
    settings = settings or KMSSettings()
    if params.is_vacuum:
        raise DomainError("Profile comparison is carried out in thermal states")
    if len(smearings) < 2:
        raise DomainError("Need at least two smearings to compare")
    centre = smearings[0].centre
    if any(s.centre != centre for s in smearings):
        raise DomainError("All smearings must share the same support")
    values, compensated, flux_terms = [], [], []
    for smearing in smearings:
        times, weights = smearing.nodes(settings.t_order)
        total, flux_total = 0j, 0j
        for t, w in zip(times, weights):
            density = insertion_density(observable_power, interaction, params, t, h, settings)
            phi = flux_difference(centre, t, observable_power, interaction, params, h, settings)
            total += w * density
            flux_total += w * phi
        values.append(float((-total).real))
        compensated.append(float((-(total - flux_total)).real))
        flux_terms.append(float((-flux_total).real))
    predicted = tuple(flux_terms[0] - f for f in flux_terms[1:])
    observed = tuple(values[0] - v for v in values[1:])
    scale = max(abs(v) for v in values) or 1.0
    discrepancy = max(max(abs(o - p) for o, p in zip(observed, predicted)),
                      max(abs(c - compensated[0]) for c in compensated)) / scale
    passed = discrepancy <= tolerance
    logger.info(f"profile check {[s.label for s in smearings]}: discrepancy={discrepancy:.3e} passed={passed}")
    return ProfileComparison(tuple(s.label for s in smearings), tuple(values), tuple(compensated),
                             predicted, discrepancy, tolerance, passed)
