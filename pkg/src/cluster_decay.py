"""
Cluster Decay

Connected correlation functions of point-localized Wick monomials whose
translations are scaled along a ray, log-linear decay fits, empirical
exponential bounds, the analytically continued mass-shell integrals of
smeared sources, and the KMS rearrangement of thermal cluster functions.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

# Handle both direct execution and package imports
try:
    from .exceptions import DomainError, NumericalError
    from .exports import SCAN_COLUMNS, write_csv, write_json
    from .propagators import FieldParams, ComplexTimeDisplacement, bessel_kernel
    from .quadrature import QuadratureConfig, certified_integral, composite_rule, uniform_edges
    from .wick_algebra import CorrelationProblem, Propagator, WickMonomial, connected_correlation
except ImportError:
    from exceptions import DomainError, NumericalError
    from exports import SCAN_COLUMNS, write_csv, write_json
    from propagators import FieldParams, ComplexTimeDisplacement, bessel_kernel
    from quadrature import QuadratureConfig, certified_integral, composite_rule, uniform_edges
    from wick_algebra import CorrelationProblem, Propagator, WickMonomial, connected_correlation

logger = logging.getLogger(__name__)

Vector = Tuple[float, float, float]
RAYS = ("spatial", "imaginary_time")
DEFAULT_NOISE_FLOOR = 1e-30


@dataclass(frozen=True)
class ClusterScan:
    """Observables :phi^a_i: at (t=0, u_i, x_i) with the translations scaled by r.

    On a spatial ray vertex i sits at x_i = r v_i with fixed u_i; on an
    imaginary-time ray (vacuum only) u_i = r w_i and x_i = 0, where
    ``offsets`` holds the w_i as (w_i, 0, 0).
    """
    powers: Tuple[int, ...]
    state: FieldParams
    u: Tuple[float, ...]
    offsets: Tuple[Vector, ...]
    ray: str = "spatial"
    localization_radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(int(a) for a in self.powers))
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        object.__setattr__(self, "offsets", tuple(tuple(float(c) for c in v) for v in self.offsets))
        n = len(self.powers) - 1
        if n < 1:
            raise DomainError("A cluster function needs at least two observables")
        if self.ray not in RAYS:
            raise DomainError(f"Unknown ray {self.ray!r}; expected one of {', '.join(RAYS)}")
        if len(self.offsets) != n:
            raise DomainError(f"Expected {n} offset vectors, got {len(self.offsets)}")
        if self.ray == "imaginary_time":
            if not self.state.is_vacuum:
                raise DomainError("Imaginary-time rays are only admissible in the vacuum")
            weights = [v[0] for v in self.offsets]
            if any(w <= 0 for w in weights) or any(b <= a for a, b in zip(weights, weights[1:])):
                raise DomainError(f"Imaginary-time weights must be positive and increasing, got {weights}")
            return
        if len(self.u) != n:
            raise DomainError(f"Expected {n} imaginary times, got {len(self.u)}")
        if self.u[0] <= 0 or any(b <= a for a, b in zip(self.u, self.u[1:])):
            raise DomainError(f"Imaginary times must satisfy 0 < u_1 < ... < u_n, got {self.u}")
        if not self.state.is_vacuum and self.u[-1] >= self.state.beta:
            raise DomainError(f"Imaginary times must stay below beta={self.state.beta}")

    @classmethod
    def collinear(cls, powers: Sequence[int], state: FieldParams, u: Sequence[float],
                  direction: Vector = (0.0, 0.0, 1.0)) -> "ClusterScan":
        """Vertex i at x_i = i r e along a unit direction e."""
        norm = math.sqrt(sum(c * c for c in direction))
        if norm == 0:
            raise DomainError("Direction must be non-zero")
        unit = tuple(c / norm for c in direction)
        offsets = tuple(tuple(i * c for c in unit) for i in range(1, len(powers)))
        return cls(tuple(powers), state, tuple(u), offsets)

    @classmethod
    def imaginary_ray(cls, powers: Sequence[int], state: FieldParams,
                      weights: Optional[Sequence[float]] = None) -> "ClusterScan":
        n = len(powers) - 1
        weights = weights or [float(i) for i in range(1, n + 1)]
        return cls(tuple(powers), state, (), tuple((w, 0.0, 0.0) for w in weights), ray="imaginary_time")

    @property
    def n(self) -> int:
        return len(self.powers) - 1

    def placement(self, r: float) -> List[Tuple[float, Vector]]:
        """(u_i, x_i) for vertices 1..n at scale r."""
        if self.ray == "imaginary_time":
            return [(r * v[0], (0.0, 0.0, 0.0)) for v in self.offsets]
        return [(u, tuple(r * c for c in v)) for u, v in zip(self.u, self.offsets)]

    def effective_radius(self, r: float) -> float:
        """sqrt(sum u_i^2 + |x_i|^2) in the vacuum, sqrt(sum |x_i|^2) in thermal states."""
        total = 0.0
        for u, x in self.placement(r):
            total += sum(c * c for c in x)
            if self.state.is_vacuum:
                total += u * u
        return math.sqrt(total)

    def problem(self, r: float) -> CorrelationProblem:
        monomials = [WickMonomial(0, self.powers[0], ComplexTimeDisplacement(0.0, 0.0, (0.0, 0.0, 0.0)))]
        for i, (u, x) in enumerate(self.placement(r), start=1):
            monomials.append(WickMonomial(i, self.powers[i], ComplexTimeDisplacement(0.0, u, x)))
        return CorrelationProblem(tuple(monomials), self.state)

    def describe(self) -> dict:
        return {"n": self.n, "powers": list(self.powers), "state": self.state.describe(),
                "u_tuple": list(self.u), "ray": self.ray}


def cluster_function(scan: ClusterScan, r: float, propagator: Optional[Propagator] = None,
                     quad: Optional[QuadratureConfig] = None) -> complex:
    """F_n at scale r: the connected correlation of the translated observables."""
    scan.state.require_massive()
    return connected_correlation(scan.problem(r), propagator, quad=quad)


@dataclass(frozen=True)
class ClusterSample:
    r: float
    r_e: float
    value: complex

    def as_row(self, scan: ClusterScan) -> dict:
        return {"n": scan.n, "powers": list(scan.powers), "state": scan.state.describe(),
                "u_tuple": list(scan.u), "r": self.r, "re_F": self.value.real,
                "im_F": self.value.imag, "abs_F": abs(self.value)}


def sample_scan(scan: ClusterScan, radii: Sequence[float], propagator: Optional[Propagator] = None,
                quad: Optional[QuadratureConfig] = None) -> List[ClusterSample]:
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("Sample radii must be strictly increasing")
    samples = []
    for r in radii:
        value = cluster_function(scan, r, propagator, quad)
        samples.append(ClusterSample(r, scan.effective_radius(r), value))
        logger.debug(f"cluster sample r={r:g}: F={value:.6e}")
    return samples


# --- Fits and bounds -------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """log|F| = log(prefactor) - rate * r_e on the fit window."""
    rate: float
    prefactor: float
    residual: float
    window: Tuple[float, float]
    points: int
    dropped: int = 0

    def as_dict(self) -> dict:
        return {"rate": self.rate, "prefactor": self.prefactor, "residual": self.residual,
                "window": list(self.window), "points": self.points, "dropped": self.dropped}


def _log_linear(r, log_prefactor, rate):
    return log_prefactor - rate * r


def fit_decay(radii: Sequence[float], values: Sequence[complex],
              noise_floor: float = DEFAULT_NOISE_FLOOR) -> DecayFit:
    """Least-squares fit of log|F| against r; positive rate means decay."""
    radii = np.asarray(radii, dtype=float)
    magnitudes = np.abs(np.asarray(values, dtype=complex))
    if radii.size < 4:
        raise DomainError(f"A decay fit needs at least 4 radii, got {radii.size}")
    keep = magnitudes > 10.0 * noise_floor
    dropped = int(radii.size - np.count_nonzero(keep))
    if dropped:
        logger.warning(f"{dropped} samples below 10x noise floor {noise_floor:g} left the fit window")
    r, y = radii[keep], np.log(magnitudes[keep])
    if r.size < 2:
        raise NumericalError("Fit window is empty after removing samples below the noise floor")
    slope_guess = -(y[-1] - y[0]) / (r[-1] - r[0])
    params, _ = curve_fit(_log_linear, r, y, p0=(y[0] + slope_guess * r[0], slope_guess))
    residual = float(np.sqrt(np.mean((y - _log_linear(r, *params)) ** 2)))
    return DecayFit(rate=float(params[1]), prefactor=float(math.exp(params[0])), residual=residual,
                    window=(float(r[0]), float(r[-1])), points=int(r.size), dropped=dropped)


def decay_fit(scan: ClusterScan, radii: Sequence[float], noise_floor: float = DEFAULT_NOISE_FLOOR,
              propagator: Optional[Propagator] = None,
              quad: Optional[QuadratureConfig] = None) -> DecayFit:
    """Decay rate of |F_n| in the effective radius r_e."""
    samples = sample_scan(scan, radii, propagator, quad)
    fit = fit_decay([s.r_e for s in samples], [s.value for s in samples], noise_floor)
    logger.info(f"decay fit {scan.describe()}: rate={fit.rate:.6f} residual={fit.residual:.2e}")
    return fit


@dataclass(frozen=True)
class BoundReport:
    """Empirical constant c* = max |F| exp(rate r_e) over the samples."""
    rate: float
    constant: float
    passed: bool
    offending: Optional[Tuple[float, float]] = None
    weighted: Tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {"rate": self.rate, "constant": self.constant, "passed": self.passed,
                "offending": list(self.offending) if self.offending else None}


def bound_from_samples(r_e: Sequence[float], values: Sequence[complex], rate: float,
                       tolerance: float = 1e-9) -> BoundReport:
    """Check that |F| <= c* exp(-rate r_e) holds with c* attained near the inner radii."""
    r_e = np.asarray(r_e, dtype=float)
    weighted = np.abs(np.asarray(values, dtype=complex)) * np.exp(rate * r_e)
    constant = float(np.max(weighted))
    inner = max(1, int(math.ceil(weighted.size / 4)))
    inner_max = float(np.max(weighted[:inner]))
    peak = int(np.argmax(weighted))
    passed = peak < inner or constant <= inner_max * (1.0 + tolerance)
    offending = None if passed else (float(r_e[peak]), float(np.abs(values[peak])))
    if not passed:
        logger.info(f"bound violated at r_e={r_e[peak]:g}: weighted {constant:.3e} > inner {inner_max:.3e}")
    return BoundReport(rate, constant, passed, offending, tuple(float(w) for w in weighted))


def bound_check(scan: ClusterScan, radii: Sequence[float], R: float = 0.0,
                rate: Optional[float] = None, tolerance: float = 1e-9,
                propagator: Optional[Propagator] = None,
                quad: Optional[QuadratureConfig] = None) -> BoundReport:
    """Exponential bound at rate m / sqrt(n) (or ``rate``) on radii beyond 2R."""
    if any(r <= 2 * R for r in radii):
        raise DomainError(f"All radii must exceed 2R = {2 * R}")
    rate = scan.state.mass / math.sqrt(scan.n) if rate is None else rate
    samples = sample_scan(scan, radii, propagator, quad)
    report = bound_from_samples([s.r_e for s in samples], [s.value for s in samples], rate, tolerance)
    logger.info(f"bound check rate={rate:g}: c*={report.constant:.4e} passed={report.passed}")
    return report


# --- Mass-shell integrals of smeared sources -------------------------------

BUMP_SHAPES = ("point", "gaussian", "polynomial")


@dataclass(frozen=True)
class BumpSpec:
    """Radial source of unit integral supported in |y| <= radius."""
    shape: str = "point"
    radius: float = 0.0

    def __post_init__(self):
        if self.shape not in BUMP_SHAPES:
            raise DomainError(f"Unknown bump shape {self.shape!r}")
        if self.shape != "point" and self.radius <= 0:
            raise DomainError("Extended bumps need a positive radius")

    def profile(self, y: np.ndarray) -> np.ndarray:
        if self.shape == "gaussian":
            sigma = self.radius / 3.0
            return np.exp(-0.5 * (y / sigma) ** 2)
        return (1.0 - (y / self.radius) ** 2) ** 2

    def transform(self, p: np.ndarray, order: int = 24, chunk: int = 4096) -> np.ndarray:
        """f^(p) / f^(0) with f^(p) = 4 pi int y^2 f(y) sinc(p y) dy."""
        p = np.asarray(p, dtype=float)
        if self.shape == "point":
            return np.ones_like(p)
        p_max = float(np.max(p, initial=0.0))
        width = min(self.radius, math.pi / (4.0 * max(p_max, 1e-12)))
        y, w = composite_rule(uniform_edges(0.0, self.radius, width), order)
        weights = w * y * y * self.profile(y)
        flat = p.ravel()
        out = np.empty(flat.size)
        for start in range(0, flat.size, chunk):
            block = flat[start:start + chunk]
            out[start:start + chunk] = np.sinc(np.multiply.outer(block, y) / np.pi) @ weights
        return (out / np.sum(weights)).reshape(p.shape)


@dataclass(frozen=True)
class MassShellResult:
    value: complex
    majorant: float
    error: float


def mass_shell_integral(bump: BumpSpec, u: float, x, b: float, params: FieldParams,
                        quad: Optional[QuadratureConfig] = None) -> MassShellResult:
    """int d^3p / (2 omega) f^(p) exp(-(u + b) omega) exp(i p.x), continued to t = -iu.

    Returns the value and the a-priori majorant exp(-b m) 2 pi int p^2/omega |f^| exp(-u omega) dp.
    """
    quad = quad or QuadratureConfig()
    params.require_massive()
    if u <= 0:
        raise DomainError(f"mass_shell_integral needs u > 0, got {u}")
    if b < 0:
        raise DomainError(f"b must be >= 0, got {b}")
    r = x if isinstance(x, (int, float)) else math.sqrt(sum(c * c for c in x))
    m = params.mass

    def integrand(p):
        omega = np.sqrt(p * p + m * m)
        return 2.0 * math.pi * p * p / omega * bump.transform(p) * np.exp(-(u + b) * omega) * np.sinc(p * r / math.pi)

    def majorant_integrand(p):
        omega = np.sqrt(p * p + m * m)
        return 2.0 * math.pi * p * p / omega * np.abs(bump.transform(p)) * np.exp(-u * omega)

    result = certified_integral(integrand, decay=u + b, config=quad, oscillation=r, mass=m)
    bound = certified_integral(majorant_integrand, decay=u, config=quad, mass=m)
    majorant = math.exp(-b * m) * abs(bound.value)
    logger.debug(f"mass-shell {bump.shape} u={u} r={r} b={b}: {result.value:.6e} (majorant {majorant:.3e})")
    return MassShellResult(value=result.value, majorant=majorant, error=result.error)


def point_source_closed_form(u: float, r: float, b: float, params: FieldParams) -> complex:
    """(2 pi)^3 times the vacuum two-point function at -i(u + b), r."""
    return complex((2.0 * math.pi) ** 3 * bessel_kernel(u + b, r, params.mass))


# --- KMS rearrangement -----------------------------------------------------

@dataclass(frozen=True)
class RearrangementReport:
    original: complex
    rearranged: complex
    discrepancy: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {"original": self.original, "rearranged": self.rearranged,
                "discrepancy": self.discrepancy, "tolerance": self.tolerance, "passed": self.passed}


def rearranged_problem(scan: ClusterScan, r: float) -> CorrelationProblem:
    """Cyclic relabeling (1, ..., n, 0): u'_j = u_{j+1} - u_1, u'_n = beta - u_1, x' = x - x_1."""
    beta = scan.state.beta
    placement = [(0.0, (0.0, 0.0, 0.0))] + scan.placement(r)
    u1, x1 = placement[1]
    order = list(range(1, scan.n + 1)) + [0]
    monomials = []
    for label in order:
        u, x = placement[label]
        shifted_u = beta - u1 if label == 0 else u - u1
        shifted_x = tuple(a - b for a, b in zip(x, x1))
        monomials.append(WickMonomial(label, scan.powers[label], ComplexTimeDisplacement(0.0, shifted_u, shifted_x)))
    return CorrelationProblem(tuple(monomials), scan.state)


def kms_rearrangement_check(scan: ClusterScan, r: float = 1.0, tolerance: float = 1e-6,
                            propagator: Optional[Propagator] = None,
                            quad: Optional[QuadratureConfig] = None) -> RearrangementReport:
    """Compare F_n at the original u-tuple with the cyclically rearranged tuple."""
    if scan.state.is_vacuum:
        raise DomainError("KMS rearrangement needs a thermal state")
    scan.state.require_massive()
    original = connected_correlation(scan.problem(r), propagator, quad=quad)
    rearranged = connected_correlation(rearranged_problem(scan, r), propagator, quad=quad)
    scale = max(abs(original), abs(rearranged), 1e-300)
    discrepancy = abs(original - rearranged) / scale
    passed = discrepancy <= tolerance
    logger.info(f"KMS rearrangement {scan.describe()} r={r}: discrepancy={discrepancy:.3e} passed={passed}")
    return RearrangementReport(original, rearranged, discrepancy, tolerance, passed)


# --- Output ----------------------------------------------------------------

def write_scan_csv(scan: ClusterScan, samples: Sequence[ClusterSample], destination, stream=None) -> None:
    write_csv([s.as_row(scan) for s in samples], SCAN_COLUMNS, destination, stream)


def write_fit_json(fit: DecayFit, destination, stream=None, extra: Optional[dict] = None) -> None:
    document = fit.as_dict()
    if extra:
        document.update(extra)
    write_json(document, destination, stream)
