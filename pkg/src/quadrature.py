"""
Radial Quadrature

Composite Gauss-Legendre quadrature on [0, P] for the one-dimensional
momentum integrals that all propagator evaluations reduce to. The tail
cutoff P is chosen from an exponential bound on the integrand, panel
widths are limited by the oscillation frequency, and results are
certified by comparing against a run with doubled cutoff and halved
panel width.

Independent cross-checks of single integrals go through scipy's QUADPACK
wrappers instead (``adaptive_integral``); those give no certified bound,
only an error estimate.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate

# Handle both direct execution and package imports
try:
    from .exceptions import DomainError, NumericalError
except ImportError:
    from exceptions import DomainError, NumericalError

logger = logging.getLogger(__name__)

# Relative rounding allowance per unit of absolute integrand mass
_ROUNDING_FACTOR = 64 * np.finfo(float).eps

# Allowed ratio between the QUADPACK error estimate and the requested tolerance
_ADAPTIVE_SLACK = 100.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and resolution limits for radial quadrature."""
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    gauss_order: int = 24
    max_panels: int = 100000
    max_refinements: int = 3
    boundary_delta: float = 1e-4
    adaptive_limit: int = 2000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError(
                f"Tolerances must be positive (rel_tol={self.rel_tol}, abs_tol={self.abs_tol})"
            )
        if self.gauss_order < 2:
            raise DomainError(f"gauss_order must be >= 2, got {self.gauss_order}")

    @classmethod
    def from_config(cls, config) -> "QuadratureConfig":
        """Build from the ``quadrature`` section of a Config."""
        return cls(
            rel_tol=float(config.get("quadrature.rel_tol", cls.rel_tol)),
            abs_tol=float(config.get("quadrature.abs_tol", cls.abs_tol)),
            gauss_order=int(config.get("quadrature.gauss_order", cls.gauss_order)),
            max_panels=int(config.get("quadrature.max_panels", cls.max_panels)),
            max_refinements=int(config.get("quadrature.max_refinements", cls.max_refinements)),
            boundary_delta=float(config.get("quadrature.boundary_delta", cls.boundary_delta)),
            adaptive_limit=int(config.get("quadrature.adaptive_limit", cls.adaptive_limit)),
        )


@dataclass(frozen=True)
class QuadratureResult:
    """Certified integral value."""
    value: complex
    error: float
    cutoff: float
    panels: int


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_rule(edges: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule on consecutive panel edges."""
    nodes, weights = gauss_legendre(order)
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


def uniform_edges(lower: float, upper: float, width: float) -> np.ndarray:
    """Panel edges covering [lower, upper] with panels no wider than ``width``."""
    count = max(1, int(math.ceil((upper - lower) / width)))
    return np.linspace(lower, upper, count + 1)


def tail_cutoff(decay: float, abs_tol: float, power: int = 2, scale: float = 1.0) -> float:
    """Smallest cutoff P (up to a factor 1.25) with scale*P^power*exp(-decay*P)/decay < abs_tol.

    The bound dominates the tail of integrands of the form poly(p)*exp(-decay*p)
    whose polynomial part grows at most like p^power.
    """
    if decay <= 0:
        raise DomainError(f"Tail bound needs a positive decay rate, got {decay}")
    cutoff = max(1.0, -math.log(abs_tol) / decay)
    while scale * cutoff ** power * math.exp(-decay * cutoff) / decay > abs_tol:
        cutoff *= 1.25
    return cutoff


def panel_width(oscillation: float = 0.0, decay: float = 0.0, mass: float = 0.0,
                pole_distance: Optional[float] = None) -> float:
    """Largest panel width that resolves oscillation, decay, and nearby singularities."""
    width = 0.5
    if oscillation > 0:
        width = min(width, math.pi / (4.0 * oscillation))
    if decay > 0:
        width = min(width, 4.0 / decay)
    if mass > 0:
        # branch points of sqrt(p^2 + m^2) sit at distance m from the real axis
        width = min(width, max(mass, 0.05))
    if pole_distance is not None and pole_distance > 0:
        width = min(width, 0.5 * pole_distance)
    return width


def momentum_grid(decay: float, oscillation: float, abs_tol: float, order: int,
                  mass: float = 0.0, pole_distance: Optional[float] = None,
                  power: int = 2, scale: float = 1.0,
                  refine: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Composite nodes/weights on [0, P] for a given resolution level."""
    cutoff = tail_cutoff(decay, abs_tol, power, scale) * 2 ** refine
    width = panel_width(oscillation, decay, mass, pole_distance) / 2 ** refine
    return composite_rule(uniform_edges(0.0, cutoff, width), order)


def certified_integral(integrand: Callable[[np.ndarray], np.ndarray], decay: float,
                       config: QuadratureConfig, oscillation: float = 0.0,
                       mass: float = 0.0, pole_distance: Optional[float] = None,
                       power: int = 2, scale: float = 1.0) -> QuadratureResult:
    """Integrate ``integrand`` over [0, inf) with a certified error estimate.

    ``integrand`` is evaluated on numpy arrays and must be bounded by
    scale * p^power * exp(-decay * p) in absolute value.
    """
    cutoff = tail_cutoff(decay, config.abs_tol, power, scale)
    width = panel_width(oscillation, decay, mass, pole_distance)

    def run(upper: float, h: float) -> Tuple[complex, float, int]:
        edges = uniform_edges(0.0, upper, h)
        panels = len(edges) - 1
        if panels > config.max_panels:
            raise NumericalError(
                f"Quadrature needs {panels} panels (limit {config.max_panels})",
                requested_tolerance=config.rel_tol,
            )
        x, w = composite_rule(edges, config.gauss_order)
        terms = w * integrand(x)
        return complex(np.sum(terms)), float(np.sum(np.abs(terms))), panels

    value, _, _ = run(cutoff, width)
    error = math.inf
    for level in range(config.max_refinements):
        cutoff, width = 2.0 * cutoff, 0.5 * width
        finer, mass_l1, panels = run(cutoff, width)
        error = abs(finer - value)
        tolerance = max(config.abs_tol, config.rel_tol * abs(finer), _ROUNDING_FACTOR * mass_l1)
        logger.debug(
            f"quadrature level {level}: cutoff={cutoff:.3g} panels={panels} "
            f"delta={error:.3e} tolerance={tolerance:.3e}"
        )
        if error <= tolerance:
            return QuadratureResult(value=finer, error=error, cutoff=cutoff, panels=panels)
        value = finer

    raise NumericalError(
        f"Radial quadrature did not certify after {config.max_refinements} refinements "
        f"(achieved {error:.3e})",
        achieved_tolerance=error,
        requested_tolerance=config.rel_tol,
    )


def adaptive_integral(integrand: Callable[[float], complex], upper: float,
                      config: QuadratureConfig, weight: Optional[str] = None,
                      wvar: Optional[float] = None) -> QuadratureResult:
    """Adaptive QUADPACK integral of a scalar integrand over [0, upper].

    Independent of the composite panels above, so it serves as a
    cross-check for them. Real and imaginary parts are integrated
    separately; ``weight``/``wvar`` hand a sin or cos factor to the
    oscillatory rule. A finite ``upper`` is assumed to come from
    ``tail_cutoff`` and adds ``abs_tol`` to the error.
    """
    options = {
        "epsabs": config.abs_tol,
        "epsrel": config.rel_tol,
        "limit": config.adaptive_limit,
        "full_output": 1,
    }
    if weight is not None:
        options.update(weight=weight, wvar=wvar)

    value, error, subintervals = 0j, 0.0, 0
    parts = ((1.0, lambda p: complex(integrand(p)).real),
             (1j, lambda p: complex(integrand(p)).imag))
    for unit, part in parts:
        part_value, part_error, info, *message = integrate.quad(part, 0.0, upper, **options)
        if message:
            logger.debug(f"quad: {message[0]}")
        value += unit * part_value
        error += part_error
        subintervals += int(info.get("last", 0)) if isinstance(info, dict) else 0
    if math.isfinite(upper):
        error += config.abs_tol

    tolerance = _ADAPTIVE_SLACK * max(config.abs_tol, config.rel_tol * abs(value))
    logger.debug(f"adaptive quadrature: upper={upper:.3g} subintervals={subintervals} "
                 f"error={error:.3e} tolerance={tolerance:.3e}")
    if not error <= tolerance:
        raise NumericalError(
            f"Adaptive quadrature error {error:.3e} exceeds {tolerance:.3e} "
            f"after {subintervals} subintervals (limit {config.adaptive_limit})",
            achieved_tolerance=error,
            requested_tolerance=config.rel_tol,
        )
    return QuadratureResult(value=value, error=error, cutoff=upper, panels=subintervals)
