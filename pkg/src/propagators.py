"""
Free Scalar Two-Point Functions

Vacuum and thermal (KMS) two-point functions of the free massive scalar
field at complexified time displacements t - iu. Every evaluation reduces
to the radial momentum integral

    (1 / 4 pi^2) * integral_0^inf  p^2 / omega * sinc(p r) * (...) dp

with the (2 pi)^-3 d^3p measure. The vacuum part has the closed form
m K_1(m s) / (4 pi^2 s), s = sqrt(r^2 + (u + it)^2) with Re s > 0.

The thermal function is available in two representations:

- split:  D_vac(tau) + D_th(tau), with the Bose factor on both frequency
  signs in D_th (converges for 0 < u < beta);
- mirror: K(tau) + K(beta - tau) + B(tau), which is manifestly symmetric
  under tau -> beta - tau and converges on the closed strip.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

# Handle both direct execution and package imports
try:
    from .exceptions import DomainError
    from .config import parse_beta
    from .quadrature import (
        QuadratureConfig, QuadratureResult, adaptive_integral, certified_integral,
        momentum_grid, tail_cutoff,
    )
except ImportError:
    from exceptions import DomainError
    from config import parse_beta
    from quadrature import (
        QuadratureConfig, QuadratureResult, adaptive_integral, certified_integral,
        momentum_grid, tail_cutoff,
    )

logger = logging.getLogger(__name__)

FOUR_PI_SQ = 4.0 * math.pi ** 2

Vector = Tuple[float, float, float]


@dataclass(frozen=True)
class FieldParams:
    """Mass and inverse temperature; beta = inf selects the vacuum."""
    mass: float
    beta: float = math.inf

    def __post_init__(self):
        if not math.isfinite(self.mass) or self.mass < 0:
            raise DomainError(f"mass must be finite and >= 0, got {self.mass}")
        if math.isnan(self.beta) or self.beta <= 0:
            raise DomainError(f"beta must be > 0 or +inf, got {self.beta}")

    @property
    def is_vacuum(self) -> bool:
        return math.isinf(self.beta)

    def require_massive(self) -> None:
        if self.mass <= 0:
            raise DomainError("This operation requires a positive mass")

    def describe(self) -> str:
        return "vacuum" if self.is_vacuum else f"thermal(beta={self.beta:g})"

    @classmethod
    def from_config(cls, config) -> "FieldParams":
        return cls(mass=float(config.get("field.mass", 1.0)),
                   beta=parse_beta(config.get("field.beta")))


@dataclass(frozen=True)
class ComplexTimeDisplacement:
    """Relative displacement (t - iu, x); ``x`` is a radius or a 3-vector."""
    t: float = 0.0
    u: float = 0.0
    x: Union[float, Vector] = 0.0

    @property
    def r(self) -> float:
        if isinstance(self.x, (int, float)):
            if self.x < 0:
                raise DomainError(f"radius must be >= 0, got {self.x}")
            return float(self.x)
        return float(math.sqrt(sum(c * c for c in self.x)))

    @property
    def tau(self) -> complex:
        """Euclidean-time argument u + it of exp(-omega * tau)."""
        return complex(self.u, self.t)

    def on_light_cone(self) -> bool:
        return self.u == 0 and abs(self.t) == self.r


def dispersion(p: Union[float, Sequence[float]], params: FieldParams) -> float:
    """omega_p = sqrt(|p|^2 + m^2)."""
    if isinstance(p, (int, float)):
        magnitude_sq = float(p) ** 2
    else:
        magnitude_sq = float(sum(c * c for c in p))
    return math.sqrt(magnitude_sq + params.mass ** 2)


# --- Closed form -----------------------------------------------------------

def _principal_root(tau: np.ndarray, r: np.ndarray) -> np.ndarray:
    """sqrt(r^2 + tau^2) with Re >= 0, using the u -> 0+ limit on the boundary."""
    s = np.sqrt(r * r + tau * tau)
    boundary = (tau.real == 0) & (r.imag == 0) & (r.real ** 2 < tau.imag ** 2)
    if np.any(boundary):
        t = tau.imag[boundary]
        s[boundary] = 1j * np.sign(t) * np.sqrt(t * t - r.real[boundary] ** 2)
    return s


def bessel_kernel(tau, r, mass: float) -> np.ndarray:
    """m K_1(m s) / (4 pi^2 s) for arrays of complex tau = u + it and radius r."""
    tau = np.asarray(tau, dtype=complex)
    r = np.asarray(r, dtype=complex)
    tau, r = np.broadcast_arrays(tau, r)
    s = _principal_root(tau, r)
    if np.any(s == 0):
        raise DomainError("Two-point function is singular on the light cone")
    return mass * special.kv(1, mass * s) / (FOUR_PI_SQ * s)


def _check_vacuum_domain(d: ComplexTimeDisplacement) -> None:
    if d.u < 0:
        raise DomainError(f"Imaginary time must be >= 0, got u={d.u}")
    if d.u == 0 and d.r == 0:
        raise DomainError("Displacement u=0, r=0 is not admissible")
    if d.on_light_cone():
        raise DomainError(f"Displacement t={d.t}, r={d.r} lies on the light cone")


def vac_two_point(d: ComplexTimeDisplacement, params: FieldParams) -> complex:
    """Vacuum two-point function at t - iu by the closed Bessel form."""
    params.require_massive()
    _check_vacuum_domain(d)
    return complex(bessel_kernel(d.tau, d.r, params.mass))


def _sinc(p: np.ndarray, r: float) -> np.ndarray:
    return np.sinc(p * r / np.pi)


def vac_two_point_quadrature(d: ComplexTimeDisplacement, params: FieldParams,
                             quad: Optional[QuadratureConfig] = None) -> QuadratureResult:
    """Vacuum two-point function by adaptive QUADPACK integration; needs u > 0.

    The sinc factor goes to the sin-weighted rule, so this path shares
    nothing with the composite panels or the Bessel form.
    """
    quad = quad or QuadratureConfig()
    params.require_massive()
    if d.u <= 0:
        raise DomainError(f"Quadrature oracle needs u > 0, got u={d.u}")
    m, r, tau = params.mass, d.r, d.tau
    upper = tail_cutoff(d.u, quad.abs_tol)

    if r == 0:
        def integrand(p):
            omega = math.hypot(p, m)
            return p * p / omega * cmath.exp(-omega * tau) / FOUR_PI_SQ

        return adaptive_integral(integrand, upper, quad)

    def weighted(p):
        omega = math.hypot(p, m)
        return p / (omega * r) * cmath.exp(-omega * tau) / FOUR_PI_SQ

    return adaptive_integral(weighted, upper, quad, weight="sin", wvar=r)


# --- Thermal ---------------------------------------------------------------

def _bose_weights(omega: np.ndarray, beta: float) -> np.ndarray:
    """1 / (1 - exp(-beta omega)); the Bose factor is exp(-beta omega) times this."""
    return -1.0 / np.expm1(-beta * omega)


def thermal_correction(d: ComplexTimeDisplacement, params: FieldParams,
                       quad: Optional[QuadratureConfig] = None) -> QuadratureResult:
    """D_th = (1/4pi^2) int p^2/omega sinc(pr) n(omega) [e^{-omega tau} + e^{omega tau}] dp."""
    quad = quad or QuadratureConfig()
    m, beta, r, tau = params.mass, params.beta, d.r, d.tau

    def integrand(p):
        omega = np.sqrt(p * p + m * m)
        growth = np.exp(-omega * (beta - tau)) + np.exp(-omega * (beta + tau))
        return p * p / omega * _sinc(p, r) * _bose_weights(omega, beta) * growth / FOUR_PI_SQ

    return certified_integral(
        integrand, decay=beta - d.u, config=quad, oscillation=max(abs(d.t), r),
        mass=m, pole_distance=2.0 * math.pi / beta,
        scale=1.0 / -math.expm1(-beta * max(m, 1e-300)) if m > 0 else 1.0,
    )


def bose_mirror(d: ComplexTimeDisplacement, params: FieldParams,
                quad: Optional[QuadratureConfig] = None) -> QuadratureResult:
    """B(tau) = (1/4pi^2) int p^2/omega sinc(pr) n(omega)[e^{-omega tau} + e^{-omega(beta-tau)}] dp."""
    quad = quad or QuadratureConfig()
    m, beta, r, tau = params.mass, params.beta, d.r, d.tau

    def integrand(p):
        omega = np.sqrt(p * p + m * m)
        n_times = _bose_weights(omega, beta)
        terms = np.exp(-omega * (beta + tau)) + np.exp(-omega * (2.0 * beta - tau))
        return p * p / omega * _sinc(p, r) * n_times * terms / FOUR_PI_SQ

    return certified_integral(
        integrand, decay=beta + min(d.u, beta - d.u), config=quad,
        oscillation=max(abs(d.t), r), mass=m, pole_distance=2.0 * math.pi / beta,
    )


def thermal_mirror(d: ComplexTimeDisplacement, params: FieldParams,
                   quad: Optional[QuadratureConfig] = None) -> complex:
    """K(tau) + K(beta - tau) + B(tau) on the closed strip 0 <= u <= beta."""
    beta = params.beta
    if not 0 <= d.u <= beta:
        raise DomainError(f"u={d.u} outside the closed strip [0, {beta}]")
    if (d.u == 0 or d.u == beta) and d.r == 0:
        raise DomainError("Boundary of the strip at r=0 is not admissible")
    if (d.u == 0 or d.u == beta) and abs(d.t) == d.r:
        raise DomainError(f"Displacement t={d.t}, r={d.r} lies on the light cone")
    tau = d.tau
    direct = bessel_kernel(tau, d.r, params.mass)
    mirrored = bessel_kernel(beta - tau, d.r, params.mass)
    return complex(direct + mirrored) + bose_mirror(d, params, quad).value


def kms_two_point(d: ComplexTimeDisplacement, params: FieldParams,
                  quad: Optional[QuadratureConfig] = None, method: str = "split") -> complex:
    """Thermal two-point function at t - iu for 0 < u < beta.

    ``method`` selects the split (vacuum + Bose correction) or mirror
    representation. With beta = inf this is the vacuum function.
    """
    params.require_massive()
    if params.is_vacuum:
        return vac_two_point(d, params)
    if not 0 < d.u < params.beta:
        raise DomainError(f"Imaginary time u={d.u} outside the open strip (0, {params.beta})")
    if method == "mirror":
        return thermal_mirror(d, params, quad)
    if method != "split":
        raise DomainError(f"Unknown thermal method {method!r}")
    vacuum = complex(bessel_kernel(d.tau, d.r, params.mass))
    return vacuum + thermal_correction(d, params, quad).value


def two_point(d: ComplexTimeDisplacement, params: FieldParams,
              quad: Optional[QuadratureConfig] = None, method: str = "split") -> complex:
    """State dispatcher used by correlation functions.

    Thermal displacements with u = 0 and r > 0 take the mirror form with
    the boundary branch of the closed form.
    """
    if params.is_vacuum:
        return vac_two_point(d, params)
    params.require_massive()
    if d.u == 0:
        return thermal_mirror(d, params, quad)
    return kms_two_point(d, params, quad, method)


# --- Vectorized Bose part --------------------------------------------------

def _mirror_grid(params: FieldParams, r_max: float, imag_max: float, t_max: float,
                 abs_tol: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    beta = params.beta
    if imag_max >= beta:
        raise DomainError(f"|Im r|={imag_max} must stay below beta={beta}")
    return momentum_grid(decay=beta - imag_max, oscillation=max(r_max, t_max, 1e-12),
                         abs_tol=abs_tol, order=order, mass=params.mass,
                         pole_distance=2.0 * math.pi / beta)


def bose_mirror_values(tau, r, params: FieldParams, abs_tol: float = 1e-15,
                       order: int = 16, chunk: int = 2_000_000) -> np.ndarray:
    """B(tau_i, r_i) for paired arrays; r may be complex with |Im r| < beta."""
    tau = np.asarray(tau, dtype=complex).ravel()
    r = np.asarray(r, dtype=complex).ravel()
    tau, r = np.broadcast_arrays(tau, r)
    beta, m = params.beta, params.mass
    p, w = _mirror_grid(params, float(np.max(np.abs(r.real), initial=0.0)),
                        float(np.max(np.abs(r.imag), initial=0.0)),
                        float(np.max(np.abs(tau.imag), initial=0.0)), abs_tol, order)
    omega = np.sqrt(p * p + m * m)
    base = w * p * p / omega * _bose_weights(omega, beta) / FOUR_PI_SQ
    out = np.empty(tau.shape, dtype=complex)
    step = max(1, chunk // max(1, p.size))
    for start in range(0, tau.size, step):
        sl = slice(start, start + step)
        phase = (np.exp(-np.multiply.outer(beta + tau[sl], omega))
                 + np.exp(-np.multiply.outer(2.0 * beta - tau[sl], omega)))
        kernel = np.sinc(np.multiply.outer(r[sl], p) / np.pi)
        out[sl] = np.sum(kernel * phase * base, axis=1)
    return out


def bose_mirror_grid(tau_cols, r_rows, params: FieldParams, abs_tol: float = 1e-15,
                     order: int = 16) -> np.ndarray:
    """B on the tensor grid (r_rows x tau_cols) via a single matrix product."""
    tau_cols = np.asarray(tau_cols, dtype=complex).ravel()
    r_rows = np.asarray(r_rows, dtype=complex).ravel()
    beta, m = params.beta, params.mass
    p, w = _mirror_grid(params, float(np.max(np.abs(r_rows.real), initial=0.0)),
                        float(np.max(np.abs(r_rows.imag), initial=0.0)),
                        float(np.max(np.abs(tau_cols.imag), initial=0.0)), abs_tol, order)
    omega = np.sqrt(p * p + m * m)
    base = w * p * p / omega * _bose_weights(omega, beta) / FOUR_PI_SQ
    phase = (np.exp(-np.multiply.outer(omega, beta + tau_cols))
             + np.exp(-np.multiply.outer(omega, 2.0 * beta - tau_cols)))
    kernel = np.sinc(np.multiply.outer(r_rows, p) / np.pi)
    return kernel @ (base[:, None] * phase)


def thermal_mass_integral(params: FieldParams,
                          quad: Optional[QuadratureConfig] = None) -> QuadratureResult:
    """(1/2pi^2) int p^2 / (omega (e^{beta omega} - 1)) dp; m = 0 allowed."""
    quad = quad or QuadratureConfig()
    if params.is_vacuum:
        raise DomainError("Thermal mass needs a finite beta")
    m, beta = params.mass, params.beta

    def integrand(p):
        omega = math.hypot(p, m)
        if omega == 0.0:
            # massless limit of p / expm1(beta p) at p = 0
            return 1.0 / (2.0 * math.pi ** 2 * beta)
        bose = -math.exp(-beta * omega) / math.expm1(-beta * omega)
        return p * p / omega * bose / (2.0 * math.pi ** 2)

    return adaptive_integral(integrand, math.inf, quad)


# --- KMS boundary condition ------------------------------------------------

@dataclass(frozen=True)
class BoundaryCheck:
    """Both members of the two-point KMS boundary identity."""
    upper: complex
    lower: complex
    discrepancy: float
    tolerance: float
    passed: bool

    def __iter__(self) -> Iterator[complex]:
        return iter((self.upper, self.lower))


def kms_boundary_check(t: float, r: float, params: FieldParams,
                       quad: Optional[QuadratureConfig] = None) -> BoundaryCheck:
    """Evaluate D(t - i(beta - delta)) and D(-t - i delta) extrapolated to delta -> 0.

    The upper member uses the mirror form and the lower member the split
    form, so agreement cross-checks the two representations.
    """
    quad = quad or QuadratureConfig()
    params.require_massive()
    if params.is_vacuum:
        raise DomainError("KMS boundary check needs a finite beta")
    if abs(t) == r:
        raise DomainError(f"Boundary values at t={t}, r={r} are distributional (light cone)")
    beta, delta = params.beta, quad.boundary_delta

    def upper(dl):
        return kms_two_point(ComplexTimeDisplacement(t, beta - dl, r), params, quad, "mirror")

    def lower(dl):
        return kms_two_point(ComplexTimeDisplacement(-t, dl, r), params, quad, "split")

    up = 2.0 * upper(delta / 2) - upper(delta)
    low = 2.0 * lower(delta / 2) - lower(delta)
    scale = max(abs(up), abs(low), 1e-300)
    distance = math.sqrt(abs(r * r - t * t))
    tolerance = 100.0 * (delta / distance) ** 2 + 10.0 * quad.rel_tol
    discrepancy = abs(up - low) / scale
    passed = discrepancy <= tolerance
    logger.info(
        f"KMS boundary t={t} r={r} {params.describe()}: discrepancy={discrepancy:.3e} "
        f"tolerance={tolerance:.3e} passed={passed}"
    )
    return BoundaryCheck(upper=up, lower=low, discrepancy=discrepancy,
                         tolerance=tolerance, passed=passed)
