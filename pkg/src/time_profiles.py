"""
Exact Time Profiles

Piecewise-linear functions of time with rational breakpoints and values.
They are closed under addition, rational scaling, translation and the
one-sided chops to t < 0 and t > 0, and their supports are computed
exactly. Interaction cutoffs are products of such a profile with a
common spatial cutoff, which is factored out.
"""

import bisect
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

# Handle both direct execution and package imports
try:
    from .exceptions import DomainError, PreconditionError
except ImportError:
    from exceptions import DomainError, PreconditionError

logger = logging.getLogger(__name__)

Rational = Union[int, str, Fraction]
Piece = Tuple[Fraction, Fraction, Fraction, Fraction]


def as_fraction(value: Union[Rational, float]) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float literal."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError) as e:
        raise DomainError(f"Not a rational number: {value!r}") from e


@dataclass(frozen=True)
class Interval:
    """Closed rational interval."""
    lower: Fraction
    upper: Fraction

    def contains(self, x: Fraction) -> bool:
        return self.lower <= x <= self.upper

    def __str__(self) -> str:
        return f"[{self.lower},{self.upper}]"


def _interpolate(piece: Piece, x: Fraction) -> Fraction:
    a, b, va, vb = piece
    return va + (vb - va) * (x - a) / (b - a)


def _slope(piece: Piece) -> Fraction:
    a, b, va, vb = piece
    return (vb - va) / (b - a)


def _canonical(pieces: Iterable[Piece]) -> Tuple[Piece, ...]:
    ordered = sorted(pieces)
    for (a, b, _, _), nxt in zip(ordered, ordered[1:] + [None]):
        if not a < b:
            raise DomainError(f"Degenerate profile piece [{a}, {b}]")
        if nxt is not None and nxt[0] < b:
            raise DomainError(f"Overlapping profile pieces at {nxt[0]}")
    merged: List[Piece] = []
    for piece in ordered:
        if piece[2] == 0 and piece[3] == 0:
            continue
        if merged:
            last = merged[-1]
            if last[1] == piece[0] and last[3] == piece[2] and _slope(last) == _slope(piece):
                merged[-1] = (last[0], piece[1], last[2], piece[3])
                continue
        merged.append(piece)
    return tuple(merged)


class TimeProfile:
    """Piecewise-linear profile, zero outside finitely many closed pieces.

    Pieces are (left, right, value_left, value_right); neighbouring pieces
    may jump, which happens after chopping at 0.
    """

    __slots__ = ("_pieces", "_lefts")

    def __init__(self, pieces: Iterable[Sequence[Rational]] = ()):
        exact = [tuple(as_fraction(v) for v in piece) for piece in pieces]
        self._pieces = _canonical(exact)
        self._lefts = [p[0] for p in self._pieces]

    # --- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "TimeProfile":
        return cls()

    @classmethod
    def polyline(cls, points: Sequence[Tuple[Rational, Rational]]) -> "TimeProfile":
        """Continuous profile through the given (time, value) points, zero outside."""
        exact = [(as_fraction(x), as_fraction(v)) for x, v in points]
        return cls((x0, x1, v0, v1) for (x0, v0), (x1, v1) in zip(exact, exact[1:]))

    @classmethod
    def trapezoid(cls, inner: Rational, outer: Rational, center: Rational = 0) -> "TimeProfile":
        """1 on [c - inner, c + inner], 0 outside (c - outer, c + outer), linear between."""
        inner, outer, center = as_fraction(inner), as_fraction(outer), as_fraction(center)
        if not 0 <= inner < outer:
            raise DomainError(f"Trapezoid needs 0 <= inner < outer, got {inner}, {outer}")
        points = [(center - outer, 0), (center - inner, 1)]
        if inner > 0:
            points.append((center + inner, 1))
        points.append((center + outer, 0))
        return cls.polyline(points)

    @classmethod
    def chi(cls, epsilon: Rational) -> "TimeProfile":
        """Canonical time-slice cutoff of half width epsilon."""
        epsilon = as_fraction(epsilon)
        if epsilon <= 0:
            raise DomainError(f"epsilon must be positive, got {epsilon}")
        return cls.trapezoid(epsilon, 2 * epsilon)

    # --- inspection --------------------------------------------------------

    @property
    def pieces(self) -> Tuple[Piece, ...]:
        return self._pieces

    def is_zero(self) -> bool:
        return not self._pieces

    def _piece_covering(self, x0: Fraction, x1: Fraction) -> Optional[Piece]:
        k = bisect.bisect_right(self._lefts, x0) - 1
        if k >= 0:
            piece = self._pieces[k]
            if piece[0] <= x0 and x1 <= piece[1]:
                return piece
        return None

    def limits(self, x0: Fraction, x1: Fraction) -> Tuple[Fraction, Fraction]:
        """Values at both ends of [x0, x1], which must not contain a breakpoint inside."""
        piece = self._piece_covering(x0, x1)
        if piece is None:
            return Fraction(0), Fraction(0)
        return _interpolate(piece, x0), _interpolate(piece, x1)

    def value(self, x: Rational) -> Fraction:
        """Right-continuous point value."""
        x = as_fraction(x)
        k = bisect.bisect_right(self._lefts, x) - 1
        if k >= 0 and x < self._pieces[k][1]:
            return _interpolate(self._pieces[k], x)
        if k >= 0 and x == self._pieces[k][1]:
            return self._pieces[k][3]
        return Fraction(0)

    def breakpoints(self) -> List[Fraction]:
        return sorted({x for p in self._pieces for x in p[:2]})

    def support(self) -> Optional[Interval]:
        """Minimal closed interval outside which the profile vanishes; None when zero."""
        if not self._pieces:
            return None
        return Interval(self._pieces[0][0], self._pieces[-1][1])

    def support_components(self) -> List[Interval]:
        components: List[Interval] = []
        for a, b, _, _ in self._pieces:
            if components and components[-1].upper == a:
                components[-1] = Interval(components[-1].lower, b)
            else:
                components.append(Interval(a, b))
        return components

    def equals_one_on(self, lower: Rational, upper: Rational) -> bool:
        lower, upper = as_fraction(lower), as_fraction(upper)
        cuts = [lower] + [x for x in self.breakpoints() if lower < x < upper] + [upper]
        return all(self.limits(x0, x1) == (1, 1) for x0, x1 in zip(cuts, cuts[1:]))

    # --- arithmetic --------------------------------------------------------

    def _combine(self, other: "TimeProfile", sign: int) -> "TimeProfile":
        cuts = sorted(set(self.breakpoints()) | set(other.breakpoints()))
        pieces = []
        for x0, x1 in zip(cuts, cuts[1:]):
            fl, fr = self.limits(x0, x1)
            gl, gr = other.limits(x0, x1)
            pieces.append((x0, x1, fl + sign * gl, fr + sign * gr))
        return TimeProfile(pieces)

    def __add__(self, other: "TimeProfile") -> "TimeProfile":
        return self._combine(other, 1)

    def __sub__(self, other: "TimeProfile") -> "TimeProfile":
        return self._combine(other, -1)

    def __neg__(self) -> "TimeProfile":
        return self.scale(-1)

    def scale(self, factor: Rational) -> "TimeProfile":
        k = as_fraction(factor)
        return TimeProfile((a, b, k * va, k * vb) for a, b, va, vb in self._pieces)

    def __rmul__(self, factor: Rational) -> "TimeProfile":
        return self.scale(factor)

    def translate(self, shift: Rational) -> "TimeProfile":
        """The profile x -> f(x - shift)."""
        s = as_fraction(shift)
        return TimeProfile((a + s, b + s, va, vb) for a, b, va, vb in self._pieces)

    def chop_past(self) -> "TimeProfile":
        """Restriction to t < 0."""
        pieces = []
        for piece in self._pieces:
            a, b, va, vb = piece
            if b <= 0:
                pieces.append(piece)
            elif a < 0:
                pieces.append((a, Fraction(0), va, _interpolate(piece, Fraction(0))))
        return TimeProfile(pieces)

    def chop_future(self) -> "TimeProfile":
        """Restriction to t > 0."""
        pieces = []
        for piece in self._pieces:
            a, b, va, vb = piece
            if a >= 0:
                pieces.append(piece)
            elif b > 0:
                pieces.append((Fraction(0), b, _interpolate(piece, Fraction(0)), vb))
        return TimeProfile(pieces)

    # --- identity ----------------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeProfile) and self._pieces == other._pieces

    def __hash__(self) -> int:
        return hash(self._pieces)

    def __repr__(self) -> str:
        inner = ", ".join(f"({a},{b}:{va}->{vb})" for a, b, va, vb in self._pieces)
        return f"TimeProfile[{inner}]"


def support(profile: TimeProfile) -> Optional[Interval]:
    return profile.support()


def causally_later(f: TimeProfile, h: TimeProfile) -> bool:
    """True iff inf supp f > sup supp h; vacuously true when either is zero."""
    sf, sh = f.support(), h.support()
    if sf is None or sh is None:
        return True
    return sf.lower > sh.upper


def is_time_cutoff(profile: TimeProfile, epsilon: Rational) -> bool:
    """1 on [-eps, eps] and supported in [-2 eps, 2 eps]."""
    epsilon = as_fraction(epsilon)
    span = profile.support()
    if span is None or span.lower < -2 * epsilon or span.upper > 2 * epsilon:
        return False
    return profile.equals_one_on(-epsilon, epsilon)


def psi_decomposition(chi: TimeProfile, t: Rational) -> Tuple[TimeProfile, TimeProfile]:
    """Split chi_t - chi into (future part, past part) by chopping at 0.

    Requires chi_t - chi to vanish on a neighbourhood of 0, so that the two
    humps are separated there.
    """
    t = as_fraction(t)
    difference = chi.translate(t) - chi
    for component in difference.support_components():
        if component.contains(Fraction(0)):
            logger.warning(f"psi decomposition rejected at t={t}: component {component} meets 0")
            raise PreconditionError(
                f"chi_t - chi does not vanish near 0 for t={t} (component {component})"
            )
    return difference.chop_future(), difference.chop_past()
