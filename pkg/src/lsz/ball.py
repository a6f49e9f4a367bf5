"""Certified real ball arithmetic on top of MPFR directed rounding.

Every quantity that enters a certified comparison is carried as an
enclosure ``mid +/- rad``.  All operations here are *containment sound*:
if the exact inputs lie in the input balls, the exact result lies in the
output ball.  Midpoints are arbitrary-precision MPFR values at the active
mantissa precision; radii are short-precision MPFR values rounded up.

Operations are pure and balls are immutable, so values can be shared
freely across threads; the active precision is thread-local.
"""

from __future__ import annotations

import enum
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

__all__ = [
    "Cmp",
    "DivisionByEnclosedZero",
    "DomainViolation",
    "Precision",
    "RealBall",
    "ball_cmp",
    "cmp_escalating",
    "current_precision",
    "euler_gamma",
    "log_2pi",
    "pi",
    "precision",
]

DEFAULT_BITS = 128
RAD_BITS = 32


class DomainViolation(ValueError):
    """A function precondition cannot be certified from the enclosure."""


class DivisionByEnclosedZero(ZeroDivisionError):
    """Divisor enclosure contains zero."""


@dataclass(frozen=True)
class Precision:
    mantissa_bits: int

    def __post_init__(self):
        if self.mantissa_bits < 53:
            raise ValueError("mantissa_bits must be >= 53")


_tls = threading.local()


def current_precision() -> Precision:
    prec = getattr(_tls, "precision", None)
    if prec is None:
        prec = Precision(DEFAULT_BITS)
        _tls.precision = prec
    return prec


def set_default_precision(bits: int) -> None:
    _tls.precision = Precision(bits)


@contextmanager
def precision(bits: int):
    """Run a block at the given mantissa precision (thread-local)."""
    old = getattr(_tls, "precision", None)
    _tls.precision = Precision(bits)
    try:
        yield _tls.precision
    finally:
        _tls.precision = old


@lru_cache(maxsize=None)
def _dn(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundDown)


@lru_cache(maxsize=None)
def _up(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundUp)


@lru_cache(maxsize=None)
def _nr(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundToNearest)


_RAD_UP = gmpy2.context(precision=RAD_BITS, round=gmpy2.RoundUp)
_ZERO = mpfr(0)


def _bits(bits):
    return current_precision().mantissa_bits if bits is None else bits


class Cmp(enum.Enum):
    CERTAINLY_LESS = -1
    INDETERMINATE = 0
    CERTAINLY_GREATER = 1


class RealBall:
    """Enclosure ``[mid - rad, mid + rad]`` of a real number.

    ``rad >= 0`` always; ``rad == 0`` means the midpoint is exact.
    Instances are immutable by convention; nothing here mutates them.
    """

    __slots__ = ("mid", "rad")

    def __init__(self, mid: mpfr, rad: mpfr = _ZERO):
        if rad < 0 or not gmpy2.is_finite(rad):
            raise ValueError("radius must be finite and non-negative")
        if not gmpy2.is_finite(mid):
            raise ValueError("midpoint must be finite")
        self.mid = mid
        self.rad = rad

    # -- construction -------------------------------------------------

    @staticmethod
    def exact(x, bits: int | None = None) -> "RealBall":
        """Ball for an exactly representable or rational value.

        Accepts int, Fraction, float, mpfr, and strings (parsed as exact
        rationals, so ``"1.6"`` means 8/5, not the nearest double).
        """
        bits = _bits(bits)
        if isinstance(x, RealBall):
            return x
        if isinstance(x, str):
            x = Fraction(x)
        if isinstance(x, Fraction):
            if x.denominator == 1:
                x = x.numerator
            else:
                lo = _dn(bits).div(mpfr(x.numerator, precision=max(bits, x.numerator.bit_length() + 1)), x.denominator)
                hi = _up(bits).div(mpfr(x.numerator, precision=max(bits, x.numerator.bit_length() + 1)), x.denominator)
                return RealBall.from_endpoints(lo, hi, bits)
        if isinstance(x, int):
            lo = _dn(bits).add(mpfr(0), x)
            hi = _up(bits).add(mpfr(0), x)
            return RealBall.from_endpoints(lo, hi, bits)
        # float / mpfr carry an exact binary value
        v = mpfr(x, precision=53) if isinstance(x, float) else x
        lo = _dn(bits).add(v, 0)
        hi = _up(bits).add(v, 0)
        return RealBall.from_endpoints(lo, hi, bits)

    @staticmethod
    def from_endpoints(lo, hi, bits: int | None = None) -> "RealBall":
        """Ball containing the whole interval [lo, hi]."""
        bits = _bits(bits)
        lo = mpfr(lo, precision=bits) if not isinstance(lo, mpfr) else lo
        hi = mpfr(hi, precision=bits) if not isinstance(hi, mpfr) else hi
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        mid = _nr(bits).div(_nr(bits).add(lo, hi), 2)
        r1 = _RAD_UP.sub(hi, mid)
        r2 = _RAD_UP.sub(mid, lo)
        rad = r1 if r1 >= r2 else r2
        if rad < 0:
            rad = _ZERO
        return RealBall(mid, rad)

    # -- accessors ----------------------------------------------------

    def lower(self, bits: int | None = None) -> mpfr:
        return _dn(_bits(bits)).sub(self.mid, self.rad)

    def upper(self, bits: int | None = None) -> mpfr:
        return _up(_bits(bits)).add(self.mid, self.rad)

    def lower_float(self) -> float:
        return float(_dn(53).sub(self.mid, self.rad))

    def upper_float(self) -> float:
        return float(_up(53).add(self.mid, self.rad))

    def width(self) -> mpfr:
        return _up(53).mul(self.rad, 2)

    def is_exact(self) -> bool:
        return self.rad == 0

    def contains(self, x) -> bool:
        """True if the exact rational/float x lies in the enclosure."""
        if isinstance(x, (int, float, mpfr)):
            return self.lower() <= x <= self.upper()
        x = Fraction(x)
        lo, hi = self.lower(), self.upper()
        return Fraction(lo.as_integer_ratio()[0], lo.as_integer_ratio()[1]) <= x and x <= Fraction(
            hi.as_integer_ratio()[0], hi.as_integer_ratio()[1]
        )

    def overlaps(self, other: "RealBall") -> bool:
        return not (self.upper() < other.lower() or other.upper() < self.lower())

    def __repr__(self):
        return f"[{self.mid!s} +/- {self.rad!s}]"

    # -- operator sugar (uses the thread-local precision) --------------

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)


def _coerce(x, bits: int | None = None) -> RealBall:
    return x if isinstance(x, RealBall) else RealBall.exact(x, bits)


# -- arithmetic -------------------------------------------------------


def add(a: RealBall, b: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    return RealBall.from_endpoints(
        _dn(bits).add(a.lower(bits), b.lower(bits)),
        _up(bits).add(a.upper(bits), b.upper(bits)),
        bits,
    )


def sub(a: RealBall, b: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    return RealBall.from_endpoints(
        _dn(bits).sub(a.lower(bits), b.upper(bits)),
        _up(bits).sub(a.upper(bits), b.lower(bits)),
        bits,
    )


def neg(a: RealBall) -> RealBall:
    return RealBall(-a.mid, a.rad)


def mul(a: RealBall, b: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    al, ah = a.lower(bits), a.upper(bits)
    bl, bh = b.lower(bits), b.upper(bits)
    dn, up = _dn(bits), _up(bits)
    lo = min(dn.mul(al, bl), dn.mul(al, bh), dn.mul(ah, bl), dn.mul(ah, bh))
    hi = max(up.mul(al, bl), up.mul(al, bh), up.mul(ah, bl), up.mul(ah, bh))
    return RealBall.from_endpoints(lo, hi, bits)


def div(a: RealBall, b: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    bl, bh = b.lower(bits), b.upper(bits)
    if bl <= 0 <= bh:
        raise DivisionByEnclosedZero(f"divisor enclosure [{bl}, {bh}] contains 0")
    al, ah = a.lower(bits), a.upper(bits)
    dn, up = _dn(bits), _up(bits)
    lo = min(dn.div(al, bl), dn.div(al, bh), dn.div(ah, bl), dn.div(ah, bh))
    hi = max(up.div(al, bl), up.div(al, bh), up.div(ah, bl), up.div(ah, bh))
    return RealBall.from_endpoints(lo, hi, bits)


# -- elementary functions ---------------------------------------------


def log(a: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    lo = a.lower(bits)
    if lo <= 0:
        raise DomainViolation(f"log requires a certainly positive enclosure, got lower end {lo}")
    return RealBall.from_endpoints(_dn(bits).log(lo), _up(bits).log(a.upper(bits)), bits)


def exp(a: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    return RealBall.from_endpoints(_dn(bits).exp(a.lower(bits)), _up(bits).exp(a.upper(bits)), bits)


def sqrt(a: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    lo = a.lower(bits)
    if lo < 0:
        raise DomainViolation(f"sqrt requires a non-negative enclosure, got lower end {lo}")
    return RealBall.from_endpoints(_dn(bits).sqrt(lo), _up(bits).sqrt(a.upper(bits)), bits)


def atan(a: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    return RealBall.from_endpoints(_dn(bits).atan(a.lower(bits)), _up(bits).atan(a.upper(bits)), bits)


def acos(a: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    lo, hi = a.lower(bits), a.upper(bits)
    if lo < -1 or hi > 1:
        raise DomainViolation(f"acos requires an enclosure inside [-1, 1], got [{lo}, {hi}]")
    # decreasing on [-1, 1]
    return RealBall.from_endpoints(_dn(bits).acos(hi), _up(bits).acos(lo), bits)


def pow_(a: RealBall, y: RealBall, bits: int | None = None) -> RealBall:
    """a**y for a certainly positive a, as exp(y log a)."""
    bits = _bits(bits)
    if a.lower(bits) <= 0:
        raise DomainViolation("pow requires a certainly positive base enclosure")
    return exp(mul(_coerce(y), log(a, bits), bits), bits)


def abs_(a: RealBall, bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    lo, hi = a.lower(bits), a.upper(bits)
    if lo >= 0:
        return RealBall.from_endpoints(lo, hi, bits)
    if hi <= 0:
        return RealBall.from_endpoints(-hi, -lo, bits)
    return RealBall.from_endpoints(mpfr(0), max(-lo, hi), bits)


_WIDE_ARG_BITS = 2**40  # beyond this, period location is not certifiable cheaply


def cos(a: RealBall, bits: int | None = None) -> RealBall:
    """Range enclosure of cos over the ball.

    Endpoint values are taken with directed rounding and +/-1 is included
    whenever a multiple of pi possibly lies inside the interval.  Very wide
    or very large arguments fall back to [-1, 1], which is always sound.
    """
    bits = _bits(bits)
    lo, hi = a.lower(bits), a.upper(bits)
    pi_ball = pi(bits)
    two_pi_lo = _dn(bits).mul(pi_ball.lower(bits), 2)
    if _up(bits).sub(hi, lo) >= two_pi_lo or abs(a.mid) > _WIDE_ARG_BITS:
        return RealBall.from_endpoints(mpfr(-1), mpfr(1), bits)
    dn, up = _dn(bits), _up(bits)
    vmax = max(up.cos(lo), up.cos(hi))
    vmin = min(dn.cos(lo), dn.cos(hi))
    n0 = int(gmpy2.floor(_nr(bits).div(lo, pi_ball.mid))) - 2
    for n in range(n0, n0 + 6):
        # n*pi as a ball; conservative inclusion when possibly inside
        npi_lo = dn.mul(pi_ball.lower(bits), n) if n >= 0 else dn.mul(pi_ball.upper(bits), n)
        npi_hi = up.mul(pi_ball.upper(bits), n) if n >= 0 else up.mul(pi_ball.lower(bits), n)
        if npi_hi < lo or npi_lo > hi:
            continue
        if n % 2 == 0:
            vmax = mpfr(1)
        else:
            vmin = mpfr(-1)
    vmax = min(vmax, mpfr(1))
    vmin = max(vmin, mpfr(-1))
    return RealBall.from_endpoints(vmin, vmax, bits)


def sin(a: RealBall, bits: int | None = None) -> RealBall:
    """sin x = cos(x - pi/2), reusing the cos range analysis."""
    bits = _bits(bits)
    half_pi = div(pi(bits), RealBall.exact(2, bits), bits)
    return cos(sub(a, half_pi, bits), bits)


# -- constants --------------------------------------------------------


def pi(bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    return RealBall.from_endpoints(_dn(bits).const_pi(), _up(bits).const_pi(), bits)


def euler_gamma(bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    return RealBall.from_endpoints(_dn(bits).const_euler(), _up(bits).const_euler(), bits)


def log_2pi(bits: int | None = None) -> RealBall:
    bits = _bits(bits)
    return log(mul(RealBall.exact(2, bits), pi(bits), bits), bits)


# -- comparison -------------------------------------------------------


def ball_cmp(a: RealBall, b: RealBall, bits: int | None = None) -> Cmp:
    """Certified order of two enclosures.

    Never asserts an order that any pair of contained exact values could
    contradict; overlapping intervals are INDETERMINATE.
    """
    bits = _bits(bits)
    if a.lower(bits) > b.upper(bits):
        return Cmp.CERTAINLY_GREATER
    if a.upper(bits) < b.lower(bits):
        return Cmp.CERTAINLY_LESS
    return Cmp.INDETERMINATE


def cmp_escalating(make_a, make_b, bits: int | None = None, escalations: int = 2) -> Cmp:
    """ball_cmp with precision doubling on indeterminate outcomes.

    ``make_a`` / ``make_b`` rebuild their operand at a requested precision;
    after ``escalations`` doublings an indeterminate result is reported
    upward unchanged.
    """
    bits = _bits(bits)
    for _ in range(escalations + 1):
        with precision(bits):
            c = ball_cmp(make_a(bits), make_b(bits), bits)
        if c is not Cmp.INDETERMINATE:
            return c
        bits *= 2
    return Cmp.INDETERMINATE
