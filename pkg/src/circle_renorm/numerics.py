"""Multiprecision scalars, circle points and arcs.

Hot loops work on raw ``gmpy2.mpfr`` values inside a :func:`working_precision`
block.  :class:`AdaptiveReal` is the boundary type: it carries its own
precision and combines with other values at the smaller of the two.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from .errors import ConfigError, PrecisionError

MIN_PRECISION = 64
DEFAULT_PRECISION = 512
PRECISION_ENV = "CIRCLE_RENORM_PRECISION"


def default_precision() -> int:
    """Precision floor, overridable through ``CIRCLE_RENORM_PRECISION``."""
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return DEFAULT_PRECISION
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{PRECISION_ENV} must be an integer, got {raw!r}") from exc
    if value < MIN_PRECISION:
        raise PrecisionError(f"{PRECISION_ENV}={value} is below {MIN_PRECISION} bits")
    return value


def precision_schedule(n: int, quotients=(), floor: int | None = None) -> int:
    """Working precision for level ``n``.

    Grows linearly in depth and logarithmically in the largest partial
    quotient seen so far; never below the floor.
    """
    amax = max((int(a) for a in quotients), default=1)
    sched = 96 + 16 * n * math.log2(amax + 1)
    base = max(128, math.ceil(sched))
    return max(base, default_precision() if floor is None else floor)


@contextmanager
def working_precision(prec: int):
    if prec < MIN_PRECISION:
        raise PrecisionError(f"precision {prec} below minimum {MIN_PRECISION}")
    with gmpy2.context(gmpy2.get_context(), precision=int(prec)):
        yield


def to_mpfr(x, prec: int | None = None):
    """Convert ints, Fractions, decimal strings, floats or mpfr to mpfr."""
    if prec is None:
        prec = gmpy2.get_context().precision
    if isinstance(x, AdaptiveReal):
        x = x.value
    if isinstance(x, Fraction):
        with working_precision(prec):
            return mpfr(x.numerator) / mpfr(x.denominator)
    if isinstance(x, str):
        return mpfr(x, prec)
    return mpfr(x, prec)


def floor_int(x) -> int:
    return int(gmpy2.floor(x))


def frac(x):
    """Fractional part in [0, 1)."""
    return x - gmpy2.floor(x)


def chebyshev_nodes(lo, hi, count: int):
    """First-kind Chebyshev nodes on (lo, hi), increasing, endpoints excluded."""
    pi = gmpy2.const_pi()
    mid = (lo + hi) / 2
    half = (hi - lo) / 2
    return [mid - half * gmpy2.cos(pi * (2 * k + 1) / (2 * count)) for k in range(count)]


def uniform_nodes(lo, hi, count: int):
    """``count`` equally spaced nodes including both ends."""
    if count < 2:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + step * k for k in range(count)]


def decimal_string(x, prec: int | None = None) -> str:
    """Round-trippable decimal rendering with enough digits for ``prec`` bits."""
    if isinstance(x, AdaptiveReal):
        prec = x.prec if prec is None else prec
        x = x.value
    if isinstance(x, (int, Fraction)):
        x = to_mpfr(x, prec or DEFAULT_PRECISION)
    if not isinstance(x, type(mpfr(0))):
        return repr(float(x))
    prec = prec or x.precision
    digits = int(math.ceil(prec * math.log10(2))) + 2
    if gmpy2.is_zero(x):
        return "0"
    if not gmpy2.is_finite(x):
        return str(float(x))
    return scientific(x, digits)


def scientific(x, digits: int) -> str:
    """``x`` as ``d.ddd...e+XX`` with ``digits`` significant digits (correctly rounded)."""
    if gmpy2.is_zero(x):
        return "0"
    # keep the value's own precision; a bare mpfr(x) would round to the context
    x = x if isinstance(x, type(mpfr(0))) else mpfr(x)
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    e = exp - 1
    body = mant[0] + ("." + mant[1:] if len(mant) > 1 else "")
    return f"{sign}{body}e{'+' if e >= 0 else '-'}{abs(e):02d}"


class AdaptiveReal:
    """An mpfr value tagged with the precision it is valid to.

    Binary operations run at the minimum precision of the operands.
    """

    __slots__ = ("_value", "_prec")

    def __init__(self, value, prec: int | None = None):
        if isinstance(value, AdaptiveReal):
            prec = value.prec if prec is None else prec
            value = value.value
        if prec is None:
            prec = value.precision if isinstance(value, type(mpfr(0))) else default_precision()
        if prec < MIN_PRECISION:
            raise PrecisionError(f"precision {prec} below minimum {MIN_PRECISION}")
        self._prec = int(prec)
        self._value = to_mpfr(value, self._prec)

    @property
    def value(self):
        return self._value

    @property
    def prec(self) -> int:
        return self._prec

    def _binary(self, other, op):
        if isinstance(other, AdaptiveReal):
            prec = min(self._prec, other._prec)
            rhs = other._value
        else:
            prec = self._prec
            rhs = to_mpfr(other, prec)
        with working_precision(prec):
            return AdaptiveReal(op(self._value, rhs), prec)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    def __rmul__(self, other):
        return self._binary(other, lambda a, b: b * a)

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binary(other, lambda a, b: b / a)

    def __neg__(self):
        return AdaptiveReal(-self._value, self._prec)

    def __abs__(self):
        return AdaptiveReal(abs(self._value), self._prec)

    def _cmp_value(self, other):
        return other._value if isinstance(other, AdaptiveReal) else to_mpfr(other, self._prec)

    def __lt__(self, other):
        return self._value < self._cmp_value(other)

    def __le__(self, other):
        return self._value <= self._cmp_value(other)

    def __gt__(self, other):
        return self._value > self._cmp_value(other)

    def __ge__(self, other):
        return self._value >= self._cmp_value(other)

    def __eq__(self, other):
        if not isinstance(other, (AdaptiveReal, int, float, Fraction, type(mpfr(0)))):
            return NotImplemented
        return self._value == self._cmp_value(other)

    def __hash__(self):
        return hash((self._value, self._prec))

    def __float__(self):
        return float(self._value)

    def __repr__(self):
        return f"AdaptiveReal({decimal_string(self._value, min(self._prec, 64))}, prec={self._prec})"

    def as_fraction(self) -> Fraction:
        num, den = self._value.as_integer_ratio()
        return Fraction(num, den)


def with_precision(x: AdaptiveReal, prec: int) -> AdaptiveReal:
    """Round (or zero-extend) ``x`` to ``prec`` bits."""
    if prec < MIN_PRECISION:
        raise PrecisionError(f"precision {prec} below minimum {MIN_PRECISION}")
    return AdaptiveReal(mpfr(x.value, prec), prec)


def sum_values(values, prec: int | None = None) -> AdaptiveReal:
    """Left-to-right sum at a fixed precision.

    Error is at most ``n * 2**(2 - prec)`` times the largest partial sum.
    """
    items = list(values)
    if prec is None:
        prec = min((v.prec for v in items if isinstance(v, AdaptiveReal)), default=default_precision())
    with working_precision(prec):
        total = mpfr(0)
        for v in items:
            total = total + (v.value if isinstance(v, AdaptiveReal) else to_mpfr(v, prec))
    return AdaptiveReal(total, prec)


@dataclass(frozen=True)
class CirclePoint:
    """A point of R/Z with representative in [0, 1)."""

    rep: AdaptiveReal

    def __post_init__(self):
        if not (0 <= self.rep.value < 1):
            with working_precision(self.rep.prec):
                object.__setattr__(self, "rep", AdaptiveReal(frac(self.rep.value), self.rep.prec))

    @classmethod
    def of(cls, x, prec: int | None = None) -> "CirclePoint":
        prec = prec or (x.prec if isinstance(x, AdaptiveReal) else default_precision())
        with working_precision(prec):
            return cls(AdaptiveReal(frac(to_mpfr(x, prec)), prec))

    @property
    def prec(self) -> int:
        return self.rep.prec

    def close_to(self, other: "CirclePoint") -> bool:
        prec = min(self.prec, other.prec)
        with working_precision(prec):
            d = frac(self.rep.value - other.rep.value)
            d = min(d, 1 - d)
            return d <= mpfr(2) ** (4 - prec)

    def __float__(self):
        return float(self.rep)


@dataclass(frozen=True)
class Arc:
    """Positively oriented arc from ``start`` to ``end``."""

    start: CirclePoint
    end: CirclePoint

    @property
    def prec(self) -> int:
        return min(self.start.prec, self.end.prec)

    def complement(self) -> "Arc":
        return Arc(self.end, self.start)


def arc_length(arc: Arc) -> AdaptiveReal:
    """Length in (0, 1]; coincident endpoints give the full circle."""
    prec = arc.prec
    with working_precision(prec):
        d = frac(arc.end.rep.value - arc.start.rep.value)
        if d == 0:
            d = mpfr(1)
        return AdaptiveReal(d, prec)


def is_endpoint(arc: Arc, p: CirclePoint) -> bool:
    return p.close_to(arc.start) or p.close_to(arc.end)


def arc_contains(arc: Arc, p: CirclePoint) -> bool:
    """Strict interior membership; endpoints (within 2^(4-P)) are excluded."""
    if is_endpoint(arc, p):
        return False
    prec = min(arc.prec, p.prec)
    with working_precision(prec):
        offset = frac(p.rep.value - arc.start.rep.value)
        return offset < arc_length(arc).value
