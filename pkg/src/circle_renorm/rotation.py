"""Continued fractions, closest returns and parameter tuning.

Convention: ``rho = [a0, a1, ...] = 1/(a0 + 1/(a1 + ...))``, with
``q_{-1}=0, q_0=1, q_{n+1} = a_n q_n + q_{n-1}`` and likewise for ``p``
starting from ``p_{-1}=1, p_0=0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from .errors import (
    BudgetExceededError,
    ConfigError,
    RationalRotationError,
    TuningError,
)
from .numerics import AdaptiveReal, to_mpfr, working_precision

INF = math.inf


class Budget:
    """Counter of lift evaluations; ``None`` means unlimited."""

    def __init__(self, limit: int | None = None):
        self.limit = limit
        self.used = 0

    def spend(self, n: int):
        self.used += n
        if self.limit is not None and self.used > self.limit:
            raise BudgetExceededError(f"evaluation budget {self.limit} exhausted")


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: tuple

    def __post_init__(self):
        qs = tuple(int(a) for a in self.quotients)
        if any(a < 1 for a in qs):
            raise ConfigError("partial quotients must be positive integers")
        object.__setattr__(self, "quotients", qs)

    def __len__(self):
        return len(self.quotients)

    def as_fraction(self) -> Fraction:
        x = Fraction(0)
        for a in reversed(self.quotients):
            x = 1 / (a + x)
        return x

    def value(self, prec: int = 128, tail_golden: bool = False):
        """Numeric value; with ``tail_golden`` the expansion continues with 1s."""
        with working_precision(prec):
            x = (gmpy2.sqrt(mpfr(5)) - 1) / 2 if tail_golden else mpfr(0)
            for a in reversed(self.quotients):
                x = 1 / (a + x)
            return x


@dataclass(frozen=True)
class ConvergentTable:
    """``q[n], p[n]`` for ``n = 0..len(cf)``; index ``-1`` via :meth:`qn`/:meth:`pn`."""

    quotients: tuple
    q: tuple
    p: tuple

    def qn(self, n: int) -> int:
        return 0 if n == -1 else self.q[n]

    def pn(self, n: int) -> int:
        return 1 if n == -1 else self.p[n]

    def determinant(self, n: int) -> int:
        """``q_{n+1} p_n - p_{n+1} q_n``, which equals ``(-1)^(n+1)``."""
        return self.qn(n + 1) * self.pn(n) - self.pn(n + 1) * self.qn(n)

    def __len__(self):
        return len(self.q)


def convergents(cf) -> ConvergentTable:
    quotients = tuple(cf.quotients if isinstance(cf, ContinuedFraction) else cf)
    q_prev, q_cur = 0, 1
    p_prev, p_cur = 1, 0
    qs, ps = [q_cur], [p_cur]
    for a in quotients:
        a = int(a)
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        qs.append(q_cur)
        ps.append(p_cur)
    return ConvergentTable(quotients, tuple(qs), tuple(ps))


def cf_expansion(x, n: int) -> ContinuedFraction:
    """First ``n`` partial quotients of ``x`` in (0, 1) by the Gauss map.

    Exact for Fractions, which raise :class:`RationalRotationError` if the
    expansion terminates before ``n`` terms; for floating inputs the
    expansion stops once the remainder is below the input's resolution.
    """
    if isinstance(x, Fraction):
        if not 0 < x < 1:
            raise ConfigError("cf_expansion expects 0 < x < 1")
        out, orig = [], x
        while x and len(out) < n:
            y = 1 / x
            a = math.floor(y)
            out.append(a)
            x = y - a
            if not x and len(out) < n:
                raise RationalRotationError(f"{orig} is rational: expansion stops at {out}")
        return ContinuedFraction(tuple(out))
    prec = x.prec if isinstance(x, AdaptiveReal) else getattr(x, "precision", 53)
    with working_precision(max(prec, 64)):
        v = to_mpfr(x)
        if not 0 < v < 1:
            raise ConfigError("cf_expansion expects 0 < x < 1")
        out = []
        eps = mpfr(2) ** (8 - prec)
        # tracks the growth of the error through the Gauss map
        err = eps
        while len(out) < n and v > err:
            y = 1 / v
            a = int(gmpy2.floor(y))
            err = err * y * y
            out.append(a)
            v = y - a
            if err > mpfr(1) / 4:
                break
        return ContinuedFraction(tuple(out))


@dataclass
class ReturnsResult:
    """Closest-return data of one critical orbit.

    ``displacements[k]`` is ``F^{q_k}(c) - c - p_k`` for ``k = 0..len(quotients)``;
    its sign alternates.  ``terminated`` marks a periodic orbit (rational
    rotation number); ``capped`` marks a level cut off by a per-level cap.
    """

    quotients: list
    displacements: list
    table: ConvergentTable
    terminated: bool = False
    capped: bool = False
    evaluations: int = 0


def _returns(f, c, levels: int, caps=None, budget: Budget | None = None,
             max_quotient: int = 10**6) -> ReturnsResult:
    budget = budget or Budget()
    prec = gmpy2.get_context().precision
    tiny = mpfr(2) ** (16 - prec)
    q_prev, p_prev, d_prev = 0, 1, mpfr(-1)
    q, p = 1, 0
    d = f.lift(c) - c
    budget.spend(1)
    quotients, disps = [], [d]
    if d <= tiny:
        # rotation number 0 (fixed point at or below c)
        return ReturnsResult([INF], disps, convergents([]), terminated=True,
                             evaluations=budget.used)
    iterate = f.iterate
    for k in range(levels):
        cap = caps[k] if caps is not None and k < len(caps) else max_quotient
        y = d_prev
        pos = d_prev > 0
        j = 0
        hit = False
        capped = False
        while True:
            if j >= cap:
                capped = True
                break
            y_next = iterate(c + y, q) - c - p
            budget.spend(q)
            if abs(y_next) <= tiny:
                j += 1
                hit = True
                y = y_next
                break
            if (y_next > 0) != pos:
                break
            if abs(y_next - y) <= tiny:
                capped = True
                j = INF
                break
            y = y_next
            j += 1
        if capped:
            quotients.append(j if j == INF else cap)
            return ReturnsResult(quotients, disps, convergents([a for a in quotients if a != INF][:k]),
                                 capped=True, evaluations=budget.used)
        quotients.append(j)
        if j == 0 and k > 0:
            raise RationalRotationError("zero partial quotient past level 0")
        q_prev, q = q, j * q + q_prev
        p_prev, p = p, j * p + p_prev
        d_prev, d = d, y
        disps.append(d)
        if hit:
            quotients.append(INF)
            return ReturnsResult(quotients, disps, convergents(quotients[:-1]),
                                 terminated=True, evaluations=budget.used)
        if j == 0:
            # rho >= 1 at level 0; nothing deeper is meaningful
            return ReturnsResult(quotients, disps, convergents([]), capped=True,
                                 evaluations=budget.used)
    return ReturnsResult(quotients, disps, convergents(quotients), evaluations=budget.used)


def partial_quotients_by_returns(f, depth: int, crit: int = 0, budget: Budget | None = None,
                                 max_quotient: int = 10**6) -> ReturnsResult:
    """Measure ``a_0..a_{depth-1}`` from the closest returns of a critical orbit.

    Raises :class:`RationalRotationError` if the orbit is periodic or a
    return stalls before ``depth`` levels.
    """
    with working_precision(f.precision):
        res = _returns(f, f.critical_points[crit], depth, budget=budget, max_quotient=max_quotient)
    if res.terminated or res.capped:
        raise RationalRotationError(
            f"rotation number looks rational after quotients {res.quotients}")
    return res


def rotation_number_by_lift(f, n: int = 10000, x=None):
    """Plain lift estimate ``(F^n(x) - x) / n``, accurate to ``1/n``."""
    with working_precision(f.precision):
        x0 = mpfr(0) if x is None else to_mpfr(x)
        return (f.iterate(x0, n) - x0) / n


def compare_quotients(measured, target) -> int:
    """Sign of ``rho(measured) - rho(target)`` from the first differing quotient.

    Larger quotients mean smaller values at even positions and larger at odd.
    Returns 0 when the common prefix agrees entirely.
    """
    for k, (m, t) in enumerate(zip(measured, target)):
        if m != t:
            s = 1 if m > t else -1
            return -s if k % 2 == 0 else s
    return 0


@dataclass
class TuneResult:
    a: object
    map: object
    quotients: list
    verified_depth: int
    bracket: tuple
    iterations: int
    evaluations: int
    target: tuple = field(default_factory=tuple)


def tune_parameter(family, cf, tol=None, tail: int = 4, precision: int | None = None,
                   bracket=(0, 1), budget: int | None = None, max_iter: int = 400) -> TuneResult:
    """Bisect the parameter so the map's rotation number starts with ``cf``.

    ``family`` maps a parameter to a circle map.  The target is ``cf``
    followed by ``tail`` ones; each probe measures closest returns only as
    deep as needed to decide the comparison.  The result is confirmed by an
    independent uncapped measurement of the full target.
    """
    quotients = tuple(cf.quotients if isinstance(cf, ContinuedFraction) else cf)
    if not quotients or any(int(a) < 1 for a in quotients):
        raise ConfigError("target continued fraction must be non-empty positive integers")
    target = tuple(int(a) for a in quotients) + (1,) * tail
    caps = [t + 1 for t in target]
    probe = family(bracket[0])
    prec = precision or probe.precision
    tol = mpfr(2) ** (-min(prec - 16, 200)) if tol is None else tol
    counter = Budget(budget)

    def cmp(a):
        g = family(a)
        with working_precision(prec):
            res = _returns(g, g.critical_points[0], len(target), caps=caps, budget=counter)
        return compare_quotients(res.quotients, target), g

    with working_precision(prec):
        lo = to_mpfr(bracket[0])
        hi = to_mpfr(bracket[1])
        if hi >= 1:
            hi = 1 - mpfr(2) ** -40
        c_lo, _ = cmp(lo)
        c_hi, _ = cmp(hi)
        if not (c_lo < 0 < c_hi):
            raise TuningError(f"target not bracketed by [{float(lo)}, {float(hi)}]")
        it = 0
        found = None
        while it < max_iter:
            it += 1
            mid = (lo + hi) / 2
            c, g = cmp(mid)
            if c == 0:
                found = (mid, g)
                break
            if c < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        if found is None:
            mid = (lo + hi) / 2
            g = family(mid)
            found = (mid, g)
    a, g = found
    try:
        res = partial_quotients_by_returns(g, len(quotients), budget=counter)
    except RationalRotationError as exc:
        raise TuningError(f"tuned map failed confirmation: {exc}") from exc
    verified = 0
    for m, t in zip(res.quotients, quotients):
        if m != t:
            break
        verified += 1
    if verified < len(quotients):
        raise TuningError(f"tuned map has quotients {res.quotients}, wanted {list(quotients)}")
    return TuneResult(a, g, list(res.quotients), verified, (lo, hi), it, counter.used, target)
