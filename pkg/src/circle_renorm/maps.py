"""Bi-critical circle maps given by their lifts, with closed-form 3-jets."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

from .errors import ConfigError, NotADiffeomorphismError
from .numerics import default_precision, to_mpfr, working_precision


@dataclass(frozen=True)
class IterateJet:
    """Value and first three derivatives of a map (or an iterate) at a point."""

    value: object
    d1: object
    d2: object
    d3: object

    def as_tuple(self):
        return (self.value, self.d1, self.d2, self.d3)


def compose_jets(outer, inner):
    """Jet of outer∘inner, where ``outer`` is taken at ``inner.value``."""
    g0, g1, g2, g3 = outer
    f0, f1, f2, f3 = inner
    return (
        g0,
        g1 * f1,
        g2 * f1 * f1 + g1 * f2,
        g3 * f1 * f1 * f1 + 3 * g2 * f1 * f2 + g1 * f3,
    )


def sin_cos_turns(t):
    """``(sin 2 pi t, cos 2 pi t)`` with exact argument reduction.

    Shifts by integers, halves and quarters are exact in binary floating
    point, so dyadic points give exact values and small results keep full
    relative accuracy.
    """
    r = t - gmpy2.rint(t)
    neg = False
    if r > 0.25:
        r = mpfr(0.5) - r
        neg = True
    elif r < -0.25:
        r = -mpfr(0.5) - r
        neg = True
    tp = 2 * gmpy2.const_pi()
    s = gmpy2.sin(tp * r) if r else mpfr(0)
    ar = abs(r)
    if ar > 0.125:
        c = gmpy2.sin(tp * (mpfr(0.25) - ar))
    else:
        c = gmpy2.cos(tp * r)
    return (s, -c) if neg else (s, c)


def one_minus_sinc(h):
    """``1 - sin(h)/h`` without cancellation for small ``h``."""
    if h == 0:
        return mpfr(0)
    ctx = gmpy2.get_context()
    prec = ctx.precision
    e = -gmpy2.get_exp(h)
    if e <= 0:
        return 1 - gmpy2.sin(h) / h
    with gmpy2.context(ctx, precision=prec + 2 * e + 16):
        hh = mpfr(h)
        v = (hh - gmpy2.sin(hh)) / hh
    return mpfr(v, prec)


def _add_turns(sa, ca, sb, cb):
    return sa * cb + ca * sb, ca * cb - sa * sb


class CircleMap:
    """Degree-one circle map through a lift ``F`` with ``F(x+1) = F(x) + 1``.

    Subclasses provide ``lift`` and ``jet``; both evaluate at the ambient
    gmpy2 precision, so callers wrap loops in ``working_precision``.
    """

    family = "abstract"
    criticalities: tuple = ()

    def __init__(self, a, precision: int | None = None):
        self.precision = precision or default_precision()
        with working_precision(self.precision):
            self.a = to_mpfr(a, self.precision)
            self._setup()

    def _setup(self):
        pass

    @property
    def critical_points(self) -> tuple:
        return ()

    def lift(self, x):
        raise NotImplementedError

    def jet(self, x):
        raise NotImplementedError

    def iterate(self, x, k: int):
        lift = self.lift
        for _ in range(k):
            x = lift(x)
        return x

    def iterate_mod(self, x, k: int):
        """``F^k(x)`` as ``(y, m)`` with ``y`` in [0, 1) and integer ``m``.

        Keeping iterates near the unit interval keeps absolute rounding
        errors at ``2^-P`` per step instead of growing with the lift value.
        """
        m = int(gmpy2.floor(x))
        x = x - m
        lift = self.lift
        floor = gmpy2.floor
        for _ in range(k):
            x = lift(x)
            j = floor(x)
            if j:
                x = x - j
                m += int(j)
        return x, m

    def jet_mod(self, jet, k: int):
        """``k`` steps of the chain rule on a 3-jet, reducing the value mod 1."""
        x, d1, d2, d3 = jet
        m = int(gmpy2.floor(x))
        x = x - m
        floor = gmpy2.floor
        for _ in range(k):
            g0, g1, g2, g3 = self.jet(x)
            d1, d2, d3 = (g1 * d1, g2 * d1 * d1 + g1 * d2,
                          g3 * d1 * d1 * d1 + 3 * g2 * d1 * d2 + g1 * d3)
            j = floor(g0)
            x = g0 - j if j else g0
            m += int(j)
        return (x, d1, d2, d3), m

    def orbit(self, x, k: int):
        """``[x, F(x), ..., F^k(x)]``."""
        out = [x]
        lift = self.lift
        for _ in range(k):
            x = lift(x)
            out.append(x)
        return out

    # evaluation as offsets from a reference orbit point
    def anchor(self, u):
        """Data cached per orbit point ``u`` for :meth:`lift_difference`."""
        return u

    def lift_difference(self, anc, d):
        """``F(u + d) - F(u)`` for the anchored point ``u``."""
        return self.lift(anc + d) - self.lift(anc)

    def derivatives_at(self, anc, d):
        """First three derivatives of ``F`` at ``u + d``."""
        return self.jet(anc + d)[1:]

    def iterate_jet(self, x, k: int) -> IterateJet:
        j = (x, mpfr(1), mpfr(0), mpfr(0))
        for _ in range(k):
            j = compose_jets(self.jet(j[0]), j)
        return IterateJet(*j)

    def inverse(self, y, tol=None, max_iter: int | None = None):
        """Lift inverse by Newton steps safeguarded with bisection."""
        prec = gmpy2.get_context().precision
        tol = tol if tol is not None else mpfr(2) ** (8 - prec)
        lo = y - self.a - 1
        hi = y - self.a + 1
        x = y - self.a
        for _ in range(max_iter or 4 * prec + 64):
            fx = self.lift(x) - y
            if fx > 0:
                hi = x
            else:
                lo = x
            if hi - lo <= tol * (1 + abs(x)):
                break
            d1 = self.jet(x)[1]
            step_ok = False
            if d1 > 0:
                nx = x - fx / d1
                if lo < nx < hi and abs(nx - x) < (hi - lo) / 2:
                    step_ok = True
            if not step_ok:
                nx = (lo + hi) / 2
            if nx == x:
                break
            x = nx
        return x

    def spec(self) -> dict:
        return {"family": self.family, "a": str(self.a)}

    def with_parameter(self, a) -> "CircleMap":
        raise NotImplementedError

    def at_precision(self, prec: int) -> "CircleMap":
        """The same map (identical dyadic parameters) evaluated at ``prec`` bits."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(a={float(self.a):.17g}, precision={self.precision})"


class ArnoldBiCritical(CircleMap):
    """``x + a - sin(4 pi x) / (4 pi)``: cubic critical points at 0 and 1/2."""

    family = "arnold2"
    criticalities = (3, 3)

    def _setup(self):
        pi = gmpy2.const_pi()
        self._w = 4 * pi
        self._inv_w = 1 / self._w
        self._w2 = self._w * self._w
        self._c0 = mpfr(0)
        self._c1 = mpfr(1) / 2
        self._tp = 2 * pi

    @property
    def critical_points(self):
        return (self._c0, self._c1)

    def lift(self, x):
        return x + self.a - gmpy2.sin(self._w * x) * self._inv_w

    def iterate(self, x, k: int):
        a, w, iw, sin = self.a, self._w, self._inv_w, gmpy2.sin
        for _ in range(k):
            x = x + a - sin(w * x) * iw
        return x

    def iterate_mod(self, x, k: int):
        a, w, iw, sin, floor = self.a, self._w, self._inv_w, gmpy2.sin, gmpy2.floor
        m = int(floor(x))
        x = x - m
        for _ in range(k):
            x = x + a - sin(w * x) * iw
            if x >= 1:
                x = x - 1
                m += 1
            elif x < 0:
                j = floor(x)
                x = x - j
                m += int(j)
        return x, m

    def orbit(self, x, k: int):
        a, w, iw, sin = self.a, self._w, self._inv_w, gmpy2.sin
        out = [x]
        for _ in range(k):
            x = x + a - sin(w * x) * iw
            out.append(x)
        return out

    def jet(self, x):
        t = self._w * x
        s = gmpy2.sin(t)
        c = gmpy2.cos(t)
        return (x + self.a - s * self._inv_w, 1 - c, self._w * s, self._w2 * c)

    def anchor(self, u):
        return sin_cos_turns(u)

    def lift_difference(self, anc, d):
        # d - sin(2 pi d) cos(2 pi (2u + d)) / (2 pi), written without cancellation
        su, cu = anc
        sh, ch = sin_cos_turns(d / 2)
        mid = su * ch + cu * sh
        s2 = 2 * mid * mid
        return d * (s2 + (1 - s2) * one_minus_sinc(self._tp * d))

    def derivatives_at(self, anc, d):
        sd, cd = sin_cos_turns(d)
        sx, cx = _add_turns(anc[0], anc[1], sd, cd)
        return (2 * sx * sx, 2 * self._w * sx * cx, self._w2 * (cx * cx - sx * sx))

    def with_parameter(self, a):
        return ArnoldBiCritical(a, self.precision)

    def at_precision(self, prec: int):
        return ArnoldBiCritical(self.a, prec)


MONOTONE_GRID = 2**14


@lru_cache(maxsize=64)
def _monotone_scan(terms):
    """Scan the derivative of the perturbed lift on a ``2^14`` grid (it does not depend on ``a``)."""
    for i in range(1, MONOTONE_GRID):
        if i % (MONOTONE_GRID // 2) == 0:
            continue
        x = i / MONOTONE_GRID
        t = 4 * math.pi * x
        u, u1 = 1 - math.cos(t), 4 * math.pi * math.sin(t)
        d = u
        for k, c in terms:
            om = 2 * math.pi * k
            d += c * (2 * u * u1 * math.sin(om * x) + u * u * om * math.cos(om * x)) / (k * k)
        if d <= 0:
            raise NotADiffeomorphismError(f"perturbation destroys monotonicity: derivative {d:.3g} at x = {x}")
    return True


class PerturbedArnold(ArnoldBiCritical):
    """Arnold lift plus ``sum_k c_k (1 - cos 4 pi x)^2 sin(2 pi k x) / k^2``.

    The factor ``(1 - cos 4 pi x)^2`` vanishes to fourth order at both
    critical points, so criticality and critical points are unchanged.
    """

    family = "perturbed2"

    def __init__(self, a, coeffs, precision: int | None = None):
        self._coeff_src = list(coeffs)
        super().__init__(a, precision)

    def _setup(self):
        super()._setup()
        self.coeffs = [to_mpfr(c, self.precision) for c in self._coeff_src]
        self._terms = [(k + 1, c) for k, c in enumerate(self.coeffs) if c != 0]
        self._check_monotone()

    def _check_monotone(self):
        if self._terms:
            _monotone_scan(tuple((k, float(c)) for k, c in self._terms))

    def lift(self, x):
        u = 1 - gmpy2.cos(self._w * x)
        val = x + self.a - gmpy2.sin(self._w * x) * self._inv_w
        if self._terms:
            w = u * u
            tp = self._tp * x
            for k, c in self._terms:
                val += c * w * gmpy2.sin(k * tp) / (k * k)
        return val

    def iterate(self, x, k: int):
        lift = self.lift
        for _ in range(k):
            x = lift(x)
        return x

    def iterate_mod(self, x, k: int):
        return CircleMap.iterate_mod(self, x, k)

    def orbit(self, x, k: int):
        return CircleMap.orbit(self, x, k)

    def jet(self, x):
        w4 = self._w
        t = w4 * x
        s = gmpy2.sin(t)
        c = gmpy2.cos(t)
        f0 = x + self.a - s * self._inv_w
        u = 1 - c
        u1 = w4 * s
        u2 = self._w2 * c
        u3 = -self._w2 * w4 * s
        f1, f2, f3 = u, u1, u2
        if self._terms:
            w0 = u * u
            w1 = 2 * u * u1
            w2 = 2 * u1 * u1 + 2 * u * u2
            w3 = 6 * u1 * u2 + 2 * u * u3
            tp = self._tp
            for k, ck in self._terms:
                om = tp * k
                sk = gmpy2.sin(om * x)
                cs = gmpy2.cos(om * x)
                kk = k * k
                v0 = sk / kk
                v1 = om * cs / kk
                v2 = -om * om * sk / kk
                v3 = -om * om * om * cs / kk
                f0 += ck * (w0 * v0)
                f1 += ck * (w1 * v0 + w0 * v1)
                f2 += ck * (w2 * v0 + 2 * w1 * v1 + w0 * v2)
                f3 += ck * (w3 * v0 + 3 * w2 * v1 + 3 * w1 * v2 + w0 * v3)
        return (f0, f1, f2, f3)

    def anchor(self, u):
        return (sin_cos_turns(u), [(k, c, sin_cos_turns(k * u)) for k, c in self._terms])

    def lift_difference(self, anc, d):
        base, terms = anc
        out = ArnoldBiCritical.lift_difference(self, base, d)
        if not terms:
            return out
        su, cu = base
        sd, cd = sin_cos_turns(d)
        sh, ch = sin_cos_turns(d / 2)
        sx = su * cd + cu * sd
        u0 = 2 * su * su
        u1 = 2 * sx * sx
        # sin(2 pi x) - sin(2 pi u) = 2 cos(2 pi (u + d/2)) sin(pi d)
        ds = 2 * (cu * ch - su * sh) * sh
        du = 2 * ds * (sx + su)
        for k, c, (sk, ck) in terms:
            skd, ckd = sin_cos_turns(k * d)
            skh, ckh = sin_cos_turns(k * d / 2)
            v1 = sk * ckd + ck * skd
            dv = 2 * (ck * ckh - sk * skh) * skh
            out += c * (du * (u1 + u0) * v1 + u0 * u0 * dv) / (k * k)
        return out

    def derivatives_at(self, anc, d):
        base, terms = anc
        sd, cd = sin_cos_turns(d)
        sx, cx = _add_turns(base[0], base[1], sd, cd)
        w4 = self._w
        u = 2 * sx * sx
        u1 = 2 * w4 * sx * cx
        u2 = self._w2 * (cx * cx - sx * sx)
        u3 = -2 * self._w2 * w4 * sx * cx
        f1, f2, f3 = u, u1, u2
        if terms:
            w0 = u * u
            w1 = 2 * u * u1
            w2 = 2 * u1 * u1 + 2 * u * u2
            w3 = 6 * u1 * u2 + 2 * u * u3
            for k, ck, (sk, kc) in terms:
                skd, ckd = sin_cos_turns(k * d)
                sv, cv = _add_turns(sk, kc, skd, ckd)
                om = self._tp * k
                kk = k * k
                v0 = sv / kk
                v1 = om * cv / kk
                v2 = -om * om * sv / kk
                v3 = -om * om * om * cv / kk
                f1 += ck * (w1 * v0 + w0 * v1)
                f2 += ck * (w2 * v0 + 2 * w1 * v1 + w0 * v2)
                f3 += ck * (w3 * v0 + 3 * w2 * v1 + 3 * w1 * v2 + w0 * v3)
        return (f1, f2, f3)

    def spec(self):
        return {"family": self.family, "a": str(self.a), "coeffs": [str(c) for c in self.coeffs]}

    def with_parameter(self, a):
        return PerturbedArnold(a, self._coeff_src, self.precision)

    def at_precision(self, prec: int):
        return PerturbedArnold(self.a, self.coeffs, prec)


class RigidRotation(CircleMap):
    """Rotation by ``a`` with two marked points standing in for critical points."""

    family = "rotation"

    def __init__(self, a, marked=(0, Fraction(1, 2)), precision: int | None = None):
        self._marked_src = marked
        super().__init__(a, precision)

    def _setup(self):
        self._marks = tuple(to_mpfr(m, self.precision) for m in self._marked_src)

    @property
    def critical_points(self):
        return self._marks

    def lift(self, x):
        return x + self.a

    def iterate(self, x, k: int):
        return x + k * self.a

    def iterate_mod(self, x, k: int):
        y = x + k * self.a
        m = int(gmpy2.floor(y))
        return y - m, m

    def jet(self, x):
        return (x + self.a, mpfr(1), mpfr(0), mpfr(0))

    def inverse(self, y, tol=None, max_iter=None):
        return y - self.a

    def lift_difference(self, anc, d):
        return d

    def derivatives_at(self, anc, d):
        return (mpfr(1), mpfr(0), mpfr(0))

    def spec(self):
        return {"family": self.family, "a": str(self.a), "marked": [str(m) for m in self._marks]}

    def with_parameter(self, a):
        return RigidRotation(a, self._marked_src, self.precision)

    def at_precision(self, prec: int):
        return RigidRotation(self.a, self._marks, prec)


class TranslatedMap(CircleMap):
    """Conjugate of ``base`` by the translation ``x -> x + shift``."""

    def __init__(self, base: CircleMap, shift):
        self.base = base
        self.family = base.family
        self.criticalities = base.criticalities
        self.precision = base.precision
        with working_precision(self.precision):
            self.shift = to_mpfr(shift, self.precision)
            self.a = base.a

    @property
    def critical_points(self):
        return tuple(c + self.shift for c in self.base.critical_points)

    def lift(self, x):
        return self.base.lift(x - self.shift) + self.shift

    def jet(self, x):
        v, d1, d2, d3 = self.base.jet(x - self.shift)
        return (v + self.shift, d1, d2, d3)

    def anchor(self, u):
        return self.base.anchor(u - self.shift)

    def lift_difference(self, anc, d):
        return self.base.lift_difference(anc, d)

    def derivatives_at(self, anc, d):
        return self.base.derivatives_at(anc, d)

    def spec(self):
        out = dict(self.base.spec())
        out["translate"] = str(self.shift)
        return out

    def with_parameter(self, a):
        return TranslatedMap(self.base.with_parameter(a), self.shift)

    def at_precision(self, prec: int):
        return TranslatedMap(self.base.at_precision(prec), self.shift)


def arnold_bicritical(a, precision: int | None = None) -> ArnoldBiCritical:
    return ArnoldBiCritical(a, precision)


def perturbed_family(a, coeffs, precision: int | None = None) -> PerturbedArnold:
    return PerturbedArnold(a, coeffs, precision)


def map_from_spec(spec, precision: int | None = None) -> CircleMap:
    """Build a map from a dict (or JSON string) ``{"family", "a", "coeffs"}``."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"map spec is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("map spec needs a 'family' key")
    fam = spec["family"]
    a = spec.get("a", "0")
    try:
        if fam == "arnold2":
            f = ArnoldBiCritical(a, precision)
        elif fam == "perturbed2":
            f = PerturbedArnold(a, spec.get("coeffs", []), precision)
        elif fam == "rotation":
            f = RigidRotation(a, tuple(spec.get("marked", ["0", "0.5"])), precision)
        else:
            raise ConfigError(f"unknown map family {fam!r}")
    except (ValueError, TypeError, NotADiffeomorphismError) as exc:
        raise ConfigError(f"bad map parameter: {exc}") from exc
    if "translate" in spec:
        f = TranslatedMap(f, spec["translate"])
    return f


def family_from_spec(spec, precision: int | None = None):
    """Return ``a -> map`` for the family described by ``spec`` (``a`` ignored)."""
    template = map_from_spec(dict(spec, a="0") if isinstance(spec, dict) else spec, precision)
    return template.with_parameter


def schwarzian(jet) -> object:
    """Schwarzian derivative from a 3-jet; raises at a critical point."""
    _, d1, d2, d3 = jet.as_tuple() if isinstance(jet, IterateJet) else jet
    if d1 == 0:
        raise NotADiffeomorphismError("Schwarzian undefined where the derivative vanishes")
    r = d2 / d1
    return d3 / d1 - r * r * 3 / 2


def schwarzian_by_chain(f: CircleMap, x, k: int):
    """Schwarzian of ``f^k`` at ``x`` from the composition identity."""
    total = mpfr(0)
    dk = mpfr(1)
    y = x
    for _ in range(k):
        j = f.jet(y)
        total += schwarzian(j) * dk * dk
        dk *= j[1]
        y = j[0]
    return total


@dataclass
class SchwarzianAudit:
    samples: int
    max_relative_error: float
    tolerance: float
    max_schwarzian: float
    all_negative: bool

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def schwarzian_audit(f: CircleMap, samples: int = 100, max_depth: int = 6, seed: int = 0,
                     tol_bits: int = 16) -> SchwarzianAudit:
    """Compare direct Schwarzians of ``f^k`` with the chain-rule sum.

    Errors are scaled by ``max(1, |S|)`` since the Schwarzian is unbounded
    near critical points.
    """
    rng = random.Random(seed)
    worst = 0.0
    smax = None
    negative = True
    prec = f.precision
    with working_precision(prec):
        for _ in range(samples):
            k = rng.randint(1, max_depth)
            x = mpfr(rng.random())
            direct = schwarzian(f.iterate_jet(x, k))
            chain = schwarzian_by_chain(f, x, k)
            err = abs(direct - chain) / max(mpfr(1), abs(chain))
            worst = max(worst, float(err))
            smax = chain if smax is None else max(smax, chain)
            negative = negative and chain < 0
    return SchwarzianAudit(samples, worst, 2.0 ** (tol_bits - prec), float(smax), negative)


def criticality_estimate(f: CircleMap, crit: int, exps=range(8, 40, 2)) -> float:
    """Slope of ``log|F(c+h)-F(c)|`` against ``log h`` near a critical point."""
    import numpy as np

    c = f.critical_points[crit]
    xs, ys = [], []
    with working_precision(f.precision):
        fc = f.lift(c)
        for e in exps:
            h = mpfr(2) ** (-e)
            xs.append(float(gmpy2.log(h)))
            ys.append(float(gmpy2.log(abs(f.lift(c + h) - fc))))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def iterate_with_jet(f: CircleMap, x, k: int) -> IterateJet:
    """Value and first three derivatives of ``f^k`` at ``x`` by the chain rule."""
    if k < 1:
        raise ConfigError("iterate_with_jet needs k >= 1")
    with working_precision(f.precision):
        return f.iterate_jet(to_mpfr(x), k)
