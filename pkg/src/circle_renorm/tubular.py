"""Near-tangency regions of renormalized maps and the parabolic asymptotics there.

Everything here works on a *unit map*: a map ``R`` on ``[0, 1]`` with
``R(z) < z`` that comes with exact 3-jets.  For a commuting pair this is the
long branch rescaled so that its domain is ``[0, 1]``.  Where ``R`` is close
to the identity its graph has a tangency-like dip; in a chart centred at
the point of closest approach the map looks like ``x -> eps + x + x^2``.
Orbits cross that region in two regimes: far from the centre (funnel) they
behave like ``s -> s - s^2``, close to it (tunnel) like a discretized
Riccati flow with solution ``sqrt(eps) tan(sqrt(eps) i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .errors import PairError, PrecisionError
from .numerics import to_mpfr, uniform_nodes, working_precision
from .renorm import CommutingPair, chi, conjugate_affine

FUNNEL = "funnel"
TUNNEL = "tunnel"


# unit maps --------------------------------------------------------------------


class UnitMap:
    """Interface: ``value``, ``jet`` and the monotone pieces of ``[0, 1]``."""

    prec: int = 53

    def value(self, z):
        raise NotImplementedError

    def jet(self, z):
        raise NotImplementedError

    def pieces(self):
        """Intervals of ``[0, 1]`` on which the map is increasing."""
        return [(mpfr(0), mpfr(1))]


class PairUnitMap(UnitMap):
    """Long branch of a normalized pair on ``[0, 1]``: ``z -> eta(t z) / t`` with ``t = xi(0)``."""

    def __init__(self, pair: CommutingPair):
        self.pair = pair
        self.prec = pair.prec
        with working_precision(self.prec):
            self.t = pair.xi0
            self.branch = conjugate_affine(pair.eta, 1 / self.t)
            beta = pair.beta if pair.beta_branch == "eta" else None
            self.critical = beta / self.t if beta is not None and 0 < beta < self.t else None

    def value(self, z):
        return self.branch._value(z)

    def jet(self, z):
        return self.branch._jet(z)

    def pieces(self):
        if self.critical is None:
            return [(mpfr(0), mpfr(1))]
        return [(mpfr(0), self.critical), (self.critical, mpfr(1))]


class PolynomialMap(UnitMap):
    """``sum_k c_k z^k`` as a unit map; coefficients are taken exactly."""

    def __init__(self, coeffs, prec: int = 128, pieces=None):
        self.prec = prec
        with working_precision(prec):
            self.coeffs = [to_mpfr(c) for c in coeffs]
            self._pieces = [(to_mpfr(a), to_mpfr(b)) for a, b in pieces] if pieces else None

    def value(self, z):
        out = mpfr(0)
        for c in reversed(self.coeffs):
            out = out * z + c
        return out

    def jet(self, z):
        v, d1, d2, d3 = mpfr(0), mpfr(0), mpfr(0), mpfr(0)
        for c in reversed(self.coeffs):
            d3 = d3 * z + 3 * d2
            d2 = d2 * z + 2 * d1
            d1 = d1 * z + v
            v = v * z + c
        return (v, d1, d2, d3)

    def pieces(self):
        return self._pieces or [(mpfr(0), mpfr(1))]


def unit_map(obj) -> UnitMap:
    return PairUnitMap(obj) if isinstance(obj, CommutingPair) else obj


def inverse_on(umap: UnitMap, y, lo, hi, tol=None):
    """Solve ``R(z) = y`` on an increasing piece ``[lo, hi]``; ``None`` if ``y`` is outside its image."""
    prec = gmpy2.get_context().precision
    tol = mpfr(2) ** (-(3 * prec) // 4) if tol is None else tol
    vlo, vhi = umap.value(lo), umap.value(hi)
    if not vlo <= y <= vhi:
        return None
    z = lo + (hi - lo) * (y - vlo) / (vhi - vlo) if vhi > vlo else lo
    for _ in range(4 * prec):
        v, d1, _, _ = umap.jet(z)
        if v > y:
            hi = z
        else:
            lo = z
        if hi - lo <= tol:
            break
        nz = z - (v - y) / d1 if d1 > 0 else None
        if nz is None or not lo < nz < hi:
            nz = (lo + hi) / 2
        if abs(nz - z) <= tol * mpfr(2) ** -8:
            z = nz
            break
        z = nz
    return z


# tubular sets and centers ----------------------------------------------------


@dataclass
class TubularSet:
    """Points of ``[0, 1]`` where ``z - R(z) < 1/L`` and the closest approaches inside.

    ``centers`` hold ``(z, DR(z), D^2R(z))`` with ``DR(z) = 1`` and ``D^2R(z) < 0``.
    """

    level: int
    L: int
    components: list
    centers: list
    min_gap: object
    mesh: int

    @property
    def empty(self) -> bool:
        return not self.components


def _bisect_level(g, a, b, level, steps):
    ga = g(a) - level
    for _ in range(steps):
        m = (a + b) / 2
        gm = g(m) - level
        if (gm < 0) == (ga < 0):
            a, ga = m, gm
        else:
            b = m
    return (a + b) / 2


def _center_in(umap: UnitMap, lo, hi, prec: int):
    """Point of ``(lo, hi)`` with ``DR = 1``: safeguarded Newton on ``DR - 1``."""
    a, b = lo, hi
    ha = umap.jet(a)[1] - 1
    hb = umap.jet(b)[1] - 1
    if ha == 0:
        return a
    if hb == 0:
        return b
    if (ha < 0) == (hb < 0):
        return None
    z = (a + b) / 2
    best, best_res = z, None
    tol = mpfr(2) ** (-prec)
    for _ in range(4 * prec):
        _, d1, d2, _ = umap.jet(z)
        h = d1 - 1
        res = abs(h)
        if best_res is None or res < best_res:
            best, best_res = z, res
        if h == 0:
            break
        if (h < 0) == (ha < 0):
            a, ha = z, h
        else:
            b = z
        nz = z - h / d2 if d2 != 0 else None
        if nz is None or not a < nz < b:
            nz = (a + b) / 2
        if abs(nz - z) <= tol * (1 + abs(z)) or b - a <= tol:
            z = nz
            _, d1, _, _ = umap.jet(z)
            if abs(d1 - 1) < best_res:
                best = z
            break
        z = nz
    return best


def default_L(obj) -> int:
    """``L`` tied to the combinatorics: half the return count of the pair, at least 1."""
    if isinstance(obj, CommutingPair):
        return max(1, chi(obj) // 2)
    return 1


def tubular_set(obj, L: int | None = None, mesh: int = 2048, level: int | None = None) -> TubularSet:
    """Components of ``{z : z - R(z) < 1/L}`` and their centers.

    Components are located by sign changes of ``z - R(z) - 1/L`` on a
    uniform mesh and refined by bisection.  A center is searched by
    safeguarded Newton on ``DR = 1`` inside each component, on each side of
    the free critical point; only points with ``D^2R < 0`` are kept.
    """
    umap = unit_map(obj)
    if L is None:
        L = default_L(obj)
    if L < 1:
        raise ValueError("L must be a positive integer")
    level = obj.level if level is None and isinstance(obj, CommutingPair) else (level or 0)
    prec = umap.prec
    with working_precision(prec):
        thr = mpfr(1) / L

        def gap(z):
            return z - umap.value(z)

        zs = uniform_nodes(mpfr(0), mpfr(1), mesh + 1)
        gs = [gap(z) for z in zs]
        min_gap = min(gs)
        comps = []
        start = None
        for i, (z, g) in enumerate(zip(zs, gs)):
            inside = g < thr
            if inside and start is None:
                start = zs[0] if i == 0 else _bisect_level(gap, zs[i - 1], z, thr, prec)
            elif not inside and start is not None:
                comps.append((start, _bisect_level(gap, zs[i - 1], z, thr, prec)))
                start = None
        if start is not None:
            comps.append((start, zs[-1]))
        centers = []
        for lo, hi in comps:
            for plo, phi in umap.pieces():
                a, b = max(lo, plo), min(hi, phi)
                if not a < b:
                    continue
                # bracket the closest approach on the mesh before Newton
                sub = uniform_nodes(a, b, 65)
                k = min(range(len(sub)), key=lambda i: gap(sub[i]))
                brk_lo = sub[max(k - 1, 0)]
                brk_hi = sub[min(k + 1, len(sub) - 1)]
                z = _center_in(umap, brk_lo, brk_hi, prec)
                if z is None:
                    continue
                _, d1, d2, _ = umap.jet(z)
                if d2 < 0:
                    centers.append((z, d1, d2))
    return TubularSet(level, L, comps, centers, min_gap, mesh)


# tubular coordinates ---------------------------------------------------------


@dataclass
class TubularChart:
    """``F = phi o R o phi^-1`` with ``phi(x) = D^2R(z) (x - z) / 2``.

    ``eps = F(0)`` is the minimum of ``F(x) - x``; in this frame it is
    positive because ``R(z) < z`` and ``D^2R(z) < 0``.
    """

    center: object
    k: object
    eps: object
    umap: UnitMap
    piece: tuple
    residuals: dict = field(default_factory=dict)

    @property
    def prec(self) -> int:
        return self.umap.prec

    def phi(self, x):
        return self.k * (x - self.center)

    def phi_inv(self, y):
        return y / self.k + self.center

    @property
    def domain(self):
        """``phi`` of the monotone piece containing the center, increasing."""
        a, b = self.phi(self.piece[1]), self.phi(self.piece[0])
        return (a, b)

    def forward(self, x):
        return self.phi(self.umap.value(self.phi_inv(x)))

    def backward(self, y):
        with working_precision(self.prec):
            z = inverse_on(self.umap, self.phi_inv(y), self.piece[0], self.piece[1])
        return None if z is None else self.phi(z)

    def jet(self, x):
        v, d1, d2, d3 = self.umap.jet(self.phi_inv(x))
        k = self.k
        return (k * (v - self.center), d1, d2 / k, d3 / (k * k))


def tubular_chart(obj, center=None, tset: TubularSet | None = None) -> TubularChart:
    """Chart at a center of the tubular set (the first one unless ``center`` is given)."""
    umap = unit_map(obj)
    prec = umap.prec
    with working_precision(prec):
        if center is None:
            tset = tset or tubular_set(obj)
            if not tset.centers:
                raise PairError("tubular set has no center")
            center = tset.centers[0][0]
        z = to_mpfr(center)
        v, d1, d2, _ = umap.jet(z)
        if d2 >= 0:
            raise PairError("second derivative at the center is not negative")
        k = d2 / 2
        piece = next(((a, b) for a, b in umap.pieces() if a <= z <= b), (mpfr(0), mpfr(1)))
        chart = TubularChart(z, k, k * (v - z), umap, piece)
        _, f1, f2, _ = chart.jet(mpfr(0))
        chart.residuals = {"d1": abs(f1 - 1), "d2": abs(f2 - 2), "value": abs(chart.jet(mpfr(0))[0] - chart.eps)}
    return chart


@dataclass
class ModelChart:
    """Chart given by the model ``x -> eps + x + x^2 + c3 x^3`` directly.

    ``domain`` must be an interval on which the model is increasing; for
    ``c3 = 0`` that means staying to the right of ``-1/2``.
    """

    eps: object
    c3: object = 0
    domain: tuple = (-0.5, 0.5)
    prec: int = 128

    def forward(self, x):
        return self.eps + x + x * x + self.c3 * x * x * x

    def backward(self, y):
        # the model is increasing on its domain; solve by safeguarded Newton
        lo, hi = (to_mpfr(self.domain[0]), to_mpfr(self.domain[1]))
        if not self.forward(lo) <= y <= self.forward(hi):
            return None
        x = y - self.eps
        tol = mpfr(2) ** (-(3 * self.prec) // 4)
        for _ in range(4 * self.prec):
            v = self.forward(x) - y
            if v > 0:
                hi = x
            else:
                lo = x
            d = 1 + 2 * x + 3 * self.c3 * x * x
            nx = x - v / d if d > 0 else (lo + hi) / 2
            if not lo <= nx <= hi:
                nx = (lo + hi) / 2
            if abs(nx - x) <= tol:
                return nx
            x = nx
        return x


# parabolic traces ------------------------------------------------------------


@dataclass
class ParabolicTrace:
    """Orbit in chart coordinates with regime labels and landmarks.

    Forward traces: ``i_c`` is the first index with ``0 < s_i <= |eps|``;
    ``i_r`` is the last index of the entry funnel and ``i_l`` the first
    index of the exit funnel.  Backward traces use the same definitions on
    the backward orbit (the hatted landmarks).
    """

    s: list
    regimes: list
    direction: str
    eps: object
    threshold: object
    alpha: float
    i_c: int | None = None
    i_r: int | None = None
    i_l: int | None = None
    escaped: bool = False

    def funnel_census(self) -> int:
        return sum(1 for r in self.regimes if r == FUNNEL)

    def entry_funnel(self):
        """Values of the first funnel run, signed so they are positive."""
        run = []
        for v, r in zip(self.s, self.regimes):
            if r != FUNNEL:
                break
            run.append(v)
        if run and run[0] < 0:
            run = [-v for v in run]
        return run

    def tunnel(self):
        return [v for v, r in zip(self.s, self.regimes) if r == TUNNEL]


def trace_parabolic(chart, start=None, direction: str = "forward", max_iter: int = 10**6,
                    C0=1, alpha: float = 1.0) -> ParabolicTrace:
    """Iterate ``F`` (or ``F^-1``) from ``start`` until the orbit leaves the chart domain.

    A point is in the tunnel when ``|x|^(2+alpha) <= C0 |eps|`` and in the
    funnel otherwise.  ``start`` defaults to the chart image of the top of
    the monotone piece forward (``1``, or the free critical point for the
    left piece) and of its bottom backward.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    prec = chart.prec
    with working_precision(prec):
        eps = to_mpfr(chart.eps)
        lo, hi = (to_mpfr(v) for v in chart.domain)
        if start is None:
            if isinstance(chart, TubularChart):
                start = chart.phi(chart.piece[1] if direction == "forward" else chart.piece[0])
            else:
                start = lo if direction == "forward" else hi
        x = to_mpfr(start)
        aeps = abs(eps)
        thr = to_mpfr(C0) * aeps
        step = chart.forward if direction == "forward" else chart.backward
        s, regimes = [], []
        escaped = False
        for _ in range(max_iter + 1):
            s.append(x)
            regimes.append(TUNNEL if abs(x) ** (2 + alpha) <= thr else FUNNEL)
            if len(s) > max_iter:
                break
            y = step(x)
            if y is None or not lo <= y <= hi:
                escaped = True
                break
            x = y
        i_c = next((i for i, v in enumerate(s) if 0 < v <= aeps), None)
        first_tunnel = next((i for i, r in enumerate(regimes) if r == TUNNEL), None)
        i_r = i_l = None
        if first_tunnel is not None:
            i_r = first_tunnel - 1 if first_tunnel > 0 else None
            i_l = next((i for i in range(first_tunnel, len(s)) if regimes[i] == FUNNEL), None)
    return ParabolicTrace(s, regimes, direction, eps, thr, alpha, i_c, i_r, i_l, escaped)


# asymptotic laws ---------------------------------------------------------------


@dataclass
class FunnelReport:
    """``D1 = max |s_i - 1/(i + 1/s_0)| (i + 1/s_0)^(1+alpha)`` and the consecutive-gap defects."""

    D1: float
    delta_max: float
    residuals: list
    deltas: list
    count: int
    alpha: float


def funnel_bound_check(trace, alpha: float = 1.0, d1: float = 1.0, min_points: int = 10) -> FunnelReport:
    """Compare a funnel sequence with ``1/(i + 1/s_0)``.

    ``trace`` is a :class:`ParabolicTrace` (its entry funnel is used) or a
    plain sequence ``s_0, s_1, ...`` of positive values.
    """
    seq = trace.entry_funnel() if isinstance(trace, ParabolicTrace) else list(trace)
    if len(seq) < min_points:
        raise PrecisionError(f"funnel has {len(seq)} points, need {min_points}")
    s0 = seq[0]
    if not 0 < s0 <= d1:
        raise ValueError("funnel start must lie in (0, d1]")
    inv0 = 1 / s0
    res, deltas = [], []
    for i, v in enumerate(seq):
        base = i + inv0
        res.append(abs(v - 1 / base) * base ** (1 + alpha))
        if i + 1 < len(seq):
            deltas.append((v - seq[i + 1]) * base * base - 1)
    return FunnelReport(float(max(res)), float(max(abs(d) for d in deltas)),
                        res, deltas, len(seq), alpha)


def tunnel_horizon(eps, alpha: float = 1.0, C3: float = 1.0) -> float:
    """``N = eps^(-1/2) atan(C3 eps^(-alpha / (2 (2 + alpha))))``."""
    e = float(eps)
    return e ** -0.5 * math.atan(C3 * e ** (-alpha / (2 * (2 + alpha))))


def tunnel_law(eps, i, s0=0):
    """``sqrt(eps) tan(sqrt(eps) i + atan(s0 / sqrt(eps)))``."""
    r = gmpy2.sqrt(to_mpfr(eps))
    return r * gmpy2.tan(r * i + gmpy2.atan(to_mpfr(s0) / r))


@dataclass
class TunnelReport:
    horizon: float
    checked: int
    excluded: int
    max_abs: float
    max_rel: float
    delta_max: float
    residuals: list
    deltas: list


def tunnel_bound_check(trace, eps, alpha: float = 1.0, C3: float = 1.0, fraction: float = 1.0) -> TunnelReport:
    """Compare a tunnel sequence with the tan law for ``i <= fraction * N``.

    The consecutive-gap defect is ``delta_i = (s_{i+1} - s_i) cos^2(theta_i) / eps - 1``
    with ``theta_i`` the phase of the tan law at step ``i`` (``sqrt(eps) i``
    when ``s_0 = 0``).  Indices past the horizon are excluded and counted.
    """
    seq = trace.tunnel() if isinstance(trace, ParabolicTrace) else list(trace)
    if not seq:
        raise PrecisionError("empty tunnel sequence")
    horizon = tunnel_horizon(eps, alpha, C3)
    limit = fraction * horizon
    e = to_mpfr(eps)
    r = gmpy2.sqrt(e)
    phase0 = gmpy2.atan(seq[0] / r)
    res, deltas = [], []
    max_abs = max_rel = 0.0
    checked = 0
    for i, v in enumerate(seq):
        if i > limit:
            break
        checked += 1
        law = r * gmpy2.tan(r * i + phase0)
        err = abs(v - law)
        res.append(err)
        max_abs = max(max_abs, float(err))
        if law != 0:
            max_rel = max(max_rel, float(err / abs(law)))
        if i + 1 < len(seq) and i + 1 <= limit:
            c = gmpy2.cos(r * i + phase0)
            deltas.append((seq[i + 1] - v) * c * c / e - 1)
    dmax = float(max((abs(d) for d in deltas), default=0))
    return TunnelReport(horizon, checked, len(seq) - checked, max_abs, max_rel, dmax, res, deltas)


def crossing_count(step, eps, A=0.5) -> int:
    """Number of steps for the orbit of ``step`` to go from ``-A`` to above ``+A``."""
    x = -to_mpfr(A)
    n = 0
    a = to_mpfr(A)
    while x <= a:
        x = step(x)
        n += 1
        if n > 10**8:
            raise PrecisionError("crossing did not finish")
    return n


def riccati_step(eps):
    e = to_mpfr(eps)
    return lambda s: e + s + s * s


# parameter relations -----------------------------------------------------------


@dataclass
class ParameterRelations:
    level: int
    r: int
    eps_f: float
    eps_g: float
    crossing_ratio: float
    eps_ratio: float
    landmark_gaps: dict
    predicted_scale: float
    landmarks_f: dict
    landmarks_g: dict


def _landmarks(chart, alpha, C0):
    fw = trace_parabolic(chart, direction="forward", alpha=alpha, C0=C0)
    bw = trace_parabolic(chart, direction="backward", alpha=alpha, C0=C0)
    return {"c": fw.i_c, "r": fw.i_r, "l": fw.i_l, "c_hat": bw.i_c, "r_hat": bw.i_r, "l_hat": bw.i_l}


def parameter_relations(pair_f: CommutingPair, pair_g: CommutingPair, r: int,
                        threshold: int = 25, alpha: float = 1.0, C0=1) -> ParameterRelations:
    """Measured tubular parameters of two corresponding pairs.

    Reports ``2 r eps^(1/2) / pi`` (close to 1 for long tunnels), the ratio
    of the chart offsets of ``f`` and ``g``, and the landmark gaps, with the
    predicted scale ``eps^((alpha - 1)/2)`` for comparison.
    """
    if r < threshold:
        raise PairError(f"return count {r} below threshold {threshold}")
    cf = tubular_chart(pair_f)
    cg = tubular_chart(pair_g)
    lf = _landmarks(cf, alpha, C0)
    lg = _landmarks(cg, alpha, C0)
    gaps = {k: (abs(lf[k] - lg[k]) if lf[k] is not None and lg[k] is not None else None) for k in lf}
    ef, eg = float(cf.eps), float(cg.eps)
    return ParameterRelations(pair_f.level, r, ef, eg, 2 * r * math.sqrt(ef) / math.pi, eg / ef, gaps,
                              ef ** ((alpha - 1) / 2), lf, lg)
