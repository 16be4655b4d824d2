"""Dynamical partitions built from critical orbits.

Endpoints are symbolic: ``Endpoint(orbit, index)`` stands for
``f^index(c_orbit)``.  Their cyclic order is decided exactly, from a
rational rotation number sharing the measured partial quotients (and, for
the second critical orbit, a rational offset placed in the right cell of
the first orbit).  Numeric positions are cached alongside and checked
against the exact order.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from .errors import NotADiffeomorphismError, PrecisionError
from .numerics import (
    AdaptiveReal,
    Arc,
    CirclePoint,
    arc_length,
    chebyshev_nodes,
    frac,
    to_mpfr,
    working_precision,
)
from .rotation import partial_quotients_by_returns

log = logging.getLogger(__name__)

C0, C1 = 0, 1
TWO_BRIDGES_MIN_QUOTIENT = 23


@dataclass(frozen=True, order=True)
class Endpoint:
    orbit: int
    index: int

    def shift(self, j: int) -> "Endpoint":
        return Endpoint(self.orbit, self.index + j)

    def __str__(self):
        return f"f^{self.index}(c{self.orbit})" if self.orbit < 2 else f"f^{self.index}(x{self.orbit})"


def _frac(x: Fraction) -> Fraction:
    return x - math.floor(x)


class CircleDynamics:
    """Cached orbits and exact combinatorics of a bi-critical map.

    ``depth`` is the number of partial quotients measured from the closest
    returns of ``c0``; the exact order is valid for index spans below
    ``q_{depth-1} + q_depth``.
    """

    def __init__(self, f, depth: int, budget=None, guard_bits: int | None = None):
        self.f = f
        self.prec = f.precision
        self.depth = depth
        res = partial_quotients_by_returns(f, depth, crit=0, budget=budget)
        self.quotients = list(res.quotients)
        self.table = res.table
        if guard_bits is None:
            # frames at depth are |x_depth| wide and orbit errors add up over q steps
            smallest = abs(res.displacements[-1])
            guard_bits = 24 + math.ceil(-math.log2(float(smallest))) if smallest else 64
            guard_bits += math.ceil(math.log2(self.table.q[-1] + 1))
        self.guard_bits = max(0, int(guard_bits))
        self.orbit_prec = self.prec + self.guard_bits
        self._f_orbit = f.at_precision(self.orbit_prec) if self.guard_bits else f
        # surrogate [a_0, ..., a_{depth-1}, 2]
        qd, qd1 = self.table.q[depth], self.table.q[depth - 1]
        pd, pd1 = self.table.p[depth], self.table.p[depth - 1]
        self.rho = Fraction(2 * pd + pd1, 2 * qd + qd1)
        self.span = qd + qd1
        self._shift = self.span // 2
        with working_precision(self.prec):
            self._fwd = {o: [self._split(mpfr(c, self.orbit_prec))]
                         for o, c in enumerate(f.critical_points)}
            self._bwd = {o: [c] for o, c in enumerate(f.critical_points)}
            self.c0 = f.critical_points[0]
        self._delta = None
        self._extra = {}
        self._anchors = {}

    @staticmethod
    def _split(x):
        m = int(gmpy2.floor(x))
        return (x - m, m)

    # orbit values -----------------------------------------------------
    def q(self, n: int) -> int:
        return self.table.qn(n)

    def p(self, n: int) -> int:
        return self.table.pn(n)

    def add_orbit(self, x) -> int:
        """Register an extra base point; returns its orbit label (>= 2)."""
        label = 2 + len(self._extra)
        with working_precision(self.prec):
            x = to_mpfr(x)
        self._extra[label] = x
        self._fwd[label] = [self._split(mpfr(x, self.orbit_prec))]
        self._bwd[label] = [x]
        return label

    def value(self, e: Endpoint):
        """Lift value of ``f^index(c_orbit)`` starting from the base lift value."""
        o, i = e.orbit, e.index
        if i >= 0:
            y, m = self.reduced(e)
            with working_precision(self.prec):
                return mpfr(y + m)
        seq = self._bwd[o]
        if -i >= len(seq):
            with working_precision(self.prec):
                x = seq[-1]
                inv = self.f.inverse
                for _ in range(-i - len(seq) + 1):
                    x = inv(x)
                    seq.append(x)
        return seq[-i]

    def reduced(self, e: Endpoint):
        """Forward orbit point as ``(y, m)`` with ``y`` in [0, 1) and lift value ``y + m``."""
        seq = self._fwd[e.orbit]
        i = e.index
        if i >= len(seq):
            step = self._f_orbit.iterate_mod
            with working_precision(self.orbit_prec):
                y, m = seq[-1]
                for _ in range(i - len(seq) + 1):
                    y, k = step(y, 1)
                    m += k
                    seq.append((y, m))
        return seq[i]

    def anchors(self, orbit: int, count: int):
        """Per-point data of ``f^j(c_orbit)``, ``j < count``, for anchored evaluation."""
        seq = self._anchors.setdefault(orbit, [])
        if len(seq) < count:
            self.reduced(Endpoint(orbit, count))
            with working_precision(self.prec):
                fwd = self._fwd[orbit]
                seq.extend(self.f.anchor(mpfr(fwd[j][0])) for j in range(len(seq), count))
        return seq

    def position(self, e: Endpoint):
        """Circle position measured from ``c0``, in [0, 1)."""
        with working_precision(self.prec):
            return frac(self.value(e) - self.c0)

    def displacement(self, crit: int, n: int):
        """``F^{q_n}(c) - c - p_n``; sign ``(-1)^n``."""
        with working_precision(self.prec):
            y1, m1 = self.reduced(Endpoint(crit, self.q(n)))
            y0, m0 = self.reduced(Endpoint(crit, 0))
            with working_precision(self.orbit_prec):
                d = (y1 - y0) + (m1 - m0 - self.p(n))
            return mpfr(d)

    # exact order ------------------------------------------------------
    @property
    def delta(self) -> Fraction:
        if self._delta is None:
            self._delta = self._locate_second_orbit()
        return self._delta

    def _locate_second_orbit(self) -> Fraction:
        n, k = self.span, self._shift
        target = self.position(Endpoint(C1, k))
        pos = sorted((self.position(Endpoint(C0, i)), i) for i in range(n))
        vals = [p for p, _ in pos]
        j = bisect.bisect_left(vals, target)
        gap = min(abs(target - vals[(j - 1) % n]), abs(vals[j % n] - target))
        if gap <= mpfr(2) ** (32 - self.prec):
            raise PrecisionError("second critical orbit lands on the first within precision")
        i_left = pos[(j - 1) % n][1]
        i_right = pos[j % n][1]
        a = _frac((i_left - k) * self.rho)
        b = _frac((i_right - k) * self.rho)
        width = _frac(b - a)
        return _frac(a + width / 2)

    def key(self, e: Endpoint) -> Fraction:
        if e.orbit == C0 or e.orbit >= 2:
            return _frac(e.index * self.rho)
        return _frac(e.index * self.rho + self.delta)

    def check_span(self, endpoints):
        """Raise if the exact order is not guaranteed for this endpoint set."""
        by_orbit = {}
        for e in endpoints:
            lo, hi = by_orbit.get(e.orbit, (e.index, e.index))
            by_orbit[e.orbit] = (min(lo, e.index), max(hi, e.index))
        for lo, hi in by_orbit.values():
            if hi - lo >= self.span:
                raise PrecisionError(f"index span {hi - lo} exceeds exact-order range {self.span}")
        if C0 in by_orbit and C1 in by_orbit:
            (i0, i1), (j0, j1) = by_orbit[C0], by_orbit[C1]
            if i0 - j1 < -self._shift or i1 - j0 >= self.span - self._shift:
                raise PrecisionError("mixed index span exceeds exact-order range")

    def line_coordinate(self, e: Endpoint, n: int) -> Fraction:
        """Exact signed coordinate from ``c0``, oriented so that ``I_n`` is ``[0, |I_n|]``.

        Points of ``I_n`` get coordinates in ``[0, |I_n|]``; everything else
        is placed on the negative side.
        """
        k = self.key(e)
        end = self.key(Endpoint(C0, self.q(n)))
        if n % 2 == 0:
            return k if k <= end else k - 1
        if k == 0:
            return Fraction(0)
        return 1 - k if k >= end else -k


# partitions ---------------------------------------------------------------


@dataclass
class DynamicalPartition:
    """Cyclically ordered endpoints, starting from the base point."""

    level: int
    dynamics: CircleDynamics
    endpoints: tuple
    labels: tuple = ()
    kind: str = "classical"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dynamics.check_span(self.endpoints)
        self.origin = self.endpoints[0]
        k0 = self.dynamics.key(self.origin)
        self._keys = [_frac(self.dynamics.key(e) - k0) for e in self.endpoints]

    def _relative_key(self, e: Endpoint) -> Fraction:
        return _frac(self.dynamics.key(e) - self.dynamics.key(self.origin))

    @property
    def endpoint_set(self) -> frozenset:
        return frozenset(self.endpoints)

    @property
    def atom_count(self) -> int:
        return len(self.endpoints)

    def positions(self):
        """Numeric circle positions measured from the first endpoint."""
        dyn = self.dynamics
        with working_precision(dyn.prec):
            v0 = dyn.value(self.origin)
            return [frac(dyn.value(e) - v0) for e in self.endpoints]

    def position_of(self, e: Endpoint):
        dyn = self.dynamics
        with working_precision(dyn.prec):
            return frac(dyn.value(e) - dyn.value(self.origin))

    def atoms(self):
        """Consecutive endpoint pairs ``(left, right)`` in positive orientation."""
        eps = self.endpoints
        return [(eps[k], eps[(k + 1) % len(eps)]) for k in range(len(eps))]

    def atom_lengths(self):
        pos = self.positions()
        m = len(pos)
        with working_precision(self.dynamics.prec):
            return [frac(pos[(k + 1) % m] - pos[k]) if m > 1 else mpfr(1) for k in range(m)]

    def atom_arcs(self):
        prec = self.dynamics.prec
        pts = [CirclePoint(AdaptiveReal(p, prec)) for p in self.positions()]
        return [Arc(pts[k], pts[(k + 1) % len(pts)]) for k in range(len(pts))]

    def coverage_defect(self):
        """``|sum of atom lengths - 1|``; zero up to rounding iff orders agree."""
        with working_precision(self.dynamics.prec):
            total = mpfr(0)
            for length in self.atom_lengths():
                total += length
            return abs(total - 1)

    def numeric_order_consistent(self) -> bool:
        pos = self.positions()
        return all(pos[k] < pos[k + 1] for k in range(len(pos) - 1))

    def atom_index_of_key(self, key: Fraction) -> int:
        """Index of the atom whose closure contains the exact key."""
        return (bisect.bisect_right(self._keys, key) - 1) % len(self._keys)

    def atom_containing(self, e: Endpoint) -> int:
        return self.atom_index_of_key(self._relative_key(e))

    def atom_index_of_point(self, x) -> int:
        with working_precision(self.dynamics.prec):
            p = frac(to_mpfr(x) - self.dynamics.value(self.origin))
        pos = self.positions()
        return (bisect.bisect_right(pos, p) - 1) % len(pos)

    def refines(self, other: "DynamicalPartition") -> bool:
        return other.endpoint_set <= self.endpoint_set


def _sorted_endpoints(dyn: CircleDynamics, points, base: Endpoint):
    pts = sorted(set(points), key=dyn.key)
    start = pts.index(base)
    return tuple(pts[start:] + pts[:start])


def classical_partition(dyn: CircleDynamics, n: int, base=C0) -> DynamicalPartition:
    """Endpoints ``f^i(x)`` for ``0 <= i < q_n + q_{n+1}``.

    ``base`` is a critical index (0 or 1) or a numeric lift value.
    """
    if not isinstance(base, int):
        base = dyn.add_orbit(base)
    qn, qn1 = dyn.q(n), dyn.q(n + 1)
    pts = [Endpoint(base, i) for i in range(qn + qn1)]
    eps = _sorted_endpoints(dyn, pts, Endpoint(base, 0))
    labels = []
    for k in range(len(eps)):
        a, b = eps[k], eps[(k + 1) % len(eps)]
        d = abs(b.index - a.index)
        i = min(a.index, b.index)
        if d == qn and len(eps) > 1:
            labels.append(f"f^{i}(I_{n})")
        elif d == qn1:
            labels.append(f"f^{i}(I_{n + 1})")
        else:
            labels.append("?")
    return DynamicalPartition(n, dyn, eps, tuple(labels), "classical", {"base": base})


@dataclass(frozen=True)
class FreeCriticalPoint:
    """Pre-image in ``J_n`` of the other critical point along its orbit."""

    level: int
    endpoint: Endpoint
    steps: int
    in_short: bool
    value: object


def free_critical_point(dyn: CircleDynamics, n: int) -> FreeCriticalPoint:
    """Locate ``c1`` in an atom ``f^j(I)`` of ``P_n(c0)`` and pull it back ``j`` steps."""
    part = classical_partition(dyn, n)
    idx = part.atom_containing(Endpoint(C1, 0))
    label = part.labels[idx]
    a, b = part.atoms()[idx]
    j = min(a.index, b.index)
    in_short = label.endswith(f"I_{n + 1})")
    e = Endpoint(C1, -j)
    return FreeCriticalPoint(n, e, j, in_short, dyn.value(e))


@dataclass
class BridgeData:
    level: int
    slot: int
    right: int
    left: int
    right_case: str
    left_case: str
    steps: int


def bridge_counts(dyn: CircleDynamics, n: int):
    """Slot and bridge lengths at level ``n``, or ``None`` if not a two-bridges level."""
    fc = free_critical_point(dyn, n)
    if fc.in_short:
        return None
    a = dyn.quotients[n + 1] if n + 1 < len(dyn.quotients) else None
    if a is None or a < TWO_BRIDGES_MIN_QUOTIENT:
        return None
    qn, qn1 = dyn.q(n), dyn.q(n + 1)
    lam = lambda e: dyn.line_coordinate(e, n)
    e_t = lambda t: lam(Endpoint(C0, qn + t * qn1))
    g_i = lambda i: lam(Endpoint(C1, -fc.steps - i * qn1))
    x = g_i(0)
    if x <= e_t(a):
        return None
    slot = next((t for t in range(1, a + 1) if e_t(t) < x < e_t(t - 1)), None)
    if slot is None or not (11 <= slot <= a - 10):
        return None
    r = next(j for j in range(1, a + 1) if g_i(j) >= e_t(j + 1))
    left = next(j for j in range(1, a + 1) if g_i(-j - 1) <= e_t(a - j - 1))
    right_case = "A" if g_i(r - 1) < e_t(r + 1) else "B"
    left_case = "A" if g_i(-left) > e_t(a - left - 1) else "B"
    return BridgeData(n, slot, r, left, right_case, left_case, fc.steps)


def is_two_bridges_level(dyn: CircleDynamics, n: int) -> bool:
    return bridge_counts(dyn, n) is not None


def _two_bridges_step(dyn, n, bd: BridgeData) -> tuple:
    qn, qn1 = dyn.q(n), dyn.q(n + 1)
    a = dyn.quotients[n + 1]
    e = lambda t: Endpoint(C0, qn + t * qn1)
    g = lambda i: Endpoint(C1, -bd.steps - i * qn1)
    local = [Endpoint(C0, 0)]
    local += [e(t) for t in range(0, bd.right + 1)]
    local += [e(t) for t in range(a - bd.left, a + 1)]
    g_hi = bd.right - 1 if bd.right_case == "A" else bd.right - 2
    g_lo = -bd.left if bd.left_case == "A" else -bd.left + 1
    local += [g(i) for i in range(g_lo, g_hi + 1)]
    pts = set()
    for v in local:
        for j in range(qn1):
            pts.add(v.shift(j))
    for i in range(qn):
        pts.add(Endpoint(C0, i))
        pts.add(Endpoint(C0, i + qn1))
    return tuple(pts)


def _surgery(dyn, n_next: int, previous: DynamicalPartition, precision: int):
    base = classical_partition(dyn, n_next)
    points = set(base.endpoints)
    protected = set(previous.endpoints)
    log_lines = []
    pos = base.positions()
    m = len(pos)
    with working_precision(precision):
        for v in previous.endpoints:
            if v in points:
                continue
            idx = base.atom_containing(v)
            left, right = base.atoms()[idx]
            p = base.position_of(v)
            dl = frac(p - pos[idx])
            dr = frac(pos[(idx + 1) % m] - p)
            width = dl + dr
            if abs(dl - dr) <= mpfr(2) ** (-(precision // 2)) * width:
                points.add(v)
                log_lines.append(f"add {v} (midpoint)")
                continue
            w = left if dl < dr else right
            points.add(v)
            if w in protected or w == Endpoint(C0, 0):
                log_lines.append(f"add {v}; kept protected {w}")
            else:
                points.discard(w)
                log_lines.append(f"add {v}; removed {w}")
    return tuple(points), log_lines


def two_bridges_partitions(dyn: CircleDynamics, n_max: int):
    """Modified partitions for levels ``0..n_max``."""
    parts = [classical_partition(dyn, 0)]
    parts[0].kind = "modified"
    for n in range(n_max):
        prev = parts[-1]
        bd = bridge_counts(dyn, n)
        if bd is not None:
            pts = set(_two_bridges_step(dyn, n, bd)) | set(prev.endpoints)
            kind, meta = "two-bridges", {"bridges": bd}
        else:
            pts, lines = _surgery(dyn, n + 1, prev, dyn.prec)
            kind, meta = "surgery", {"log": lines}
        eps = _sorted_endpoints(dyn, pts, Endpoint(C0, 0))
        parts.append(DynamicalPartition(n + 1, dyn, eps, (), kind, meta))
    return parts


@dataclass
class PartitionChecks:
    """Mechanical checks of one modified partition against its predecessor."""

    level: int
    coverage_defect: float
    numeric_order: bool
    dynamically_defined: bool
    fundamental_unions: bool
    fundamental_atoms: bool
    refines_previous: bool
    free_critical_endpoint: bool | None
    adjacent_ratio: float

    @property
    def passed(self) -> bool:
        return (self.numeric_order and self.dynamically_defined and self.fundamental_unions
                and self.refines_previous and self.free_critical_endpoint is not False)


def check_partitions(dyn: CircleDynamics, parts) -> list:
    """Per-level structural checks on a sequence of modified partitions."""
    out = []
    c = Endpoint(C0, 0)
    for k, part in enumerate(parts):
        n = part.level
        eps = part.endpoint_set
        atoms = set(part.atoms())
        unions = c in eps and Endpoint(C0, dyn.q(n)) in eps
        if n > 0:
            unions = unions and Endpoint(C0, dyn.q(n - 1)) in eps
        fund = all(((c, x) in atoms or (x, c) in atoms)
                   for x in (Endpoint(C0, dyn.q(n)), Endpoint(C0, dyn.q(n + 1))))
        fce = None
        if k > 0:
            bd = parts[k].meta.get("bridges")
            if bd is not None:
                fce = Endpoint(C1, -bd.steps) in eps
        out.append(PartitionChecks(
            n,
            float(part.coverage_defect()),
            part.numeric_order_consistent(),
            all(e.orbit in (C0, C1) for e in part.endpoints),
            unions,
            fund,
            k == 0 or parts[k - 1].endpoint_set <= eps,
            fce,
            real_bounds_audit(part),
        ))
    return out


def classical_recovery_lags(dyn: CircleDynamics, parts) -> dict:
    """For each level n, the largest delay m - n before every endpoint of
    ``P_n`` shows up in some modified partition of level m >= n.

    ``None`` marks levels where some endpoint was not recovered within the
    available depth.
    """
    sets = [p.endpoint_set for p in parts]
    lags = {}
    for n in range(len(parts)):
        worst = 0
        for e in classical_partition(dyn, n).endpoints:
            m = next((m for m in range(n, len(parts)) if e in sets[m]), None)
            if m is None:
                worst = None
                break
            worst = max(worst, m - n)
        lags[n] = worst
    return lags


def real_bounds_audit(part: DynamicalPartition) -> float:
    """Largest ratio of adjacent atom lengths."""
    lengths = part.atom_lengths()
    m = len(lengths)
    if m < 2:
        return 1.0
    return max(float(max(lengths[j] / lengths[j - 1], lengths[j - 1] / lengths[j])) for j in range(m))


def refining_audit(parts) -> dict:
    """``max (|I|/|J|)^(1/(m-n))`` over atoms ``I`` of level m inside atoms ``J`` of level n."""
    out = {}
    for i, coarse in enumerate(parts):
        c_len = coarse.atom_lengths()
        for fine in parts[i + 1:]:
            f_len = fine.atom_lengths()
            gap = fine.level - coarse.level
            worst = 0.0
            for j, e in enumerate(fine.endpoints):
                parent = coarse.atom_containing(e)
                # an atom starting at e lies in the coarse atom containing e
                ratio = float(f_len[j] / c_len[parent]) ** (1.0 / gap)
                worst = max(worst, ratio)
            out[(coarse.level, fine.level)] = worst
    return out


@dataclass
class KoebeAudit:
    distortion: float
    total_length: float
    space: float
    koebe_factor: float
    c_tilde_required: float
    within_bound: bool | None


def koebe_audit(f, outer: Arc, inner: Arc, k: int, c_tilde=None, samples: int = 257) -> KoebeAudit:
    """Distortion of ``f^k`` on ``inner`` against the Koebe-type bound on ``outer``.

    Raises if a critical point enters ``f^j(outer)`` for some ``j < k``.
    """
    prec = f.precision
    with working_precision(prec):
        lo = outer.start.rep.value
        hi = lo + arc_length(outer).value
        m_lo = lo + frac(inner.start.rep.value - lo)
        m_hi = m_lo + arc_length(inner).value
        if m_hi > hi:
            raise ValueError("inner arc is not inside outer arc")
        crits = f.critical_points
        a, b = lo, hi
        total = mpfr(0)
        for _ in range(k):
            for c in crits:
                off = frac(c - a)
                if 0 < off < b - a:
                    raise NotADiffeomorphismError("critical point inside an intermediate image")
            total += b - a
            a, b = f.lift(a), f.lift(b)
        nodes = chebyshev_nodes(m_lo, m_hi, samples)
        ders = [f.iterate_jet(x, k).d1 for x in nodes]
        distortion = max(ders) / min(ders)
        fm_lo, fm_hi = f.iterate(m_lo, k), f.iterate(m_hi, k)
        left = fm_lo - a
        right = b - fm_hi
        space = min(left, right) / (fm_hi - fm_lo)
        factor = (1 + 1 / space) ** 2
        required = max(mpfr(0), gmpy2.log(distortion / factor) / total) if total > 0 else mpfr(0)
    within = None if c_tilde is None else float(required) <= c_tilde
    return KoebeAudit(float(distortion), float(total), float(space), float(factor),
                      float(required), within)


@dataclass
class NegativityAudit:
    """Sign of ``S(f^{q_{n+1}})`` on sampled regular points of ``I_n(c0)``, per level."""

    levels: dict
    n1: int | None
    samples: int
    excluded: dict

    def negative_from(self, n: int) -> bool:
        return all(v for m, v in self.levels.items() if m >= n)


def schwarzian_negativity_audit(dyn: CircleDynamics, n_max: int, samples: int = 257) -> NegativityAudit:
    """Reports ``n1``, the first level from which every sampled value is negative.

    Samples are Chebyshev nodes of ``I_n(c0)``; nodes whose orbit passes
    within ``2^(-P/4)`` of a critical point are skipped.
    """
    from .maps import schwarzian

    f = dyn.f
    prec = dyn.prec
    levels, excluded = {}, {}
    with working_precision(prec):
        near = mpfr(2) ** (-(prec // 4))
        crits = f.critical_points
        c = dyn.value(Endpoint(C0, 0))
        for n in range(n_max + 1):
            end = dyn.value(Endpoint(C0, dyn.q(n)))
            end = c + (end - c - gmpy2.rint(end - c)) if n > 0 else end
            lo, hi = min(c, end), max(c, end)
            k = dyn.q(n + 1)
            ok, skipped = True, 0
            for x in chebyshev_nodes(lo, hi, samples):
                total, dk, y, regular = mpfr(0), mpfr(1), x, True
                for _ in range(k):
                    if any(abs(frac(y - cc + mpfr(1) / 2) - mpfr(1) / 2) < near for cc in crits):
                        regular = False
                        break
                    j = f.jet(y)
                    total += schwarzian(j) * dk * dk
                    dk *= j[1]
                    y = j[0]
                if not regular:
                    skipped += 1
                    continue
                if not total < 0:
                    ok = False
                    break
            levels[n] = ok
            excluded[n] = skipped
    n1 = next((n for n in range(n_max + 1) if all(levels[m] for m in range(n, n_max + 1))), None)
    return NegativityAudit(levels, n1, samples, excluded)
