"""Signatures, the combinatorial conjugacy between two maps, and decay audits.

Two bi-critical maps with the same rotation number and matching
partition combinatorics are conjugate by the homeomorphism sending each
symbolic endpoint ``f^i(c_k)`` to ``g^i(c_k)``.  The audits below measure,
level by level, how far that homeomorphism is from being affine on the
atoms of the modified partitions.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from .errors import CombinatoricsMismatchError, PrecisionError
from .maps import criticality_estimate
from .numerics import AdaptiveReal, frac, to_mpfr, working_precision
from .partitions import (
    C0,
    C1,
    CircleDynamics,
    DynamicalPartition,
    Endpoint,
    _frac,
    bridge_counts,
    free_critical_point,
    two_bridges_partitions,
)
from .renorm import pair_at_level, pseudo_distance
from .reports import DecayReport, make_report


# signature -----------------------------------------------------------------


@dataclass
class SignatureReport:
    """Rotation prefix, criticalities and the measures of the two critical gaps."""

    quotients: list
    N: int
    d0: float
    d1: float
    delta0: AdaptiveReal
    delta1: AdaptiveReal
    error_bar: Fraction
    delta0_birkhoff: float | None = None

    @property
    def sum_defect(self) -> float:
        return abs(float(self.delta0) + float(self.delta1) - 1)


def _centered(x: Fraction) -> Fraction:
    x = _frac(x)
    return x - 1 if x > Fraction(1, 2) else x


def orbit_matching_measure(dyn: CircleDynamics, base: int, target) -> Fraction:
    """Invariant measure of ``[c_base, target)`` read off the orbit of ``c_base``.

    The orbit points ``f^i(c_base)``, ``i`` below the exact-order span, cut
    the circle into cells whose measures are known exactly in rotation
    coordinates; the target is placed at the midpoint of its cell.
    """
    n = dyn.span
    with working_precision(dyn.prec):
        origin = dyn.value(Endpoint(base, 0))
        pos = sorted((frac(dyn.value(Endpoint(base, i)) - origin), i) for i in range(n))
        t = frac(to_mpfr(target) - origin)
    vals = [p for p, _ in pos]
    j = bisect.bisect_right(vals, t)
    i_left = pos[(j - 1) % n][1]
    i_right = pos[j % n][1]
    a = _frac(i_left * dyn.rho)
    b = _frac(i_right * dyn.rho)
    if t == vals[(j - 1) % n]:
        return a
    return _frac(a + _frac(b - a) / 2)


def birkhoff_measure(dyn: CircleDynamics, samples: int) -> float:
    """Fraction of ``f^i(c0)``, ``i < samples``, that lie in ``[c0, c1)``."""
    with working_precision(dyn.prec):
        c0 = dyn.value(Endpoint(C0, 0))
        gap = frac(dyn.value(Endpoint(C1, 0)) - c0)
        count = 0
        for i in range(samples):
            y, _ = dyn.reduced(Endpoint(C0, i))
            if frac(mpfr(y) - c0) < gap:
                count += 1
    return count / samples


def signature(f, depth: int, dyn: CircleDynamics | None = None, birkhoff: bool = True) -> SignatureReport:
    """Signature of a bi-critical map measured to ``depth`` partial quotients."""
    dyn = dyn or CircleDynamics(f, depth)
    prec = dyn.prec
    d0 = orbit_matching_measure(dyn, C0, dyn.value(Endpoint(C1, 0)))
    d1 = orbit_matching_measure(dyn, C1, dyn.value(Endpoint(C0, 0)))
    bar = Fraction(1, dyn.table.q[dyn.depth])
    crit = []
    for k in range(2):
        try:
            crit.append(criticality_estimate(f, k))
        except (ValueError, ZeroDivisionError, PrecisionError):
            crit.append(float("nan"))
    birk = birkhoff_measure(dyn, 10 * dyn.table.q[dyn.depth]) if birkhoff else None
    with working_precision(prec):
        a0 = AdaptiveReal(to_mpfr(d0), prec)
        a1 = AdaptiveReal(to_mpfr(d1), prec)
    return SignatureReport(list(dyn.quotients), 2, crit[0], crit[1], a0, a1, bar, birk)


# conjugacy -------------------------------------------------------------------


@dataclass
class LevelMismatch:
    """First disagreement between the combinatorics of ``f`` and ``g``."""

    level: int
    kind: str
    f: object
    g: object
    position: int | None = None

    def __str__(self):
        where = f" at position {self.position}" if self.position is not None else ""
        return f"level {self.level}: {self.kind}{where}: f has {self.f}, g has {self.g}"

    def as_dict(self) -> dict:
        return {"level": self.level, "kind": self.kind, "f": str(self.f), "g": str(self.g),
                "position": self.position}


def _mismatch(m: LevelMismatch):
    return CombinatoricsMismatchError(str(m), diff=m)


def _first_diff(seq_f, seq_g):
    for k, (a, b) in enumerate(zip(seq_f, seq_g)):
        if a != b:
            return k
    return None if len(seq_f) == len(seq_g) else min(len(seq_f), len(seq_g))


@dataclass
class Conjugacy:
    """Endpoint matching ``f^i(c_k) -> g^i(c_k)`` on the modified partitions of both maps."""

    dyn_f: CircleDynamics
    dyn_g: CircleDynamics
    parts_f: list
    parts_g: list
    depth: int
    meta: dict = field(default_factory=dict)

    @property
    def prec(self) -> int:
        return min(self.dyn_f.prec, self.dyn_g.prec)

    def matched(self, level: int | None = None):
        """``(endpoint, f value, g value)`` on the partition of ``level`` (deepest by default)."""
        level = self.depth if level is None else level
        part = self.parts_f[level]
        return [(e, self.dyn_f.value(e), self.dyn_g.value(e)) for e in part.endpoints]

    def __call__(self, x):
        """Monotone piecewise-linear extension inside the atoms of the deepest partition."""
        pf, pg = self.parts_f[self.depth], self.parts_g[self.depth]
        with working_precision(self.prec):
            x = to_mpfr(x)
            lf = pf.atom_lengths()
            lg = pg.atom_lengths()
            k = pf.atom_index_of_point(x)
            start_f = self.dyn_f.value(pf.endpoints[k])
            start_g = self.dyn_g.value(pg.endpoints[k])
            off = frac(x - start_f)
            # shift by the integer part so the lift of h commutes with translations
            return start_g + off * lg[k] / lf[k] + (x - start_f - off)

    def monotone(self) -> bool:
        return all(p.numeric_order_consistent() for p in self.parts_g)

    def equivariance_residual(self, level: int | None = None):
        """``max |g^i(c_k) - h(f^i(c_k))|`` with ``g^i`` recomputed by direct iteration."""
        level = self.depth if level is None else level
        g = self.dyn_g.f
        worst = mpfr(0)
        with working_precision(self.prec):
            starts = {k: c for k, c in enumerate(g.critical_points)}
            for e in self.parts_f[level].endpoints:
                cached = self.dyn_g.value(e)
                x = starts[e.orbit]
                if e.index >= 0:
                    y, m = g.iterate_mod(x, e.index)
                    direct = y + m
                else:
                    direct = x
                    for _ in range(-e.index):
                        direct = g.inverse(direct)
                d = frac(direct - cached)
                worst = max(worst, min(d, 1 - d))
        return worst


def _bridge_signature(bd):
    if bd is None:
        return None
    return (bd.slot, bd.right, bd.left, bd.right_case, bd.left_case, bd.steps)


def build_conjugacy(f, g, n: int, depth: int | None = None, dyn_f: CircleDynamics | None = None,
                    dyn_g: CircleDynamics | None = None) -> Conjugacy:
    """Match the modified partitions of ``f`` and ``g`` up to level ``n``.

    Both maps must share ``n + 2`` partial quotients and the same
    two-bridges data at every level; the endpoints of ``f``'s partitions,
    ordered by ``g``'s exact keys, must come out in the same cyclic order.
    Otherwise :class:`CombinatoricsMismatchError` names the first
    disagreeing level.
    """
    depth = depth or n + 2
    dyn_f = dyn_f or CircleDynamics(f, depth)
    dyn_g = dyn_g or CircleDynamics(g, depth)
    need = n + 2
    qf, qg = dyn_f.quotients[:need], dyn_g.quotients[:need]
    k = _first_diff(qf, qg)
    if k is not None:
        raise _mismatch(LevelMismatch(k, "partial quotient", qf[k] if k < len(qf) else None,
                                      qg[k] if k < len(qg) else None))
    for level in range(n):
        bf, bg = _bridge_signature(bridge_counts(dyn_f, level)), _bridge_signature(bridge_counts(dyn_g, level))
        if bf != bg:
            raise _mismatch(LevelMismatch(level, "two-bridges data", bf, bg))
    parts_f = two_bridges_partitions(dyn_f, n)
    parts_g = []
    for part in parts_f:
        pts = sorted(part.endpoints, key=dyn_g.key)
        start = pts.index(part.origin)
        order = tuple(pts[start:] + pts[:start])
        k = _first_diff(part.endpoints, order)
        if k is not None:
            raise _mismatch(LevelMismatch(part.level, "cyclic order", part.endpoints[k], order[k], k))
        parts_g.append(DynamicalPartition(part.level, dyn_g, order, part.labels, part.kind, dict(part.meta)))
    return Conjugacy(dyn_f, dyn_g, parts_f, parts_g, n, {"depth": depth})


# log-ratio helpers -----------------------------------------------------------


def _log_ratios(conj: Conjugacy, level: int):
    lf = conj.parts_f[level].atom_lengths()
    lg = conj.parts_g[level].atom_lengths()
    with working_precision(conj.prec):
        return [gmpy2.log(b / a) for a, b in zip(lf, lg)]


def _arc(dyn, a: Endpoint, b: Endpoint):
    with working_precision(dyn.prec):
        return frac(dyn.value(b) - dyn.value(a))


def _log_ratio_arc(conj: Conjugacy, a: Endpoint, b: Endpoint):
    with working_precision(conj.prec):
        return gmpy2.log(_arc(conj.dyn_g, a, b) / _arc(conj.dyn_f, a, b))


def _key_offset(dyn, e: Endpoint, base: Endpoint) -> Fraction:
    return _centered(dyn.key(e) - dyn.key(base))


def _inside(dyn, atom, lo: Fraction, hi: Fraction, base: Endpoint) -> bool:
    a, b = atom
    ka, kb = _key_offset(dyn, a, base), _key_offset(dyn, b, base)
    return lo <= ka < kb <= hi


def _J_bounds(dyn, crit: int, m: int):
    base = Endpoint(crit, 0)
    u = _key_offset(dyn, Endpoint(crit, dyn.q(m)), base)
    v = _key_offset(dyn, Endpoint(crit, dyn.q(m + 1)), base)
    return min(u, v), max(u, v)


def _I_bounds(dyn, crit: int, m: int):
    base = Endpoint(crit, 0)
    u = _key_offset(dyn, Endpoint(crit, dyn.q(m)), base)
    return (Fraction(0), u) if u > 0 else (u, Fraction(0))


# audits ------------------------------------------------------------------------


def criterion_audit(conj: Conjugacy, n_max: int | None = None) -> DecayReport:
    """``D_n``: largest log-ratio difference over adjacent atoms and over atoms sharing a parent."""
    n_max = conj.depth if n_max is None else n_max
    pts = []
    parents_ok = []
    for n in range(n_max + 1):
        lr = _log_ratios(conj, n)
        m = len(lr)
        worst = max((abs(lr[k] - lr[(k + 1) % m]) for k in range(m)), default=mpfr(0)) if m > 1 else mpfr(0)
        if n > 0:
            coarse = conj.parts_f[n - 1]
            groups = {}
            for k, e in enumerate(conj.parts_f[n].endpoints):
                groups.setdefault(coarse.atom_containing(e), []).append(lr[k])
            for vals in groups.values():
                worst = max(worst, max(vals) - min(vals))
            parents_ok.append(conj.parts_f[n].refines(coarse))
        pts.append((n, worst))
    lengths = [float(max(p.atom_lengths())) for p in conj.parts_f[: n_max + 1]]
    return make_report("criterion", pts, conj.prec, refines=all(parents_ok), max_atom=lengths)


def fundamental_ratio_audit(conj: Conjugacy, n_max: int | None = None) -> dict:
    """``|log(|h(I_n(c_i))| / |I_n(c_i)|)|`` raw and recentred by the deepest value, per critical point."""
    n_max = conj.depth if n_max is None else n_max
    out = {}
    for crit in (C0, C1):
        raw = []
        with working_precision(conj.prec):
            for n in range(n_max + 1):
                xf = abs(conj.dyn_f.displacement(crit, n))
                xg = abs(conj.dyn_g.displacement(crit, n))
                raw.append(gmpy2.log(xg / xf))
        ell = raw[-1]
        out[crit] = {
            "raw": make_report(f"fundamental_c{crit}", [(n, abs(v)) for n, v in enumerate(raw)], conj.prec),
            "recentred": make_report(f"fundamental_recentred_c{crit}",
                                     [(n, abs(v - ell)) for n, v in enumerate(raw)], conj.prec),
            "limit": float(ell),
        }
    return out


def fundamental_limits(conj: Conjugacy) -> dict:
    with working_precision(conj.prec):
        return {crit: gmpy2.log(abs(conj.dyn_g.displacement(crit, conj.depth))
                                / abs(conj.dyn_f.displacement(crit, conj.depth)))
                for crit in (C0, C1)}


def interval_log_ratio_audit(conj: Conjugacy, n_max: int | None = None, band_b: float = 0.5) -> DecayReport:
    """Recentred ``|log(|h(I)|/|I|) - l_i|`` over atoms of level ``n+1`` inside ``J_{n - ceil(b n)}(c_i)``."""
    n_max = (conj.depth - 1) if n_max is None else min(n_max, conj.depth - 1)
    limits = fundamental_limits(conj)
    dyn = conj.dyn_f
    pts = []
    for n in range(n_max + 1):
        m = n - math.ceil(band_b * n)
        lr = _log_ratios(conj, n + 1)
        atoms = conj.parts_f[n + 1].atoms()
        worst = mpfr(0)
        for crit in (C0, C1):
            lo, hi = _J_bounds(dyn, crit, m)
            base = Endpoint(crit, 0)
            for k, atom in enumerate(atoms):
                if _inside(dyn, atom, lo, hi, base):
                    worst = max(worst, abs(lr[k] - limits[crit]))
        pts.append((n, worst))
    return make_report("interval_log_ratio", pts, conj.prec, band_b=band_b)


def _B(dyn, crit: int, m: int, e: Endpoint):
    """Affine coordinate of ``e`` in which ``c`` is 0 and ``f^{q_m}(c)`` is 1."""
    with working_precision(dyn.prec):
        d = dyn.value(e) - dyn.value(Endpoint(crit, 0))
        d = d - gmpy2.rint(d)
        return d / dyn.displacement(crit, m)


def endpoint_gap_audit(conj: Conjugacy, n_max: int | None = None, band_b: float = 0.5) -> dict:
    """``max |B_{m,g}(h(v)) - B_{m,f}(v)|`` over ``v`` of level ``n+1`` inside ``J_m(c0)``.

    Returns the cells ``(n, m, value)`` and decay reports for the band top
    (``m = n+1``), the band bottom (``m = ceil((1-b) n)``), the band maximum
    and the free critical point ``|B_{n,g} - B_{n,f}|`` at its own level.
    """
    n_max = (conj.depth - 1) if n_max is None else min(n_max, conj.depth - 1)
    dyn = conj.dyn_f
    cells = []
    top, bottom, band, free = [], [], [], []
    for n in range(n_max + 1):
        eps = conj.parts_f[n + 1].endpoints
        lo_m = math.ceil((1 - band_b) * n)
        row = {}
        for m in range(lo_m, n + 2):
            if m + 1 > dyn.depth:
                continue
            lo, hi = _J_bounds(dyn, C0, m)
            base = Endpoint(C0, 0)
            vs = [e for e in eps if lo <= _key_offset(dyn, e, base) <= hi]
            if not vs:
                cells.append((n, m, None))
                continue
            with working_precision(conj.prec):
                gap = max(abs(_B(conj.dyn_g, C0, m, v) - _B(dyn, C0, m, v)) for v in vs)
            row[m] = gap
            cells.append((n, m, gap))
        if row:
            top.append((n, row.get(n + 1, max(row.values()))))
            bottom.append((n, row[min(row)]))
            band.append((n, max(row.values())))
        fc = free_critical_point(dyn, n)
        with working_precision(conj.prec):
            free.append((n, abs(_B(conj.dyn_g, C0, n, fc.endpoint) - _B(dyn, C0, n, fc.endpoint))))
    prec = conj.prec
    return {
        "cells": cells,
        "top": make_report("endpoint_gap_top", top, prec, band_b=band_b),
        "bottom": make_report("endpoint_gap_bottom", bottom, prec, band_b=band_b),
        "band": make_report("endpoint_gap_band", band, prec, band_b=band_b),
        "free_critical": make_report("free_critical_gap", free, prec),
    }


def return_map_ratio_audit(conj: Conjugacy, n: int, m: int):
    """``max |l(f^{q_{m+1}}(I)) - l(I)|`` over atoms ``I`` of level ``n+1`` inside ``I_m`` but not ``I_{m+2}``.

    ``l(J) = log(|h(J)|/|J|)``; the affine rescalings of both maps cancel
    in the difference.  Returns ``None`` when no atom qualifies.
    """
    dyn = conj.dyn_f
    base = Endpoint(C0, 0)
    lo_m, hi_m = _I_bounds(dyn, C0, m)
    lo_s, hi_s = _I_bounds(dyn, C0, m + 2)
    q = dyn.q(m + 1)
    worst = None
    for atom in conj.parts_f[n + 1].atoms():
        if not _inside(dyn, atom, lo_m, hi_m, base) or _inside(dyn, atom, lo_s, hi_s, base):
            continue
        a, b = atom
        d = abs(_log_ratio_arc(conj, a.shift(q), b.shift(q)) - _log_ratio_arc(conj, a, b))
        worst = d if worst is None else max(worst, d)
    return worst


def return_map_band(conj: Conjugacy, n_max: int | None = None, band_b: float = 0.5) -> dict:
    n_max = (conj.depth - 1) if n_max is None else min(n_max, conj.depth - 1)
    cells, band = [], []
    for n in range(n_max + 1):
        vals = []
        for m in range(math.ceil((1 - band_b) * n), n + 1):
            if m + 2 > conj.dyn_f.depth:
                continue
            v = return_map_ratio_audit(conj, n, m)
            cells.append((n, m, v))
            if v is not None:
                vals.append(v)
        if vals:
            band.append((n, max(vals)))
    return {"cells": cells, "band": make_report("return_map_ratio", band, conj.prec, band_b=band_b)}


@dataclass
class DerivativeProfile:
    level: int
    positions: list
    slopes: list
    oscillation: float


def derivative_profile(conj: Conjugacy, level: int | None = None) -> DerivativeProfile:
    """Slopes ``|h(I)|/|I|`` over the atoms of a partition and their largest adjacent jump."""
    level = conj.depth if level is None else level
    lf = conj.parts_f[level].atom_lengths()
    lg = conj.parts_g[level].atom_lengths()
    with working_precision(conj.prec):
        slopes = [b / a for a, b in zip(lf, lg)]
        m = len(slopes)
        osc = max((abs(slopes[k] - slopes[(k + 1) % m]) for k in range(m)), default=mpfr(0))
    pos = conj.parts_f[level].positions()
    return DerivativeProfile(level, [float(p) for p in pos], [float(s) for s in slopes], float(osc))


def convergence_probe(conj: Conjugacy, n_max: int | None = None, r: int = 2, grid: int = 64,
                      crit: int = C0) -> DecayReport:
    """Pseudo-distance of order ``r`` between the level-``n`` pairs of ``f`` and ``g``."""
    top = conj.dyn_f.depth - 2
    n_max = top if n_max is None else min(n_max, top)
    pts = []
    for n in range(n_max + 1):
        pf = pair_at_level(conj.dyn_f, crit, n, with_beta=False)
        pg = pair_at_level(conj.dyn_g, crit, n, with_beta=False)
        pts.append((n, pseudo_distance(pf, pg, r=r, grid=grid)))
    return make_report(f"d{r}_pairs", pts, conj.prec, grid=grid)


def triangle_check(conj: Conjugacy, criterion: DecayReport, n_max: int | None = None,
                   band_b: float = 0.5) -> float:
    """Largest violation of ``D_{n+1} >= |l(I) - l_i| - |l(I') - l_i|`` over adjacent atoms inside ``J``.

    ``I, I'`` are adjacent atoms of level ``n+1`` inside the band interval
    ``J_{n - ceil(b n)}(c_i)``.  The inequality holds exactly, so a positive
    return value beyond rounding means the audits disagree on shared data.
    """
    n_max = (conj.depth - 1) if n_max is None else min(n_max, conj.depth - 1)
    limits = fundamental_limits(conj)
    dyn = conj.dyn_f
    worst = 0.0
    for n in range(n_max + 1):
        d = criterion.value_at(n + 1)
        if d is None:
            continue
        m = n - math.ceil(band_b * n)
        lr = _log_ratios(conj, n + 1)
        atoms = conj.parts_f[n + 1].atoms()
        count = len(atoms)
        for crit in (C0, C1):
            lo, hi = _J_bounds(dyn, crit, m)
            base = Endpoint(crit, 0)
            inside = [_inside(dyn, a, lo, hi, base) for a in atoms]
            for k in range(count):
                j = (k + 1) % count
                if inside[k] and inside[j]:
                    gap = float(abs(lr[k] - limits[crit]) - abs(lr[j] - limits[crit]))
                    worst = max(worst, gap - d)
    return worst
