"""Critical commuting pairs and their renormalization.

A pair is stored in the frame where the short interval is ``[-1, 0]``:
``eta`` acts on ``[0, xi(0)]`` with ``eta(0) = -1`` and ``xi`` acts on
``[-1, 0]``.  Branches are kept symbolically as step sequences (affine maps
and lift iterates) so that values and 3-jets are recomputed at full
precision through the chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .errors import ChiCapError, CombinatoricsMismatchError, PairError, PrecisionError
from .maps import compose_jets
from .numerics import chebyshev_nodes, to_mpfr, working_precision
from .partitions import CircleDynamics, Endpoint, classical_partition

DEFAULT_CHI_CAP = 10**5


class Branch:
    """Composition of steps applied left to right.

    ``affine``: ``x -> s*x + b``.  ``iter``: ``x -> F^k(x) - p``.
    ``return``: a first-return map written in a frame centred at an orbit
    point ``c``, evaluated as offsets from the cached orbit of ``c`` so that
    accuracy is relative to the frame scale rather than to the circle.
    """

    __slots__ = ("steps", "prec")

    def __init__(self, steps, prec: int):
        self.steps = tuple(steps)
        self.prec = prec

    @classmethod
    def affine(cls, scale, offset, prec):
        return cls((("affine", scale, offset),), prec)

    @classmethod
    def iterate(cls, f, k: int, shift: int):
        return cls((("iter", f, k, shift),), f.precision)

    def then(self, other: "Branch") -> "Branch":
        """``other`` applied after ``self``."""
        return Branch(self.steps + other.steps, min(self.prec, other.prec))

    def power(self, k: int) -> "Branch":
        return Branch(self.steps * k, self.prec)

    @classmethod
    def first_return(cls, f, anchors, k: int, disp, sigma: int, scale):
        """``y -> sigma (F^k(c + sigma*scale*y) - c - p) / scale`` with ``disp = F^k(c) - c - p``."""
        return cls((("return", f, anchors, k, disp, sigma, scale),), f.precision)

    @property
    def length(self) -> int:
        return sum(s[2] for s in self.steps if s[0] == "iter") + sum(
            s[3] for s in self.steps if s[0] == "return")

    def _value(self, x):
        for st in self.steps:
            kind = st[0]
            if kind == "affine":
                x = st[1] * x + st[2]
            elif kind == "return":
                _, f, anchors, k, disp, sigma, scale = st
                diff = f.lift_difference
                d = sigma * scale * x
                for j in range(k):
                    d = diff(anchors[j], d)
                x = sigma * (disp + d) / scale
            else:
                y, m = st[1].iterate_mod(x, st[2])
                x = y + (m - st[3])
        return x

    def __call__(self, x):
        with working_precision(self.prec):
            return self._value(to_mpfr(x))

    def _jet(self, x):
        j = (x, mpfr(1), mpfr(0), mpfr(0))
        for st in self.steps:
            if st[0] == "affine":
                s, b = st[1], st[2]
                j = (s * j[0] + b, s * j[1], s * j[2], s * j[3])
            elif st[0] == "return":
                _, f, anchors, k, disp, sigma, scale = st
                diff, der = f.lift_difference, f.derivatives_at
                s = sigma * scale
                d, d1, d2, d3 = s * j[0], s * j[1], s * j[2], s * j[3]
                for i in range(k):
                    anc = anchors[i]
                    g1, g2, g3 = der(anc, d)
                    d1, d2, d3 = (g1 * d1, g2 * d1 * d1 + g1 * d2,
                                  g3 * d1 * d1 * d1 + 3 * g2 * d1 * d2 + g1 * d3)
                    d = diff(anc, d)
                j = (sigma * (disp + d) / scale, d1 / s, d2 / s, d3 / s)
            else:
                j, m = st[1].jet_mod(j, st[2])
                j = (j[0] + (m - st[3]), j[1], j[2], j[3])
        return j

    def jet(self, x):
        with working_precision(self.prec):
            return self._jet(to_mpfr(x))


def conjugate_affine(branch: Branch, scale, offset=0) -> Branch:
    """``L o branch o L^-1`` for ``L(x) = scale*x + offset``."""
    with working_precision(branch.prec):
        inv = Branch.affine(1 / scale, -offset / scale, branch.prec)
    return inv.then(branch).then(Branch.affine(scale, offset, branch.prec))


@dataclass
class CommutingPair:
    """``(eta, xi)`` with domains ``[0, xi(0)]`` and ``[eta(0), 0]``."""

    eta: Branch
    xi: Branch
    eta_domain: tuple
    xi_domain: tuple
    level: int = 0
    crit: int = 0
    orientation: int = 1
    beta: object = None
    beta_branch: str | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def prec(self) -> int:
        return min(self.eta.prec, self.xi.prec)

    @property
    def eta0(self):
        return self.xi_domain[0]

    @property
    def xi0(self):
        return self.eta_domain[1]

    @property
    def normalized(self) -> bool:
        with working_precision(self.prec):
            return abs(self.eta0 + 1) <= mpfr(2) ** (8 - self.prec)

    def scaling_ratio(self):
        """``|I_xi| / |I_eta|`` which is ``|I_{n+1}| / |I_n|`` for level pairs."""
        with working_precision(self.prec):
            return -self.eta0 / self.xi0

    def __call__(self, x):
        """Piecewise map: ``xi`` on the negative side, ``eta`` on the positive side."""
        return self.xi(x) if x < 0 else self.eta(x)


NormalizedPair = CommutingPair


def _signed_offset(v, c):
    d = v - c
    return d - gmpy2.rint(d)


def free_critical_point_at(dyn: CircleDynamics, crit: int, n: int):
    """Pre-image of the other critical point in ``J_n(c_crit)``.

    Returns ``(endpoint, lift value, inside I_n?)``.
    """
    other = 1 - crit
    part = classical_partition(dyn, n, base=crit)
    idx = part.atom_containing(Endpoint(other, 0))
    a, b = part.atoms()[idx]
    j = min(a.index, b.index)
    in_long = part.labels[idx].endswith(f"I_{n})")
    e = Endpoint(other, -j)
    return e, dyn.value(e), in_long


def pair_at_level(dyn: CircleDynamics, crit: int, n: int, with_beta: bool = True) -> CommutingPair:
    """Normalized first-return pair of ``J_n(c_crit)``.

    ``eta = f^{q_{n+1}}`` on ``I_n`` and ``xi = f^{q_n}`` on ``I_{n+1}``,
    in the affine frame sending ``c`` to 0 and ``f^{q_{n+1}}(c)`` to -1.
    """
    f = dyn.f
    if n + 2 > len(dyn.table.q) - 1:
        raise PrecisionError(f"level {n} needs more measured quotients than {dyn.depth}")
    prec = dyn.prec
    with working_precision(prec):
        c = dyn.value(Endpoint(crit, 0))
        xn = dyn.displacement(crit, n)
        xn1 = dyn.displacement(crit, n + 1)
        sigma = 1 if xn > 0 else -1
        if (xn1 > 0) == (xn > 0):
            raise CombinatoricsMismatchError("closest-return displacements do not alternate")
        scale = abs(xn1)
        anchors = dyn.anchors(crit, dyn.q(n + 1))
        eta = Branch.first_return(f, anchors, dyn.q(n + 1), xn1, sigma, scale)
        xi = Branch.first_return(f, anchors, dyn.q(n), xn, sigma, scale)
        xi0 = abs(xn) / scale
        beta, where = None, None
        if with_beta and len(f.critical_points) > 1:
            try:
                _, v, in_long = free_critical_point_at(dyn, crit, n)
                beta = sigma * _signed_offset(v, c) / scale
                where = "eta" if in_long else "xi"
            except (PrecisionError, ValueError):
                beta = None
    return CommutingPair(eta, xi, (mpfr(0), xi0), (mpfr(-1), mpfr(0)), n, crit, sigma, beta, where,
                         {"q": (dyn.q(n), dyn.q(n + 1)), "p": (dyn.p(n), dyn.p(n + 1))})


def chi(pair: CommutingPair, cap: int = DEFAULT_CHI_CAP) -> int:
    """Largest ``k`` with ``eta^k(xi(0)) >= 0``.

    With this count ``eta^chi(xi(0))`` is the right end of the new short
    interval, and for level pairs ``chi = a_{n+1}``.
    """
    with working_precision(pair.prec):
        y = pair.xi0
        tiny = mpfr(2) ** (16 - pair.prec)
        for k in range(cap + 1):
            y_next = pair.eta._value(y)
            if y_next < 0:
                return k
            if abs(y_next - y) <= tiny:
                raise PairError("eta has a fixed point: return count is infinite")
            y = y_next
    raise ChiCapError(f"return count exceeds cap {cap}")


def prerenormalize(pair: CommutingPair, cap: int = DEFAULT_CHI_CAP) -> CommutingPair:
    """``(eta | [0, eta^chi(xi(0))], eta^chi o xi)`` on the same coordinates."""
    k = chi(pair, cap)
    with working_precision(pair.prec):
        if pair.xi._value(pair.eta0) < 0 or pair.xi._value(pair.eta0) > pair.xi0:
            raise PairError("xi(eta(0)) is not in the domain of eta")
        new_xi = pair.xi.then(pair.eta.power(k))
        end = new_xi._value(mpfr(0))
        if end < 0:
            raise PairError("renormalized interval has the wrong orientation")
    return CommutingPair(pair.eta, new_xi, (mpfr(0), end), pair.xi_domain, pair.level + 1,
                         pair.crit, pair.orientation, None, None,
                         dict(pair.provenance, chi=k))


def renormalize(pair: CommutingPair, cap: int = DEFAULT_CHI_CAP) -> CommutingPair:
    """Pre-renormalize, then flip and rescale so the new short side is ``[-1, 0]``.

    The flip ``x -> -x / eta^chi(xi(0))`` swaps the roles of the two
    branches, which puts the result in the same frame as the next level's
    first-return pair.
    """
    pre = prerenormalize(pair, cap)
    prec = pre.prec
    with working_precision(prec):
        t = pre.xi0
        scale = -1 / t
        new_eta = conjugate_affine(pre.xi, scale)
        new_xi = conjugate_affine(pre.eta, scale)
        new_end = 1 / t
    return CommutingPair(new_eta, new_xi, (mpfr(0), new_end), (mpfr(-1), mpfr(0)), pre.level,
                         pair.crit, -pair.orientation, None, None, pre.provenance)


def flip(pair: CommutingPair) -> CommutingPair:
    """Conjugate by ``x -> -x`` and swap branch roles (not normalized)."""
    with working_precision(pair.prec):
        m1 = mpfr(-1)
        return CommutingPair(conjugate_affine(pair.xi, m1), conjugate_affine(pair.eta, m1),
                             (mpfr(0), -pair.eta0), (-pair.xi0, mpfr(0)), pair.level, pair.crit,
                             -pair.orientation, None, None, pair.provenance)


def branch_sup_distance(b1: Branch, b2: Branch, lo, hi, points: int = 1024):
    """``max |b1 - b2|`` over Chebyshev nodes of ``(lo, hi)``."""
    prec = min(b1.prec, b2.prec)
    with working_precision(prec):
        worst = mpfr(0)
        for x in chebyshev_nodes(lo, hi, points):
            worst = max(worst, abs(b1._value(x) - b2._value(x)))
    return worst


def pair_sup_distance(p1: CommutingPair, p2: CommutingPair, points: int = 1024):
    """Sup distance between two pairs on a mesh of each branch domain, plus domain ends."""
    with working_precision(min(p1.prec, p2.prec)):
        d_dom = max(abs(p1.xi0 - p2.xi0), abs(p1.eta0 - p2.eta0))
        lo = min(p1.xi0, p2.xi0)
        de = branch_sup_distance(p1.eta, p2.eta, mpfr(0), lo, points)
        hi = max(p1.eta0, p2.eta0)
        dx = branch_sup_distance(p1.xi, p2.xi, hi, mpfr(0), points)
        return max(d_dom, de, dx)


# Moebius frame and pseudo-distance ------------------------------------------


@dataclass(frozen=True)
class MoebiusFrame:
    """``tau(x) = x / (alpha x + beta)`` with ``tau(eta(0)) = -1``, ``tau(0) = 0``, ``tau(xi(0)) = 1``."""

    alpha: object
    beta: object

    def __call__(self, x):
        return x / (self.alpha * x + self.beta)

    def inverse(self, y):
        return self.beta * y / (1 - self.alpha * y)

    def jet(self, x):
        den = self.alpha * x + self.beta
        d1 = self.beta / (den * den)
        d2 = -2 * self.alpha * d1 / den
        d3 = -3 * self.alpha * d2 / den
        return (x / den, d1, d2, d3)

    def inverse_jet(self, y):
        den = 1 - self.alpha * y
        v = self.beta * y / den
        d1 = self.beta / (den * den)
        d2 = 2 * self.alpha * d1 / den
        d3 = 3 * self.alpha * d2 / den
        return (v, d1, d2, d3)


def moebius_frame(eta0, xi0) -> MoebiusFrame:
    if not (eta0 < 0 < xi0):
        raise PairError("Moebius frame needs eta(0) < 0 < xi(0)")
    alpha = (xi0 + eta0) / (xi0 - eta0)
    beta = -2 * xi0 * eta0 / (xi0 - eta0)
    return MoebiusFrame(alpha, beta)


def _framed_jet(pair: CommutingPair, frame: MoebiusFrame, y):
    inv = frame.inverse_jet(y)
    branch = pair.xi if y < 0 else pair.eta
    inner = branch._jet(inv[0])
    j = compose_jets(inner, inv)
    return compose_jets(frame.jet(j[0]), j)


def pseudo_distance(p1: CommutingPair, p2: CommutingPair, r: int = 0, grid: int = 512):
    """``max(|xi1(0)/eta1(0) - xi2(0)/eta2(0)|, ||tau1 zeta1 tau1^-1 - tau2 zeta2 tau2^-1||_{C^r})``.

    The C^r norm is the largest absolute difference of derivatives of order
    ``0..r`` over Chebyshev nodes on each side of ``[-1, 1]``.
    """
    if grid < 64:
        raise PrecisionError("pseudo-distance grid must have at least 64 points per side")
    if not 0 <= r <= 3:
        raise ValueError("r must be between 0 and 3")
    prec = min(p1.prec, p2.prec)
    with working_precision(prec):
        ratio = abs(p1.xi0 / p1.eta0 - p2.xi0 / p2.eta0)
        t1 = moebius_frame(p1.eta0, p1.xi0)
        t2 = moebius_frame(p2.eta0, p2.xi0)
        worst = ratio
        nodes = chebyshev_nodes(mpfr(-1), mpfr(0), grid) + chebyshev_nodes(mpfr(0), mpfr(1), grid)
        for y in nodes:
            j1 = _framed_jet(p1, t1, y)
            j2 = _framed_jet(p2, t2, y)
            for k in range(r + 1):
                worst = max(worst, abs(j1[k] - j2[k]))
    return worst


# M-controlled conditions ----------------------------------------------------


@dataclass
class MControlReport:
    required: dict
    m_star: float
    chi: int
    beta: object

    def holds(self, m: float) -> dict:
        return {name: req <= m for name, req in self.required.items()}


def _inv(x):
    return float("inf") if x <= 0 else float(1 / x)


def m_controlled_check(pair: CommutingPair, samples: int = 257) -> MControlReport:
    """Smallest ``M`` for which each bounded-geometry condition holds.

    Conditions: the ratio ``xi(0)`` and its inverse; the gaps
    ``xi(0) - eta(xi(0))``, ``eta^{chi-1}(xi(0)) - eta^chi(xi(0))``,
    ``eta^chi(xi(0))`` and ``-eta^{chi+1}(xi(0))``; C^3 norms of ``xi`` and of
    ``eta`` away from the free critical point; a lower bound on ``D eta``
    over ``[eta^chi(xi(0)), xi(0)]`` away from it; and, when the free critical
    point ``beta`` lies on the ``eta`` side, the displacements
    ``|eta(beta) - beta|`` and ``|beta - eta^{-1}(beta)|``.
    """
    prec = pair.prec
    k = chi(pair)
    req = {}
    with working_precision(prec):
        t = pair.xi0
        eta = pair.eta._value
        req["ratio"] = max(float(t), float(1 / t))
        y = [t]
        for _ in range(k + 1):
            y.append(eta(y[-1]))
        req["first_step"] = _inv(t - y[1])
        req["last_step"] = _inv(y[k - 1] - y[k]) if k >= 1 else 0.0
        req["landing"] = _inv(y[k])
        req["overshoot"] = _inv(-y[k + 1])
        excl = mpfr(2) ** (-(prec // 4))
        beta = pair.beta if pair.beta_branch == "eta" else None

        def away(x):
            return beta is None or abs(x - beta) > excl

        xs = chebyshev_nodes(pair.eta0, mpfr(0), samples)
        req["xi_c3"] = max(float(max(abs(v) for v in pair.xi._jet(x))) for x in xs)
        xs = [x for x in chebyshev_nodes(mpfr(0), t, samples) if away(x)]
        req["eta_c3"] = max(float(max(abs(v) for v in pair.eta._jet(x))) for x in xs)
        xs = [x for x in chebyshev_nodes(y[k], t, samples) if away(x)]
        req["eta_expansion"] = _inv(min(pair.eta._jet(x)[1] for x in xs))
        if beta is not None and 0 < beta < t:
            eb = eta(beta)
            # eta^{-1}(beta) by bisection on the monotone branch
            lo, hi = mpfr(0), t
            if eta(lo) <= beta <= eta(hi):
                for _ in range(prec):
                    mid = (lo + hi) / 2
                    if eta(mid) < beta:
                        lo = mid
                    else:
                        hi = mid
                req["beta_forward"] = _inv(abs(eb - beta))
                req["beta_backward"] = _inv(abs(beta - lo))
            else:
                req["beta_forward"] = _inv(abs(eb - beta))
    m_star = max([1.0] + list(req.values()))
    return MControlReport(req, m_star, k, pair.beta)


def scaling_ratios(dyn: CircleDynamics, crit: int, n_max: int):
    """``|I_{n+1}(c)| / |I_n(c)|`` for ``n = 0..n_max``."""
    with working_precision(dyn.prec):
        return [abs(dyn.displacement(crit, n + 1)) / abs(dyn.displacement(crit, n))
                for n in range(n_max + 1)]
