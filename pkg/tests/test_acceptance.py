"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a verdict line; the conftest terminal hook prints the
lines in order at the end of the session.
"""

import math
import random
import time
from fractions import Fraction

import pytest
from gmpy2 import mpfr

from circle_renorm.conjugacy import (
    build_conjugacy,
    convergence_probe,
    criterion_audit,
    endpoint_gap_audit,
    fundamental_ratio_audit,
)
from circle_renorm.io import inventory
from circle_renorm.maps import TranslatedMap, arnold_bicritical, schwarzian_audit
from circle_renorm.numerics import working_precision
from circle_renorm.partitions import CircleDynamics, classical_partition, schwarzian_negativity_audit
from circle_renorm.pipeline import demo_config, run
from circle_renorm.renorm import chi, pair_at_level, pair_sup_distance, renormalize
from circle_renorm.rotation import convergents, partial_quotients_by_returns, tune_parameter
from circle_renorm.tubular import (
    crossing_count,
    funnel_bound_check,
    riccati_step,
    tubular_chart,
    tubular_set,
    tunnel_bound_check,
    tunnel_horizon,
)

P = 512
VERDICTS = {}


def verdict(k, title, ok, detail=""):
    VERDICTS[k] = (title, bool(ok), detail)
    print(f"criterion {k} {'PASS' if ok else 'FAIL'}: {title} {detail}")
    assert ok, f"criterion {k} failed: {detail}"


def test_01_continued_fractions():
    t0 = time.perf_counter()
    table = convergents([1] * 12)
    fib = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233]
    ok = list(table.q) == fib
    rng = random.Random(1)
    for _ in range(1000):
        t = convergents([rng.randint(1, 50) for _ in range(rng.randint(1, 30))])
        for n in range(1, len(t.q)):
            ok = ok and t.q[n] * t.p[n - 1] - t.p[n] * t.q[n - 1] == (-1) ** n
    dt = time.perf_counter() - t0
    verdict(1, "convergents and determinant identity", ok and dt < 1, f"q_12={table.q[12]}, {dt:.3f}s")


@pytest.fixture(scope="module")
def tuned():
    t0 = time.perf_counter()
    out = {}
    for name, cf in (("golden", [1] * 12), ("thirty", [1, 1, 1, 30, 1, 1])):
        res = tune_parameter(lambda a: arnold_bicritical(a, P), cf)
        out[name] = (cf, res)
    return out, time.perf_counter() - t0


def test_02_tuning(tuned):
    out, dt = tuned
    ok = dt < 600
    detail = []
    for name, (cf, res) in out.items():
        measured = partial_quotients_by_returns(res.map, len(cf)).quotients[: len(cf)]
        ok = ok and list(measured) == cf and list(res.quotients[: len(cf)]) == cf
        detail.append(f"{name} a={float(res.a):.15f}")
    verdict(2, "tuning hits and confirms both prefixes", ok, ", ".join(detail) + f", {dt:.1f}s")


def test_03_partition_validity(golden_map):
    t0 = time.perf_counter()
    dyn = CircleDynamics(golden_map, 14)
    parts = {n: classical_partition(dyn, n) for n in range(0, 13)}
    worst = max(parts[n].coverage_defect() for n in range(1, 13))
    counts = all(parts[n].atom_count == dyn.q(n) + dyn.q(n + 1) for n in range(1, 13))
    nested = all(parts[n].endpoint_set <= parts[n + 1].endpoint_set and parts[n + 1].refines(parts[n])
                 for n in range(1, 12))
    dt = time.perf_counter() - t0
    ok = worst < mpfr(2) ** (12 - P) and counts and nested and dt < 300
    verdict(3, "golden partitions levels 1-12", ok,
            f"coverage {float(worst):.2e}, counts {counts}, nesting {nested}, {dt:.1f}s")


def test_04_master_oracle(golden_dyn, thirty_dyn):
    tol = mpfr(2) ** (20 - P)
    worst = mpfr(0)
    for dyn in (golden_dyn, thirty_dyn):
        for n in range(1, 9):
            d = pair_sup_distance(renormalize(pair_at_level(dyn, 0, n)), pair_at_level(dyn, 0, n + 1), points=1024)
            worst = max(worst, d)
    verdict(4, "renormalize(pair_n) == pair_{n+1} on 1024 points", worst <= tol,
            f"sup {float(worst):.2e} vs {float(tol):.2e}")


def test_05_chi(golden_dyn, thirty_dyn):
    bad = []
    for name, dyn in (("golden", golden_dyn), ("thirty", thirty_dyn)):
        for n in range(0, dyn.depth - 1):
            k = chi(pair_at_level(dyn, 0, n))
            if k != dyn.quotients[n + 1]:
                bad.append((name, n, k))
    has30 = chi(pair_at_level(thirty_dyn, 0, 2)) == 30
    verdict(5, "chi(pair_n) = a_{n+1}", not bad and has30, f"mismatches {bad}, a=30 level {has30}")


def test_06_schwarzian(golden_map, golden_dyn):
    audit = schwarzian_audit(golden_map, samples=100)
    neg = schwarzian_negativity_audit(golden_dyn, 10)
    ok = audit.max_relative_error <= 2.0 ** (16 - P) and neg.n1 is not None and neg.n1 <= 6
    verdict(6, "Schwarzian composition identity and negativity", ok,
            f"rel err {audit.max_relative_error:.2e}, n1={neg.n1}")


def test_07_funnel_law():
    t0 = time.perf_counter()
    with working_precision(P):
        s = [mpfr("0.01")]
        for _ in range(10**4):
            s.append(s[-1] - s[-1] * s[-1])
        worst = max(abs(s[i] * (i + 100) - 1) for i in range(100, 10**4 + 1))
        m = [mpfr("0.01")]
        for _ in range(10**4):
            m.append(m[-1] / (1 + m[-1]))
        moeb = funnel_bound_check(m).D1
    dt = time.perf_counter() - t0
    ok = worst <= 0.05 and moeb <= 2.0 ** (40 - P) and dt < 1
    verdict(7, "funnel law", ok, f"max |s_i(i+100)-1| {float(worst):.4f}, Moebius {moeb:.1e}, {dt:.2f}s")


def test_08_tunnel_law():
    t0 = time.perf_counter()
    with working_precision(128):
        eps = mpfr("1e-6")
        N = tunnel_horizon(eps)
        s = [mpfr(0)]
        for _ in range(int(0.8 * N)):
            s.append(eps + s[-1] + s[-1] * s[-1])
        rep = tunnel_bound_check(s, eps, fraction=0.8)
        ratios = {}
        for e in ("1e-4", "1e-6"):
            e = mpfr(e)
            n = crossing_count(riccati_step(e), e, A=0.5)
            ratios[float(e)] = abs(n * math.sqrt(float(e)) - math.pi) / math.pi
    dt = time.perf_counter() - t0
    ok = rep.max_rel <= 1e-2 and all(r <= 0.10 for r in ratios.values()) and dt < 5
    verdict(8, "tunnel law and crossing time", ok,
            f"max rel {rep.max_rel:.2e} to i={rep.checked - 1}, crossing {ratios}, {dt:.2f}s")


def test_09_tubular_centers(thirty_dyn):
    pair = pair_at_level(thirty_dyn, 0, 2)
    ts = tubular_set(pair)
    good = [(z, d1, d2) for z, d1, d2 in ts.centers if abs(d1 - 1) <= mpfr(2) ** (24 - P) and d2 < 0]
    ok = bool(good)
    detail = f"{len(ts.centers)} centers"
    if good:
        chart = tubular_chart(pair, center=good[0][0])
        r = max(chart.residuals["d1"], chart.residuals["d2"])
        ok = ok and r <= mpfr(2) ** (20 - P)
        detail += f", |DF-1| {float(abs(good[0][1] - 1)):.1e}, chart residual {float(r):.1e}, eps {float(chart.eps):.4f}"
    verdict(9, "tubular center at the a=30 level", ok, detail)


def test_10_zero_cases(golden_map, golden_dyn):
    g = TranslatedMap(golden_map, Fraction(1, 2))
    cases = {"g=f": build_conjugacy(golden_map, golden_map, 10, dyn_f=golden_dyn, dyn_g=golden_dyn),
             "half turn": build_conjugacy(golden_map, g, 10, dyn_f=golden_dyn, dyn_g=CircleDynamics(g, 12))}
    ok, detail = True, []
    for name, conj in cases.items():
        crit = criterion_audit(conj).all_zero()
        gap = all(v == 0 for _, _, v in endpoint_gap_audit(conj)["cells"])
        fund = all(v == 0 for rep in fundamental_ratio_audit(conj).values()
                   for key in ("raw", "recentred") for _, v in rep[key].points)
        ok = ok and crit and gap and fund
        detail.append(f"{name}: criterion {crit}, endpoint gap {gap}, fundamental {fund}")
    verdict(10, "conjugacy zero cases", ok, "; ".join(detail))


def test_11_headline(golden_map, perturbed_golden_map):
    t0 = time.perf_counter()
    conj = build_conjugacy(golden_map, perturbed_golden_map, 10, depth=12)
    rep = criterion_audit(conj)
    probe = convergence_probe(conj, r=2)
    dt = time.perf_counter() - t0
    finite = all(math.isfinite(v) for v in rep.values)
    d4, d10 = rep.value_at(4), rep.value_at(10)
    ok = finite and rep.fitted and d10 < d4 and probe.points and dt < 1800
    detail = (f"D_4={d4:.4g}, D_10={d10:.4g}, lambda={rep.lam:.3g}, "
              f"d2 lambda={probe.lam if probe.lam is None else round(probe.lam, 3)}, {dt:.1f}s")
    verdict(11, "headline criterion sequence trends down", ok, detail)


def test_12_demo_determinism(tmp_path):
    invs = []
    for name in ("a", "b"):
        man = run(demo_config(str(tmp_path / name)))
        assert man.error is None, man.error
        inv = inventory(tmp_path / name)
        inv.pop("manifest.json")
        invs.append(inv)
    data = [k for k in invs[0] if k.endswith((".csv", ".json"))]
    ok = invs[0] == invs[1] and bool(data)
    verdict(12, "demo config reruns byte-identical", ok, f"{len(data)} csv/json files, {len(invs[0])} total")
