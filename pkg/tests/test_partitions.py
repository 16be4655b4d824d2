from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from circle_renorm.errors import NotADiffeomorphismError
from circle_renorm.maps import RigidRotation, arnold_bicritical
from circle_renorm.numerics import Arc, CirclePoint, frac, working_precision
from circle_renorm.partitions import (
    C0,
    TWO_BRIDGES_MIN_QUOTIENT,
    CircleDynamics,
    Endpoint,
    bridge_counts,
    check_partitions,
    classical_partition,
    classical_recovery_lags,
    free_critical_point,
    is_two_bridges_level,
    koebe_audit,
    real_bounds_audit,
    refining_audit,
    schwarzian_negativity_audit,
    two_bridges_partitions,
)

P = 512


@pytest.fixture(scope="module")
def golden_rotation():
    with working_precision(P):
        rho = (gmpy2.sqrt(mpfr(5)) - 1) / 2
        return RigidRotation(rho, (0, rho / 3), precision=P), rho


def test_classical_atom_counts(golden_dyn):
    assert classical_partition(golden_dyn, 0).atom_count == 1 + golden_dyn.quotients[0]
    assert classical_partition(golden_dyn, 5).atom_count == 21
    for n in range(1, 11):
        part = classical_partition(golden_dyn, n)
        assert part.atom_count == golden_dyn.q(n) + golden_dyn.q(n + 1)
        assert part.numeric_order_consistent()
        assert part.coverage_defect() < mpfr(2) ** (12 - P)


def test_classical_nesting_keeps_provenance(thirty_dyn):
    for n in range(8):
        coarse, fine = classical_partition(thirty_dyn, n), classical_partition(thirty_dyn, n + 1)
        assert coarse.endpoint_set <= fine.endpoint_set
        # shared endpoints are the same orbit points, so their positions agree
        for e in coarse.endpoints:
            assert abs(coarse.position_of(e) - fine.position_of(e)) == 0


def test_exact_keys_match_numeric_order(thirty_dyn):
    part = classical_partition(thirty_dyn, 6)
    keys = [frac_key(thirty_dyn, e) for e in part.endpoints]
    assert keys == sorted(keys)


def frac_key(dyn, e):
    k = dyn.key(e) - dyn.key(Endpoint(C0, 0))
    return k - (k.numerator // k.denominator)


@pytest.mark.parametrize("n", range(0, 9))
def test_free_critical_point_maps_to_c1(golden_dyn, n):
    fc = free_critical_point(golden_dyn, n)
    f = golden_dyn.f
    with working_precision(P):
        y = f.iterate(fc.value, fc.steps)
        d = frac(y - f.critical_points[1])
        assert min(d, 1 - d) < mpfr(2) ** (24 - P)
    if n == 0:
        return
    # inside J_n(c0): between f^{q_n}(c0) and f^{q_{n+1}}(c0) around c0
    lam = golden_dyn.line_coordinate(fc.endpoint, n)
    lo = golden_dyn.line_coordinate(Endpoint(C0, golden_dyn.q(n + 1)), n)
    hi = golden_dyn.line_coordinate(Endpoint(C0, golden_dyn.q(n)), n)
    assert lo <= lam <= hi


def test_two_bridges_threshold(golden_dyn, thirty_dyn):
    assert TWO_BRIDGES_MIN_QUOTIENT == 23
    assert not any(is_two_bridges_level(golden_dyn, n) for n in range(10))
    assert [n for n in range(9) if is_two_bridges_level(thirty_dyn, n)] == [2]


def test_bridge_counts_thirty(thirty_dyn):
    bd = bridge_counts(thirty_dyn, 2)
    a = thirty_dyn.quotients[3]
    assert a == 30
    assert 11 <= bd.slot <= a - 10
    assert bd.right + bd.left <= a + 2
    assert bd.right <= bd.slot
    assert bd.left <= a - bd.slot + 1
    assert bd.right_case in ("A", "B") and bd.left_case in ("A", "B")


@pytest.mark.parametrize("name", ["golden_dyn", "thirty_dyn"])
def test_modified_partitions_pass_checks(name, request):
    dyn = request.getfixturevalue(name)
    parts = two_bridges_partitions(dyn, 9)
    for c in check_partitions(dyn, parts):
        assert c.passed, c
        assert c.coverage_defect < 2.0 ** (12 - P)
    for coarse, fine in zip(parts, parts[1:]):
        assert fine.refines(coarse)


def test_golden_recovers_classical_endpoints(golden_dyn):
    parts = two_bridges_partitions(golden_dyn, 9)
    lags = classical_recovery_lags(golden_dyn, parts)
    assert all(v is not None and v <= 1 for n, v in lags.items() if n <= 8)


def test_thirty_partitions_contain_the_two_bridges(thirty_dyn):
    parts = two_bridges_partitions(thirty_dyn, 4)
    assert parts[3].kind == "two-bridges"
    bd = parts[3].meta["bridges"]
    q2, q3 = thirty_dyn.q(2), thirty_dyn.q(3)
    for t in range(bd.right + 1):
        assert Endpoint(C0, q2 + t * q3) in parts[3].endpoint_set


def test_real_bounds_rotation(golden_rotation):
    f, _ = golden_rotation
    dyn = CircleDynamics(f, 14)
    ratios = [real_bounds_audit(classical_partition(dyn, n)) for n in range(12)]
    assert max(ratios) < 3


def test_real_bounds_arnold_stabilize(golden_map):
    dyn = CircleDynamics(golden_map, 14)
    ratios = [real_bounds_audit(classical_partition(dyn, n)) for n in range(4, 13)]
    slope = np.polyfit(np.arange(4, 13), np.log(ratios), 1)[0]
    assert slope < 0.02


def test_refining_rotation_closed_form(golden_rotation):
    f, rho = golden_rotation
    dyn = CircleDynamics(f, 16)
    parts = [classical_partition(dyn, n) for n in range(14)]
    mu = refining_audit(parts)
    # the largest sub-atom ratio across g levels is rho^(g-1)
    for g in range(2, 14):
        assert abs(mu[(0, g)] - float(rho) ** ((g - 1) / g)) < 1e-12


def test_refining_arnold_below_one(golden_dyn):
    parts = two_bridges_partitions(golden_dyn, 9)
    mu = refining_audit(parts)
    assert max(v for (a, b), v in mu.items() if b - a >= 2) < 1


def test_koebe_rotation_has_no_distortion(golden_rotation):
    f, _ = golden_rotation
    outer = Arc(CirclePoint.of(Fraction(25, 100), P), CirclePoint.of(Fraction(35, 100), P))
    inner = Arc(CirclePoint.of(Fraction(27, 100), P), CirclePoint.of(Fraction(33, 100), P))
    assert koebe_audit(f, outer, inner, 1).distortion == 1


def test_koebe_single_step_is_derivative_ratio():
    f = arnold_bicritical("0.3", P)
    outer = Arc(CirclePoint.of(Fraction(1, 10), P), CirclePoint.of(Fraction(4, 10), P))
    inner = Arc(CirclePoint.of(Fraction(3, 20), P), CirclePoint.of(Fraction(7, 20), P))
    rep = koebe_audit(f, outer, inner, 1, samples=2001)
    xs = np.linspace(0.15, 0.35, 20001)
    d = 1 - np.cos(4 * np.pi * xs)
    assert abs(rep.distortion - d.max() / d.min()) < 1e-3
    crossing = Arc(CirclePoint.of(Fraction(4, 10), P), CirclePoint.of(Fraction(6, 10), P))
    with pytest.raises(NotADiffeomorphismError):
        koebe_audit(f, crossing, crossing, 1)


def test_schwarzian_negative_on_fundamental_intervals(golden_dyn):
    audit = schwarzian_negativity_audit(golden_dyn, 8, samples=65)
    assert audit.n1 is not None and audit.n1 <= 6
    assert audit.negative_from(audit.n1)
