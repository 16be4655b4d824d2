from fractions import Fraction

import pytest
from gmpy2 import mpfr

from circle_renorm.errors import CombinatoricsMismatchError
from circle_renorm.maps import TranslatedMap
from circle_renorm.numerics import working_precision
from circle_renorm.partitions import CircleDynamics, Endpoint
from circle_renorm.conjugacy import (
    LevelMismatch,
    build_conjugacy,
    convergence_probe,
    criterion_audit,
    derivative_profile,
    endpoint_gap_audit,
    fundamental_ratio_audit,
    interval_log_ratio_audit,
    orbit_matching_measure,
    return_map_band,
    signature,
    triangle_check,
)

P = 512
N = 6


@pytest.fixture(scope="module")
def self_conj(golden_map, golden_dyn):
    return build_conjugacy(golden_map, golden_map, N, dyn_f=golden_dyn, dyn_g=golden_dyn)


@pytest.fixture(scope="module")
def half_turn_conj(golden_map, golden_dyn):
    g = TranslatedMap(golden_map, Fraction(1, 2))
    return build_conjugacy(golden_map, g, N, dyn_f=golden_dyn, dyn_g=CircleDynamics(g, 12))


@pytest.mark.parametrize("name", ["self_conj", "half_turn_conj"])
def test_zero_cases(name, request):
    conj = request.getfixturevalue(name)
    assert criterion_audit(conj).all_zero()
    gap = endpoint_gap_audit(conj)
    assert all(v == 0 for _, _, v in gap["cells"])
    for rep in fundamental_ratio_audit(conj).values():
        assert all(v == 0 for _, v in rep["raw"].points)
        assert all(v == 0 for _, v in rep["recentred"].points)
    assert interval_log_ratio_audit(conj).all_zero()
    assert conj.equivariance_residual() < mpfr(2) ** (24 - P)
    assert derivative_profile(conj).oscillation == 0


def test_half_turn_moves_points_by_half(half_turn_conj):
    with working_precision(P):
        for _, xf, xg in half_turn_conj.matched(4):
            d = (xg - xf) % 1
            assert abs(d - mpfr("0.5")) < mpfr(2) ** (24 - P)
        x = mpfr("0.1234")
        assert abs(half_turn_conj(x) - x - mpfr("0.5")) < mpfr(2) ** (24 - P)


def test_mismatch_names_first_level(golden_map, thirty_map, golden_dyn, thirty_dyn):
    with pytest.raises(CombinatoricsMismatchError) as info:
        build_conjugacy(golden_map, thirty_map, 4, dyn_f=golden_dyn, dyn_g=thirty_dyn)
    diff = info.value.diff
    assert isinstance(diff, LevelMismatch)
    assert (diff.level, diff.kind, diff.f, diff.g) == (3, "partial quotient", 1, 30)
    assert diff.as_dict()["level"] == 3


def test_h_is_monotone_and_increasing(self_conj):
    assert self_conj.monotone()
    with working_precision(P):
        xs = [mpfr(k) / 50 for k in range(50)]
        ys = [self_conj(x) for x in xs]
    assert all(a < b for a, b in zip(ys, ys[1:]))


def test_signature_of_symmetric_arnold(golden_map, golden_dyn):
    sig = signature(golden_map, 12, dyn=golden_dyn)
    assert abs(float(sig.delta0) - 0.5) <= sig.error_bar
    assert sig.sum_defect <= float(2 * sig.error_bar)
    assert abs(sig.delta0_birkhoff - 0.5) <= 3 * float(sig.error_bar)
    assert sig.N == 2
    assert abs(sig.d0 - 3) < 0.05 and abs(sig.d1 - 3) < 0.05


def test_orbit_matching_on_rotation_points(golden_dyn):
    # a point of the orbit of c0 has the exact measure of its index
    v = golden_dyn.value(Endpoint(0, 5))
    assert orbit_matching_measure(golden_dyn, 0, v) == (5 * golden_dyn.rho) % 1


def test_triangle_inequality_among_audits(golden_map, perturbed_golden_map):
    conj = build_conjugacy(golden_map, perturbed_golden_map, 5, depth=8)
    crit = criterion_audit(conj)
    assert all(v > 0 for v in crit.values[1:])
    assert triangle_check(conj, crit) <= 2.0 ** (40 - P)


def test_return_map_band_and_probe_on_self(self_conj):
    rb = return_map_band(self_conj, 4)
    assert rb["band"].all_zero()
    probe = convergence_probe(self_conj, 4)
    assert probe.all_zero()


def test_matching_signature_pair_decays(golden_map):
    # a perturbation that keeps the half-turn symmetry keeps both gap measures at 1/2
    from circle_renorm.maps import perturbed_family
    from circle_renorm.rotation import tune_parameter

    g = tune_parameter(lambda a: perturbed_family(a, ["0", "0.01"], P), [1] * 12).map
    sig = signature(g, 12)
    assert abs(float(sig.delta0) - 0.5) <= sig.error_bar
    rep = criterion_audit(build_conjugacy(golden_map, g, 10, depth=12))
    assert rep.value_at(10) < rep.value_at(4)
    assert rep.lam < 1


def test_mismatched_signature_pair(golden_map, perturbed_golden_map):
    f_sig = signature(golden_map, 12, birkhoff=False)
    g_sig = signature(perturbed_golden_map, 12, birkhoff=False)
    # midpoint estimates are off by at most half a bar each, so a gap above one bar is real
    assert abs(float(f_sig.delta0) - float(g_sig.delta0)) > g_sig.error_bar
