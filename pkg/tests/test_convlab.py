import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from raylander import boettcher, convlab, family, rays
from raylander.angles import RationalAngle
from raylander.convlab import (
    OutsideTransportDomain,
    PreconditionUnmet,
    SpecMismatch,
    spherical_dist,
)
from raylander.planes import CompactGridSet, GridSpec
from raylander.rays import RayPoint

A0 = 0.4 + 0.6j
THIRD = RationalAngle(1, 3)
finite_c = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)


def sphere_point(z):
    """Stereographic image on the sphere of diameter 2 centred at the origin."""
    if z is None or not math.isfinite(abs(z)):
        return np.array([0.0, 0.0, 1.0])
    m = abs(z) ** 2
    return np.array([2 * z.real, 2 * z.imag, m - 1]) / (1 + m)


def chordal_oracle(z, w):
    return float(np.linalg.norm(sphere_point(z) - sphere_point(w)))


def brute_hausdorff(A, B):
    dab = max(min(spherical_dist(a, b) for b in B) for a in A)
    dba = max(min(spherical_dist(a, b) for a in A) for b in B)
    return max(dab, dba)


def upper_half_plane_dist(p, q):
    return math.acosh(1 + abs(p - q) ** 2 / (2 * p.imag * q.imag))


@pytest.mark.parametrize("z, w, d", [(0j, None, 2.0), (0j, 1 + 0j, math.sqrt(2)),
                                     (None, None, 0.0), (1j, -1j, 2.0), (2 + 0j, 2 + 0j, 0.0)])
def test_spherical_examples(z, w, d):
    assert spherical_dist(z, w) == pytest.approx(d, abs=1e-15)


@given(finite_c, finite_c)
def test_spherical_matches_embedding(z, w):
    assert spherical_dist(z, w) == pytest.approx(chordal_oracle(z, w), abs=1e-12)


@given(finite_c, finite_c, finite_c)
def test_spherical_is_a_metric(z, w, v):
    assert spherical_dist(z, w) == spherical_dist(w, z)
    assert 0 <= spherical_dist(z, w) <= 2
    assert spherical_dist(z, v) <= spherical_dist(z, w) + spherical_dist(w, v) + 1e-12


def test_infinity_spelling():
    assert spherical_dist(complex(math.inf, 0), 0j) == 2.0
    assert spherical_dist(None, 3 + 4j) == pytest.approx(chordal_oracle(None, 3 + 4j))


def test_hausdorff_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(50):
        A = rng.normal(0, 3, (rng.integers(1, 30), 2)) @ [1, 1j]
        B = rng.normal(0, 3, (rng.integers(1, 30), 2)) @ [1, 1j]
        assert convlab.hausdorff_points(A, B) == brute_hausdorff(list(A), list(B))


def test_hausdorff_tree_path_agrees():
    rng = np.random.default_rng(5)
    A = rng.normal(0, 2, (3000, 2)) @ [1, 1j]
    B = rng.normal(0, 2, (2000, 2)) @ [1, 1j]
    exact = max(convlab._directed_exact(A, B), convlab._directed_exact(B, A))
    tree = max(convlab._directed_tree(A, B), convlab._directed_tree(B, A))
    assert tree == pytest.approx(exact, abs=1e-12)


def test_hausdorff_of_grid_sets():
    spec = GridSpec.from_view(-1, 1, -1, 1, 4)
    m1 = np.zeros((4, 4), bool)
    m1[0, 0] = True
    m2 = np.zeros((4, 4), bool)
    m2[0, 0] = m2[3, 3] = True
    A, B = CompactGridSet(spec, m1), CompactGridSet(spec, m2)
    assert convlab.hausdorff_dist(A, A) == 0
    expected = spherical_dist(spec.pixel_center(0, 0), spec.pixel_center(3, 3))
    assert convlab.hausdorff_dist(A, B) == expected


def ring_set(spec, radius):
    z = spec.centers()
    return CompactGridSet(spec, np.abs(z) >= radius)


def test_constant_sequence_is_cauchy_and_precompact():
    spec = GridSpec.from_view(-2, 2, -2, 2, 41)
    K = ring_set(spec, 1.0)
    rep = convlab.cara_limit_probe([(K, 0j)] * 4)
    assert rep.consecutive == [0.0, 0.0, 0.0] and rep.cauchy
    assert rep.precompactness.verdict == "Precompact"
    d = rep.precompactness.distances[0]
    assert 0.9 < d < 1.1
    assert rep.limit_pixels == int((~K.mask).sum())
    json.loads(rep.to_json())


def test_shrinking_holes_are_not_precompact():
    spec = GridSpec.from_view(-2, 2, -2, 2, 81)
    seq = [(ring_set(spec, r), 0j) for r in (1.0, 0.5, 0.2, 0.06)]
    rep = convlab.cara_limit_probe(seq, L=10)
    assert rep.strictly_decreasing and rep.cauchy
    pre = rep.precompactness
    assert pre.verdict == "NotPrecompact"
    assert pre.strictly_decreasing
    assert [v["index"] for v in pre.violations] == [3]


def test_mark_leaving_viewport():
    spec = GridSpec.from_view(-2, 2, -2, 2, 21)
    K = ring_set(spec, 1.0)
    pre = convlab.precompact_check([(K, 0j), (K, 5 + 0j)])
    assert pre.verdict == "NotPrecompact" and pre.distances[1] == math.inf
    assert pre.to_dict()["distances"][1] is None


def test_spec_mismatch():
    a = GridSpec.from_view(-2, 2, -2, 2, 21)
    b = GridSpec.from_view(-2, 2, -2, 2, 23)
    with pytest.raises(SpecMismatch):
        convlab.cara_limit_probe([(ring_set(a, 1), 0j), (ring_set(b, 1), 0j), (ring_set(a, 1), 0j)])


def test_probe_needs_three_sets():
    spec = GridSpec.from_view(-2, 2, -2, 2, 11)
    with pytest.raises(ValueError):
        convlab.cara_limit_probe([(ring_set(spec, 1), 0j)] * 2)


@pytest.mark.parametrize("b, x, y, d", [(0.0, -1 + 0j, -2 + 0j, math.log(2)),
                                        (1.0, -1 + 3j, -3 + 3j, math.log(2)),
                                        (0.0, -5 + 1j, -5 + 1j, 0.0)])
def test_halfplane_examples(b, x, y, d):
    assert convlab.halfplane_hyp_dist(b, x, y) == pytest.approx(d)


@given(st.floats(-10, 10), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3),
       st.floats(-5, 5))
def test_halfplane_against_upper_half_plane(b, s, t, u, h):
    # w -> h + i (b - Re w) maps {Re w < b} to the upper half-plane
    x, y, z = complex(b - s, h), complex(b - t, h), complex(b - u, h)
    d = convlab.halfplane_hyp_dist(b, x, y)
    assert d == pytest.approx(upper_half_plane_dist(complex(h, s), complex(h, t)), rel=1e-6, abs=1e-9)
    assert d == convlab.halfplane_hyp_dist(b, y, x)
    lo, mid, hi = sorted([x, y, z], key=lambda w: w.real)
    assert convlab.halfplane_hyp_dist(b, lo, hi) == pytest.approx(
        convlab.halfplane_hyp_dist(b, lo, mid) + convlab.halfplane_hyp_dist(b, mid, hi), abs=1e-9)


def test_halfplane_preconditions():
    with pytest.raises(PreconditionUnmet):
        convlab.halfplane_hyp_dist(0.0, -1 + 0j, -1 + 1j)
    with pytest.raises(PreconditionUnmet):
        convlab.halfplane_hyp_dist(0.0, 1 + 0j, -1 + 0j)


def test_fundamental_segment():
    x = rays.ray_point(A0, THIRD, -4.0)
    x0, img = convlab.fundamental_segment(A0, THIRD, x)
    assert x0 is x and img.potential == -16.0
    assert abs(family.iterate(A0, x.point, 2) - img.point) < 1e-9


def test_fundamental_segment_real():
    x = rays.ray_point(0.8, RationalAngle(0, 1), -3.0)
    _, img = convlab.fundamental_segment(0.8, RationalAngle(0, 1), x)
    assert abs(img.point.imag) < 1e-12 and img.potential == -6.0


def test_fundamental_segment_needs_periodic_angle():
    with pytest.raises(PreconditionUnmet):
        convlab.fundamental_segment(A0, RationalAngle(1, 4), rays.ray_point(A0, RationalAngle(1, 4), -4.0))


def test_potential_bound_same_point():
    g_a = boettcher.green(A0, A0)
    x = rays.ray_point(A0, THIRD, 2 * g_a)
    rep = convlab.check_potential_bound(A0, THIRD, x, x, 2.0)
    assert rep.estimate == 0 and rep.passed and rep.within_alt_bound


def test_potential_bound_on_fundamental_segment():
    g_a = boettcher.green(A0, A0)
    x = rays.ray_point(A0, THIRD, 1.5 * g_a)
    _, y = convlab.fundamental_segment(A0, THIRD, x)
    rep = convlab.check_potential_bound(A0, THIRD, x, y, 4.0)
    g_inf = boettcher.green(A0, 1)
    oracle = upper_half_plane_dist(complex(0, g_inf - x.potential), complex(0, g_inf - y.potential))
    assert rep.estimate == pytest.approx(oracle, rel=1e-9)
    assert rep.passed
    # with g(infinity) < 0 the ratio exceeds c, so log c is not a bound; log(2c - 1) is
    assert not rep.within_alt_bound
    assert rep.estimate <= math.log(2 * 4.0 - 1)
    assert rep.bound == math.log(8) and rep.alt_bound == math.log(4)
    assert set(rep.to_dict()) >= {"estimate", "bound_log_2c", "bound_log_c", "passed"}


def test_potential_bound_preconditions():
    g_a = boettcher.green(A0, A0)
    g_inf = boettcher.green(A0, 1)
    x = rays.ray_point(A0, THIRD, 2 * g_a)
    with pytest.raises(PreconditionUnmet):
        convlab.check_potential_bound(A0, THIRD, x, x, 1.0)
    with pytest.raises(PreconditionUnmet):
        convlab.check_potential_bound(20.0, THIRD, x, x, 2.0)
    high = RayPoint(g_inf / 2, 0j)
    with pytest.raises(OutsideTransportDomain):
        convlab.check_potential_bound(A0, THIRD, high, high, 2.0)
    y = rays.ray_point(A0, THIRD, 8 * g_a)
    with pytest.raises(PreconditionUnmet):
        convlab.check_potential_bound(A0, THIRD, x, y, 2.0)  # g(y) < c g(x)
    off = rays.ray_point(A0, RationalAngle(1, 5), 2 * g_a)
    with pytest.raises(PreconditionUnmet):
        convlab.check_potential_bound(A0, THIRD, off, off, 2.0)


def test_potential_bound_sweep_small():
    out = convlab.potential_bound_sweep(cases=20, seed=3)
    assert out["cases"] == out["passed"] == 20
    assert out["worst_margin"] <= 0


def test_read_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nres = 40\nview=-1,1,-1,1  # inline\n")
    assert convlab.read_config(p) == {"res": "40", "view": "-1,1,-1,1"}
    with pytest.raises(OSError):
        convlab.read_config(tmp_path / "missing.cfg")


def test_parameter_at_half():
    a = convlab.parameter_at(RationalAngle(1, 2), 0.5)
    assert abs(boettcher.big_phi(a) + 0.5) < 1e-9


def test_basin_sequence_small():
    spec = GridSpec.from_view(-1, 3, -2, 2, 40, axis_row=True)
    seq, params = convlab.basin_sequence(RationalAngle(1, 2), [3, 4, 5], spec, budget=300)
    assert len(seq) == 3 and all(u == 0j for _, u in seq)
    assert all(abs(a.imag) < 1e-9 for a in params)
    rep = convlab.cara_limit_probe(seq)
    assert len(rep.to_last) == 2
    marked, _ = convlab.basin_sequence(RationalAngle(1, 2), [3], spec, 300, marked="parameter")
    assert marked[0][1] == params[0]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_random_rational_in_range(seed):
    theta = convlab.random_rational(np.random.default_rng(seed))
    assert 1 <= theta.denominator <= 40
