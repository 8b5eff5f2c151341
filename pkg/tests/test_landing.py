import cmath
import math

import mpmath
import numpy as np
import pytest
from scipy.optimize import brentq

from raylander import family, landing, rays
from raylander.angles import RationalAngle
from raylander.landing import (
    MISIUREWICZ,
    PARABOLIC,
    REPELLING,
    NonMinimalPeriod,
    classify_angle,
)

R = RationalAngle.parse


def parabolic_zero_oracle():
    """Real parabolic fixed point: f(z) = z and f'(z) = 1 reduce to e^-z = z^2 - z + 1."""
    z = brentq(lambda x: math.exp(-x) - (x * x - x + 1), -3, -1, xtol=1e-15)
    return math.exp(-z) / z, z


@pytest.mark.parametrize("text, kind, l, q", [
    ("0/1", PARABOLIC, 0, 1), ("1/3", PARABOLIC, 0, 2), ("1/2", REPELLING, 1, 1),
    ("1/6", REPELLING, 1, 2), ("1/4", MISIUREWICZ, 2, 1), ("1/12", MISIUREWICZ, 2, 2),
])
def test_classify(text, kind, l, q):
    sel = classify_angle(R(text))
    assert (sel.kind, sel.l, sel.q) == (kind, l, q)


def test_zero_against_bisection_oracle():
    a_star, z_star = parabolic_zero_oracle()
    res = landing.solve_parabolic(R("0/1"), seed=(-3.3, -1.8))
    assert abs(res.parameter - a_star) < 1e-10
    assert abs(res.cycle_point - z_star) < 1e-8
    assert abs(res.multiplier - 1) < 1e-10
    assert res.residual <= 1e-10


def test_zero_matches_ray_extrapolation():
    a_star, _ = parabolic_zero_oracle()
    tr = rays.trace_parameter_ray(R("0/1"), r_end=1 - 2**-20)
    limit, _ = rays.estimate_landing(tr)
    assert abs(limit - a_star) < 1e-2
    res = landing.solve(R("0/1"), tr)
    assert abs(res.parameter - a_star) < 1e-10


def test_third_has_exact_period_two():
    res = landing.solve(R("1/3"), rays.trace_parameter_ray(R("1/3"), r_end=1 - 2**-20))
    a, z = res.parameter, res.cycle_point
    assert res.residual <= 1e-10
    assert abs(family.iterate(a, z, 2) - z) < 1e-10
    assert abs(family.eval(a, z) - z) > 1e-6
    w = family.eval(a, z)
    assert abs(family.deriv_z(a, z) * family.deriv_z(a, w) - 1) < 1e-9
    # perturbed seeds converge to the same root
    rng = np.random.default_rng(0)
    for _ in range(20):
        da, dz = (complex(*rng.normal(0, 1e-3, 2)) for _ in range(2))
        again = landing.solve_parabolic(R("1/3"), seed=(a + da, z + dz))
        assert abs(again.parameter - a) < 1e-9


def test_period_two_rejects_fixed_point():
    # the theta = 0 parabolic fixed point solves the period-2 equations too
    a_star, z_star = parabolic_zero_oracle()
    with pytest.raises(NonMinimalPeriod):
        landing.solve_parabolic(R("1/3"), seed=(a_star, z_star))


def test_half_lands_at_one():
    res = landing.solve_repelling_case(R("1/2"))
    assert res.parameter == 1
    assert abs(res.multiplier - math.e) < 1e-12


def test_sixth_is_two_cycle_through_one():
    res = landing.solve(R("1/6"), rays.trace_parameter_ray(R("1/6"), r_end=1 - 2**-20))
    a = res.parameter
    assert res.residual <= 1e-10
    assert abs(family.eval(a, a) - 1) < 1e-10
    assert abs(family.eval(a, 1) - a) < 1e-10
    assert abs(a - 1) > 1e-6
    # multiplier of the cycle {a, 1} by finite differences of f^2
    h = 1e-6
    fd = (family.iterate(a, a + h, 2) - family.iterate(a, a - h, 2)) / (2 * h)
    assert abs(fd - res.multiplier) < 1e-6 * abs(res.multiplier)
    assert abs(res.multiplier) > 1


def test_quarter_is_strictly_preperiodic():
    res = landing.solve(R("1/4"), rays.trace_parameter_ray(R("1/4"), r_end=1 - 2**-20))
    a = res.parameter
    p = family.eval(a, a)
    assert res.residual <= 1e-10
    assert abs(family.eval(a, p) - p) < 1e-10
    assert abs(p - a) > 1e-6
    assert abs(family.deriv_z(a, p)) >= 1
    assert not res.inconsistencies


def test_quarter_section_convention():
    main = landing.solve_misiurewicz(R("1/4"), seed=0.5 + 2.5j)
    # the main root also solves f^3(a) = f^2(a), one step too late, so it is not minimal
    with pytest.raises(landing.NonMinimal):
        landing.solve_misiurewicz(R("1/4"), seed=main.parameter, convention="section")
    res = landing.solve_misiurewicz(R("1/4"), seed=-1 + 2j, convention="section")
    a = res.parameter
    assert res.convention == "section"
    assert abs(family.iterate(a, a, 3) - family.iterate(a, a, 2)) < 1e-10
    assert abs(family.iterate(a, a, 2) - family.eval(a, a)) > 1e-6


def test_attracting_cycle_is_reported():
    # roots of E(z) = e^z (z - 1) + 1 other than 0: then f_a(a) = 0, a superattracting fixed point
    with mpmath.workdps(30):
        z = complex(mpmath.findroot(lambda w: mpmath.exp(w) * (w - 1) + 1, mpmath.mpc(2, 7.5)))
    assert abs(z) > 1
    res = landing.solve_misiurewicz(R("1/4"), seed=z)
    assert abs(res.parameter - z) < 1e-10
    assert res.inconsistencies


def test_extended_precision():
    for text in ("1/3", "1/6"):
        tr = rays.trace_parameter_ray(R(text), r_end=1 - 2**-20)
        d = landing.solve(R(text), tr)
        x = landing.solve(R(text), tr, precision="extended")
        assert x.precision == "extended"
        assert x.residual <= 1e-10
        assert x.residual < 1e-25
        assert abs(x.parameter - d.parameter) < 1e-9


def test_wrong_solver_for_case():
    with pytest.raises(ValueError):
        landing.solve_parabolic(R("1/2"), seed=(1, 1))
    with pytest.raises(ValueError):
        landing.solve_repelling_case(R("1/3"))
    with pytest.raises(ValueError):
        landing.solve_misiurewicz(R("1/6"), seed=1)
    with pytest.raises(ValueError):
        landing.solve_misiurewicz(R("1/4"), seed=1, convention="other")


@pytest.mark.parametrize("text", ["1/6", "1/4"])
def test_local_uniqueness(text):
    theta = R(text)
    tr = rays.trace_parameter_ray(theta, r_end=1 - 2**-20)
    root = landing.solve(theta, tr).parameter
    rng = np.random.default_rng(1)
    solver = landing.solve_repelling_case if classify_angle(theta).kind == REPELLING \
        else landing.solve_misiurewicz
    for _ in range(100):
        seed = root + 1e-2 * cmath.rect(rng.uniform(0, 1), rng.uniform(0, 2 * math.pi))
        assert abs(solver(theta, seed=seed).parameter - root) < 1e-9


def test_verify_landing():
    theta = R("1/6")
    tr = rays.trace_parameter_ray(theta, r_end=1 - 2**-20)
    res = landing.solve(theta, tr)
    report = landing.verify_landing(theta, res, tr)
    assert report["passed"] and not report["issues"]
    assert report["distance"] < 1e-2
    wrong = landing.verify_landing(R("1/3"), res, tr)
    assert not wrong["passed"]
    assert len(wrong["issues"]) == 2


def test_result_serialises():
    res = landing.solve_repelling_case(R("1/2"))
    d = res.to_dict()
    assert d["angle"] == "1/2" and d["parameter"] == [1.0, 0.0]
    assert '"case": "repelling_cycle"' in res.to_json()
