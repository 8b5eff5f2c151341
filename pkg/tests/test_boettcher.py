import cmath
import math

import mpmath
import numpy as np
import pytest

from raylander import boettcher, family, planes
from raylander.boettcher import NotInBasin, NotInComponent

A0 = 0.4 + 0.6j


def basin_samples(a, n, seed=0, radius=3.0):
    rng = np.random.default_rng(seed)
    out = []
    rho = planes.trap_radius(a)
    while len(out) < n:
        z = complex(*rng.uniform(-radius, radius, 2))
        if z != 0 and family.orbit(a, z, trap_radius=rho).verdict is family.Verdict.CONVERGES_TO_ZERO:
            out.append(z)
    return out


def limit_oracle(a, z, n=12, dps=60):
    """phi(z) = lim (c f^n(z))^(2^-n), continuing the root from one n to the next.

    Each candidate root differs from its neighbours by a factor exp(2 pi i / 2^n);
    the one closest to the previous estimate is kept, starting from c z.
    """
    with mpmath.workdps(dps):
        a, w = mpmath.mpc(a), mpmath.mpc(z)
        c = a / 2
        est = c * w
        for k in range(1, n + 1):
            w = family.eval(a, w)
            base = mpmath.exp(mpmath.log(c * w) / 2**k)
            roots = [base * mpmath.exp(2j * mpmath.pi * j / 2**k) for j in range(2**k)]
            est = min(roots, key=lambda r: abs(r - est))
        return complex(est)


# a = 1 has its critical value on a repelling fixed point, so it is left out
@pytest.mark.parametrize("a", [A0, 0.8, -2.0 + 0.5j, 0.3 - 1.1j])
def test_functional_equation_and_green_doubling(a):
    for z in basin_samples(a, 100):
        ev = boettcher.boettcher(a, z)
        fz = family.eval(a, z)
        assert abs(boettcher.boettcher(a, fz).value - ev.value**2) < 1e-8
        assert abs(boettcher.green(a, fz) - 2 * boettcher.green(a, z)) < 1e-8
        assert abs(ev.value) < 1
        assert ev.potential == pytest.approx(math.log(abs(ev.value)), abs=1e-12)


@pytest.mark.parametrize("a, z", [(A0, 0.05 + 0.02j), (1.0, 0.08), (-2.0 + 0.5j, -0.03j),
                                  (0.3 - 1.1j, 0.04 - 0.04j)])
def test_matches_limit_definition(a, z):
    assert abs(boettcher.boettcher(a, z).value - limit_oracle(a, z)) < 1e-13


def test_derivative_at_zero():
    for a in (A0, 1.0, -3 + 1j):
        errs = []
        for h in (1e-3, 1e-4):
            d = (boettcher.boettcher(a, h).value - boettcher.boettcher(a, -h).value) / (2 * h)
            errs.append(abs(d - a / 2) / abs(a / 2))
        assert errs[1] < 1e-6
        assert errs[1] < errs[0]


def test_green_of_one_is_half_green_of_a():
    assert boettcher.green(A0, 1) == pytest.approx(boettcher.green(A0, A0) / 2, rel=1e-10)


def test_real_positive_case():
    ev = boettcher.boettcher(0.8, 0.1)
    assert ev.value.imag == 0 and ev.value.real > 0
    assert boettcher.external_angle(0.8, 0.1) == 0


def test_zero_is_special():
    assert boettcher.green(A0, 0) == -math.inf
    assert boettcher.boettcher(A0, 0).value == 0
    with pytest.raises(ValueError):
        boettcher.external_angle(A0, 0)


def test_outside_basin():
    with pytest.raises(NotInBasin):
        boettcher.green(1.0, 50.0)
    with pytest.raises(NotInBasin) as info:
        boettcher.green(-6.0, -6.0, budget=200)
    assert info.value.budget_exceeded


def test_external_angle_doubles():
    for z in basin_samples(A0, 100, seed=3):
        t = boettcher.external_angle(A0, z)
        t2 = boettcher.external_angle(A0, family.eval(A0, z))
        d = (t2 - 2 * t + 0.5) % 1 - 0.5
        assert abs(d) < 1e-8


def test_branch_tracking_with_reference():
    # a path around the origin: tracked arg keeps growing past pi
    ref = None
    last = None
    total = 0.0
    for k in range(65):
        z = 0.05 * cmath.exp(2j * math.pi * k / 64)
        ev = boettcher.log_boettcher(A0, z, ref=ref)
        if last is not None:
            total += ev.log_value.imag - last
        last, ref = ev.log_value.imag, ev.terms
    # winding once around 0 (a simple zero of phi) adds 2 pi, minus the principal-log jump
    assert abs(total) < 2 * math.pi + 1e-6


def test_extended_precision_agrees():
    z = 0.7 - 0.4j
    d = boettcher.log_boettcher(A0, z).log_value
    with mpmath.workdps(40):
        m = boettcher.log_boettcher(mpmath.mpc(A0), mpmath.mpc(z))
        f = family.eval(mpmath.mpc(A0), mpmath.mpc(z))
        m2 = boettcher.log_boettcher(mpmath.mpc(A0), f)
        assert abs(m2.value - m.value**2) < mpmath.mpf(10) ** -30
    assert abs(complex(m.log_value) - d) < 1e-12


def test_conformal_radius_and_big_phi():
    r = boettcher.conformal_radius(A0)
    assert r < 1
    assert abs(boettcher.big_phi(A0)) == pytest.approx(r, rel=1e-14)
    assert r == pytest.approx(math.exp(boettcher.green(A0, 1)), rel=1e-14)


def test_not_in_component():
    with pytest.raises(NotInComponent):
        boettcher.big_phi(20.0)
    with pytest.raises(NotInComponent):
        boettcher.conformal_radius(-6.0)
    assert not boettcher.in_main_component(20.0)
    assert boettcher.in_main_component(A0)


@pytest.mark.parametrize("m", [1e-2, 1e-3, 1e-4])
def test_big_phi_asymptote(m):
    for k in range(6):
        a = m * cmath.exp(2j * math.pi * k / 6 + 0.1j)
        assert abs(boettcher.big_phi(a) + a / math.sqrt(2)) <= 2.0 * abs(a) ** 2


def test_big_phi_maps_into_disk_injectively():
    xs = np.linspace(-1.5, 1.5, 9)
    vals = []
    for x in xs:
        for y in xs:
            a = complex(x, y)
            if a != 0 and boettcher.in_main_component(a):
                vals.append(boettcher.big_phi(a))
    vals = np.array(vals)
    assert len(vals) > 30
    assert np.all(np.abs(vals) < 1)
    d = np.abs(vals[:, None] - vals[None, :]) + np.eye(len(vals))
    assert d.min() > 1e-6


def test_linearization_radius():
    assert boettcher.linearization_radius(1.0) == 0.05
    assert boettcher.linearization_radius(10.0) == pytest.approx(0.01)
