"""Named verification suites behind ``raylander verify``.

Each suite returns a dict with a ``passed`` flag and the measured values,
so the CLI can print machine-readable results and pick its exit code.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.optimize import minimize_scalar

from . import boettcher, convlab, family, planes, rays
from .angles import RationalAngle

BOUND_CLAIM = 9.2324
RADIUS_CLAIM = 0.4054
BOUND_TOL = 5e-3
RADIUS_LIMIT = 0.7626

CORRESPONDENCE_ANGLES = ("0/1", "1/3", "1/2", "1/4", "1/6")


def _check(name, value, ok, **extra):
    d = {"name": name, "value": value, "passed": bool(ok)}
    d.update(extra)
    return d


def _suite(name, checks):
    return {"suite": name, "passed": all(c["passed"] for c in checks), "checks": checks}


def boundedness_minimum():
    """Minimize 1 / (1 + 3r/2 - e^r) over (0, 0.7626); returns (min, argmin)."""
    h = lambda r: 1.0 / (1.0 + 1.5 * r - math.expm1(r) - 1.0)  # noqa: E731
    res = minimize_scalar(h, bounds=(1e-6, RADIUS_LIMIT - 1e-6), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.fun), float(res.x)


def bounds(**_):
    m, r = boundedness_minimum()
    return _suite("bounds", [
        _check("minimum", m, abs(m - BOUND_CLAIM) <= BOUND_TOL, claim=BOUND_CLAIM,
               closed_form=1 / (1.5 * math.log(1.5) - 0.5)),
        _check("argmin", r, abs(r - RADIUS_CLAIM) <= BOUND_TOL, claim=RADIUS_CLAIM,
               closed_form=math.log(1.5)),
    ])


def asymptote_order(moduli=(1e-2, 1e-3, 1e-4), directions=8):
    """Least-squares slope of log |Phi(a) + a/sqrt 2| against log |a|."""
    xs, ys = [], []
    for m in moduli:
        for k in range(directions):
            a = m * cmath.exp(2j * math.pi * (k + 0.5) / directions)
            err = abs(boettcher.big_phi(a) + a / math.sqrt(2))
            xs.append(math.log(m))
            ys.append(math.log(err))
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope


def asymptote(**_):
    p = asymptote_order()
    return _suite("asymptote", [_check("order", p, p >= 1.9, threshold=1.9)])


def correspondence(tol=1e-6, r_end=1 - 2**-10, **_):
    checks = []
    for text in CORRESPONDENCE_ANGLES:
        theta = RationalAngle.parse(text)
        trace = rays.trace_parameter_ray(theta, r_end=r_end)
        worst_g = worst_t = 0.0
        for p in trace.points:
            a = p.point
            log_r = p.potential
            ev = boettcher.log_boettcher(a, a)
            worst_g = max(worst_g, abs(ev.potential - 2 * log_r))
            dth = (ev.angle - float(theta.double()) + 0.5) % 1.0 - 0.5
            worst_t = max(worst_t, abs(dth))
        checks.append(_check(f"{text} potential", worst_g, worst_g < tol, points=len(trace.points)))
        checks.append(_check(f"{text} angle", worst_t, worst_t < tol))
    return _suite("correspondence", checks)


def sample_basin_points(a, count, rng, radius=3.0, budget=2000):
    pts = []
    while len(pts) < count:
        z = complex(*rng.uniform(-radius, radius, 2))
        if z == 0:
            continue
        rec = family.orbit(a, z, budget=budget, trap_radius=planes.trap_radius(a),
                           keep_samples=False)
        if rec.verdict is family.Verdict.CONVERGES_TO_ZERO:
            pts.append(z)
    return pts


def boettcher_parameters():
    params = [0.4 + 0.6j]
    for text in CORRESPONDENCE_ANGLES:
        params.append(convlab.parameter_at(RationalAngle.parse(text), 0.9))
    return params


def boettcher_laws(count=100, seed=0, tol=1e-8, **_):
    rng = np.random.default_rng(seed)
    checks = []
    for a in boettcher_parameters():
        worst_phi = worst_g = 0.0
        for z in sample_basin_points(a, count, rng):
            fz = family.eval(a, z)
            p = boettcher.boettcher(a, z).value
            worst_phi = max(worst_phi, abs(boettcher.boettcher(a, fz).value - p * p))
            worst_g = max(worst_g, abs(boettcher.green(a, fz) - 2 * boettcher.green(a, z)))
        h = 1e-7
        slope = boettcher.boettcher(a, h).value / h
        rel = abs(slope - a / 2) / abs(a / 2)
        label = f"a={a.real:.6g}{a.imag:+.6g}i"
        checks.append(_check(f"{label} functional equation", worst_phi, worst_phi < tol))
        checks.append(_check(f"{label} green doubling", worst_g, worst_g < tol))
        checks.append(_check(f"{label} derivative at 0", rel, rel < 1e-6))
    return _suite("boettcher", checks)


def brute_hausdorff(A, B):
    da = max(min(convlab.spherical_dist(x, y) for y in B) for x in A)
    db = max(min(convlab.spherical_dist(x, y) for y in A) for x in B)
    return max(da, db)


def hausdorff_oracle(cases=50, seed=0, size=40, max_pixels=200, **_):
    rng = np.random.default_rng(seed)
    spec = planes.GridSpec.from_view(-3, 3, -3, 3, size)
    mismatches = 0
    for _ in range(cases):
        masks = []
        for _ in range(2):
            m = np.zeros((size, size), dtype=bool)
            k = int(rng.integers(1, max_pixels + 1))
            m.flat[rng.choice(size * size, k, replace=False)] = True
            masks.append(convlab.CompactGridSet(spec, m))
        A, B = masks
        if convlab.hausdorff_dist(A, B) != brute_hausdorff(A.points(), B.points()):
            mismatches += 1
    return _suite("hausdorff-oracle", [_check("mismatches", mismatches, mismatches == 0,
                                              cases=cases)])


CONVERGENCE_VIEW = (-1.0, 3.0, -2.0, 2.0)


def convergence(res=400, budget=2000, theta="1/2", ns=range(3, 9), threads=1, L=convlab.DEFAULT_L,
                view=CONVERGENCE_VIEW, **_):
    theta = RationalAngle.parse(theta) if isinstance(theta, str) else theta
    spec = planes.GridSpec.from_view(*view, res, axis_row=True)
    seq, params = convlab.basin_sequence(theta, ns, spec, budget, threads=threads)
    rep = convlab.cara_limit_probe(seq, L)
    marked = [(K, a) for (K, _), a in zip(seq, params)]
    pre = convlab.precompact_check(marked, L)
    return _suite("convergence", [
        _check("basin tail distances strictly decreasing", rep.to_last, rep.strictly_decreasing),
        _check("basin Cauchy", rep.cauchy_modulus, rep.cauchy),
        _check("marked distances strictly decreasing", pre.distances, pre.strictly_decreasing),
        _check("marked verdict", pre.verdict, pre.verdict == "NotPrecompact"),
    ])


SUITES = {
    "bounds": bounds,
    "asymptote": asymptote,
    "correspondence": correspondence,
    "boettcher": boettcher_laws,
    "hausdorff-oracle": hausdorff_oracle,
    "convergence": convergence,
}
