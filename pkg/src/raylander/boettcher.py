"""Böttcher coordinate and Green's function of the superattracting basin of 0.

With c = a/2 the map is f_a(z) = c z^2 R(z), R(z) = 2 (e^z (z-1) + 1) / z^2,
and R(0) = 1.  Along the orbit z_0 = z, z_{k+1} = f_a(z_k) the coordinate is

    log phi(z) = log(c z_0) + sum_k 2^{-(k+1)} Log R(z_k),

which satisfies phi(f(z)) = phi(z)^2 term by term, whatever branches the
individual logarithms take.  The orbit is followed until it is deep inside
the linearization disk, where the remaining terms are below rounding.

The logarithms of the factors are principal unless the caller passes the
terms of a nearby evaluation as ``ref``; each term is then moved to the
branch closest to its reference, which is how ray tracers keep phi
continuous along a path.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath

from . import family
from .family import DEFAULT_BUDGET

TWO_PI = 2 * math.pi

DEFAULT_TOL = 1e-8
EXTENDED_TOL = 1e-10

# Largest jump (in radians) a tracked term may make between two
# evaluations before the step is declared too coarse.
_BRANCH_SLACK = 0.5 * math.pi


class NotInBasin(ArithmeticError):
    """Orbit escaped or exhausted its budget before reaching the disk at 0."""

    def __init__(self, msg, budget_exceeded=False):
        super().__init__(msg)
        self.budget_exceeded = budget_exceeded


class BranchAmbiguous(ArithmeticError):
    """A tracked factor jumped by more than the allowed slack."""


class NotInComponent(ArithmeticError):
    """Parameter fails the membership proxy for the main hyperbolic component."""


@dataclass(frozen=True)
class BoettcherEval:
    value: complex
    depth: int
    potential: float
    log_value: complex
    terms: tuple
    dlog: complex | None = None

    @property
    def angle(self) -> float:
        return (self.log_value.imag / TWO_PI) % 1.0


def linearization_radius(a) -> float:
    return min(0.05, 0.1 / abs(a))


def _log_ratio(z):
    """Principal Log R(z), R(z) = f_a(z) / (c z^2)."""
    if isinstance(z, mpmath.mpc):
        return mpmath.log(2 * family.deriv_a(1, z) / z**2)
    core = family.deriv_a(1, z)
    if family.is_escaped(core):
        raise NotInBasin("orbit overflowed")
    return cmath.log(2 * core / (z * z))


def _stop_radius(z0):
    if isinstance(z0, mpmath.mpc):
        return mpmath.mpf(2) ** (-(mpmath.mp.prec // 2) - 8)
    return 1e-12


def log_boettcher(a, z, ref=None, budget: int = DEFAULT_BUDGET, derivative: bool = False,
                  escape_bound: float = family.DEFAULT_ESCAPE_BOUND) -> BoettcherEval:
    """Evaluate log phi_a(z) along the forward orbit of z."""
    family.check_parameter(a)
    if z == 0:
        raise ZeroDivisionError("log phi is -inf at the fixed point 0")
    mp = isinstance(a, mpmath.mpc) or isinstance(z, mpmath.mpc)
    if mp:
        a, z = mpmath.mpc(a), mpmath.mpc(z)
    c = a / 2
    stop = _stop_radius(z)
    # Terms decay like 2^{-k} |z_k|; once |z_k| < stop the tail is negligible.
    terms = []
    total = 0
    weight = 0.5
    zk = z
    q = 1 / z  # 2^{-k} (f^k)'(z) / f^k(z)
    depth = None
    lin = linearization_radius(a)
    for k in range(budget):
        if abs(zk) < lin and depth is None:
            depth = k
        if abs(zk) < stop:
            break
        if abs(zk) > escape_bound:
            raise NotInBasin(f"orbit left |z| < {escape_bound:g} at step {k}")
        t = _log_ratio(zk)
        if ref is not None and k < len(ref):
            r = ref[k]
            shift = round(float((r.imag - t.imag) / TWO_PI))
            if shift:
                t = t + complex(0, TWO_PI * shift)
            if abs(float(t.imag - r.imag)) > _BRANCH_SLACK and k < 40:
                raise BranchAmbiguous(f"factor {k} jumped by {float(t.imag - r.imag):.3g} rad")
        terms.append(t)
        total += weight * t
        if derivative:
            fz = family.deriv_z(a, zk)
            q = q * (zk * fz / family.eval(a, zk)) / 2
        weight /= 2
        zk = family.eval(a, zk)
        if not mp and family.is_escaped(zk):
            raise NotInBasin(f"orbit overflowed at step {k + 1}")
        if zk == 0:
            break
    else:
        raise NotInBasin(f"no convergence to 0 within {budget} iterations", budget_exceeded=True)
    if depth is None:
        depth = len(terms)
    if mp:
        log_v = mpmath.log(c * z) + total
        value = mpmath.exp(log_v)
        potential = float(log_v.real)
    else:
        log_v = cmath.log(c * z) + total
        value = cmath.exp(log_v)
        potential = log_v.real
    return BoettcherEval(value, depth, potential, log_v, tuple(terms), q if derivative else None)


def boettcher(a, z, tol: float = DEFAULT_TOL, ref=None, budget: int = DEFAULT_BUDGET) -> BoettcherEval:
    """phi_a(z) with phi_a(f_a(z)) = phi_a(z)^2 and phi_a(z) = (a/2) z + O(z^2).

    ``tol`` is accepted for interface symmetry; the orbit is always run to
    rounding level, which is well below any sensible tolerance.
    """
    if z == 0:
        zero = mpmath.mpc(0) if isinstance(z, mpmath.mpc) else 0j
        return BoettcherEval(zero, 0, -math.inf, complex(-math.inf, 0), ())
    return log_boettcher(a, z, ref=ref, budget=budget)


def green(a, z, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> float:
    """Green's function g_a(z) = log|phi_a(z)|, extended by g(f(z)) = 2 g(z).

    Raises ``NotInBasin`` when the orbit of z does not tend to 0.
    """
    family.check_parameter(a)
    if z == 0:
        return -math.inf
    return log_boettcher(a, z, budget=budget).potential


def external_angle(a, z, ref=None, budget: int = DEFAULT_BUDGET) -> float:
    """arg phi_a(z) / 2 pi in [0, 1)."""
    if z == 0:
        raise ValueError("the angle is undefined at 0")
    return log_boettcher(a, z, ref=ref, budget=budget).angle


def log_big_phi(a, ref=None, budget: int = DEFAULT_BUDGET) -> BoettcherEval:
    """log Phi(a) = log(-phi_a(1)), returned in a ``BoettcherEval``.

    The term list can be fed back as ``ref`` to keep Phi continuous in a.
    """
    ev = log_boettcher(a, 1 if not isinstance(a, mpmath.mpc) else mpmath.mpc(1), ref=ref,
                       budget=budget)
    if isinstance(a, mpmath.mpc):
        log_v = ev.log_value + mpmath.mpc(0, mpmath.pi)
        value = -ev.value
    else:
        log_v = ev.log_value + complex(0, math.pi)
        value = -ev.value
    return BoettcherEval(value, ev.depth, ev.potential, log_v, ev.terms)


def in_main_component(a, budget: int = DEFAULT_BUDGET, tol: float = 1e-6) -> bool:
    """Operational proxy for a in C^0.

    The orbit of the asymptotic value must converge to 0 and the potentials
    must obey g_a(a) = 2 g_a(1).  Capture components pass the same test, so
    callers that need to tell them apart track continuity from small |a|
    (rays) or grid connectivity to a = 0 (planes).
    """
    if a == 0:
        return True
    rec = family.orbit(a, a, budget=budget, keep_samples=False)
    if rec.verdict is not family.Verdict.CONVERGES_TO_ZERO:
        return False
    try:
        ga = green(a, a, budget=budget)
        g1 = green(a, 1, budget=budget)
    except NotInBasin:
        return False
    return abs(ga - 2 * g1) <= tol * max(1.0, abs(ga))


def conformal_radius(a, budget: int = DEFAULT_BUDGET) -> float:
    """r(a) = |phi_a(1)| = exp(g_a(1))."""
    if not in_main_component(a, budget=budget):
        raise NotInComponent(f"orbit of a={a} does not converge to 0")
    return math.exp(green(a, 1, budget=budget))


def big_phi(a, ref=None, budget: int = DEFAULT_BUDGET) -> complex:
    """Phi(a) = phi_a(infinity) = -phi_a(1), a point of the unit disk."""
    if not in_main_component(a, budget=budget):
        raise NotInComponent(f"orbit of a={a} does not converge to 0")
    return log_big_phi(a, ref=ref, budget=budget).value
