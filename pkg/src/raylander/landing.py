"""Landing parameters of rational internal parameter rays.

For theta with doubling preperiod l and period q the landing parameter a
solves one of three equations:

* l = 0:  f_a^q(z) = z and (f_a^q)'(z) = 1 for some z (parabolic cycle);
* l = 1:  f_a^{q-1}(a) = 1, so a lies on a q-cycle through 1;
* l > 1:  f_a^{l-1+q}(a) = f_a^{l-1}(a) with a strictly preperiodic.

Each equation has many roots; the solvers are seeded from the traced
parameter ray so that Newton picks the one at the end of the ray.  All
derivatives are propagated exactly through the orbit (see ``family.Jet``).
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass, field

import mpmath

from . import family, rays
from .angles import RationalAngle, preperiod_period
from .family import Jet

PARABOLIC = "parabolic"
REPELLING = "repelling_cycle"
MISIUREWICZ = "misiurewicz"

# Separates genuine earlier collisions from solver noise.
COINCIDENCE_TOL = 1e-6
SOLVER_TOL = 1e-10
EXTENDED_DPS = 40


class LandingError(ArithmeticError):
    pass


class NewtonDiverged(LandingError):
    pass


class NonMinimalPeriod(LandingError):
    pass


class NonMinimal(LandingError):
    pass


class NotRepelling(LandingError):
    pass


@dataclass(frozen=True)
class CaseSelector:
    kind: str
    l: int
    q: int


def classify_angle(theta: RationalAngle) -> CaseSelector:
    l, q = preperiod_period(theta)
    if l == 0:
        return CaseSelector(PARABOLIC, l, q)
    if l == 1:
        return CaseSelector(REPELLING, l, q)
    return CaseSelector(MISIUREWICZ, l, q)


@dataclass
class LandingResult:
    angle: RationalAngle
    case: str
    l: int
    q: int
    parameter: complex
    residual: float
    multiplier: complex
    cycle_point: complex | None = None
    landing_orbit_point: complex | None = None
    precision: str = "double"
    convention: str = "main"
    checks: list = field(default_factory=list)
    inconsistencies: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["angle"] = str(self.angle)
        for key in ("parameter", "multiplier", "cycle_point", "landing_orbit_point"):
            v = d[key]
            d[key] = None if v is None else [float(v.real), float(v.imag)]
        d["residual"] = float(self.residual)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


class _Arith:
    """Number conversions for one precision mode."""

    def __init__(self, precision: str):
        if precision not in ("double", "extended"):
            raise ValueError(f"unknown precision {precision!r}")
        self.precision = precision
        self.extended = precision == "extended"

    def num(self, x):
        return mpmath.mpc(x) if self.extended else complex(x)

    def ctx(self):
        return mpmath.workdps(EXTENDED_DPS) if self.extended else _NullCtx()

    @property
    def newton_tol(self):
        return 1e-30 if self.extended else 1e-14


class _NullCtx:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _finite(x) -> bool:
    if isinstance(x, mpmath.mpc):
        return bool(mpmath.isfinite(x.real) and mpmath.isfinite(x.imag))
    return cmath.isfinite(x)


def _iterates(a, z, n):
    out = [z]
    for _ in range(n):
        z = family.eval(a, z)
        out.append(z)
    return out


def _deriv_along(a, z, n):
    """(f_a^n)'(z) by the chain rule."""
    d = 1
    for _ in range(n):
        d = d * family.deriv_z(a, z)
        z = family.eval(a, z)
    return d


def _newton_1d(G, x, tol, max_iter=60):
    """Newton on a scalar complex equation; ``G(x)`` returns (value, derivative)."""
    for _ in range(max_iter):
        g, dg = G(x)
        if not (_finite(g) and _finite(dg)) or dg == 0:
            raise NewtonDiverged(f"non-finite or singular step at {complex(x)}")
        step = g / dg
        x = x - step
        if abs(step) <= tol * max(1, abs(x)):
            return x
    g, _ = G(x)
    if abs(g) < 1e3 * tol:
        return x
    raise NewtonDiverged(f"residual {float(abs(g)):.3g} after {max_iter} steps")


def _parameter_jet(a, n):
    return family.jet(a, Jet.seed_parameter(a), n)


def _exact_period_ok(a, z, q, tol=COINCIDENCE_TOL):
    """Proper divisors d of q with f_a^d(z) = z (empty when the period is exact)."""
    failures = []
    for d in range(1, q):
        if q % d == 0 and abs(family.iterate(a, z, d) - z) < tol:
            failures.append(d)
    return failures


def solve_parabolic(theta: RationalAngle, seed: tuple, precision: str = "double",
                    tol: float = SOLVER_TOL) -> LandingResult:
    """Solve f_a^q(z) = z, (f_a^q)'(z) = 1 near ``seed = (a0, z0)``."""
    sel = classify_angle(theta)
    if sel.kind != PARABOLIC:
        raise ValueError(f"{theta} has preperiod {sel.l}; parabolic solver needs l = 0")
    q = sel.q
    ar = _Arith(precision)
    with ar.ctx():
        a, z = ar.num(seed[0]), ar.num(seed[1])
        for _ in range(80):
            j = family.jet(a, Jet.seed_point(z), q)
            F1, F2 = j.w - z, j.wz - 1
            J11, J12 = j.wa, j.wz - 1
            J21, J22 = j.wza, j.wzz
            if not all(_finite(v) for v in (F1, F2, J11, J12, J21, J22)):
                raise NewtonDiverged("orbit overflowed during parabolic Newton")
            det = J11 * J22 - J12 * J21
            if det == 0:
                raise NewtonDiverged("singular Jacobian")
            da = (F1 * J22 - J12 * F2) / det
            dz = (J11 * F2 - J21 * F1) / det
            a, z = a - da, z - dz
            if max(abs(da), abs(dz)) <= ar.newton_tol * max(1, abs(a), abs(z)):
                break
        else:
            raise NewtonDiverged("parabolic Newton did not settle in 80 steps")
        j = family.jet(a, Jet.seed_point(z), q)
        residual = max(abs(j.w - z), abs(j.wz - 1))
        multiplier = j.wz
        bad = _exact_period_ok(a, z, q)
        if bad:
            raise NonMinimalPeriod(f"cycle point is fixed by f^{bad[0]}, not of exact period {q}")
        checks = [
            {"check": "cycle", "value": float(abs(j.w - z))},
            {"check": "multiplier_minus_one", "value": float(abs(j.wz - 1))},
            {"check": "exact_period", "q": q, "passed": True},
        ]
        result = LandingResult(theta, PARABOLIC, 0, q, _out(a), float(residual), _out(multiplier),
                               cycle_point=_out(z), precision=precision, checks=checks)
    if result.residual > tol:
        raise NewtonDiverged(f"residual {result.residual:.3g} exceeds {tol:g}")
    return result


def _out(x):
    return complex(x)


def solve_repelling_case(theta: RationalAngle, seed=None, precision: str = "double",
                         tol: float = SOLVER_TOL) -> LandingResult:
    """Solve f_a^{q-1}(a) = 1 for the landing parameter when l = 1."""
    sel = classify_angle(theta)
    if sel.kind != REPELLING:
        raise ValueError(f"{theta} has preperiod {sel.l}; repelling solver needs l = 1")
    q = sel.q
    ar = _Arith(precision)
    with ar.ctx():
        if q == 1:
            # f^0(a) = a = 1 in closed form
            a = ar.num(1)
        else:
            if seed is None:
                raise ValueError("q > 1 needs a seed parameter")

            def G(x):
                j = _parameter_jet(x, q - 1)
                return j.w - 1, j.wa

            a = _newton_1d(G, ar.num(seed), ar.newton_tol)
        orbit = _iterates(a, a, q)
        closure = abs(orbit[q] - a)
        hit_one = abs(orbit[q - 1] - 1)
        residual = max(closure, hit_one)
        multiplier = _deriv_along(a, a, q)
        bad = _exact_period_ok(a, a, q)
        if bad:
            raise NonMinimalPeriod(f"asymptotic value has period dividing {bad[0]}, not {q}")
        if abs(multiplier) <= 1:
            raise NotRepelling(f"cycle multiplier {complex(multiplier)} has modulus <= 1 "
                               f"at a = {complex(a)}")
        checks = [
            {"check": "hits_one", "value": float(hit_one)},
            {"check": "cycle_closes", "value": float(closure)},
            {"check": "exact_period", "q": q, "passed": True},
            {"check": "repelling", "abs_multiplier": float(abs(multiplier))},
        ]
        result = LandingResult(theta, REPELLING, 1, q, _out(a), float(residual), _out(multiplier),
                               cycle_point=_out(a), precision=precision, checks=checks)
    if result.residual > tol:
        raise NewtonDiverged(f"residual {result.residual:.3g} exceeds {tol:g}")
    return result


def solve_misiurewicz(theta: RationalAngle, seed, precision: str = "double",
                      tol: float = SOLVER_TOL, convention: str = "main") -> LandingResult:
    """Solve f_a^{e+q}(a) = f_a^e(a) with e = l - 1 (``convention="main"``) or e = l.

    The root must be minimal: no earlier coincidence f^{m+q}(a) = f^m(a)
    with m < e, and the cycle reached has exact period q.
    """
    sel = classify_angle(theta)
    if sel.kind != MISIUREWICZ:
        raise ValueError(f"{theta} has preperiod {sel.l}; Misiurewicz solver needs l > 1")
    if convention not in ("main", "section"):
        raise ValueError("convention must be 'main' or 'section'")
    l, q = sel.l, sel.q
    e = l - 1 if convention == "main" else l
    ar = _Arith(precision)
    with ar.ctx():

        def G(x):
            j_e = _parameter_jet(x, e)
            j_eq = family.jet(x, j_e, q)
            return j_eq.w - j_e.w, j_eq.wa - j_e.wa

        a = _newton_1d(G, ar.num(seed), ar.newton_tol)
        orbit = _iterates(a, a, e + q)
        residual = abs(orbit[e + q] - orbit[e])
        for m in range(e):
            gap = abs(orbit[m + q] - orbit[m]) if m + q <= e + q else None
            if gap is not None and gap < COINCIDENCE_TOL:
                raise NonMinimal(f"orbit already coincides at m = {m} < {e}")
        p = orbit[e]
        bad = _exact_period_ok(a, p, q)
        if bad:
            raise NonMinimal(f"cycle has period dividing {bad[0]}, not {q}")
        strict_gap = abs(orbit[q] - a)
        if strict_gap < COINCIDENCE_TOL:
            raise NonMinimal("asymptotic value is periodic, not strictly preperiodic")
        multiplier = _deriv_along(a, p, q)
        inconsistencies = []
        if abs(multiplier) < 1 - 1e-9:
            inconsistencies.append(f"cycle multiplier {complex(multiplier)} is attracting")
        checks = [
            {"check": "preperiodic_coincidence", "value": float(residual), "exponent": e},
            {"check": "no_earlier_coincidence", "passed": True},
            {"check": "exact_period", "q": q, "passed": True},
            {"check": "strictness_gap", "value": float(strict_gap)},
            {"check": "cycle_multiplier_abs", "value": float(abs(multiplier))},
        ]
        result = LandingResult(theta, MISIUREWICZ, l, q, _out(a), float(residual), _out(multiplier),
                               landing_orbit_point=_out(p), precision=precision,
                               convention=convention, checks=checks,
                               inconsistencies=inconsistencies)
    if result.residual > tol:
        raise NewtonDiverged(f"residual {result.residual:.3g} exceeds {tol:g}")
    return result


def parabolic_seed(a_near: complex, q: int, a_guess: complex | None = None,
                   search: int = 5000) -> tuple[complex, complex]:
    """Seed (a, z) for the parabolic solver from a parameter just inside C^0.

    Near a parabolic parameter the orbit of the asymptotic value lingers by
    the nearly-parabolic cycle; the orbit point closest to solving both
    cycle equations is taken as the cycle seed.
    """
    best, best_z = math.inf, None
    z = a_near
    for _ in range(search):
        j = family.jet(a_near, Jet.seed_point(z), q)
        if not j.finite():
            break
        # near 0 the first term is small too, the multiplier term is not
        score = abs(j.w - z) + abs(j.wz - 1)
        if score < best:
            best, best_z = score, z
        z = family.eval(a_near, z)
        if abs(z) < 1e-12:
            break
    if best_z is None:
        raise NewtonDiverged("could not find a slow orbit point to seed the cycle")
    return (a_near if a_guess is None else a_guess), best_z


def solve(theta: RationalAngle, trace: rays.RayTrace, precision: str = "double",
          convention: str = "main") -> LandingResult:
    """Dispatch to the solver for theta's case, seeded from ``trace``."""
    sel = classify_angle(theta)
    limit, _ = rays.estimate_landing(trace)
    last = trace.points[-1].point
    if sel.kind == PARABOLIC:
        a0, z0 = parabolic_seed(last, sel.q, limit)
        try:
            return solve_parabolic(theta, (a0, z0), precision)
        except LandingError:
            return solve_parabolic(theta, (last, z0), precision)
    if sel.kind == REPELLING:
        return solve_repelling_case(theta, limit, precision)
    return solve_misiurewicz(theta, limit, precision, convention=convention)


def verify_landing(theta: RationalAngle, result: LandingResult, trace: rays.RayTrace,
                   tol: float = 1e-2) -> dict:
    """Compare a solved landing parameter with the extrapolated end of its ray."""
    report = {"angle": str(theta), "tolerance": tol, "issues": []}
    if result.angle != theta:
        report["issues"].append(f"result is for angle {result.angle}, not {theta}")
    if trace.angle != theta:
        report["issues"].append(f"trace is for angle {trace.angle}, not {theta}")
    if trace.kind is not rays.RayKind.PARAMETER:
        report["issues"].append("trace is not a parameter ray")
    try:
        limit, unc = rays.estimate_landing(trace)
    except rays.InsufficientData as exc:
        report["issues"].append(str(exc))
        limit, unc = None, math.inf
    report["extrapolated"] = None if limit is None else [limit.real, limit.imag]
    report["extrapolation_uncertainty"] = unc
    dist = math.inf if limit is None else abs(limit - result.parameter)
    report["distance"] = dist
    report["residual"] = result.residual
    report["trace_status"] = trace.status
    report["passed"] = (not report["issues"]) and dist <= tol and result.residual <= SOLVER_TOL
    return report
