"""Internal dynamic and parameter rays by Newton continuation.

A dynamic ray of angle theta is the set {z : log phi_a(z) = t + 2 pi i theta},
t < 0; a parameter ray is {a : log Phi(a) = log r + 2 pi i theta}.  Both are
followed outward from the linear regime near 0, each Newton solve seeded at
the previously accepted point, with the branches of the Böttcher factors
carried along so that phi (resp. Phi) stays continuous on the path.
"""

from __future__ import annotations

import cmath
import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import boettcher, family
from .angles import RationalAngle
from .boettcher import BranchAmbiguous, NotInBasin

TWO_PI = 2 * math.pi

DEFAULT_TOL = 1e-12
MAX_BISECTIONS = 40
MAX_NEWTON = 40
POINTS_PER_DECADE = 64


class RayKind(enum.Enum):
    DYNAMIC = "dynamic"
    PARAMETER = "parameter"


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class RayPoint:
    potential: float
    point: complex
    terms: tuple = field(default=(), repr=False, compare=False)


@dataclass
class RayTrace:
    angle: RationalAngle
    kind: RayKind
    points: list
    status: str = "complete"
    reason: str | None = None
    a: complex | None = None  # dynamic rays only

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    def to_json(self) -> str:
        meta = {
            "angle": str(self.angle),
            "kind": self.kind.value,
            "status": self.status,
            "reason": self.reason,
            "a": None if self.a is None else [self.a.real, self.a.imag],
            "points": [
                {"potential": p.potential, "re": p.point.real, "im": p.point.imag}
                for p in self.points
            ],
        }
        return json.dumps(meta, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RayTrace":
        d = json.loads(text)
        a = None if d["a"] is None else complex(*d["a"])
        pts = [RayPoint(p["potential"], complex(p["re"], p["im"])) for p in d["points"]]
        return cls(RationalAngle.parse(d["angle"]), RayKind(d["kind"]), pts, d["status"],
                   d["reason"], a)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["potential", "re", "im"])
        for p in self.points:
            w.writerow([repr(p.potential), repr(p.point.real), repr(p.point.imag)])
        return buf.getvalue()


def _wrap(x: complex) -> complex:
    """Reduce the imaginary part into (-pi, pi]."""
    im = math.remainder(x.imag, TWO_PI)
    return complex(x.real, im)


class _StepFailed(Exception):
    pass


def _newton(residual, seed, tol, max_iter=MAX_NEWTON, max_move=None):
    """Damped complex Newton; ``residual(x)`` returns (value, derivative, eval)."""
    x = seed
    r, d, ev = residual(x)
    for _ in range(max_iter):
        if abs(r) < tol:
            return x, ev, abs(r)
        if d == 0 or not cmath.isfinite(d):
            raise _StepFailed("singular derivative")
        dx = -r / d
        if max_move is not None and abs(dx) > max_move:
            dx *= max_move / abs(dx)
        lam = 1.0
        for _ in range(12):
            try:
                xn = x + lam * dx
                rn, dn, evn = residual(xn)
            except (NotInBasin, BranchAmbiguous, ZeroDivisionError, OverflowError):
                lam /= 2
                continue
            if abs(rn) < abs(r) or abs(rn) < tol:
                break
            lam /= 2
        else:
            raise _StepFailed("line search failed")
        x, r, d, ev = xn, rn, dn, evn
    if abs(r) < tol:
        return x, ev, abs(r)
    raise _StepFailed(f"no convergence, residual {abs(r):.3g}")


def geometric_potentials(t_start: float, t_end: float, steps: int) -> np.ndarray:
    """Potentials from t_start to t_end (both negative), geometric in |t|."""
    if not t_start < t_end < 0:
        raise ValueError("need t_start < t_end < 0")
    if steps < 2:
        return np.array([t_start, t_end])
    return -np.geomspace(-t_start, -t_end, steps)


def gap_schedule(r_start: float, r_end: float, steps: int | None = None,
                 per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """Gaps u = 1 - r, geometric from 1 - r_start down to 1 - r_end."""
    if not 0 < r_start < r_end < 1:
        raise ValueError("need 0 < r_start < r_end < 1")
    u0, u1 = 1 - r_start, 1 - r_end
    if steps is None:
        steps = max(2, int(math.ceil(per_decade * math.log10(u0 / u1))) + 1)
    return np.geomspace(u0, u1, max(steps, 2))


def radius_schedule(r_start: float, r_end: float, steps: int | None = None,
                    per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    return 1 - gap_schedule(r_start, r_end, steps, per_decade)


def _continue(schedule, solve, seed_fn, tol):
    """Run ``solve`` along ``schedule`` with bisection on failure.

    ``solve(s, seed, ref)`` returns a RayPoint; ``seed_fn(points, s)``
    predicts a starting value.  Returns (points, status, reason).
    """
    points = []
    s_prev = None
    for s in schedule:
        s = float(s)
        target = s
        bisections = 0
        while True:
            try:
                ref = points[-1].terms if points else None
                seed = seed_fn(points, target)
                pt = solve(target, seed, ref)
            except (_StepFailed, NotInBasin, BranchAmbiguous, ZeroDivisionError) as exc:
                if s_prev is None or bisections >= MAX_BISECTIONS:
                    reason = "left_basin" if isinstance(exc, NotInBasin) else "newton_diverged"
                    return points, "stalled", f"{reason}: {exc}"
                target = _midpoint(s_prev, target)
                bisections += 1
                continue
            points.append(pt)
            s_prev = target
            if target == s:
                break
            target = s
    return points, "complete", None


def _midpoint(s0, s1):
    # both schedules are geometric in a positive quantity
    return math.sqrt(s0 * s1)


def trace_dynamic_ray(a: complex, theta: RationalAngle, t_start: float = -30.0,
                      t_end: float = -0.5, steps: int = 64, tol: float = DEFAULT_TOL,
                      budget: int = family.DEFAULT_BUDGET) -> RayTrace:
    """Trace R_{A_a^0}(theta) over potentials t_start .. t_end."""
    family.check_parameter(a)
    ts = geometric_potentials(t_start, t_end, steps)
    angle = TWO_PI * float(theta)

    def solve(u, seed, ref):
        t = -u
        target = complex(t, angle)

        def residual(z):
            ev = boettcher.log_boettcher(a, z, ref=ref, budget=budget, derivative=True)
            return _wrap(ev.log_value - target), ev.dlog, ev

        z, ev, _ = _newton(residual, seed, tol, max_move=None)
        return RayPoint(ev.potential, complex(z), ev.terms)

    def seed_fn(points, u):
        t = -u
        if not points:
            return cmath.exp(complex(t, angle)) / (a / 2)
        if len(points) == 1:
            return points[-1].point
        # linear predictor in log|t|
        p0, p1 = points[-2], points[-1]
        s0, s1 = math.log(-p0.potential), math.log(-p1.potential)
        if s1 == s0:
            return p1.point
        return p1.point + (p1.point - p0.point) * (math.log(u) - s1) / (s1 - s0)

    pts, status, reason = _continue(list(-ts), solve, seed_fn, tol)
    return RayTrace(theta, RayKind.DYNAMIC, pts, status, reason, a=complex(a))


class RayStalled(RuntimeError):
    pass


def ray_point(a: complex, theta: RationalAngle, t: float, steps: int = 32,
              tol: float = DEFAULT_TOL, budget: int = family.DEFAULT_BUDGET) -> RayPoint:
    """The point of R_{A_a^0}(theta) at potential t < 0, traced in from deep potential."""
    if not t < 0:
        raise ValueError("potential must be negative")
    t_start = min(-30.0, 2 * t)
    if t_start == t:
        t_start = 2 * t
    trace = trace_dynamic_ray(a, theta, t_start, t, steps, tol, budget)
    if not trace.complete:
        raise RayStalled(f"ray {theta} at a={a} stalled before potential {t}: {trace.reason}")
    last = trace.points[-1]
    return RayPoint(t, last.point, last.terms)


def _log_phi_fd(a, ref, budget, h_cap=None):
    ev = boettcher.log_big_phi(a, ref=ref, budget=budget)
    h = 1e-7 * max(1.0, abs(a))
    if h_cap is not None:
        # near the boundary the stencil must stay inside the component
        h = min(h, h_cap)
    lp = boettcher.log_big_phi(a + h, ref=ev.terms, budget=budget).log_value
    lm = boettcher.log_big_phi(a - h, ref=ev.terms, budget=budget).log_value
    return ev, (lp - lm) / (2 * h)


def trace_parameter_ray(theta: RationalAngle, r_start: float = 1e-3, r_end: float = 1 - 2**-10,
                        steps: int | None = None, tol: float = DEFAULT_TOL,
                        budget: int = family.DEFAULT_BUDGET,
                        per_decade: int = POINTS_PER_DECADE) -> RayTrace:
    """Trace R_{C^0}(theta) = Phi^{-1}(r e^{2 pi i theta}) for r_start <= r <= r_end."""
    us = gap_schedule(r_start, r_end, steps, per_decade)
    angle = TWO_PI * float(theta)

    state = {"h_cap": None}

    def solve(u, seed, ref):
        potential = math.log1p(-u)
        target = complex(potential, angle)

        def residual(x):
            # Phi(x) needs the orbit of 1 -> x -> ... to reach 0, which is
            # the membership proxy; failures surface as NotInBasin.
            ev, d = _log_phi_fd(x, ref, budget, state["h_cap"])
            return _wrap(ev.log_value - target), d, ev

        x, ev, _ = _newton(residual, seed, tol)
        return RayPoint(potential, complex(x), ev.terms)

    def seed_and_cap(points, u):
        if len(points) >= 2:
            step = abs(points[-1].point - points[-2].point)
            state["h_cap"] = max(step * 1e-3, 1e-13)
        return seed_fn(points, u)

    def seed_fn(points, u):
        if not points:
            return -math.sqrt(2) * (1 - u) * cmath.exp(1j * angle)
        if len(points) == 1:
            return points[-1].point
        p0, p1 = points[-2], points[-1]
        s0 = math.log(-math.expm1(p0.potential))
        s1 = math.log(-math.expm1(p1.potential))
        if s1 == s0:
            return p1.point
        return p1.point + (p1.point - p0.point) * (math.log(u) - s1) / (s1 - s0)

    pts, status, reason = _continue(list(us), solve, seed_and_cap, tol)
    if status == "stalled" and reason and reason.startswith("left_basin"):
        reason = "left_component" + reason[len("left_basin"):]
    return RayTrace(theta, RayKind.PARAMETER, pts, status, reason)


def _gaps(trace: RayTrace) -> np.ndarray:
    pot = np.array([p.potential for p in trace.points], dtype=float)
    if trace.kind is RayKind.PARAMETER:
        return -np.expm1(pot)
    return -pot


def _aitken(xs):
    d = np.diff(xs)
    den = d[1:] - d[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ext = xs[2:] - d[1:] ** 2 / den
    return np.where(den == 0, xs[2:], ext)


def estimate_landing(trace: RayTrace, max_octaves: int = 12) -> tuple[complex, float]:
    """Extrapolate the end of a ray to the limit 1 - r -> 0 (or t -> 0).

    The tail is resampled (cubic spline in log of the gap) at gaps u_N 2^j.
    Geometric convergence, the case for repelling and preperiodic landing
    points, is removed by iterated Aitken steps.  When successive
    differences shrink too slowly for that (parabolic landing points approach
    like 1/log(1/u)^2) the tail is instead fitted by least squares in inverse
    powers of log(1/u).  The uncertainty is the spread of the last two
    extrapolants.
    """
    from scipy.interpolate import CubicSpline

    if len(trace.points) < 4:
        raise InsufficientData(f"need at least 4 ray points, have {len(trace.points)}")
    u = _gaps(trace)
    x = np.array([p.point for p in trace.points], dtype=complex)
    s = np.log(u)
    order = np.argsort(s)
    s, x = s[order], x[order]
    keep = np.concatenate(([True], np.diff(s) > 0))
    s, x = s[keep], x[keep]
    if len(s) < 4:
        raise InsufficientData("ray tail has fewer than 4 distinct potentials")
    n_oct = int(min(max_octaves, math.floor((s[-1] - s[0]) / math.log(2) + 1e-9)))
    if n_oct >= 3:
        spline = CubicSpline(s, x)
        grid = s[0] + math.log(2) * np.arange(n_oct, -1, -1)
        xs = spline(grid)
        sig = -grid
    else:
        xs = x[::-1][-4:][::-1]
        xs = x[:4][::-1]
        sig = -s[:4][::-1]
    d = np.diff(xs)
    scale = max(1.0, float(np.max(np.abs(xs))))
    if np.all(np.abs(d[-3:]) <= 1e-15 * scale):
        return complex(xs[-1]), 0.0
    ratio = abs(d[-1] / d[-2]) if d[-2] != 0 else 0.0
    if ratio < 0.8:
        ext = _aitken(xs)
        if len(ext) >= 3:
            ext2 = _aitken(ext)
            if np.all(np.isfinite(ext2)) and len(ext2) >= 2 and \
                    abs(ext2[-1] - ext2[-2]) < abs(ext[-1] - ext[-2]):
                ext = ext2
        if len(ext) < 2:
            return complex(ext[-1]), float(abs(d[-1]))
        return complex(ext[-1]), float(abs(ext[-1] - ext[-2]))
    # sublinear tail: x = L + C sig^-2 + D sig^-3
    m = min(len(xs), 8)
    fits = []
    for cols in ((0, 2, 3), (0, 2)):
        A = np.stack([sig[-m:] ** (-float(p)) if p else np.ones(m) for p in cols], axis=1)
        coef, *_ = np.linalg.lstsq(A.astype(complex), xs[-m:], rcond=None)
        fits.append(coef[0])
    return complex(fits[0]), float(abs(fits[0] - fits[1]))
