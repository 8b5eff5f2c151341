"""Metrics on pixel sets, Carathéodory-limit probes and hyperbolic bounds along rays."""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import boettcher, family, planes, rays
from .angles import RationalAngle
from .planes import CompactGridSet, EmptySet, GridSpec  # noqa: F401  (re-exported)
from .rays import RayPoint

# Pair counts up to this size use the exact all-pairs kernel.
EXACT_PAIR_LIMIT = 4_000_000
_CHUNK = 2048

DEFAULT_L = 50.0
BOUND_SLACK = 1e-12
ON_RAY_TOL = 1e-8


class SpecMismatch(ValueError):
    pass


class PreconditionUnmet(ValueError):
    pass


class OutsideTransportDomain(ValueError):
    pass


class MarkedInSet(ValueError):
    """The marked point sits on a pixel of the compact set, not in its complement."""


def _is_inf(z) -> bool:
    return z is None or (isinstance(z, (complex, float, int)) and not math.isfinite(abs(z)))


def spherical_dist(z, w) -> float:
    """Chordal distance on the Riemann sphere of diameter 2; None or inf is the point at infinity."""
    zi, wi = _is_inf(z), _is_inf(w)
    if zi and wi:
        return 0.0
    if zi or wi:
        u = w if zi else z
        return 2.0 / math.sqrt(1.0 + (u.real * u.real + u.imag * u.imag))
    d = z - w
    # |d| spelled out so the vectorized kernels reproduce it bit for bit
    num = 2.0 * math.sqrt(d.real * d.real + d.imag * d.imag)
    den = math.sqrt((1.0 + (z.real * z.real + z.imag * z.imag))
                    * (1.0 + (w.real * w.real + w.imag * w.imag)))
    return num / den


def _chordal_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # same operation order as spherical_dist, so values agree bit for bit
    na = 1.0 + (A.real * A.real + A.imag * A.imag)
    nb = 1.0 + (B.real * B.real + B.imag * B.imag)
    d = A[:, None] - B[None, :]
    num = 2.0 * np.sqrt(d.real * d.real + d.imag * d.imag)
    return num / np.sqrt(na[:, None] * nb[None, :])


def _directed_exact(A: np.ndarray, B: np.ndarray) -> float:
    best = 0.0
    for k in range(0, A.size, _CHUNK):
        m = _chordal_matrix(A[k:k + _CHUNK], B).min(axis=1).max()
        best = max(best, float(m))
    return best


def _embed(z: np.ndarray) -> np.ndarray:
    m = z.real * z.real + z.imag * z.imag
    return np.stack([2 * z.real / (1 + m), 2 * z.imag / (1 + m), (m - 1) / (1 + m)], axis=1)


def _directed_tree(A: np.ndarray, B: np.ndarray) -> float:
    # chordal distance is Euclidean distance between stereographic images
    tree = cKDTree(_embed(B))
    _, nearest = tree.query(_embed(A))
    d = _chordal_pairs(A, B[nearest])
    return float(d.max())


def _chordal_pairs(A, B):
    na = 1.0 + (A.real * A.real + A.imag * A.imag)
    nb = 1.0 + (B.real * B.real + B.imag * B.imag)
    d = A - B
    return 2.0 * np.sqrt(d.real * d.real + d.imag * d.imag) / np.sqrt(na * nb)


def hausdorff_points(A: np.ndarray, B: np.ndarray) -> float:
    A = np.asarray(A, dtype=complex).ravel()
    B = np.asarray(B, dtype=complex).ravel()
    if A.size == 0 or B.size == 0:
        raise EmptySet("Hausdorff distance needs nonempty sets")
    if A.size * B.size <= EXACT_PAIR_LIMIT:
        return max(_directed_exact(A, B), _directed_exact(B, A))
    return max(_directed_tree(A, B), _directed_tree(B, A))


def hausdorff_dist(A: CompactGridSet, B: CompactGridSet) -> float:
    """Spherical Hausdorff distance between the pixel centers of A and B.

    Exact (same arithmetic as a double loop over ``spherical_dist``) while
    |A| |B| stays below ``EXACT_PAIR_LIMIT``; larger sets use a k-d tree on
    the sphere, whose nearest neighbours can differ from the exact ones only
    on ties at rounding level.
    """
    return hausdorff_points(A.points(), B.points())


def _pixel_diag_spherical(spec: GridSpec) -> float:
    # chordal length of one pixel diagonal at its largest, near the origin
    return 2.0 * math.hypot(spec.dx, spec.dy)


def _complement_component(K: CompactGridSet, u: complex) -> np.ndarray | None:
    """Mask of the 4-connected component of grid \\ K containing u (None if u is off-grid)."""
    try:
        i, j = K.spec.pixel_of(u)
    except IndexError:
        return None
    free = ~K.mask
    if not free[j, i]:
        raise MarkedInSet(f"marked point {u} lies on a pixel of the compact set")
    comp, _ = ndimage.label(free, structure=planes._CROSS)
    return comp == comp[j, i]


def boundary_distance(spec: GridSpec, U: np.ndarray, u: complex) -> float:
    """Euclidean distance from u to the nearest pixel center outside U.

    A component filling the whole grid is bounded by the viewport itself.
    """
    outside = ~U
    if not outside.any():
        x0, y1 = spec.x0, spec.y1
        x1, y0 = x0 + 2 * spec.half_width, y1 - 2 * spec.half_height
        return float(min(u.real - x0, x1 - u.real, u.imag - y0, y1 - u.imag))
    js, is_ = np.nonzero(outside)
    pts = (spec.x0 + (is_ + 0.5) * spec.dx) + 1j * (spec.y1 - (js + 0.5) * spec.dy)
    return float(np.abs(pts - u).min())


def _common_spec(sequence):
    spec = sequence[0][0].spec
    for K, _ in sequence[1:]:
        if K.spec != spec:
            raise SpecMismatch("all sets must live on one grid")
    return spec


@dataclass
class PrecompactVerdict:
    verdict: str  # "Precompact" or "NotPrecompact"
    distances: list
    observed: tuple
    L: float
    violations: list = field(default_factory=list)
    strictly_decreasing: bool = False

    def to_dict(self) -> dict:
        fin = lambda x: x if math.isfinite(x) else None  # noqa: E731
        return {"verdict": self.verdict, "distances": [fin(d) for d in self.distances],
                "observed_min": fin(self.observed[0]), "observed_max": fin(self.observed[1]),
                "L": self.L, "violations": self.violations,
                "strictly_decreasing": self.strictly_decreasing}


def precompact_check(sequence, L: float = DEFAULT_L) -> PrecompactVerdict:
    """Grid form of the criterion 1/L <= d_E(u_n, dU_n) <= L with bounded marks.

    ``sequence`` holds pairs (K_n, u_n); U_n is the complement component of
    K_n containing u_n.  Marks that leave the viewport count as unbounded.
    """
    if not sequence:
        raise ValueError("empty sequence")
    if L < 1:
        raise ValueError("L must be at least 1")
    spec = _common_spec(sequence)
    dists, violations = [], []
    for n, (K, u) in enumerate(sequence):
        if u is None:
            raise ValueError("precompactness needs marked points")
        U = _complement_component(K, u)
        if U is None:
            dists.append(math.inf)
            violations.append({"index": n, "reason": "mark left the viewport"})
            continue
        d = boundary_distance(spec, U, u)
        dists.append(d)
        if not 1 / L <= d <= L:
            violations.append({"index": n, "reason": f"distance {d:.6g} outside [1/L, L]"})
    finite = [d for d in dists if math.isfinite(d)]
    observed = (min(finite), max(finite)) if finite else (math.inf, math.inf)
    decreasing = all(b < a for a, b in zip(dists, dists[1:]))
    verdict = "NotPrecompact" if violations else "Precompact"
    return PrecompactVerdict(verdict, dists, observed, L, violations, decreasing)


@dataclass
class ConvergenceReport:
    consecutive: list  # d_H(K_n, K_{n+1})
    to_last: list  # d_H(K_n, K_N)
    cauchy_modulus: list  # sup_{i, j >= m} d_H(K_i, K_j)
    tolerance: float  # two pixel diagonals
    cauchy: bool
    strictly_decreasing: bool
    marked_steps: list  # spherical distances between consecutive marks
    limit_pixels: int
    limit_marked: complex | None
    limit_bbox: tuple
    precompactness: PrecompactVerdict | None = None
    limit_mask: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        m = self.limit_marked
        return {
            "hausdorff_consecutive": self.consecutive,
            "hausdorff_to_last": self.to_last,
            "cauchy_modulus": self.cauchy_modulus,
            "tolerance": self.tolerance,
            "cauchy": self.cauchy,
            "strictly_decreasing": self.strictly_decreasing,
            "marked_steps": self.marked_steps,
            "limit_component": {"pixels": self.limit_pixels,
                                "marked": None if m is None else [m.real, m.imag],
                                "bbox": list(self.limit_bbox)},
            "precompactness": None if self.precompactness is None else self.precompactness.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def cara_limit_probe(sequence, L: float = DEFAULT_L) -> ConvergenceReport:
    """Grid-level check of Hausdorff-Cauchy K_n and the kernel component at u_n.

    The sequence is Cauchy when the distances to the last set decrease
    strictly or all stay within two pixel diagonals.
    """
    if len(sequence) < 3:
        raise ValueError("need at least three elements")
    spec = _common_spec(sequence)
    pts = [K.points() for K, _ in sequence]
    N = len(pts)
    D = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            D[i, j] = D[j, i] = hausdorff_points(pts[i], pts[j])
    consecutive = [float(D[i, i + 1]) for i in range(N - 1)]
    to_last = [float(D[i, N - 1]) for i in range(N - 1)]
    modulus = [float(D[m:, m:].max()) for m in range(N)]
    tol = 2 * _pixel_diag_spherical(spec)
    decreasing = all(b < a for a, b in zip(to_last, to_last[1:]))
    cauchy = decreasing or max(to_last) <= tol
    marks = [u for _, u in sequence]
    steps = [spherical_dist(u, v) if u is not None and v is not None else None
             for u, v in zip(marks, marks[1:])]
    K_last, u_last = sequence[-1]
    mask = None
    bbox = ()
    if u_last is not None:
        mask = _complement_component(K_last, u_last)
    if mask is not None:
        js, is_ = np.nonzero(mask)
        bbox = (int(is_.min()), int(js.min()), int(is_.max()), int(js.max()))
    pre = precompact_check(sequence, L) if all(u is not None for u in marks) else None
    return ConvergenceReport(consecutive, to_last, modulus, tol, bool(cauchy), decreasing, steps,
                             0 if mask is None else int(mask.sum()), u_last, bbox, pre, mask)


# --- hyperbolic estimates along dynamic rays -------------------------------

def halfplane_hyp_dist(boundary_re: float, x_hat: complex, y_hat: complex) -> float:
    """Hyperbolic distance of two points on one horizontal of the half-plane bounded at Re = boundary_re."""
    if x_hat.imag != y_hat.imag:
        raise PreconditionUnmet("points must share their imaginary part")
    dx, dy = boundary_re - x_hat.real, boundary_re - y_hat.real
    if dx == 0 or dy == 0 or (dx > 0) != (dy > 0):
        raise PreconditionUnmet("points must lie strictly on one side of the boundary")
    dx, dy = abs(dx), abs(dy)
    # larger over smaller keeps the value identical under swapping x and y
    return math.log(max(dx, dy) / min(dx, dy))


def fundamental_segment(a: complex, theta: RationalAngle, x: RayPoint,
                        tol: float = rays.DEFAULT_TOL) -> tuple[RayPoint, RayPoint]:
    """The endpoints x and f_a^q(x) of the fundamental segment of a periodic ray."""
    l, q = theta.preperiod_period()
    if l != 0:
        raise PreconditionUnmet(f"{theta} is not periodic under doubling")
    if not x.potential < 0:
        raise PreconditionUnmet("ray points have negative potential")
    img = rays.ray_point(a, theta, x.potential * 2**q, tol=tol)
    return x, img


@dataclass
class PotentialBoundReport:
    estimate: float
    bound: float  # log(2c)
    alt_bound: float  # log c, the q log 2 form when c = 2^q
    g_infinity: float
    g_x: float
    g_y: float
    c: float
    passed: bool

    @property
    def within_alt_bound(self) -> bool:
        return self.estimate <= self.alt_bound + BOUND_SLACK

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "bound_log_2c": self.bound,
                "bound_log_c": self.alt_bound, "g_infinity": self.g_infinity,
                "g_x": self.g_x, "g_y": self.g_y, "c": self.c, "passed": self.passed,
                "within_log_c": self.within_alt_bound}


def _check_on_ray(a, theta, p: RayPoint):
    ev = boettcher.log_boettcher(a, p.point)
    if abs(ev.potential - p.potential) > ON_RAY_TOL * max(1.0, abs(p.potential)):
        raise PreconditionUnmet(f"point {p.point} has potential {ev.potential}, not {p.potential}")
    dth = (ev.angle - float(theta) + 0.5) % 1.0 - 0.5
    if abs(dth) > ON_RAY_TOL:
        raise PreconditionUnmet(f"point {p.point} is off the ray {theta}")


def check_potential_bound(a: complex, theta: RationalAngle, x: RayPoint, y: RayPoint,
                          c: float, budget: int = family.DEFAULT_BUDGET) -> PotentialBoundReport:
    """Half-plane estimate of the hyperbolic distance from x to y against log(2c).

    Both points are moved by log phi_a into the half-plane Re < g_a(infinity),
    where g_a(infinity) = g_a(1) = g_a(a) / 2, and sit on the horizontal
    Im = 2 pi theta.  Preconditions: c > 1, a in C^0 and
    c g(x) <= g(y) <= g(x) <= g(a).
    """
    if not c > 1:
        raise PreconditionUnmet("c must exceed 1")
    if not boettcher.in_main_component(a, budget=budget):
        raise PreconditionUnmet(f"a = {a} fails the main-component test")
    g_inf = boettcher.green(a, 1, budget=budget)
    g_a = boettcher.green(a, a, budget=budget)
    if not g_inf < 0:
        raise PreconditionUnmet(f"a = {a} is numerically on the boundary of C^0 (g(1) = {g_inf})")
    gx, gy = x.potential, y.potential
    if max(gx, gy) >= g_inf:
        raise OutsideTransportDomain(f"potentials {gx}, {gy} reach g(infinity) = {g_inf}")
    if not (c * gx <= gy <= gx <= g_a):
        raise PreconditionUnmet(f"need c g(x) <= g(y) <= g(x) <= g(a); got {gx}, {gy}, {g_a}")
    for p in (x, y):
        _check_on_ray(a, theta, p)
    h = 2 * math.pi * float(theta)
    est = halfplane_hyp_dist(g_inf, complex(gx, h), complex(gy, h))
    bound = math.log(2 * c)
    return PotentialBoundReport(est, bound, math.log(c), g_inf, gx, gy, c,
                                est <= bound + BOUND_SLACK)


# --- experiments -----------------------------------------------------------

def read_config(path) -> dict:
    """Plain key=value lines; '#' starts a comment."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    parser.read_string("[config]\n" + text)
    return dict(parser["config"])


def parameter_at(theta: RationalAngle, r: float, tol: float = rays.DEFAULT_TOL) -> complex:
    """Point of the parameter ray of angle theta at radius r."""
    trace = rays.trace_parameter_ray(theta, r_end=r, tol=tol)
    if not trace.complete:
        raise rays.RayStalled(f"parameter ray {theta} stalled before r = {r}: {trace.reason}")
    return trace.points[-1].point


def basin_sequence(theta: RationalAngle, ns, spec: GridSpec, budget: int, marked: str = "zero",
                   threads: int = 1):
    """(K_n, u_n) along the parameter ray, r_n = 1 - 2^-n.

    K_n is the grid complement of the pixel component of A_{a_n}^0 at 0;
    u_n is 0 or a_n depending on ``marked``.
    """
    seq, params = [], []
    for n in ns:
        a = parameter_at(theta, 1 - 2.0**-n)
        grid = planes.render_dynamical(a, spec, budget=budget, threads=threads)
        U = planes.extract_component(grid, 0j)
        K = CompactGridSet(spec, ~U.mask)
        u = 0j if marked == "zero" else a
        seq.append((K, u))
        params.append(a)
    return seq, params


def random_rational(rng, max_denominator: int = 40) -> RationalAngle:
    q = int(rng.integers(1, max_denominator + 1))
    return RationalAngle(int(rng.integers(0, q)), q)


def random_main_parameter(rng, radius: float = 3.0, budget: int = 2000,
                          min_depth: float = 1e-2) -> complex:
    """Uniform sample of C^0 within |a| <= radius, at least ``min_depth`` below r = 1 in potential."""
    while True:
        a = complex(*rng.uniform(-radius, radius, 2))
        if a == 0 or abs(a) > radius or not boettcher.in_main_component(a, budget=budget):
            continue
        if boettcher.green(a, 1, budget=budget) <= -min_depth:
            return a


def potential_bound_sweep(cases: int = 1000, seed: int = 0, budget: int = 2000) -> dict:
    """Randomized (a, theta, x, y, c) meeting the preconditions; counts passes."""
    rng = np.random.default_rng(seed)
    worst, passed, records = -math.inf, 0, []
    for _ in range(cases):
        a = random_main_parameter(rng, budget=budget)
        theta = random_rational(rng)
        c = float(rng.uniform(1.0, 8.0))
        if c <= 1:
            c = 1.5
        g_a = boettcher.green(a, a, budget=budget)
        tx = g_a * float(rng.uniform(1.0, 4.0))
        ty = float(rng.uniform(c * tx, tx))
        x = rays.ray_point(a, theta, tx, budget=budget)
        y = rays.ray_point(a, theta, ty, budget=budget)
        rep = check_potential_bound(a, theta, x, y, c, budget=budget)
        passed += rep.passed
        worst = max(worst, rep.estimate - rep.bound)
        records.append({"a": [a.real, a.imag], "theta": str(theta), "c": c,
                        "estimate": rep.estimate, "bound": rep.bound})
    return {"cases": cases, "passed": passed, "worst_margin": worst, "seed": seed,
            "records": records}
