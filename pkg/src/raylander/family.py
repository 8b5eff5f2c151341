"""The entire family f_a(z) = a (e^z (z - 1) + 1) and its polynomial analog.

Everything here works on plain ``complex`` (double precision) and on
``mpmath.mpc`` (extended precision); the type of the inputs picks the
arithmetic.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import mpmath

DEFAULT_BUDGET = 10_000
DEFAULT_ESCAPE_BOUND = 1e10
DEFAULT_TRAP_RADIUS = 1e-3

# Saturated value returned when e^z (or the product around it) overflows.
ESCAPED = complex(math.inf, 0.0)

# Below this modulus e^z (z - 1) + 1 is summed as a Taylor series; the
# closed form cancels catastrophically near the double zero at 0.
_SERIES_RADIUS = 0.5
_SERIES_TERMS = 24


class ParameterError(ValueError):
    pass


def is_escaped(w) -> bool:
    """True for the overflow sentinel and any non-finite value."""
    if isinstance(w, mpmath.mpc):
        return not (mpmath.isfinite(w.real) and mpmath.isfinite(w.imag))
    return not cmath.isfinite(w)


def _is_mp(*xs) -> bool:
    return any(isinstance(x, (mpmath.mpc, mpmath.mpf)) for x in xs)


def _exp(z):
    if _is_mp(z):
        return mpmath.exp(z)
    try:
        return cmath.exp(z)
    except OverflowError:
        return ESCAPED


def check_parameter(a) -> None:
    if a == 0:
        raise ParameterError("parameter a must be nonzero")


def _core(z):
    """e^z (z - 1) + 1, i.e. f_a(z) / a."""
    if _is_mp(z):
        if abs(z) < _SERIES_RADIUS:
            # sum_{k>=2} (k-1) z^k / k!
            total = mpmath.mpc(0)
            term = z  # z^k / k! at k = 1
            k = 1
            eps = mpmath.mpf(2) ** (-mpmath.mp.prec - 8)
            while True:
                k += 1
                term = term * z / k
                inc = (k - 1) * term
                total += inc
                if abs(inc) <= eps * abs(total):
                    return total
        return mpmath.exp(z) * (z - 1) + 1
    if is_escaped(z):
        return ESCAPED
    if abs(z) < _SERIES_RADIUS:
        total = 0j
        term = z
        for k in range(2, _SERIES_TERMS + 2):
            term = term * z / k
            total += (k - 1) * term
        return total
    e = _exp(z)
    if is_escaped(e):
        return ESCAPED
    w = e * (z - 1) + 1
    return w if cmath.isfinite(w) else ESCAPED


def eval(a, z):
    """f_a(z).  Overflow yields ``ESCAPED`` instead of inf/nan arithmetic."""
    c = _core(z)
    if not _is_mp(c) and is_escaped(c):
        return ESCAPED
    w = a * c
    if not _is_mp(w) and not cmath.isfinite(w):
        return ESCAPED
    return w


def deriv_z(a, z):
    """f_a'(z) = a z e^z."""
    e = _exp(z)
    if not _is_mp(e) and is_escaped(e):
        return ESCAPED
    w = a * z * e
    if not _is_mp(w) and not cmath.isfinite(w):
        return ESCAPED
    return w


def deriv_a(a, z):
    """Partial derivative in the parameter: e^z (z - 1) + 1 = f_a(z) / a."""
    return _core(z)


def deriv_zz(a, z):
    """f_a''(z) = a e^z (z + 1)."""
    e = _exp(z)
    if not _is_mp(e) and is_escaped(e):
        return ESCAPED
    return a * e * (z + 1)


def deriv_za(a, z):
    """Mixed partial d^2 f / dz da = z e^z."""
    e = _exp(z)
    if not _is_mp(e) and is_escaped(e):
        return ESCAPED
    return z * e


def taylor_coeff(a, k: int):
    """Coefficient of z^k in the power series of f_a at 0."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k < 2:
        return 0 * a
    return a * (k - 1) / math.factorial(k)


def eval_poly_analog(a, n: int, z):
    """The degree n+1 polynomial a ((1 + z/n)^n (z - 1) + 1)."""
    if n < 2:
        raise ValueError("polynomial analog needs n >= 2")
    return a * ((1 + z / n) ** n * (z - 1) + 1)


def representative(u, v):
    """A map g with asymptotic value ``v`` whose finite preimage is ``u``.

    g(z) = v ((z/u - 1) e^{z/u} + 1) has a simple critical point fixed at 0.
    """
    if u == 0 or v == 0:
        raise ParameterError("u and v must be nonzero")
    return lambda z: v * ((z / u - 1) * _exp(z / u) + 1)


def normal_form(u, v):
    """Family parameter of the map with asymptotic-value data (u, v).

    Conjugating by w = z/u moves the finite preimage of the asymptotic value
    to 1 and the asymptotic value to v/u, which is then the parameter.
    """
    if u == 0 or v == 0:
        raise ParameterError("u and v must be nonzero")
    return v / u


class Verdict(enum.Enum):
    CONVERGES_TO_ZERO = "converges_to_zero"
    ESCAPING = "escaping"
    UNRESOLVED = "unresolved"


@dataclass
class OrbitRecord:
    samples: list = field(repr=False)
    verdict: Verdict
    iterations: int
    final_point: complex


def orbit(a, z0, budget: int = DEFAULT_BUDGET, trap_radius: float = DEFAULT_TRAP_RADIUS,
          escape_bound: float = DEFAULT_ESCAPE_BOUND, keep_samples: bool = True) -> OrbitRecord:
    """Iterate f_a from z0 until it is trapped near 0, escapes, or runs out."""
    if not 0 < trap_radius < 1:
        raise ValueError("trap_radius must lie in (0, 1)")
    if escape_bound <= 1:
        raise ValueError("escape_bound must exceed 1")
    z = z0
    samples = [z] if keep_samples else []
    for n in range(budget + 1):
        if is_escaped(z) or abs(z) > escape_bound:
            return OrbitRecord(samples, Verdict.ESCAPING, n, z)
        if abs(z) < trap_radius:
            return OrbitRecord(samples, Verdict.CONVERGES_TO_ZERO, n, z)
        if n == budget:
            break
        z = eval(a, z)
        if keep_samples:
            samples.append(z)
    return OrbitRecord(samples, Verdict.UNRESOLVED, budget, z)


def iterate(a, z, n: int):
    """f_a^n(z); returns ``ESCAPED`` as soon as the orbit overflows."""
    for _ in range(n):
        z = eval(a, z)
        if not _is_mp(z) and is_escaped(z):
            return ESCAPED
    return z


class Jet:
    """Value of an iterate together with first and second order partials.

    ``w`` is f_a^n(z0); ``wz``, ``wa`` are the first partials in z0 and a;
    ``wzz``, ``wza`` the second partials needed for multiplier equations.
    """

    __slots__ = ("w", "wz", "wa", "wzz", "wza")

    def __init__(self, w, wz, wa, wzz=0, wza=0):
        self.w, self.wz, self.wa, self.wzz, self.wza = w, wz, wa, wzz, wza

    @classmethod
    def seed_point(cls, z):
        """Jet of the identity in z, independent of a."""
        return cls(z, 1, 0, 0, 0)

    @classmethod
    def seed_parameter(cls, a):
        """Jet of the asymptotic value itself: w = a, so dw/da = 1."""
        return cls(a, 0, 1, 0, 0)

    def step(self, a) -> "Jet":
        w = self.w
        fz = deriv_z(a, w)
        fzz = deriv_zz(a, w)
        fa = deriv_a(a, w)
        fza = deriv_za(a, w)
        return Jet(
            eval(a, w),
            fz * self.wz,
            fa + fz * self.wa,
            fzz * self.wz ** 2 + fz * self.wzz,
            (fza + fzz * self.wa) * self.wz + fz * self.wza,
        )

    def finite(self) -> bool:
        return not any(is_escaped(x) for x in (self.w, self.wz, self.wa, self.wzz, self.wza)
                       if not isinstance(x, int))


def jet(a, seed: Jet, n: int) -> Jet:
    j = seed
    for _ in range(n):
        j = j.step(a)
    return j
