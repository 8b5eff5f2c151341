"""Rational angles in Q/Z under the doubling map."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

from sympy.ntheory import n_order

# Denominators are kept within a signed 64-bit word so that every
# intermediate (2 * numerator) stays representable elsewhere too.
MAX_DENOMINATOR = 2**62


class AngleError(ValueError):
    pass


class AngleOverflow(AngleError):
    pass


@dataclass(frozen=True, order=True)
class RationalAngle:
    """Exact angle ``numerator/denominator`` in [0, 1), always reduced."""

    numerator: int
    denominator: int

    def __post_init__(self):
        p, q = self.numerator, self.denominator
        if not isinstance(p, int) or not isinstance(q, int):
            raise AngleError("angle components must be integers")
        if q <= 0:
            raise AngleError(f"denominator must be positive, got {q}")
        if q > MAX_DENOMINATOR:
            raise AngleOverflow(f"denominator {q} exceeds {MAX_DENOMINATOR}")
        p %= q
        g = gcd(p, q)
        object.__setattr__(self, "numerator", p // g)
        object.__setattr__(self, "denominator", q // g)

    @classmethod
    def parse(cls, text: str) -> "RationalAngle":
        """Parse ``"p/q"`` (or a bare integer) and reduce mod 1."""
        s = text.strip()
        try:
            if "/" in s:
                p, q = s.split("/")
                return cls(int(p), int(q))
            return cls(int(s), 1)
        except ValueError as exc:
            if isinstance(exc, AngleError):
                raise
            raise AngleError(f"cannot parse angle {text!r}") from None

    def __str__(self):
        return f"{self.numerator}/{self.denominator}"

    def __float__(self):
        return self.numerator / self.denominator

    def double(self) -> "RationalAngle":
        return double(self)

    def preperiod_period(self) -> tuple[int, int]:
        return preperiod_period(self)


def double(theta: RationalAngle) -> RationalAngle:
    """Return 2*theta mod 1."""
    return RationalAngle(2 * theta.numerator % theta.denominator, theta.denominator)


@lru_cache(maxsize=4096)
def _multiplicative_order_of_two(m: int) -> int:
    """Order of 2 in (Z/mZ)^*, m odd; 1 for m = 1."""
    if m == 1:
        return 1
    return int(n_order(2, m))


def preperiod_period(theta: RationalAngle) -> tuple[int, int]:
    """Minimal (l, q) with 2^(l+q) theta = 2^l theta mod 1.

    The preperiod is the 2-adic valuation of the denominator and the period
    is the order of 2 modulo its odd part.
    """
    d = theta.denominator
    l = 0
    while d % 2 == 0:
        d //= 2
        l += 1
    return l, _multiplicative_order_of_two(d)


def orbit(theta: RationalAngle) -> list[RationalAngle]:
    """Distinct angles 2^k theta, k = 0 .. l+q-1, in orbit order."""
    l, q = preperiod_period(theta)
    out = [theta]
    for _ in range(l + q - 1):
        out.append(double(out[-1]))
    return out
