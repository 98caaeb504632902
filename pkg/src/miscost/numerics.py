"""Model parameters and the two scalar kinds every engine runs on.

Exact mode works in arbitrary-size rationals (gmpy2.mpq), so recurrence
cross-checks can use literal equality as the test predicate.  Real mode
works in MPFR floats (gmpy2.mpfr) under an explicit mantissa-bit budget
carried by :class:`NumericContext`.

The precision policy for Poisson-generating-function work is
``ceil(1.5*x) + 64`` bits at evaluation point ``x``: multiplying a
sum of size ~e^x by e^{-x} can cost log2(e^x) ~ 1.4427*x bits, and 1.5
leaves slack so at least 64 significant bits survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr, mpq

from .errors import DomainError

__all__ = [
    "ModelParams",
    "NumericContext",
    "required_precision",
    "parse_rational",
    "to_real",
    "bits_of_agreement",
]


def parse_rational(text: str) -> mpq:
    """Parse 'num/den' (or a bare integer) into an exact rational.

    Decimal input is rejected: exact mode stays exact only if p enters
    as a ratio of integers.
    """
    s = str(text).strip()
    if "." in s or "e" in s.lower():
        raise DomainError(
            f"expected a rational like '1/2', got {text!r} "
            "(decimal input would silently lose exactness; write it as num/den)"
        )
    try:
        if "/" in s:
            num, den = s.split("/")
            return mpq(int(num), int(den))
        return mpq(int(s), 1)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot parse rational {text!r}: {exc}") from exc


@dataclass(frozen=True)
class ModelParams:
    """The probability triple (p, q=1-p, kappa=1/q), all exact rationals."""

    p: mpq

    def __post_init__(self):
        p = mpq(self.p)
        if not (0 < p < 1):
            raise DomainError(f"edge probability must satisfy 0 < p < 1, got {p}")
        object.__setattr__(self, "p", p)

    @classmethod
    def from_string(cls, text: str) -> "ModelParams":
        return cls(parse_rational(text))

    @property
    def q(self) -> mpq:
        return 1 - self.p

    @property
    def kappa(self) -> mpq:
        return 1 / self.q

    def label(self) -> str:
        """Canonical 'num/den' form, used in cache keys and report headers."""
        r = self.p
        return f"{r.numerator}/{r.denominator}"

    def __str__(self):
        return f"ModelParams(p={self.label()})"


def required_precision(x: float) -> int:
    """Mantissa bits needed for Poisson-GF work at evaluation point x >= 0."""
    if x < 0:
        raise DomainError(f"required_precision needs x >= 0, got {x}")
    return int(math.ceil(1.5 * x)) + 64


@dataclass(frozen=True)
class NumericContext:
    """Working precision for real mode plus the series tail threshold.

    One context is used for all real arithmetic in a run; the stability
    check recomputes at double precision and demands agreement to at
    least ``precision_bits - 16`` bits.
    """

    precision_bits: int = 256
    series_epsilon: mpfr = field(default=None)

    def __post_init__(self):
        if self.precision_bits < 64:
            raise DomainError(
                f"precision_bits must be >= 64, got {self.precision_bits}"
            )
        if self.series_epsilon is None:
            eps = mpfr(2, precision=64) ** (-self.precision_bits // 2)
            object.__setattr__(self, "series_epsilon", eps)
        elif not self.series_epsilon > 0:
            raise DomainError("series_epsilon must be positive")

    def gmp(self) -> "gmpy2.context":
        """A gmpy2 context manager at this precision (thread-local on entry)."""
        return gmpy2.context(precision=self.precision_bits)

    def doubled(self) -> "NumericContext":
        return NumericContext(precision_bits=2 * self.precision_bits)

    @classmethod
    def for_poisson_eval(cls, x: float, floor_bits: int = 256) -> "NumericContext":
        return cls(precision_bits=max(required_precision(x), floor_bits))


def to_real(value, ctx: NumericContext) -> mpfr:
    """Convert a scalar (mpq, int, float, mpfr) to mpfr at ctx precision."""
    return mpfr(value, precision=ctx.precision_bits)


def bits_of_agreement(a, b) -> float:
    """How many leading bits a and b share: -log2 of the relative gap.

    Returns inf on exact equality.  Used by the doubled-precision
    stability checks.
    """
    if a == b:
        return math.inf
    bits = max(getattr(a, "precision", 64), getattr(b, "precision", 64)) + 16
    with gmpy2.context(precision=bits):
        denom = max(abs(mpfr(a)), abs(mpfr(b)))
        if denom == 0:
            return math.inf
        rel = abs(mpfr(a) - mpfr(b)) / denom
        if rel == 0:
            return math.inf
        return float(-gmpy2.log2(rel))
