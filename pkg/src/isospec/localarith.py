"""Exact local arithmetic over the rationals.

Provides p-adic valuations, canonical square classes of Q_p^* and R^*,
Hilbert symbols (closed-form and an independent exhaustive solubility
checker), and bounded-precision p-adic numbers with 2x2 matrices over
them.  All values are immutable and all operations pure.

Places are rational primes given as ints, or the archimedean place
given as the string "inf".
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from ._util import (
    factorize,
    int_valuation,
    is_prime,
    least_positive_nonresidue,
    legendre,
    modinv,
    prime_support,
)

Rat = Fraction
Place = "int | str"  # a prime, or "inf"

INF = "inf"


class PrecisionError(ArithmeticError):
    """Raised when a p-adic computation cannot be decided at the carried precision."""


def _check_prime(p: int) -> None:
    if not isinstance(p, int) or not is_prime(p):
        raise ValueError(f"not a prime: {p!r}")


def _check_place(v) -> None:
    if v == INF:
        return
    _check_prime(v)


def valuation(x: Fraction | int, p: int) -> int:
    """The exponent v with x = p^v * (unit at p), for nonzero rational x."""
    _check_prime(p)
    x = Fraction(x)
    if x == 0:
        raise ValueError("valuation of zero")
    return int_valuation(x.numerator, p) - int_valuation(x.denominator, p)


def _unit_residue(x: Fraction, p: int, modulus: int) -> int:
    """x * p^-v(x) reduced mod `modulus` (a power of p)."""
    v = valuation(x, p)
    num, den = x.numerator, x.denominator
    if v >= 0:
        num //= p**v
    else:
        den //= p ** (-v)
    return (num % modulus) * modinv(den, modulus) % modulus


@dataclass(frozen=True, order=True)
class SquareClass:
    """An element of Q_p^*/(Q_p^*)^2 (or R^*/(R^*)^2 for place "inf").

    The representative is canonical: for odd p it lies in {1, u, p, u*p}
    with u the least positive nonresidue mod p; for p = 2 it lies in
    {1, 5, -1, -5, 2, 10, -2, -10}; for "inf" it is 1 or -1.
    """

    place: "int | str"
    rep: int

    def __mul__(self, other: "SquareClass") -> "SquareClass":
        if self.place != other.place:
            raise ValueError("square classes at different places")
        return square_class(Fraction(self.rep) * other.rep, self.place)

    def inverse(self) -> "SquareClass":
        return self  # every class has order dividing 2

    def is_trivial(self) -> bool:
        return self.rep == 1


def square_class(x: Fraction | int, v) -> SquareClass:
    """Canonical square class of the nonzero rational x at the place v."""
    _check_place(v)
    x = Fraction(x)
    if x == 0:
        raise ValueError("square class of zero")
    if v == INF:
        return SquareClass(INF, 1 if x > 0 else -1)
    p = v
    val = valuation(x, p) % 2
    if p == 2:
        u = _unit_residue(x, 2, 8)
        unit_rep = {1: 1, 5: 5, 7: -1, 3: -5}[u]
        return SquareClass(2, unit_rep * (2 if val else 1))
    u = _unit_residue(x, p, p)
    unit_rep = 1 if legendre(u, p) == 1 else least_positive_nonresidue(p)
    return SquareClass(p, unit_rep * (p if val else 1))


def square_class_group(v) -> list[SquareClass]:
    """All square classes at v: 4 for an odd prime, 8 for p = 2, 2 for "inf"."""
    _check_place(v)
    if v == INF:
        return [SquareClass(INF, 1), SquareClass(INF, -1)]
    if v == 2:
        return [SquareClass(2, r) for r in (1, 5, -1, -5, 2, 10, -2, -10)]
    u = least_positive_nonresidue(v)
    return [SquareClass(v, r) for r in (1, u, v, u * v)]


def _eps2(u: int) -> int:
    # (u-1)/2 mod 2 for odd u
    return ((u - 1) // 2) % 2


def _omega2(u: int) -> int:
    # (u^2-1)/8 mod 2 for odd u
    return ((u * u - 1) // 8) % 2


def hilbert_symbol(a: Fraction | int, b: Fraction | int, v) -> int:
    """Hilbert symbol (a,b)_v: +1 iff z^2 = a*x^2 + b*y^2 has a nontrivial
    solution over the completion at v, else -1.

    Computed by the classical unit/valuation formulas; see
    hilbert_symbol_by_search for the independent solubility checker.
    """
    _check_place(v)
    a, b = Fraction(a), Fraction(b)
    if a == 0 or b == 0:
        raise ValueError("hilbert symbol of zero")
    if v == INF:
        return -1 if (a < 0 and b < 0) else 1
    p = v
    alpha, beta = valuation(a, p), valuation(b, p)
    if p == 2:
        u = _unit_residue(a, 2, 8)
        w = _unit_residue(b, 2, 8)
        e = _eps2(u) * _eps2(w) + alpha * _omega2(w) + beta * _omega2(u)
        return -1 if e % 2 else 1
    u = _unit_residue(a, p, p)
    w = _unit_residue(b, p, p)
    sign = 1
    if (alpha * beta) % 2 and (p % 4 == 3):
        sign = -sign
    if beta % 2 and legendre(u, p) == -1:
        sign = -sign
    if alpha % 2 and legendre(w, p) == -1:
        sign = -sign
    return sign


def _reduce_for_search(x: Fraction, p: int) -> int:
    """Integer in the square class of x with p-adic valuation 0 or 1.

    Multiplies by the square of the denominator and strips p^2 factors;
    other prime-square factors are irrelevant for solubility mod p^N.
    """
    n = x.numerator * x.denominator
    v = int_valuation(n, p)
    n //= p ** (2 * (v // 2))
    return n


def hilbert_symbol_by_search(a: Fraction | int, b: Fraction | int, v) -> int:
    """Hilbert symbol decided by exhaustive solubility search.

    For a finite prime the form a*x^2 + b*y^2 - z^2 is isotropic over Q_p
    iff it has a primitive zero mod p^N where N = 3 for odd p and N = 6
    for p = 2 (a Hensel bound: any primitive zero has some coordinate a
    unit, so the gradient valuation is at most v_p(2) + 1 and zeros mod
    p^(2*v_p(2)+3) lift).  This is the oracle of record for tests; it is
    independent of the closed-form route.  Intended for small p only.
    """
    _check_place(v)
    a, b = Fraction(a), Fraction(b)
    if a == 0 or b == 0:
        raise ValueError("hilbert symbol of zero")
    if v == INF:
        return -1 if (a < 0 and b < 0) else 1
    p = v
    if p > 13:
        raise ValueError("solubility search only supported for p <= 13")
    N = 6 if p == 2 else 3
    mod = p**N
    ra = _reduce_for_search(a, p) % mod
    rb = _reduce_for_search(b, p) % mod
    all_squares = {(z * z) % mod for z in range(mod)}
    unit_squares = {(z * z) % mod for z in range(mod) if z % p}
    for x in range(mod):
        ax2 = ra * x * x % mod
        x_unit = x % p != 0
        for y in range(mod):
            s = (ax2 + rb * y * y) % mod
            if x_unit or y % p:
                if s in all_squares:
                    return 1
            elif s in unit_squares:
                # x, y both divisible by p: primitivity forces z to be a unit
                return 1
    return -1


# ---------------------------------------------------------------------------
# bounded-precision p-adic numbers


@dataclass(frozen=True)
class PadicApprox:
    """A p-adic number carried at finite precision.

    Nonzero values are p^valuation * unit with unit a unit residue mod
    p^precision (relative precision).  A value with unit == 0 is "zero at
    absolute precision `valuation`": it stands for any element of
    p^valuation * Z_p, and precision is 0 by convention.

    Precision bookkeeping: multiplication keeps the minimum relative
    precision of the operands; addition can lose relative precision to
    cancellation (the absolute precision of the result is the minimum of
    the operands'); division keeps one digit of valuation margin, i.e.
    the result carries min(precisions) - 1.  Operations that would leave
    no significant digit raise PrecisionError instead of truncating.
    """

    prime: int
    valuation: int
    unit: int
    precision: int

    # -- constructors

    @classmethod
    def zero_at(cls, p: int, abs_prec: int) -> "PadicApprox":
        return cls(p, abs_prec, 0, 0)

    @classmethod
    def from_rational(cls, x: Fraction | int, p: int, prec: int) -> "PadicApprox":
        if prec < 1:
            raise ValueError("precision must be >= 1")
        x = Fraction(x)
        if x == 0:
            return cls.zero_at(p, prec)
        v = valuation(x, p)
        return cls(p, v, _unit_residue(x, p, p**prec), prec)

    # -- predicates

    @property
    def is_zero(self) -> bool:
        return self.unit == 0

    @property
    def abs_precision(self) -> int:
        """The value is determined mod p^abs_precision."""
        return self.valuation if self.is_zero else self.valuation + self.precision

    def _check_same(self, other: "PadicApprox") -> None:
        if self.prime != other.prime:
            raise ValueError("mixed primes in p-adic arithmetic")

    # -- arithmetic

    def __neg__(self) -> "PadicApprox":
        if self.is_zero:
            return self
        m = self.prime**self.precision
        return PadicApprox(self.prime, self.valuation, (-self.unit) % m, self.precision)

    def __add__(self, other: "PadicApprox") -> "PadicApprox":
        self._check_same(other)
        p = self.prime
        if self.is_zero and other.is_zero:
            return PadicApprox.zero_at(p, min(self.valuation, other.valuation))
        if self.is_zero or other.is_zero:
            z, nz = (self, other) if self.is_zero else (other, self)
            bound = z.valuation
            if nz.valuation >= bound:
                return PadicApprox.zero_at(p, bound)
            prec = min(nz.precision, bound - nz.valuation)
            return PadicApprox(p, nz.valuation, nz.unit % p**prec, prec)
        a, b = (self, other) if self.valuation <= other.valuation else (other, self)
        abs_prec = min(a.abs_precision, b.abs_precision)
        work = abs_prec - a.valuation
        if work <= 0:
            return PadicApprox.zero_at(p, abs_prec)
        m = p**work
        s = (a.unit + b.unit * p ** (b.valuation - a.valuation)) % m
        if s == 0:
            return PadicApprox.zero_at(p, abs_prec)
        t = int_valuation(s, p)
        if t >= work:
            return PadicApprox.zero_at(p, abs_prec)
        return PadicApprox(p, a.valuation + t, (s // p**t) % p ** (work - t), work - t)

    def __sub__(self, other: "PadicApprox") -> "PadicApprox":
        return self + (-other)

    def __mul__(self, other: "PadicApprox") -> "PadicApprox":
        self._check_same(other)
        p = self.prime
        if self.is_zero and other.is_zero:
            return PadicApprox.zero_at(p, self.valuation + other.valuation)
        if self.is_zero or other.is_zero:
            z, nz = (self, other) if self.is_zero else (other, self)
            return PadicApprox.zero_at(p, z.valuation + nz.valuation)
        prec = min(self.precision, other.precision)
        m = p**prec
        return PadicApprox(p, self.valuation + other.valuation, self.unit * other.unit % m, prec)

    def __truediv__(self, other: "PadicApprox") -> "PadicApprox":
        self._check_same(other)
        p = self.prime
        if other.is_zero:
            raise PrecisionError("division by a p-adic zero at finite precision")
        if self.is_zero:
            bound = self.valuation - other.valuation
            return PadicApprox.zero_at(p, bound)
        prec = min(self.precision, other.precision) - 1  # documented margin
        if prec < 1:
            raise PrecisionError("insufficient precision for division")
        m = p**prec
        u = self.unit * modinv(other.unit % m, m) % m
        return PadicApprox(p, self.valuation - other.valuation, u, prec)

    def scale_by_rational(self, x: Fraction | int) -> "PadicApprox":
        """Multiply by an exact rational (no precision loss beyond min)."""
        x = Fraction(x)
        if x == 0:
            # exact zero is inside every O(p^k) the operand determines
            return PadicApprox.zero_at(self.prime, self.abs_precision)
        if self.is_zero:
            return PadicApprox.zero_at(self.prime, self.valuation + valuation(x, self.prime))
        other = PadicApprox.from_rational(x, self.prime, self.precision)
        return self * other

    # -- queries

    def is_congruent_zero_mod(self, k: int) -> bool:
        """Whether the value lies in p^k * Z_p; PrecisionError if undecidable."""
        if self.is_zero:
            if self.valuation >= k:
                return True
            raise PrecisionError(
                f"cannot decide congruence mod {self.prime}^{k} at absolute precision {self.valuation}"
            )
        return self.valuation >= k

    def is_integral(self) -> bool:
        return self.is_congruent_zero_mod(0)

    def residue(self, k: int) -> int:
        """The value mod p^k as an integer in [0, p^k); requires integrality."""
        if not self.is_integral():
            raise ValueError("residue of a non-integral p-adic number")
        if self.is_zero or self.valuation >= k:
            if self.abs_precision < k:
                raise PrecisionError(f"residue mod {self.prime}^{k} exceeds carried precision")
            return 0
        if self.abs_precision < k:
            raise PrecisionError(f"residue mod {self.prime}^{k} exceeds carried precision")
        return self.unit * self.prime**self.valuation % self.prime**k

    def congruent_to(self, other: "PadicApprox", k: int) -> bool:
        return (self - other).is_congruent_zero_mod(k)

    def __repr__(self) -> str:
        if self.is_zero:
            return f"O({self.prime}^{self.valuation})"
        return f"{self.unit}*{self.prime}^{self.valuation} + O({self.prime}^{self.abs_precision})"


def padic_one(p: int, prec: int) -> PadicApprox:
    return PadicApprox.from_rational(1, p, prec)


@dataclass(frozen=True)
class Mat2Padic:
    """A 2x2 matrix of PadicApprox entries sharing one prime."""

    prime: int
    entries: tuple[PadicApprox, PadicApprox, PadicApprox, PadicApprox]  # a, b, c, d

    @classmethod
    def from_rational_entries(cls, rows, p: int, prec: int) -> "Mat2Padic":
        (a, b), (c, d) = rows
        mk = lambda x: PadicApprox.from_rational(Fraction(x), p, prec)
        return cls(p, (mk(a), mk(b), mk(c), mk(d)))

    @classmethod
    def identity(cls, p: int, prec: int) -> "Mat2Padic":
        return cls.from_rational_entries(((1, 0), (0, 1)), p, prec)

    def __add__(self, other: "Mat2Padic") -> "Mat2Padic":
        return Mat2Padic(self.prime, tuple(x + y for x, y in zip(self.entries, other.entries)))

    def __mul__(self, other: "Mat2Padic") -> "Mat2Padic":
        a, b, c, d = self.entries
        e, f, g, h = other.entries
        return Mat2Padic(self.prime, (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h))

    def scale(self, x: Fraction | int) -> "Mat2Padic":
        return Mat2Padic(self.prime, tuple(e.scale_by_rational(x) for e in self.entries))

    def scale_padic(self, x: PadicApprox) -> "Mat2Padic":
        return Mat2Padic(self.prime, tuple(e * x for e in self.entries))

    def det(self) -> PadicApprox:
        a, b, c, d = self.entries
        return a * d - b * c

    def trace(self) -> PadicApprox:
        a, _, _, d = self.entries
        return a + d

    def is_integral(self) -> bool:
        return all(e.is_congruent_zero_mod(0) for e in self.entries)

    def residues(self, k: int) -> tuple[int, int, int, int]:
        return tuple(e.residue(k) for e in self.entries)

    def congruent_to(self, other: "Mat2Padic", k: int) -> bool:
        return all(x.congruent_to(y, k) for x, y in zip(self.entries, other.entries))


@lru_cache(maxsize=None)
def _nonresidue_cached(p: int) -> int:
    return least_positive_nonresidue(p)


def hensel_sqrt(c: Fraction | int, p: int, prec: int) -> int:
    """Square root of the p-adic unit square c, as an integer mod p^prec.

    For odd p the lift starts from the smaller of the two roots mod p;
    for p = 2 (c = 1 mod 8) from the root congruent to 1 mod 4.  The
    choice makes results reproducible.
    """
    _check_prime(p)
    c = Fraction(c)
    if valuation(c, p) != 0:
        raise ValueError("hensel_sqrt expects a p-adic unit")
    modulus = p**prec
    target = _unit_residue(c, p, modulus)
    if p != 2:
        r0 = None
        for r in range(1, p):
            if r * r % p == target % p:
                r0 = min(r, p - r)
                break
        if r0 is None:
            raise ValueError(f"{c} is not a square mod {p}")
        x = r0
        mod = p
        while mod < modulus:
            mod = min(mod * mod, modulus)
            # Newton step: x <- (x + c/x) / 2
            x = (x + target * modinv(x, mod)) % mod * modinv(2, mod) % mod
        return x % modulus
    if target % 8 != 1:
        raise ValueError(f"{c} is not a square in Q_2")
    if prec <= 1:
        return 1
    x = 1  # root mod 8 congruent to 1 mod 4
    mod_exp = 3
    while mod_exp < prec:
        mod_exp += 1
        if (x * x - target) % (2**mod_exp):
            x += 2 ** (mod_exp - 2)
        x %= 2 ** (mod_exp - 1)
    return x % modulus


def support_of_symbol(a: Fraction | int, b: Fraction | int) -> list:
    """Places where (a,b)_v could be -1: "inf" and primes dividing 2ab."""
    a, b = Fraction(a), Fraction(b)
    ps = {2} | set(prime_support(a)) | set(prime_support(b))
    return [INF] + sorted(ps)
