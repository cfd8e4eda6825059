"""Rational quaternion algebras (a,b | Q) and their splittings.

An algebra is presented by two nonzero rationals a, b with relations
i^2 = a, j^2 = b, ij = -ji.  Generators are normalized to squarefree
integers (the square factors do not change the isomorphism class).
The module computes reduced traces and norms, ramification data, the
division/indefiniteness checks used everywhere downstream, and explicit
splittings D -> M_2(R) (floating point) and D -> M_2(Q_p) at unramified
primes (exact at a stated p-adic precision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ._util import hnf_rows, int_valuation, legendre, squarefree_part
from .localarith import (
    INF,
    Mat2Padic,
    PadicApprox,
    hensel_sqrt,
    hilbert_symbol,
    support_of_symbol,
    valuation,
)

REAL_TOL = 1e-9


@dataclass(frozen=True)
class QuaternionAlgebra:
    """The quaternion algebra over Q with i^2 = a, j^2 = b, ij = -ji.

    a and b are stored squarefree; the constructor records the original
    inputs so reports can show the normalization.
    """

    a: int
    b: int
    a_input: Fraction
    b_input: Fraction

    @classmethod
    def create(cls, a, b) -> "QuaternionAlgebra":
        a_in, b_in = Fraction(a), Fraction(b)
        if a_in == 0 or b_in == 0:
            raise ValueError("quaternion algebra needs nonzero a, b")
        return cls(squarefree_part(a_in), squarefree_part(b_in), a_in, b_in)

    def element(self, c0, c1, c2, c3) -> "QuatElement":
        return QuatElement(self, (Fraction(c0), Fraction(c1), Fraction(c2), Fraction(c3)))

    def one(self) -> "QuatElement":
        return self.element(1, 0, 0, 0)

    def gens(self) -> tuple["QuatElement", "QuatElement", "QuatElement"]:
        return (self.element(0, 1, 0, 0), self.element(0, 0, 1, 0), self.element(0, 0, 0, 1))

    def basis_units(self) -> tuple["QuatElement", ...]:
        return (self.one(),) + self.gens()

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b}

    def __repr__(self) -> str:
        return f"QuaternionAlgebra({self.a},{self.b})"


@dataclass(frozen=True)
class QuatElement:
    """x0 + x1*i + x2*j + x3*ij with rational coefficients."""

    algebra: QuaternionAlgebra
    coeffs: tuple[Fraction, Fraction, Fraction, Fraction]

    def _same(self, other: "QuatElement") -> None:
        if self.algebra != other.algebra:
            raise ValueError("elements of different algebras")

    def __add__(self, other: "QuatElement") -> "QuatElement":
        self._same(other)
        return QuatElement(self.algebra, tuple(x + y for x, y in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "QuatElement") -> "QuatElement":
        self._same(other)
        return QuatElement(self.algebra, tuple(x - y for x, y in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "QuatElement":
        return QuatElement(self.algebra, tuple(-x for x in self.coeffs))

    def scale(self, t) -> "QuatElement":
        t = Fraction(t)
        return QuatElement(self.algebra, tuple(t * x for x in self.coeffs))

    def __mul__(self, other: "QuatElement") -> "QuatElement":
        self._same(other)
        a, b = Fraction(self.algebra.a), Fraction(self.algebra.b)
        x0, x1, x2, x3 = self.coeffs
        y0, y1, y2, y3 = other.coeffs
        return QuatElement(
            self.algebra,
            (
                x0 * y0 + a * x1 * y1 + b * x2 * y2 - a * b * x3 * y3,
                x0 * y1 + x1 * y0 - b * x2 * y3 + b * x3 * y2,
                x0 * y2 + x2 * y0 + a * x1 * y3 - a * x3 * y1,
                x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
            ),
        )

    def conj(self) -> "QuatElement":
        """Standard involution: fixes the scalar part, negates i, j, ij."""
        x0, x1, x2, x3 = self.coeffs
        return QuatElement(self.algebra, (x0, -x1, -x2, -x3))

    def trd(self) -> Fraction:
        return 2 * self.coeffs[0]

    def nrd(self) -> Fraction:
        a, b = self.algebra.a, self.algebra.b
        x0, x1, x2, x3 = self.coeffs
        return x0 * x0 - a * x1 * x1 - b * x2 * x2 + a * b * x3 * x3

    def inverse(self) -> "QuatElement":
        n = self.nrd()
        if n == 0:
            raise ZeroDivisionError("element of reduced norm zero")
        return self.conj().scale(Fraction(1) / n)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __repr__(self) -> str:
        return f"Quat{tuple(str(c) for c in self.coeffs)}"


def conj(x: QuatElement) -> QuatElement:
    return x.conj()


def trd(x: QuatElement) -> Fraction:
    return x.trd()


def nrd(x: QuatElement) -> Fraction:
    return x.nrd()


# ---------------------------------------------------------------------------
# ramification and hypothesis checks


@dataclass(frozen=True)
class RamificationData:
    """Places where the algebra stays a division algebra after completion."""

    ramified_places: tuple  # sorted primes, possibly followed by "inf"
    reduced_discriminant: int

    @property
    def finite_places(self) -> tuple[int, ...]:
        return tuple(p for p in self.ramified_places if p != INF)

    @property
    def is_division(self) -> bool:
        return bool(self.ramified_places)


def ramification(alg: QuaternionAlgebra) -> RamificationData:
    """Ramified places of (a,b); only "inf" and primes dividing 2ab can occur."""
    ram = [v for v in support_of_symbol(alg.a, alg.b) if hilbert_symbol(alg.a, alg.b, v) == -1]
    finite = sorted(p for p in ram if p != INF)
    places = tuple(finite) + ((INF,) if INF in ram else ())
    disc = 1
    for p in finite:
        disc *= p
    return RamificationData(places, disc)


@dataclass(frozen=True)
class HypothesisReport:
    """h1: ramified at some finite prime (with the smallest as witness).
    h2: split at the real place (indefinite)."""

    h1: bool
    h2: bool
    v0: int | None
    ramification: RamificationData

    def to_json(self) -> dict:
        return {
            "h1": self.h1,
            "h2": self.h2,
            "v0": self.v0,
            "ramified_places": list(self.ramification.ramified_places),
            "reduced_discriminant": self.ramification.reduced_discriminant,
        }


def check_h1_h2(alg: QuaternionAlgebra) -> HypothesisReport:
    ram = ramification(alg)
    finite = ram.finite_places
    return HypothesisReport(
        h1=bool(finite),
        h2=INF not in ram.ramified_places,
        v0=finite[0] if finite else None,
        ramification=ram,
    )


# ---------------------------------------------------------------------------
# real splitting


@dataclass(frozen=True)
class SplitMapReal:
    """Algebra homomorphism into M_2(R), double precision.

    Satisfies the defining relations to relative error REAL_TOL, sends
    the reduced trace to the matrix trace and the reduced norm to the
    determinant (same tolerance).
    """

    algebra: QuaternionAlgebra
    images: tuple  # ((2x2), (2x2), (2x2), (2x2)) for 1, i, j, ij

    def image(self, x: QuatElement):
        out = [[0.0, 0.0], [0.0, 0.0]]
        for c, m in zip(x.coeffs, self.images):
            f = float(c)
            for r in range(2):
                for s in range(2):
                    out[r][s] += f * m[r][s]
        return tuple(tuple(row) for row in out)


def _mat_mul_f(x, y):
    return (
        (x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]),
        (x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]),
    )


def _close(x, y, scale=1.0):
    return all(abs(x[r][s] - y[r][s]) <= REAL_TOL * max(1.0, scale) for r in range(2) for s in range(2))


def split_real(alg: QuaternionAlgebra) -> SplitMapReal:
    """Explicit splitting over R; requires the algebra to be indefinite.

    With b > 0: i -> [[0,1],[a,0]], j -> [[sqrt(b),0],[0,-sqrt(b)]].
    When only a > 0 the roles of the generators are swapped internally.
    """
    a, b = alg.a, alg.b
    if a < 0 and b < 0:
        raise ValueError("not indefinite")
    one = ((1.0, 0.0), (0.0, 1.0))
    if b > 0:
        r = math.sqrt(b)
        mi = ((0.0, 1.0), (float(a), 0.0))
        mj = ((r, 0.0), (0.0, -r))
    else:
        r = math.sqrt(a)
        mi = ((r, 0.0), (0.0, -r))
        mj = ((0.0, 1.0), (float(b), 0.0))
    mk = _mat_mul_f(mi, mj)
    m = SplitMapReal(alg, (one, mi, mj, mk))
    scale = max(abs(a), abs(b), 1)
    assert _close(_mat_mul_f(mi, mi), ((float(a), 0.0), (0.0, float(a))), scale)
    assert _close(_mat_mul_f(mj, mj), ((float(b), 0.0), (0.0, float(b))), scale)
    neg_k = tuple(tuple(-e for e in row) for row in mk)
    assert _close(_mat_mul_f(mj, mi), neg_k, scale)
    return m


# ---------------------------------------------------------------------------
# p-adic splitting at unramified primes


@dataclass(frozen=True)
class SplitMapPadic:
    """Algebra homomorphism into M_2(Q_p) at a split prime, carried mod p^prec.

    `images` are matrices for 1, i, j, ij whose entries are PadicApprox;
    the defining relations hold exactly mod p^precision, reduced trace
    matches the matrix trace and reduced norm the determinant at that
    precision.  `adapted_order_flag` is set once the map has been checked
    (or conjugated) so a configured order lands in M_2(Z_p).
    """

    algebra: QuaternionAlgebra
    prime: int
    precision: int
    images: tuple[Mat2Padic, Mat2Padic, Mat2Padic, Mat2Padic]
    adapted_order_flag: bool = False

    def image(self, x: QuatElement) -> Mat2Padic:
        out = None
        for c, m in zip(x.coeffs, self.images):
            term = m.scale(c)
            out = term if out is None else out + term
        return out


def _is_unit_square(x: int, p: int) -> bool:
    # x an integer with v_p(x) = 0
    if p == 2:
        return x % 8 == 1
    return legendre(x % p, p) == 1


def _solve_unit_norm_equation(a: int, b: int, p: int, prec: int) -> tuple[int, int]:
    """(alpha, beta) mod p^prec with alpha^2 - a*beta^2 = b mod p^prec.

    Requires a to be a p-adic unit nonsquare; solubility is exactly the
    split condition (b is then a norm from Q_p(sqrt(a))).  For odd p a
    solution mod p exists whenever v_p(b) = 0 and lifts by Hensel in a
    variable with unit derivative.  For p = 2 (and for odd-valuation b)
    a bounded search over beta looks for b + a*beta^2 an exact rational
    square; the search bound is a documented desk-scale limitation.
    """
    if p != 2 and int_valuation(abs(b), p) == 0:
        sol = None
        for beta in range(p):
            c = (b + a * beta * beta) % p
            for alpha in range(p):
                if alpha * alpha % p == c:
                    sol = (alpha, beta)
                    break
            if sol:
                break
        if sol is None:
            raise ValueError(f"norm equation insoluble mod {p}; algebra not split at {p}?")
        alpha, beta = sol
        if alpha % p:
            return hensel_sqrt(Fraction(b + a * beta * beta), p, prec), beta
        # alpha = 0 mod p: beta is a unit and beta^2 = -b/a
        return 0, hensel_sqrt(Fraction(-b, a), p, prec)
    for beta in range(256):
        c = Fraction(b + a * beta * beta)
        if c == 0:
            continue
        v = valuation(c, p)
        if v % 2 == 0:
            unit = c / Fraction(p) ** v
            num, den = unit.numerator, unit.denominator
            if _is_unit_square(num * den, p):
                root = hensel_sqrt(unit, p, prec)
                alpha = root * p ** (v // 2) % p**prec
                return alpha, beta
    raise ValueError(f"{p}-adic norm equation solver exhausted its search bound")


def split_padic(alg: QuaternionAlgebra, p: int, precision: int) -> SplitMapPadic:
    """Splitting D tensor Q_p = M_2(Q_p) at an unramified prime, mod p^precision.

    Construction: if a (or b) is a local square its square root s is
    Hensel-lifted and the corresponding generator goes to diag(s, -s)
    with the other generator antidiagonal; otherwise i goes to
    [[0,1],[a,0]] and j to [[alpha,beta],[-a*beta,-alpha]] where
    alpha^2 - a*beta^2 = b.  When p divides both a and b the algebra is
    rewritten on the generator pair (i, ij) whose second square -ab has
    even valuation, and the images of j are recovered as i*(ij)/a.
    """
    if precision < 1:
        raise ValueError("precision must be >= 1")
    if hilbert_symbol(alg.a, alg.b, p) == -1:
        raise ValueError(f"algebra is ramified at {p}")
    a, b = alg.a, alg.b
    work = precision + 3

    def by_cases(a: int, b: int):
        """Images (mi, mj) as integer matrices mod p^work, assuming not both
        a, b divisible by p."""
        va, vb = int_valuation(abs(a), p), int_valuation(abs(b), p)
        if va == 0 and _is_unit_square(a, p):
            s = hensel_sqrt(Fraction(a), p, work)
            return ((s, 0), (0, -s)), ((0, 1), (b, 0))
        if vb == 0 and _is_unit_square(b, p):
            t = hensel_sqrt(Fraction(b), p, work)
            return ((0, 1), (a, 0)), ((t, 0), (0, -t))
        if va == 0:
            alpha, beta = _solve_unit_norm_equation(a, b, p, work)
            return ((0, 1), (a, 0)), ((alpha, beta), (-a * beta, -alpha))
        # va = 1, vb = 0, b a nonsquare unit: swap the generator roles
        alpha, beta = _solve_unit_norm_equation(b, a, p, work)
        mj = ((0, 1), (b, 0))
        mi = ((alpha, beta), (-b * beta, -alpha))
        return mi, mj

    va, vb = int_valuation(abs(a), p), int_valuation(abs(b), p)
    if va <= 1 and vb <= 1 and not (va == 1 and vb == 1):
        mi_int, mj_int = by_cases(a, b)
        mi = Mat2Padic.from_rational_entries(mi_int, p, work)
        mj = Mat2Padic.from_rational_entries(mj_int, p, work)
        mk = mi * mj
    else:
        # p divides both a and b: use generators (i, ij); (ij)^2 = -ab
        c = squarefree_part(-a * b)
        s = math.isqrt(-a * b // c)  # -ab = c * s^2 with s a positive integer
        assert c * s * s == -a * b
        mi_int, me_int = by_cases(a, c)
        mi = Mat2Padic.from_rational_entries(mi_int, p, work)
        me = Mat2Padic.from_rational_entries(me_int, p, work)
        mk = me.scale(s)  # image of ij
        mj = (mi * mk).scale(Fraction(1, a))  # j = i*(ij)/a
    one = Mat2Padic.identity(p, work)
    images = (one, mi, mj, mk)
    _verify_relations(images, a, b, p, precision)
    return SplitMapPadic(alg, p, precision, images)


def _verify_relations(images, a: int, b: int, p: int, k: int) -> None:
    one, mi, mj, mk = images
    assert (mi * mi).congruent_to(one.scale(a), k), "i^2 != a"
    assert (mj * mj).congruent_to(one.scale(b), k), "j^2 != b"
    assert (mi * mj).congruent_to(mk, k), "ij image inconsistent"
    ji = mj * mi
    neg = mk.scale(-1)
    assert ji.congruent_to(neg, k), "ij != -ji"


def adapt_split_map(split: SplitMapPadic, basis_images: list[Mat2Padic]) -> "tuple[SplitMapPadic, bool]":
    """Conjugate a split map so the given order-basis images become integral.

    Builds the Z_p-lattice generated by the standard lattice together
    with the basis images of both standard column vectors; an order maps
    that lattice into itself, so conjugating by a basis of it produces
    integral images.  Returns the adapted map and whether adaptation was
    needed.  Raises if the images fail to stabilize any lattice at the
    carried precision (then the input was not an order, or precision is
    too small).
    """
    p, prec = split.prime, split.precision
    if all(m.is_integral() for m in basis_images):
        return SplitMapPadic(split.algebra, p, prec, split.images, True), False

    # collect columns of all basis images, scaled to integers
    shift = 0
    cols: list[tuple[Fraction, Fraction]] = [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1))]
    for m in basis_images:
        a, b, c, d = m.entries
        for e in (a, b, c, d):
            if not e.is_zero:
                shift = max(shift, -e.valuation)
        av, bv, cv, dv = (_approx_to_fraction(e, p) for e in (a, b, c, d))
        cols.append((av, cv))
        cols.append((bv, dv))
    scale = p**shift
    int_rows = [[int(x * scale), int(y * scale)] for (x, y) in cols]
    reduced = hnf_rows(int_rows)
    if len(reduced) != 2:
        raise ValueError(f"order not adapted at precision {prec}")
    # lattice basis as columns of C
    c00, c01 = Fraction(reduced[0][0], scale), Fraction(reduced[0][1], scale)
    c10, c11 = Fraction(reduced[1][0], scale), Fraction(reduced[1][1], scale)
    cmat = ((c00, c10), (c01, c11))  # columns are the lattice basis
    det = cmat[0][0] * cmat[1][1] - cmat[0][1] * cmat[1][0]
    if det == 0:
        raise ValueError(f"order not adapted at precision {prec}")
    inv = (
        (cmat[1][1] / det, -cmat[0][1] / det),
        (-cmat[1][0] / det, cmat[0][0] / det),
    )
    new_images = []
    for m in split.images:
        lifted = _conj_by_rational(m, inv, cmat, p, prec)
        new_images.append(lifted)
    adapted = SplitMapPadic(split.algebra, p, prec, tuple(new_images), True)
    return adapted, True


def _approx_to_fraction(e: PadicApprox, p: int) -> Fraction:
    if e.is_zero:
        return Fraction(0)
    return Fraction(e.unit) * Fraction(p) ** e.valuation


def _conj_by_rational(m: Mat2Padic, left, right, p: int, prec: int) -> Mat2Padic:
    lm = Mat2Padic.from_rational_entries(left, p, prec)
    rm = Mat2Padic.from_rational_entries(right, p, prec)
    return lm * m * rm
