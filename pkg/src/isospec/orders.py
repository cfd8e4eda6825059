"""Z-orders in rational quaternion algebras.

An order is a full-rank lattice that is a subring containing 1.  The
module verifies candidate bases, computes the trace-form Gram matrix
and reduced discriminant, and enlarges any order to a maximal one by a
brute-force superlattice search (adequate for the small primes this
package targets; enlargement primes above 50 are rejected).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ._util import (
    factorize,
    hnf_rows,
    int_sqrt_exact,
    lcm_of,
    rat_mat_det,
    rat_mat_solve,
)
from .quaternion import QuaternionAlgebra, QuatElement, ramification

MAX_ENLARGEMENT_PRIME = 50


class OrderError(ValueError):
    """A candidate basis fails one of the order axioms."""


@dataclass(frozen=True)
class Order:
    """A Z-order with canonical (Hermite-reduced) basis.

    basis_matrix rows are the coefficients of the basis elements on
    1, i, j, ij.  gram[r][c] = trd(e_r * conj(e_c)); the reduced
    discriminant satisfies rd^2 = |det gram|.
    """

    algebra: QuaternionAlgebra
    basis_matrix: tuple[tuple[Fraction, Fraction, Fraction, Fraction], ...]
    gram: tuple[tuple[int, ...], ...]
    reduced_discriminant: int

    @property
    def basis(self) -> tuple[QuatElement, ...]:
        return tuple(self.algebra.element(*row) for row in self.basis_matrix)

    def coordinates(self, x: QuatElement) -> list[Fraction] | None:
        """Coefficients of x on the basis, or None when x is outside Q-span
        (never for rank-4 bases)."""
        mat = [list(r) for r in self.basis_matrix]
        return rat_mat_solve(mat, list(x.coeffs))

    def contains(self, x: QuatElement) -> bool:
        coords = self.coordinates(x)
        return coords is not None and all(c.denominator == 1 for c in coords)

    def element_from_coordinates(self, coords) -> QuatElement:
        out = self.algebra.element(0, 0, 0, 0)
        for c, e in zip(coords, self.basis):
            out = out + e.scale(c)
        return out

    def index_of_sublattice(self, other: "Order") -> Fraction:
        """[self : other] as a positive rational (integer when other <= self)."""
        d_self = abs(rat_mat_det([list(r) for r in self.basis_matrix]))
        d_other = abs(rat_mat_det([list(r) for r in other.basis_matrix]))
        return d_other / d_self

    def to_json(self) -> list[list[str]]:
        return [[str(c) for c in row] for row in self.basis_matrix]

    def __repr__(self) -> str:
        return f"Order(disc={self.reduced_discriminant}, basis={self.to_json()})"


def _canonical_rows(rows: list[list[Fraction]]) -> tuple[tuple[Fraction, ...], ...]:
    """Hermite-reduced basis with row r pivoting on coordinate r.

    Computed as an integer HNF on reversed coordinates so that the
    leading basis vector stays proportional to 1 whenever 1 is in the
    lattice; this makes serialized orders reproducible and keeps
    coefficient boxes aligned with the scalar direction.
    """
    den = lcm_of([c.denominator for row in rows for c in row] or [1])
    ints = [[int(c * den) for c in reversed(row)] for row in rows]
    reduced = hnf_rows(ints)
    if len(reduced) != 4:
        raise OrderError("basis does not span a full lattice")
    back = [[Fraction(c, den) for c in reversed(row)] for row in reversed(reduced)]
    return tuple(tuple(row) for row in back)


def verify_order(algebra: QuaternionAlgebra, basis_rows) -> Order:
    """Check the order axioms for a 4-element basis and build the Order.

    basis_rows: four coefficient vectors on 1, i, j, ij (any rationals).
    Raises OrderError naming the failing element or product.
    """
    rows = [[Fraction(c) for c in row] for row in basis_rows]
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise OrderError("an order basis needs exactly 4 elements of 4 coefficients")
    canon = _canonical_rows(rows)
    elements = [algebra.element(*row) for row in canon]

    def in_lattice(x: QuatElement) -> bool:
        coords = rat_mat_solve([list(r) for r in canon], list(x.coeffs))
        return coords is not None and all(c.denominator == 1 for c in coords)

    if not in_lattice(algebra.one()):
        raise OrderError("1 not in lattice")
    for name, e in zip("e0 e1 e2 e3".split(), elements):
        t, n = e.trd(), e.nrd()
        if t.denominator != 1:
            raise OrderError(f"not integral: trd({name}) = {t}")
        if n.denominator != 1:
            raise OrderError(f"not integral: nrd({name}) = {n}")
    for r, x in enumerate(elements):
        for s, y in enumerate(elements):
            if not in_lattice(x * y):
                raise OrderError(f"not closed: e{r}*e{s} outside the lattice")
    gram_rows = []
    for x in elements:
        gram_row = []
        for y in elements:
            t = (x * y.conj()).trd()
            assert t.denominator == 1
            gram_row.append(int(t))
        gram_rows.append(tuple(gram_row))
    det = rat_mat_det([[Fraction(v) for v in row] for row in gram_rows])
    rd = int_sqrt_exact(abs(int(det)))
    if rd is None:
        raise OrderError("|det gram| is not a perfect square; basis is not an order basis")
    return Order(algebra, canon, tuple(gram_rows), rd)


def standard_order(algebra: QuaternionAlgebra) -> Order:
    """The order Z<1, i, j, ij>."""
    return verify_order(algebra, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])


def _enlarge_once(order: Order, p: int) -> Order | None:
    """A superorder of index p (or p^2 from a pair) at the prime p, or None.

    Candidates are w = (sum c_r e_r)/p over c in [0,p)^4; a candidate
    must first have integral trd and nrd, then the enlarged lattice must
    verify as an order.  Iteration order is lexicographic in c, so the
    smallest valid enlargement is chosen deterministically.
    """
    basis = order.basis
    filtered: list[tuple[tuple[int, ...], QuatElement]] = []
    found: Order | None = None
    import itertools

    for c in itertools.product(range(p), repeat=4):
        if not any(c):
            continue
        w = order.element_from_coordinates(c).scale(Fraction(1, p))
        if w.trd().denominator != 1 or w.nrd().denominator != 1:
            continue
        if order.contains(w):
            continue
        filtered.append((c, w))
        cand_rows = [list(r) for r in order.basis_matrix] + [list(w.coeffs)]
        try:
            cand = verify_order(order.algebra, _stack_to_basis(cand_rows))
        except OrderError:
            continue
        if cand.reduced_discriminant < order.reduced_discriminant:
            return cand
    # no single vector worked: try pairs of prefiltered candidates
    for idx1 in range(len(filtered)):
        for idx2 in range(idx1 + 1, len(filtered)):
            w1, w2 = filtered[idx1][1], filtered[idx2][1]
            cand_rows = [list(r) for r in order.basis_matrix] + [list(w1.coeffs), list(w2.coeffs)]
            try:
                cand = verify_order(order.algebra, _stack_to_basis(cand_rows))
            except OrderError:
                continue
            if cand.reduced_discriminant < order.reduced_discriminant:
                return cand
    return found


def _stack_to_basis(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    """Reduce a generating set (possibly >4 rows) to a 4-row lattice basis."""
    den = lcm_of([Fraction(c).denominator for row in rows for c in row] or [1])
    ints = [[int(Fraction(c) * den) for c in row] for row in rows]
    reduced = hnf_rows(ints)
    if len(reduced) != 4:
        raise OrderError("generating set does not span a full lattice")
    return [[Fraction(c, den) for c in row] for row in reduced]


def maximalize(order: Order) -> Order:
    """A maximal order containing the input.

    Repeatedly enlarges at primes whose square still divides the gap
    between the reduced discriminant and the product of finite ramified
    primes; terminates because the discriminant strictly decreases.
    """
    target = ramification(order.algebra).reduced_discriminant
    current = order
    while current.reduced_discriminant != target:
        gap = current.reduced_discriminant // target
        assert current.reduced_discriminant % target == 0
        p = min(factorize(gap))
        if p > MAX_ENLARGEMENT_PRIME:
            raise OrderError(f"unsupported: enlargement prime {p} > {MAX_ENLARGEMENT_PRIME}")
        bigger = _enlarge_once(current, p)
        if bigger is None:
            raise OrderError(f"no superorder found at {p}; input is likely not an order")
        current = bigger
    return current
