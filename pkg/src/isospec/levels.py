"""Local level groups, the global level, conjugators, and membership.

A GlobalLevel fixes a maximal order, a designated ramified prime v0,
and finitely many explicit local conditions; all unlisted split primes
carry the full integral group and unlisted ramified primes the full
norm-one unit group.  A Conjugator supplies finitely many local
elements x_p; the conjugated level is K^x = x K x^{-1}, so membership
of g in K^x at p is membership of x_p^{-1} g x_p in K_p.

Split-place conditions are evaluated on the p-adic splitting image
g = [[alpha, beta], [gamma, delta]]:

  Hyperspecial            integral entries (determinant is 1 already)
  PrincipalCongruence(k)  g = identity mod p^k
  HeckeCongruence(k)      integral and gamma = 0 mod p^k
  SymmetricCongruence(k)  alpha = delta = 1 and beta = gamma = 0 mod p^k,
                          and beta = gamma mod p^(k+1)

At a ramified prime the local division algebra has a unique maximal
order with uniformizer P; RamifiedFull is its norm-one group and
RamifiedUnitFiltration(n) the subgroup of elements congruent to 1 mod
P^n, where the P-adic valuation of x is v_p(nrd(x)).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from ._util import int_valuation, lcm_of, modinv
from .localarith import PrecisionError, valuation
from .orders import Order
from .quaternion import QuatElement, adapt_split_map, ramification, split_padic

HYPERSPECIAL = "Hyperspecial"
PRINCIPAL = "PrincipalCongruence"
HECKE = "HeckeCongruence"
SYMMETRIC = "SymmetricCongruence"
RAMIFIED_FULL = "RamifiedFull"
RAMIFIED_UNIT = "RamifiedUnitFiltration"

SPLIT_KINDS = (HYPERSPECIAL, PRINCIPAL, HECKE, SYMMETRIC)
RAMIFIED_KINDS = (RAMIFIED_FULL, RAMIFIED_UNIT)


@dataclass(frozen=True)
class LocalLevel:
    """One local congruence condition.  depth is the exponent k (or the
    filtration index n); it must be absent for Hyperspecial/RamifiedFull."""

    prime: int
    kind: str
    depth: int | None = None

    def __post_init__(self):
        if self.kind not in SPLIT_KINDS + RAMIFIED_KINDS:
            raise ValueError(f"unknown level kind {self.kind!r}")
        if self.kind in (HYPERSPECIAL, RAMIFIED_FULL):
            if self.depth is not None:
                raise ValueError(f"{self.kind} takes no depth parameter")
        else:
            if self.depth is None or self.depth < 1:
                raise ValueError(f"{self.kind} needs depth >= 1")

    @property
    def congruence_depth(self) -> int:
        """Largest exponent appearing in the defining congruences."""
        if self.kind == HYPERSPECIAL:
            return 0
        if self.kind == SYMMETRIC:
            return self.depth + 1
        if self.kind == RAMIFIED_FULL:
            return 0
        return self.depth

    def to_json(self) -> dict:
        out = {"p": self.prime, "kind": self.kind}
        if self.depth is not None:
            out["k"] = self.depth
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LocalLevel":
        return cls(data["p"], data["kind"], data.get("k"))


class GlobalLevel:
    """The compact open level K = prod K_v determined by finitely many
    explicit local conditions over a fixed maximal order."""

    def __init__(self, order: Order, v0: int, locals_: "list[LocalLevel] | None" = None):
        self.order = order
        self.algebra = order.algebra
        self.ram = ramification(self.algebra)
        if self.order.reduced_discriminant != self.ram.reduced_discriminant:
            raise ValueError("GlobalLevel requires a maximal order")
        if v0 not in self.ram.finite_places:
            raise ValueError(f"designated place v0={v0} is not a ramified prime")
        self.v0 = v0
        self.locals: dict[int, LocalLevel] = {}
        for ll in locals_ or []:
            if ll.prime in self.locals:
                raise ValueError(f"duplicate local level at {ll.prime}")
            ramified = ll.prime in self.ram.finite_places
            if ramified and ll.kind not in RAMIFIED_KINDS:
                raise ValueError(f"{ll.kind} not allowed at ramified prime {ll.prime}")
            if not ramified and ll.kind in RAMIFIED_KINDS:
                raise ValueError(f"{ll.kind} only allowed at ramified primes, not {ll.prime}")
            self.locals[ll.prime] = ll
        self._split_cache: dict[tuple[int, int], object] = {}

    def local_at(self, p: int) -> LocalLevel:
        if p in self.locals:
            return self.locals[p]
        if p in self.ram.finite_places:
            return LocalLevel(p, RAMIFIED_FULL)
        return LocalLevel(p, HYPERSPECIAL)

    def leveled_places(self) -> list[int]:
        return sorted(self.locals)

    def split_leveled_places(self) -> list[int]:
        return [p for p in sorted(self.locals) if p not in self.ram.finite_places]

    def split_map(self, p: int, precision: int):
        """Adapted splitting at the split prime p, cached per precision."""
        key = (p, precision)
        if key not in self._split_cache:
            raw = split_padic(self.algebra, p, precision)
            images = [raw.image(e) for e in self.order.basis]
            adapted, _ = adapt_split_map(raw, images)
            self._split_cache[key] = adapted
        return self._split_cache[key]

    def basis_residues(self, p: int, modulus_exp: int) -> list[tuple[int, int, int, int]]:
        """Integer residues mod p^modulus_exp of the order-basis images."""
        smap = self.split_map(p, modulus_exp)
        out = []
        for e in self.order.basis:
            m = smap.image(e)
            out.append(m.residues(modulus_exp))
        return out

    def to_json(self) -> dict:
        return {
            "algebra": self.algebra.to_json(),
            "order": self.order.to_json(),
            "v0": self.v0,
            "locals": [self.locals[p].to_json() for p in sorted(self.locals)],
        }

    def __repr__(self) -> str:
        locs = ", ".join(f"{p}:{ll.kind}({ll.depth})" for p, ll in sorted(self.locals.items()))
        return f"GlobalLevel(v0={self.v0}, locals=[{locs}])"


@dataclass(frozen=True)
class Conjugator:
    """Finitely supported element of the finite-adelic unit group.

    split_parts maps a split prime to a rational 2x2 matrix with nonzero
    determinant; ramified_parts maps a ramified prime to a QuatElement
    with nonzero reduced norm.  Every other place is the identity.
    """

    split_parts: tuple = ()  # ((p, ((r,r),(r,r))), ...)
    ramified_parts: tuple = ()  # ((p, QuatElement), ...)

    @classmethod
    def identity(cls) -> "Conjugator":
        return cls()

    @classmethod
    def from_matrix(cls, p: int, rows) -> "Conjugator":
        mat = tuple(tuple(Fraction(x) for x in row) for row in rows)
        det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
        if det == 0:
            raise ValueError("conjugator matrix must be invertible")
        return cls(split_parts=((p, mat),))

    @classmethod
    def from_element(cls, p: int, x: QuatElement) -> "Conjugator":
        if x.nrd() == 0:
            raise ValueError("conjugator element must have nonzero reduced norm")
        return cls(ramified_parts=((p, x),))

    def combined(self, other: "Conjugator") -> "Conjugator":
        sp = dict(self.split_parts)
        for p, m in other.split_parts:
            if p in sp:
                raise ValueError(f"duplicate conjugator support at {p}")
            sp[p] = m
        rp = dict(self.ramified_parts)
        for p, x in other.ramified_parts:
            if p in rp:
                raise ValueError(f"duplicate conjugator support at {p}")
            rp[p] = x
        return Conjugator(tuple(sorted(sp.items())), tuple(sorted(rp.items())))

    def support(self) -> list[int]:
        return sorted([p for p, _ in self.split_parts] + [p for p, _ in self.ramified_parts])

    def matrix_at(self, p: int):
        for q, m in self.split_parts:
            if q == p:
                return m
        return None

    def element_at(self, p: int):
        for q, x in self.ramified_parts:
            if q == p:
                return x
        return None

    def inverse(self) -> "Conjugator":
        sp = []
        for p, m in self.split_parts:
            (a, b), (c, d) = m
            det = a * d - b * c
            sp.append((p, ((d / det, -b / det), (-c / det, a / det))))
        rp = [(p, x.inverse()) for p, x in self.ramified_parts]
        return Conjugator(tuple(sp), tuple(rp))

    def to_json(self) -> list:
        out = []
        for p, m in self.split_parts:
            out.append({"p": p, "matrix": [[str(x) for x in row] for row in m]})
        for p, x in self.ramified_parts:
            out.append({"p": p, "element": [str(c) for c in x.coeffs]})
        return sorted(out, key=lambda d: d["p"])

    @classmethod
    def from_json(cls, data: list, algebra=None) -> "Conjugator":
        out = cls.identity()
        for entry in data:
            if "matrix" in entry:
                out = out.combined(cls.from_matrix(entry["p"], [[Fraction(x) for x in row] for row in entry["matrix"]]))
            else:
                if algebra is None:
                    raise ValueError("ramified conjugator part needs the algebra")
                coeffs = [Fraction(x) for x in entry["element"]]
                out = out.combined(cls.from_element(entry["p"], algebra.element(*coeffs)))
        return out


# ---------------------------------------------------------------------------
# hypothesis H3


@dataclass(frozen=True)
class H3Report:
    passes: bool
    v0: int
    kind: str
    normality_conjugators: int
    normality_samples: int
    normality_failures: int
    product_structure: str

    def to_json(self) -> dict:
        return {
            "passes": self.passes,
            "v0": self.v0,
            "kind": self.kind,
            "normality_conjugators": self.normality_conjugators,
            "normality_samples": self.normality_samples,
            "normality_failures": self.normality_failures,
            "product_structure": self.product_structure,
        }


def elements_of_norm(order: Order, value: Fraction, bound: int) -> list[QuatElement]:
    """All order elements of the given reduced norm with basis coefficients
    in [-bound, bound], in lexicographic coefficient order.  Brute force;
    intended for tiny bounds."""
    out = []
    for c in itertools.product(range(-bound, bound + 1), repeat=4):
        x = order.element_from_coordinates(c)
        if x.nrd() == value:
            out.append(x)
    return out


def uniformizer_element(order: Order, p: int, bound: int = 3) -> QuatElement:
    """An order element of reduced norm +-p (P-adic valuation 1)."""
    for target in (Fraction(p), Fraction(-p)):
        found = elements_of_norm(order, target, bound)
        if found:
            return found[0]
    raise ValueError(f"no order element of norm +-{p} with coefficients up to {bound}")


def _p_integral(order: Order, x: QuatElement, p: int) -> bool:
    coords = order.coordinates(x)
    if coords is None:
        return False
    return all(c.denominator % p != 0 for c in coords)


def _in_ramified_level(level: GlobalLevel, ll: LocalLevel, x: QuatElement, p: int) -> bool:
    if not _p_integral(level.order, x, p):
        return False
    if ll.kind == RAMIFIED_FULL:
        return True
    diff = x - level.algebra.one()
    if diff.is_zero():
        return True
    return valuation(diff.nrd(), p) >= ll.depth


def check_h3(level: GlobalLevel) -> H3Report:
    """Certify the designated-place hypothesis.

    The catalog only admits the full norm-one unit group or a unit
    filtration step at v0; both are normal in the full local unit group
    (the maximal order is unique at a ramified prime and the radical
    powers are two-sided ideals).  The computational check conjugates a
    sample of local level elements by a uniformizer and by norm-unit
    elements and verifies containment exactly.
    """
    v0 = level.v0
    ll = level.local_at(v0)
    if ll.kind not in RAMIFIED_KINDS:
        raise ValueError(f"v0={v0} does not carry a ramified-place level")
    order = level.order
    pi = uniformizer_element(order, v0)
    units = [x for x in elements_of_norm(order, Fraction(1), 2) if not x.is_zero()]
    extra_units = []
    for c in itertools.product(range(-2, 3), repeat=4):
        x = order.element_from_coordinates(c)
        n = x.nrd()
        if n != 0 and valuation(n, v0) == 0:
            extra_units.append(x)
        if len(extra_units) >= 12:
            break
    sample = [g for g in units if _in_ramified_level(level, ll, g, v0)][:40]
    conjugators = [pi] + extra_units[:12]
    failures = 0
    for c in conjugators:
        cinv = c.inverse()
        for g in sample:
            h = c * g * cinv
            if not _in_ramified_level(level, ll, h, v0):
                failures += 1
    return H3Report(
        passes=failures == 0,
        v0=v0,
        kind=ll.kind,
        normality_conjugators=len(conjugators),
        normality_samples=len(sample),
        normality_failures=failures,
        product_structure="product form by construction: K = K_v0 * K^v0 with disjoint local supports",
    )


# ---------------------------------------------------------------------------
# membership


def _scaled_integer_matrix(mat) -> tuple[tuple[int, ...], ...]:
    """Clear denominators of a rational 2x2 matrix (same projective action)."""
    den = lcm_of([Fraction(x).denominator for row in mat for x in row])
    return tuple(tuple(int(Fraction(x) * den) for x in row) for row in mat)


def _split_conditions(kind: str, k: int | None, entries: tuple[int, int, int, int], p: int, avail: int) -> bool:
    """Evaluate the level congruences on integer residues mod p^avail."""
    a, b, c, d = entries
    mod = p**avail
    if kind == HYPERSPECIAL:
        return True  # integrality was established by the caller
    if kind == PRINCIPAL:
        m = p**k
        return (a - 1) % m == 0 and b % m == 0 and c % m == 0 and (d - 1) % m == 0
    if kind == HECKE:
        return c % p**k == 0
    if kind == SYMMETRIC:
        m = p**k
        m1 = p ** (k + 1)
        return (
            (a - 1) % m == 0
            and (d - 1) % m == 0
            and b % m == 0
            and c % m == 0
            and (b - c) % m1 == 0
        )
    raise ValueError(f"not a split-place kind: {kind}")


def member(level: GlobalLevel, gamma: QuatElement, p: int, conjugator: "Conjugator | None" = None) -> bool:
    """Whether gamma lies in K_p (or in (K^x)_p when a conjugator is given).

    Preconditions (checked): nrd(gamma) = 1 and gamma lies in the order
    localized at p.  Membership of gamma in K^x at p is evaluated as
    membership of x_p^{-1} gamma x_p in K_p; the working precision is
    raised by twice the valuation of det x_p.
    """
    if gamma.nrd() != 1:
        raise ValueError("member expects a norm-one element")
    if not _p_integral(level.order, gamma, p):
        raise ValueError(f"element is not integral at {p}")
    ll = level.local_at(p)
    if ll.kind in RAMIFIED_KINDS:
        x = conjugator.element_at(p) if conjugator else None
        g = gamma if x is None else x.inverse() * gamma * x
        return _in_ramified_level(level, ll, g, p)
    coords = level.order.coordinates(gamma)
    xmat = conjugator.matrix_at(p) if conjugator else None
    base = ll.congruence_depth + 2
    attempt_prec = base
    if xmat is not None:
        xi = _scaled_integer_matrix(xmat)
        det = xi[0][0] * xi[1][1] - xi[0][1] * xi[1][0]
        dval = int_valuation(det, p)
        attempt_prec = base + 2 * dval
    for retry in range(2):
        try:
            return _split_member(level, ll, coords, p, attempt_prec, xmat)
        except PrecisionError:
            if retry:
                raise
            attempt_prec *= 2
    raise AssertionError("unreachable")


def _split_member(level: GlobalLevel, ll: LocalLevel, coords, p: int, prec: int, xmat) -> bool:
    modulus = p**prec
    basis_res = level.basis_residues(p, prec)
    img = [0, 0, 0, 0]
    for c, mat in zip(coords, basis_res):
        c = Fraction(c)
        cres = c.numerator * modinv(c.denominator, modulus) % modulus
        for t in range(4):
            img[t] = (img[t] + cres * mat[t]) % modulus
    if xmat is None:
        return _split_conditions(ll.kind, ll.depth, tuple(img), p, prec)
    xi = _scaled_integer_matrix(xmat)
    det = xi[0][0] * xi[1][1] - xi[0][1] * xi[1][0]
    dval = int_valuation(det, p)
    adj = (xi[1][1], -xi[0][1], -xi[1][0], xi[0][0])
    a, b, c, d = img
    e, f, g, h = (x % modulus for x in adj)
    # N = adj(X) * M * X mod p^prec
    t00 = e * a + f * c
    t01 = e * b + f * d
    t10 = g * a + h * c
    t11 = g * b + h * d
    x00, x01, x10, x11 = (x % modulus for x in (xi[0][0], xi[0][1], xi[1][0], xi[1][1]))
    n00 = (t00 * x00 + t01 * x10) % modulus
    n01 = (t00 * x01 + t01 * x11) % modulus
    n10 = (t10 * x00 + t11 * x10) % modulus
    n11 = (t10 * x01 + t11 * x11) % modulus
    pd = p**dval
    if any(n % pd for n in (n00, n01, n10, n11)):
        return False  # conjugated element not integral at p
    avail = prec - dval
    need = ll.congruence_depth
    if avail < need:
        raise PrecisionError(f"membership at {p} needs more than {prec} digits")
    inv_unit = modinv(det // pd, p**avail)
    entries = tuple((n // pd) * inv_unit % p**avail for n in (n00, n01, n10, n11))
    return _split_conditions(ll.kind, ll.depth, entries, p, avail)


def conjugated_member(level: GlobalLevel, conjugator: Conjugator, gamma: QuatElement, p: int) -> bool:
    """Membership of gamma in (K^x)_p = x_p K_p x_p^{-1}."""
    return member(level, gamma, p, conjugator)
