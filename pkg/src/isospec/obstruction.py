"""Reduced-norm non-isometry certificates.

The certificate machinery has three stages:

1. normalizer_norm_classes: at each split leveled prime p, compute the
   square classes of determinants of elements of PGL_2(Q_p) that
   normalize the image of the local level group (the image contains the
   level group and its negative).  Certification of a single candidate
   is exact: a candidate n with det valuation d normalizes iff it
   conjugates a generating set of the group mod p^M both ways into the
   group, where M = depth + 1 + 2d (stability lemma below).  The search
   over candidates is a digit-by-digit backtracking over n mod p^M,
   pruned by necessary congruences; exhaustiveness over det valuations
   in [0, 2*radius] is the reported radius assumption.

2. obstruction_group: the classes not excluded at each place are divided
   out of the local square-class groups, the blocks are summed, and the
   localization vectors of -1 and of the supported primes are divided
   out by F_2 elimination.  What remains obstructs membership in
   (normalizer of the level) * (rational points of the adjoint group).

3. certify: the class vector of the conjugator's reduced norms is
   reduced against the relation space; a nonzero result certifies
   non-isometry of the paired quotients, conditional on the radius
   assumptions.  A zero result is reported as Inconclusive, never as a
   claim of isometry.

Stability lemma used throughout: for a level group with congruence
conditions of depth c (mod p^c) and a candidate n with v(det n) = d,
whether n*s*n^{-1} satisfies the conditions depends only on n mod
p^(c+1+2d); and both the group and its conjugate contain the principal
congruence group of level c+1+2d, so agreement of generators mod that
modulus certifies equality of the groups.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ._util import int_valuation, modinv, primitive_root_mod_pk
from .levels import (
    HECKE,
    HYPERSPECIAL,
    PRINCIPAL,
    RAMIFIED_KINDS,
    SYMMETRIC,
    Conjugator,
    GlobalLevel,
    LocalLevel,
)
from .localarith import SquareClass, square_class, square_class_group

SEARCH_NODE_BUDGET = 5_000_000


# ---------------------------------------------------------------------------
# generating sets for level groups mod p^M


def _mat_mod(m, mod):
    return tuple(x % mod for x in m)


def _mmul(x, y, mod):
    return (
        (x[0] * y[0] + x[1] * y[2]) % mod,
        (x[0] * y[1] + x[1] * y[3]) % mod,
        (x[2] * y[0] + x[3] * y[2]) % mod,
        (x[2] * y[1] + x[3] * y[3]) % mod,
    )


def _madj(m, mod):
    return (m[3] % mod, -m[1] % mod, -m[2] % mod, m[0] % mod)


def level_group_generators(ll: LocalLevel, p: int, M: int) -> list[tuple[int, int, int, int]]:
    """Matrices generating the image of the level group in SL_2(Z/p^M).

    Hyperspecial and Hecke groups use the Iwahori-type factorization
    g = lower * diagonal * upper; principal congruence groups (and the
    deeper layers of symmetric ones) are pro-p and are generated one
    graded level at a time by I + p^m E for E in a basis of the trace
    zero matrices.  Correctness at small moduli is checked by the test
    suite against brute-force enumeration.
    """
    if p == 2 and ll.kind in (HECKE, HYPERSPECIAL):
        raise ValueError("normalizer computation at p = 2 is not supported for unit-group levels")
    mod = p**M
    gens: list[tuple[int, int, int, int]] = []

    def diag_unit(u: int) -> tuple[int, int, int, int]:
        return (u % mod, 0, 0, modinv(u, mod))

    def graded(m_low: int) -> None:
        for m in range(m_low, M):
            t = p**m
            gens.append((1, t, 0, 1))
            gens.append((1, 0, t, 1))
            gens.append(diag_unit(1 + t))

    if ll.kind == HYPERSPECIAL:
        gens.append((1, 1, 0, 1))
        gens.append((1, 0, 1, 1))
        gens.append(diag_unit(primitive_root_mod_pk(p, M)))
    elif ll.kind == HECKE:
        gens.append((1, 1, 0, 1))
        gens.append((1, 0, p**ll.depth % mod, 1))
        gens.append(diag_unit(primitive_root_mod_pk(p, M)))
    elif ll.kind == PRINCIPAL:
        graded(ll.depth)
    elif ll.kind == SYMMETRIC:
        k = ll.depth
        t = p**k
        gens.append((1, t, t, (1 + t * t) % mod))
        gens.append(diag_unit(1 + t))
        graded(k + 1)
    else:
        raise ValueError(f"no split generating set for {ll.kind}")
    return [_mat_mod(g, mod) for g in gens]


def _in_level_mod(ll: LocalLevel, m, p: int, avail: int, up_to_sign: bool) -> bool:
    """Whether a matrix mod p^avail satisfies the level congruences,
    truncated to what avail digits can see (a necessary test when avail
    is below the congruence depth, exact once it reaches it)."""

    def sat(mm) -> bool:
        a, b, c, d = mm
        if ll.kind == HYPERSPECIAL:
            return True
        if ll.kind == HECKE:
            e = min(ll.depth, avail)
            return c % p**e == 0
        if ll.kind == PRINCIPAL:
            e = min(ll.depth, avail)
            q = p**e
            return (a - 1) % q == 0 and b % q == 0 and c % q == 0 and (d - 1) % q == 0
        if ll.kind == SYMMETRIC:
            e = min(ll.depth, avail)
            e1 = min(ll.depth + 1, avail)
            q, q1 = p**e, p**e1
            return (
                (a - 1) % q == 0
                and (d - 1) % q == 0
                and b % q == 0
                and c % q == 0
                and (b - c) % q1 == 0
            )
        raise ValueError(ll.kind)

    if sat(m):
        return True
    if up_to_sign:
        mod = p**avail
        return sat(tuple(-x % mod for x in m))
    return False


# ---------------------------------------------------------------------------
# exact certification of one candidate


def _certify_candidate(n, p: int, d: int, M: int, gens, ll: LocalLevel) -> bool:
    """Exact test that n (an integer matrix mod p^M, v(det)=d) normalizes
    the sign-extended level group."""
    mod = p**M
    det = (n[0] * n[3] - n[1] * n[2]) % mod
    if det == 0 or int_valuation(det, p) != d:
        return False
    pd = p**d
    avail = M - d
    unit = modinv(det // pd, p**avail)
    adjn = _madj(n, mod)
    for s in gens:
        for left, right in ((n, adjn), (adjn, n)):
            c = _mmul(_mmul(left, s, mod), right, mod)
            if any(x % pd for x in c):
                return False
            conj = tuple((x // pd) * unit % p**avail for x in c)
            if not _in_level_mod(ll, conj, p, avail, up_to_sign=True):
                return False
    return True


# ---------------------------------------------------------------------------
# stratified backtracking search


def _search_stratum(
    p: int,
    d: int,
    M: int,
    gens,
    ll: LocalLevel,
    certified_classes: set,
    budget: list,
):
    """Integer matrices n mod p^M with v(det n) = d that certifiably
    normalize the level image, skipping any whose determinant class is
    already certified (their subtree can add no new class).

    The per-level pruning tests only congruences visible from the known
    digits, so no true normalizer is discarded.
    """
    found = []
    pd = p**d
    # per-level tables: modulus, required determinant divisor, reduced gens
    mods = [p**e for e in range(M + 1)]
    gens_at = [None] + [
        [tuple(x % mods[e] for x in s) for s in gens] for e in range(1, M + 1)
    ]
    known_classes = {}  # unit digit mod p -> SquareClass (for this stratum)
    for u in range(1, p):
        known_classes[u] = _det_class(p, d, u)

    def prune(n, ell: int) -> bool:
        mod = mods[ell]
        det = (n[0] * n[3] - n[1] * n[2]) % mod
        need = min(d, ell)
        pneed = mods[need]
        if det % pneed:
            return True
        inv_unit = None
        if ell > d:
            if det % mods[min(d + 1, ell)] == 0:
                return True  # deeper stratum (or degenerate det)
            unit_digit = (det // pd) % p
            if known_classes[unit_digit] in certified_classes:
                return True
            avail = ell - d
            inv_unit = modinv((det // pd) % mods[avail], mods[avail])
        adjn = (n[3] % mod, -n[1] % mod, -n[2] % mod, n[0] % mod)
        for s in gens_at[ell]:
            for left, right in ((n, adjn), (adjn, n)):
                c = _mmul(_mmul(left, s, mod), right, mod)
                if c[0] % pneed or c[1] % pneed or c[2] % pneed or c[3] % pneed:
                    return True
                if inv_unit is not None:
                    avail = ell - d
                    ma = mods[avail]
                    conj = (
                        (c[0] // pd) * inv_unit % ma,
                        (c[1] // pd) * inv_unit % ma,
                        (c[2] // pd) * inv_unit % ma,
                        (c[3] // pd) * inv_unit % ma,
                    )
                    if not _in_level_mod(ll, conj, p, avail, up_to_sign=True):
                        return True
        return False

    digits = list(range(p))
    stack = [((0, 0, 0, 0), 0)]
    while stack:
        n, ell = stack.pop()
        budget[0] -= 1
        if budget[0] < 0:
            raise RuntimeError(
                f"normalizer search budget exceeded at p={p}, det valuation {d}; reduce the radius"
            )
        if ell == M:
            if _certify_candidate(n, p, d, M, gens, ll):
                found.append(n)
            continue
        step = mods[ell]
        n0, n1, n2, n3 = n
        first = ell == 0
        for da in digits:
            e0 = n0 + da * step
            for db in digits:
                e1 = n1 + db * step
                for dc in digits:
                    e2 = n2 + dc * step
                    for dd in digits:
                        child = (e0, e1, e2, n3 + dd * step)
                        if first and not (da or db or dc or dd):
                            continue  # primitivity: n nonzero mod p
                        if not prune(child, ell + 1):
                            stack.append((child, ell + 1))
    return sorted(found)


def _det_class(p: int, d: int, unit_mod_p: int) -> SquareClass:
    return square_class(Fraction(unit_mod_p) * Fraction(p) ** d, p)


def _group_closure(classes: set, p: int) -> set:
    out = set(classes) | {square_class(1, p)}
    changed = True
    while changed:
        changed = False
        for x in list(out):
            for y in list(out):
                z = x * y
                if z not in out:
                    out.add(z)
                    changed = True
    return out


@dataclass(frozen=True)
class NormClassBound:
    """Determinant square classes of certified local normalizers.

    certified_lower are classes realized by explicitly certified
    normalizers; assumed_upper equals certified_lower, with exactness
    conditional on the enumeration radius (normalizers must move the
    fixed-vertex data of the level group in the local tree by a bounded
    amount, which bounds the determinant valuation by 2*radius).
    """

    place: int
    certified_lower: tuple
    assumed_upper: tuple
    radius: int
    exact: bool
    witnesses: tuple
    searched_nodes: int

    def to_json(self) -> dict:
        return {
            "p": self.place,
            "lower": sorted(c.rep for c in self.certified_lower),
            "upper": sorted(c.rep for c in self.assumed_upper),
            "exact": self.exact,
            "radius": self.radius,
            "witnesses": [
                {"class": c.rep, "matrix": list(w)} for c, w in self.witnesses
            ],
        }


def _seed_witnesses(p: int, radius: int) -> list:
    """Cheap candidate normalizers worth certifying before the search."""
    out = [(0, (1, 0, 0, 1)), (0, (0, 1, -1, 0)), (0, (-1, 0, 0, 1))]
    for u in range(2, p):
        out.append((0, (u, 0, 0, 1)))
    for t in range(1, 2 * radius + 1):
        out.append((t, (0, 1, -(p**t), 0)))  # Atkin-Lehner style
        out.append((t, (p**t, 0, 0, 1)))
    return out


def normalizer_norm_classes(
    level: GlobalLevel, p: int, radius: int | None = None, precision: int | None = None
) -> NormClassBound:
    """Certified determinant square classes of normalizers of the local
    level image at the split prime p.

    The search is exhaustive over candidates with determinant valuation
    in [0, 2*radius] (each stratum d is scanned mod p^(depth+1+2d));
    `precision` must cover the deepest stratum modulus when given.
    """
    ll = level.local_at(p)
    if ll.kind in RAMIFIED_KINDS:
        raise ValueError(f"{p} is ramified; its normalizer covers every class")
    if radius is None:
        radius = 2 * (ll.depth or 0) + 1
    depth = ll.congruence_depth
    deepest = depth + 1 + 2 * (2 * radius)
    if precision is not None and precision < deepest:
        raise ValueError(
            f"precision too small: stratified search needs {deepest} digits at {p}"
        )
    certified: set[SquareClass] = set()
    witnesses: list = []
    budget = [SEARCH_NODE_BUDGET]

    def try_candidate(d: int, n) -> None:
        M = depth + 1 + 2 * d
        mod = p**M
        nm = _mat_mod(n, mod)
        det = (nm[0] * nm[3] - nm[1] * nm[2]) % mod
        if det == 0 or int_valuation(det, p) != d:
            return
        gens = level_group_generators(ll, p, M)
        if _certify_candidate(nm, p, d, M, gens, ll):
            cls = _det_class(p, d, (det // p**d) % p)
            if cls not in certified:
                certified.add(cls)
                witnesses.append((cls, nm))

    for d, n in _seed_witnesses(p, radius):
        try_candidate(d, n)
    for d in range(0, 2 * radius + 1):
        M = depth + 1 + 2 * d
        gens = level_group_generators(ll, p, M)
        for n in _search_stratum(p, d, M, gens, ll, certified, budget):
            det = (n[0] * n[3] - n[1] * n[2]) % p**M
            cls = _det_class(p, d, (det // p**d) % p)
            if cls not in certified:
                certified.add(cls)
                witnesses.append((cls, n))
    closed = _group_closure(certified, p)
    assert closed == certified | {square_class(1, p)}, "certified classes fail closure"
    certified = closed
    ordered = tuple(sorted(certified))
    return NormClassBound(
        place=p,
        certified_lower=ordered,
        assumed_upper=ordered,
        radius=radius,
        exact=True,
        witnesses=tuple(witnesses),
        searched_nodes=SEARCH_NODE_BUDGET - budget[0],
    )


# ---------------------------------------------------------------------------
# the global obstruction group


def _class_bits(cls: SquareClass, p: int) -> tuple[int, ...]:
    """Coordinates of a square class in F_2^2 (odd p) or F_2^3 (p = 2)."""
    group = square_class_group(p)
    if p == 2:
        basis = [square_class(-1, 2), square_class(5, 2), square_class(2, 2)]
    else:
        u = next(c for c in group if c.rep not in (1,) and abs(c.rep) < p)
        basis = [u, square_class(p, p)]
    # solve cls = product of subset of basis by brute force (tiny groups)
    for mask in range(1 << len(basis)):
        acc = square_class(1, p)
        for i, b in enumerate(basis):
            if mask >> i & 1:
                acc = acc * b
        if acc == cls:
            return tuple(mask >> i & 1 for i in range(len(basis)))
    raise AssertionError("square class outside its own group")


class _F2Space:
    """Row space over F_2 with reduction, stored as bitmasks."""

    def __init__(self, width: int):
        self.width = width
        self.rows: list[int] = []  # maintained in echelon form

    def reduce(self, vec: int) -> int:
        for row in self.rows:
            if vec & (1 << (row.bit_length() - 1)):
                vec ^= row
        return vec

    def add(self, vec: int) -> None:
        vec = self.reduce(vec)
        if vec:
            self.rows.append(vec)
            self.rows.sort(key=lambda r: -r)

    @property
    def rank(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class ObstructionGroup:
    """Elementary abelian 2-group obstructing membership in
    N(level image) * (rational adjoint points), presented on the square
    classes at the supported split primes modulo certified normalizer
    classes and the localization vectors of -1 and the supported primes.
    """

    support: tuple[int, ...]
    bit_layout: tuple[tuple[int, int], ...]  # (place, width) blocks
    relations: tuple[int, ...]
    rank: int
    bounds: tuple[NormClassBound, ...]

    def _vector_of(self, value: Fraction) -> int:
        vec = 0
        offset = 0
        for p, width in self.bit_layout:
            bits = _class_bits(square_class(value, p), p)
            for i, b in enumerate(bits):
                vec |= b << (offset + i)
            offset += width
        return vec

    def class_vector(self, local_norms: dict[int, Fraction]) -> int:
        """Image of a tuple of local norms (one per supported place)."""
        vec = 0
        offset = 0
        for p, width in self.bit_layout:
            if p in local_norms:
                bits = _class_bits(square_class(local_norms[p], p), p)
                for i, b in enumerate(bits):
                    vec |= b << (offset + i)
            offset += width
        return self.reduce(vec)

    def reduce(self, vec: int) -> int:
        space = _F2Space(sum(w for _, w in self.bit_layout))
        for r in self.relations:
            space.add(r)
        return space.reduce(vec)

    def to_json(self) -> dict:
        return {
            "support": list(self.support),
            "rank": self.rank,
            "local_bounds": [b.to_json() for b in self.bounds],
        }


def obstruction_group(level: GlobalLevel, bounds: list[NormClassBound]) -> ObstructionGroup:
    """Assemble the F_2 quotient from per-place normalizer class bounds.

    Relations divided out: the certified normalizer classes at each
    place, the localization of -1, and the localization of each
    supported prime.  Unsupported split primes are eliminated against
    their own hyperspecial normalizer classes (fresh generator in a
    fresh relation); ramified places contribute no coordinates since
    the designated-place hypothesis makes every class a normalizer norm
    there.
    """
    by_place = {b.place: b for b in bounds}
    support = tuple(sorted(level.split_leveled_places()))
    for p in support:
        if p not in by_place:
            raise ValueError(f"missing normalizer bound at {p}")
    layout = tuple((p, 3 if p == 2 else 2) for p in support)
    width = sum(w for _, w in layout)
    space = _F2Space(width)

    def embed(p: int, cls: SquareClass) -> int:
        vec = 0
        offset = 0
        for q, w in layout:
            if q == p:
                bits = _class_bits(cls, p)
                for i, b in enumerate(bits):
                    vec |= b << (offset + i)
                break
            offset += w
        return vec

    for p in support:
        for cls in by_place[p].assumed_upper:
            space.add(embed(p, cls))

    def loc_vector(t: Fraction) -> int:
        vec = 0
        offset = 0
        for p, w in layout:
            bits = _class_bits(square_class(t, p), p)
            for i, b in enumerate(bits):
                vec |= b << (offset + i)
            offset += w
        return vec

    space.add(loc_vector(Fraction(-1)))
    for q in support:
        space.add(loc_vector(Fraction(q)))
    rank = width - space.rank
    return ObstructionGroup(
        support=support,
        bit_layout=layout,
        relations=tuple(space.rows),
        rank=rank,
        bounds=tuple(by_place[p] for p in support),
    )


# ---------------------------------------------------------------------------
# certificates


NON_ISOMETRIC = "NonIsometric"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Certificate:
    verdict: str
    class_vector: int
    group: ObstructionGroup
    local_norms: tuple[tuple[int, str], ...]
    assumptions: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "class_vector_bits": self.class_vector,
            "class_nonzero": self.class_vector != 0,
            "rank": self.group.rank,
            "support": list(self.group.support),
            "local_norms": [{"p": p, "nrd": s} for p, s in self.local_norms],
            "local_bounds": [b.to_json() for b in self.group.bounds],
            "assumptions": list(self.assumptions),
        }


def certify(level: GlobalLevel, conjugator: Conjugator, group: ObstructionGroup) -> Certificate:
    """Certificate for the conjugated pair: NonIsometric when the class of
    the conjugator's reduced norms survives the quotient.

    Soundness direction: membership of the conjugator in the product of
    the normalizer and the rational adjoint points forces the class
    vector to reduce to zero, so a nonzero reduction certifies
    non-membership, hence non-isometry of the paired quotients.  The
    verdict is conditional on the per-place radius assumptions.
    """
    norms: dict[int, Fraction] = {}
    listed: list[tuple[int, str]] = []
    for p, mat in conjugator.split_parts:
        (a, b), (c, d) = mat
        det = a * d - b * c
        if p not in group.support:
            ll = level.local_at(p)
            if ll.kind in RAMIFIED_KINDS:
                continue  # ramified normalizer covers every class
            raise ValueError(f"conjugator supported at {p} without a normalizer bound")
        norms[p] = det
        listed.append((p, str(det)))
    for p, x in conjugator.ramified_parts:
        if p in group.support:
            raise ValueError("ramified places cannot be in the obstruction support")
        listed.append((p, str(x.nrd())))
    vec = group.class_vector(norms)
    assumptions = tuple(
        f"normalizer search radius {b.radius} at p={b.place} "
        "(fixed-vertex argument bounds determinant valuations by twice the radius)"
        for b in group.bounds
    )
    verdict = NON_ISOMETRIC if vec else INCONCLUSIVE
    return Certificate(
        verdict=verdict,
        class_vector=vec,
        group=group,
        local_norms=tuple(listed),
        assumptions=assumptions,
    )


def certify_pair(level: GlobalLevel, conjugator: Conjugator,
                 radius: int | None = None, precision: int | None = None) -> Certificate:
    """Convenience wrapper: bounds at every supported place, group, verdict."""
    bounds = [
        normalizer_norm_classes(level, p, radius=radius, precision=precision)
        for p in level.split_leveled_places()
    ]
    group = obstruction_group(level, bounds)
    return certify(level, conjugator, group)
