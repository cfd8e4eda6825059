"""Norm-one lattice enumeration, trace spectra, and spectrum comparison.

Elements of the arithmetic lattice are order elements of reduced norm 1
satisfying every local level condition; enumeration is over a box
|c_r| <= height_bound in the order-basis coordinates.  Heights are
always measured in the (canonical) maximal-order basis; every report
records the bound so results are reproducible.

Trace spectra are compared as sets of |trd| values.  Box-truncated
counts are not conjugation invariant, so multiplicities are deliberately
not compared; a missing value triggers a re-search with an enlarged box
(margin_factor) before it is reported as a violation.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .levels import Conjugator, GlobalLevel, member
from .orders import Order
from .quaternion import QuatElement


def _norm_form(order: Order) -> list[list[int]]:
    """Integer matrix q with nrd(sum c_r e_r) = (1/2) c q c^T."""
    return [list(row) for row in order.gram]


def solve_norm_one(order: Order, height_bound: int, workers: int = 1) -> list[tuple[int, int, int, int]]:
    """All coefficient vectors c in [-B, B]^4 with nrd(sum c_r e_r) = 1.

    Two coordinates are scanned and the remaining quadratic is solved
    exactly over the integers per scan point.  The output is sorted and
    closed under negation (the box is symmetric and nrd is even).
    """
    if height_bound < 0:
        raise ValueError("height bound must be >= 0")
    g = _norm_form(order)
    cols = list(range(-height_bound, height_bound + 1))
    if workers <= 1:
        found = _scan_range(g, height_bound, cols)
    else:
        chunks = [cols[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_scan_range, [g] * workers, [height_bound] * workers, chunks)
        found = [t for part in parts for t in part]
    return sorted(set(found))


def _scan_range(g, B: int, c2_values) -> list[tuple[int, int, int, int]]:
    # Solve for c1: q11*c1^2 + L(c0,c2,c3)*c1 + R(c0,c2,c3) - 1 = 0 exactly.
    q11 = g[1][1] // 2
    out = []
    rng = range(-B, B + 1)
    g00, g22, g33 = g[0][0] // 2, g[2][2] // 2, g[3][3] // 2
    g02, g03, g23 = g[0][2], g[0][3], g[2][3]
    g01, g12, g13 = g[0][1], g[1][2], g[1][3]
    for c2 in c2_values:
        for c3 in rng:
            r23 = g22 * c2 * c2 + g33 * c3 * c3 + g23 * c2 * c3 - 1
            l23 = g12 * c2 + g13 * c3
            for c0 in rng:
                lin = g01 * c0 + l23
                rest = r23 + g00 * c0 * c0 + g02 * c0 * c2 + g03 * c0 * c3
                if q11 == 0:
                    if lin == 0:
                        if rest == 0:
                            out.extend((c0, c1, c2, c3) for c1 in rng)
                        continue
                    if rest % lin == 0:
                        c1 = -rest // lin
                        if -B <= c1 <= B:
                            out.append((c0, c1, c2, c3))
                    continue
                disc = lin * lin - 4 * q11 * rest
                if disc < 0:
                    continue
                r = math.isqrt(disc)
                if r * r != disc:
                    continue
                for sgn in ((r,) if r == 0 else (r, -r)):
                    num = -lin + sgn
                    if num % (2 * q11) == 0:
                        c1 = num // (2 * q11)
                        if -B <= c1 <= B:
                            out.append((c0, c1, c2, c3))
    return out


@dataclass(frozen=True)
class LatticeSlice:
    """The box-truncated lattice for one level/conjugator configuration."""

    level: GlobalLevel
    conjugator: Conjugator | None
    height_bound: int
    elements: tuple[tuple[int, int, int, int], ...]

    def quat_elements(self) -> list[QuatElement]:
        return [self.level.order.element_from_coordinates(c) for c in self.elements]

    def config_key(self) -> dict:
        return {
            "level": self.level.to_json(),
            "conjugator": self.conjugator.to_json() if self.conjugator else [],
            "height_bound": self.height_bound,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.config_key(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _places_to_test(level: GlobalLevel, conjugator: Conjugator | None) -> list[int]:
    places = set(level.leveled_places())
    if conjugator is not None:
        places.update(conjugator.support())
    # unlisted split places are hyperspecial (automatic for order elements);
    # unlisted ramified places are the full norm-one unit group (automatic too)
    out = []
    for p in sorted(places):
        ll = level.local_at(p)
        touched = conjugator is not None and p in conjugator.support()
        if ll.congruence_depth == 0 and not touched and ll.kind in ("Hyperspecial", "RamifiedFull"):
            continue
        out.append(p)
    return out


class _SplitTester:
    """Precomputed integer-arithmetic membership test at one split place.

    For integer order-coordinates the image is an integer combination of
    the basis-image residues, and conjugation is folded into transformed
    basis residues N_r = adj(X) * img(e_r) * X once, so the per-element
    test is pure modular arithmetic.  This matches member() exactly on
    integer coordinates (tested).
    """

    def __init__(self, level: GlobalLevel, p: int, conjugator: Conjugator | None):
        from ._util import int_valuation, modinv
        from .levels import _scaled_integer_matrix

        ll = level.local_at(p)
        xmat = conjugator.matrix_at(p) if conjugator else None
        dval = 0
        if xmat is not None:
            xi = _scaled_integer_matrix(xmat)
            det = xi[0][0] * xi[1][1] - xi[0][1] * xi[1][0]
            dval = int_valuation(det, p)
        prec = ll.congruence_depth + 2 + 2 * dval
        modulus = p**prec
        basis = level.basis_residues(p, prec)
        if xmat is not None:
            xi = _scaled_integer_matrix(xmat)
            det = xi[0][0] * xi[1][1] - xi[0][1] * xi[1][0]
            adj = (xi[1][1] % modulus, -xi[0][1] % modulus, -xi[1][0] % modulus, xi[0][0] % modulus)
            xs = (xi[0][0] % modulus, xi[0][1] % modulus, xi[1][0] % modulus, xi[1][1] % modulus)
            transformed = []
            for (a, b, c, d) in basis:
                e, f, g, h = adj
                t00, t01 = e * a + f * c, e * b + f * d
                t10, t11 = g * a + h * c, g * b + h * d
                transformed.append(
                    (
                        (t00 * xs[0] + t01 * xs[2]) % modulus,
                        (t00 * xs[1] + t01 * xs[3]) % modulus,
                        (t10 * xs[0] + t11 * xs[2]) % modulus,
                        (t10 * xs[1] + t11 * xs[3]) % modulus,
                    )
                )
            basis = transformed
            self.pd = p**dval
            self.inv_unit = modinv(det // self.pd, p ** (prec - dval))
            self.avail = prec - dval
        else:
            self.pd = 1
            self.inv_unit = 1
            self.avail = prec
        self.kind = ll.kind
        self.depth = ll.depth
        self.p = p
        self.modulus = modulus
        self.basis = basis

    def test(self, coords) -> bool:
        m = self.modulus
        b0, b1, b2, b3 = self.basis
        c0, c1, c2, c3 = coords
        n00 = (c0 * b0[0] + c1 * b1[0] + c2 * b2[0] + c3 * b3[0]) % m
        n01 = (c0 * b0[1] + c1 * b1[1] + c2 * b2[1] + c3 * b3[1]) % m
        n10 = (c0 * b0[2] + c1 * b1[2] + c2 * b2[2] + c3 * b3[2]) % m
        n11 = (c0 * b0[3] + c1 * b1[3] + c2 * b2[3] + c3 * b3[3]) % m
        pd = self.pd
        iu = self.inv_unit
        if pd > 1:
            if n00 % pd or n01 % pd or n10 % pd or n11 % pd:
                return False
            n00, n01, n10, n11 = n00 // pd, n01 // pd, n10 // pd, n11 // pd
        if iu != 1:
            ma = self.p**self.avail
            n00 = n00 * iu % ma
            n01 = n01 * iu % ma
            n10 = n10 * iu % ma
            n11 = n11 * iu % ma
        return _split_conditions_int(self.kind, self.depth, (n00, n01, n10, n11), self.p)


def _split_conditions_int(kind: str, k, entries, p: int) -> bool:
    a, b, c, d = entries
    if kind == "Hyperspecial":
        return True
    if kind == "PrincipalCongruence":
        m = p**k
        return (a - 1) % m == 0 and b % m == 0 and c % m == 0 and (d - 1) % m == 0
    if kind == "HeckeCongruence":
        return c % p**k == 0
    if kind == "SymmetricCongruence":
        m = p**k
        m1 = m * p
        return (
            (a - 1) % m == 0
            and (d - 1) % m == 0
            and b % m == 0
            and c % m == 0
            and (b - c) % m1 == 0
        )
    raise ValueError(f"not a split-place kind: {kind}")


def enumerate_lattice(
    level: GlobalLevel,
    conjugator: Conjugator | None = None,
    height_bound: int = 10,
    workers: int = 1,
    cache_dir: str | None = None,
) -> LatticeSlice:
    """Norm-one order elements in the box passing all local conditions."""
    probe = LatticeSlice(level, conjugator, height_bound, ())
    if cache_dir:
        cached = _load_slice(cache_dir, probe)
        if cached is not None:
            return cached
    split_testers = []
    ramified_places = []
    for p in _places_to_test(level, conjugator):
        if level.local_at(p).kind in ("RamifiedFull", "RamifiedUnitFiltration"):
            ramified_places.append(p)
        else:
            split_testers.append(_SplitTester(level, p, conjugator))
    kept = []
    for coords in solve_norm_one(level.order, height_bound, workers=workers):
        if not all(t.test(coords) for t in split_testers):
            continue
        if ramified_places:
            gamma = level.order.element_from_coordinates(coords)
            if not all(member(level, gamma, p, conjugator) for p in ramified_places):
                continue
        kept.append(coords)
    out = LatticeSlice(level, conjugator, height_bound, tuple(kept))
    if cache_dir:
        _store_slice(cache_dir, out)
    return out


def _slice_path(cache_dir: str, s: LatticeSlice) -> str:
    return os.path.join(cache_dir, f"slice-{s.config_hash()}.txt")


def _store_slice(cache_dir: str, s: LatticeSlice) -> None:
    os.makedirs(cache_dir, exist_ok=True)
    path = _slice_path(cache_dir, s)
    lines = [f"# isospec-slice {s.config_hash()} n={len(s.elements)}"]
    lines += [" ".join(str(c) for c in coords) for coords in s.elements]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_slice(cache_dir: str, probe: LatticeSlice) -> LatticeSlice | None:
    path = _slice_path(cache_dir, probe)
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) < 3 or header[1] != probe.config_hash():
            return None
        elements = []
        for line in fh:
            if line.strip():
                elements.append(tuple(int(t) for t in line.split()))
    return LatticeSlice(probe.level, probe.conjugator, probe.height_bound, tuple(elements))


# ---------------------------------------------------------------------------
# trace spectra


def geodesic_length(t: int) -> float | None:
    """Length 2*arccosh(t/2) attached to a hyperbolic trace value t > 2."""
    if t <= 2:
        return None
    return 2.0 * math.acosh(t / 2.0)


def classify_trace(t: int) -> str:
    if t > 2:
        return "hyperbolic"
    if t == 2:
        return "parabolic-or-central"
    return "elliptic-or-central"


@dataclass(frozen=True)
class TraceSpectrum:
    """Set of integer values |trd gamma| <= trace_bound realized by a slice,
    with one witness per value."""

    slice: LatticeSlice
    trace_bound: int
    values: tuple[int, ...]
    witnesses: tuple[tuple[int, tuple[int, int, int, int]], ...]

    def witness_for(self, t: int):
        for v, w in self.witnesses:
            if v == t:
                return w
        return None

    def to_json(self) -> dict:
        return {
            "trace_bound": self.trace_bound,
            "height_bound": self.slice.height_bound,
            "values": [
                {
                    "t": t,
                    "class": classify_trace(t),
                    "length": _fmt_length(geodesic_length(t)),
                    "witness": list(self.witness_for(t)),
                }
                for t in self.values
            ],
        }


def _fmt_length(x: float | None) -> str | None:
    return None if x is None else f"{x:.10g}"


def trace_spectrum(s: LatticeSlice, trace_bound: int) -> TraceSpectrum:
    """Collect |trd| values realized in the slice, up to trace_bound."""
    trd_basis = [e.trd() for e in s.level.order.basis]
    seen: dict[int, tuple[int, int, int, int]] = {}
    for coords in s.elements:
        t = sum(Fraction(c) * tb for c, tb in zip(coords, trd_basis))
        assert t.denominator == 1, "order element with non-integral trace"
        val = abs(int(t))
        if val <= trace_bound and val not in seen:
            seen[val] = coords
    values = tuple(sorted(seen))
    return TraceSpectrum(s, trace_bound, values, tuple((v, seen[v]) for v in values))


@dataclass(frozen=True)
class SpectrumComparison:
    agree: bool
    trace_bound: int
    margin_factor: int
    height_bounds: tuple[int, int]
    violations: tuple[dict, ...]
    researched: tuple[int, ...]  # values that needed the enlarged box

    def to_json(self) -> dict:
        return {
            "agree": self.agree,
            "trace_bound": self.trace_bound,
            "margin_factor": self.margin_factor,
            "height_bounds": list(self.height_bounds),
            "violations": [dict(v) for v in self.violations],
            "researched_values": list(self.researched),
        }


def compare_spectra(spec_a: TraceSpectrum, spec_b: TraceSpectrum, margin_factor: int = 3,
                    workers: int = 1, cache_dir: str | None = None) -> SpectrumComparison:
    """Set comparison of two trace spectra with a re-search margin.

    A value present on one side and absent on the other is re-searched on
    the absent side with the height bound scaled by margin_factor before
    being declared a violation.  The margin is a reported heuristic, not
    a completeness proof.
    """
    if spec_a.trace_bound != spec_b.trace_bound:
        raise ValueError("spectra were computed with different trace bounds")
    bound = spec_a.trace_bound
    researched: list[int] = []
    violations: list[dict] = []
    enlarged: dict[int, TraceSpectrum] = {}

    def check_missing(present: TraceSpectrum, absent: TraceSpectrum, side: str):
        missing = sorted(set(present.values) - set(absent.values))
        if not missing:
            return
        key = id(absent)
        if key not in enlarged:
            big = enumerate_lattice(
                absent.slice.level,
                absent.slice.conjugator,
                absent.slice.height_bound * margin_factor,
                workers=workers,
                cache_dir=cache_dir,
            )
            enlarged[key] = trace_spectrum(big, bound)
        wide = enlarged[key]
        for t in missing:
            researched.append(t)
            if t not in wide.values:
                violations.append(
                    {
                        "t": t,
                        "missing_from": side,
                        "witness_other_side": list(present.witness_for(t)),
                        "searched_height": absent.slice.height_bound * margin_factor,
                    }
                )

    check_missing(spec_a, spec_b, "B")
    check_missing(spec_b, spec_a, "A")
    return SpectrumComparison(
        agree=not violations,
        trace_bound=bound,
        margin_factor=margin_factor,
        height_bounds=(spec_a.slice.height_bound, spec_b.slice.height_bound),
        violations=tuple(violations),
        researched=tuple(sorted(set(researched))),
    )


# ---------------------------------------------------------------------------
# torsion


@dataclass(frozen=True)
class TorsionReport:
    criterion_pass: bool
    criterion_place: int | None
    scanned: int
    elliptic_witnesses: tuple[tuple[int, int, int, int], ...]

    @property
    def torsion_free(self) -> bool:
        return self.criterion_pass and not self.elliptic_witnesses

    def to_json(self) -> dict:
        return {
            "criterion_pass": self.criterion_pass,
            "criterion_place": self.criterion_place,
            "scanned_elements": self.scanned,
            "elliptic_witnesses": [list(w) for w in self.elliptic_witnesses],
            "torsion_free": self.torsion_free,
        }


def torsion_free_check(level: GlobalLevel, conjugator: Conjugator | None = None,
                       scan_bound: int = 6, slice_: LatticeSlice | None = None) -> TorsionReport:
    """Sufficient torsion-freeness criterion plus an empirical scan.

    Criterion: some split prime p >= 5 carries a level contained in the
    principal congruence group of level p (PrincipalCongruence(k) or
    SymmetricCongruence(k), k >= 1).  A torsion element there has
    eigenvalues that are roots of unity congruent to 1 mod p, hence
    equal to 1, forcing the element to be central; with -1 excluded by
    the congruence the lattice is torsion-free.  The scan looks for
    enumerated elements other than +-1 with |trd| < 2.
    """
    place = None
    for p in level.split_leveled_places():
        ll = level.local_at(p)
        if p >= 5 and ll.kind in ("PrincipalCongruence", "SymmetricCongruence"):
            place = p
            break
    s = slice_ if slice_ is not None else enumerate_lattice(level, conjugator, scan_bound)
    one = level.order.coordinates(level.algebra.one())
    one_coords = tuple(int(c) for c in one)
    neg_one = tuple(-c for c in one_coords)
    trd_basis = [e.trd() for e in level.order.basis]
    witnesses = []
    for coords in s.elements:
        if coords in (one_coords, neg_one):
            continue
        t = abs(int(sum(Fraction(c) * tb for c, tb in zip(coords, trd_basis))))
        if t < 2:
            witnesses.append(coords)
    return TorsionReport(
        criterion_pass=place is not None,
        criterion_place=place,
        scanned=len(s.elements),
        elliptic_witnesses=tuple(witnesses),
    )
