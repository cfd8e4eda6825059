"""Small exact-arithmetic helpers shared across the package.

Everything here is deliberately elementary: trial-division factoring,
Legendre symbols, Hermite normal forms and dense rational linear algebra
on tiny matrices.  Inputs stay desk-scale (numbers below ~10**12,
matrices at most 4x4), so no asymptotically clever algorithms are used.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, isqrt


def factorize(n: int) -> dict[int, int]:
    """Prime factorization of n >= 1 by trial division."""
    if n < 1:
        raise ValueError("factorize expects a positive integer")
    out: dict[int, int] = {}
    for p in (2, 3):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    f = 5
    while f * f <= n:
        for p in (f, f + 2):
            while n % p == 0:
                out[p] = out.get(p, 0) + 1
                n //= p
        f += 6
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_support(x: Fraction | int) -> list[int]:
    """Sorted primes p with nonzero p-adic valuation of x (x != 0)."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("prime support of zero is undefined")
    ps = set(factorize(abs(x.numerator))) | set(factorize(x.denominator))
    return sorted(ps)


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a|p) for an odd prime p; 0 when p divides a."""
    a %= p
    if a == 0:
        return 0
    t = pow(a, (p - 1) // 2, p)
    return 1 if t == 1 else -1


def least_positive_nonresidue(p: int) -> int:
    """Smallest n >= 2 that is a quadratic nonresidue mod the odd prime p."""
    for n in range(2, p):
        if legendre(n, p) == -1:
            return n
    raise ValueError(f"no nonresidue found mod {p}")


def primitive_root_mod_pk(p: int, k: int) -> int:
    """A generator of (Z/p^k)^* for an odd prime p."""
    # find a generator mod p, then adjust so it also generates mod p^2
    order_facs = factorize(p - 1)
    g = None
    for cand in range(2, p):
        if all(pow(cand, (p - 1) // q, p) != 1 for q in order_facs):
            g = cand
            break
    assert g is not None
    if k == 1:
        return g
    if pow(g, p - 1, p * p) == 1:
        g += p
    return g


def squarefree_part(x: Fraction | int) -> int:
    """Squarefree integer representing x modulo nonzero rational squares."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("squarefree part of zero is undefined")
    n = x.numerator * x.denominator  # same square class as x
    sign = -1 if n < 0 else 1
    out = sign
    for p, e in factorize(abs(n)).items():
        if e % 2:
            out *= p
    return out


def modinv(a: int, n: int) -> int:
    """Inverse of a modulo n (a coprime to n)."""
    g, x = _egcd(a % n, n)
    if g != 1:
        raise ValueError(f"{a} is not invertible mod {n}")
    return x % n


def _egcd(a: int, b: int) -> tuple[int, int]:
    # returns (g, x) with a*x = g mod b
    x0, x1, r0, r1 = 1, 0, a, b
    while r1:
        q = r0 // r1
        x0, x1 = x1, x0 - q * x1
        r0, r1 = r1, r0 - q * r1
    return r0, x0


def int_valuation(n: int, p: int) -> int:
    """Exponent of p in the nonzero integer n."""
    if n == 0:
        raise ValueError("valuation of zero")
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


def hnf_rows(rows: list[list[int]]) -> list[list[int]]:
    """Row-style Hermite normal form of an integer matrix.

    Returns the nonzero rows of the unique upper-echelon basis with
    positive pivots and entries above each pivot reduced into [0, pivot).
    Row operations only, so the row lattice is preserved.
    """
    mat = [list(r) for r in rows]
    if not mat:
        return []
    ncols = len(mat[0])
    pivot_row = 0
    for col in range(ncols):
        # find a row at or below pivot_row with a nonzero entry in col
        best = None
        for r in range(pivot_row, len(mat)):
            if mat[r][col] != 0:
                best = r
                break
        if best is None:
            continue
        mat[pivot_row], mat[best] = mat[best], mat[pivot_row]
        # kill entries below via gcd steps
        for r in range(pivot_row + 1, len(mat)):
            while mat[r][col] != 0:
                if abs(mat[r][col]) < abs(mat[pivot_row][col]):
                    mat[pivot_row], mat[r] = mat[r], mat[pivot_row]
                q = mat[r][col] // mat[pivot_row][col]
                mat[r] = [a - q * b for a, b in zip(mat[r], mat[pivot_row])]
        if mat[pivot_row][col] < 0:
            mat[pivot_row] = [-a for a in mat[pivot_row]]
        # reduce the entries above the pivot
        piv = mat[pivot_row][col]
        for r in range(pivot_row):
            q = mat[r][col] // piv
            if q:
                mat[r] = [a - q * b for a, b in zip(mat[r], mat[pivot_row])]
        pivot_row += 1
        if pivot_row == len(mat):
            break
    return [r for r in mat[:pivot_row] if any(r)]


def rat_mat_solve(mat: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Solve x * mat = rhs for a square rational matrix; None if singular."""
    n = len(mat)
    # transpose so we solve mat^T * x^T = rhs^T by Gaussian elimination
    aug = [[mat[r][c] for r in range(n)] + [rhs[c]] for c in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1, 1) / aug[col][col]
        aug[col] = [a * inv for a in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def rat_mat_det(mat: list[list[Fraction]]) -> Fraction:
    """Determinant of a small square rational matrix."""
    n = len(mat)
    m = [row[:] for row in mat]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = Fraction(1, 1) / m[col][col]
        for r in range(col + 1, n):
            if m[r][col]:
                f = m[r][col] * inv
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return det


def int_sqrt_exact(n: int) -> int | None:
    """Integer square root of n if n is a perfect square, else None."""
    if n < 0:
        return None
    r = isqrt(n)
    return r if r * r == n else None


def lcm_of(nums: list[int]) -> int:
    out = 1
    for n in nums:
        out = out * n // gcd(out, n)
    return out
