"""Slow, obviously-correct reference implementations used only by tests.

Nothing here imports from biorti: each routine works on explicit bit
lists or plain integers so it cannot share a bug with the library.
"""
from __future__ import annotations

import itertools


def bits(value: int) -> list[int]:
    """Little-endian coefficient list of a GF(2)[x] polynomial."""
    return [(value >> i) & 1 for i in range(max(value.bit_length(), 1))]


def from_bits(coeffs: list[int]) -> int:
    return sum(c << i for i, c in enumerate(coeffs))


def schoolbook_mul(a: int, b: int, modulus: int) -> int:
    """Carry-less product by the grade-school table, then long division."""
    pa, pb = bits(a), bits(b)
    prod = [0] * (len(pa) + len(pb))
    for i, x in enumerate(pa):
        for j, y in enumerate(pb):
            prod[i + j] ^= x & y
    mod = bits(modulus)
    deg = len(mod) - 1
    for top in range(len(prod) - 1, deg - 1, -1):
        if prod[top]:
            for k, m in enumerate(mod):
                prod[top - deg + k] ^= m
    return from_bits(prod[:deg])


def product_table(tau: int, modulus: int) -> list[list[int]]:
    n = 1 << tau
    return [[schoolbook_mul(a, b, modulus) for b in range(n)] for a in range(n)]


def inverse_by_search(a: int, tau: int, modulus: int) -> int:
    for b in range(1, 1 << tau):
        if schoolbook_mul(a, b, modulus) == 1:
            return b
    raise ZeroDivisionError(a)


def irreducible_by_search(modulus: int) -> bool:
    """No non-trivial factor among all polynomials of degree 1..deg/2."""
    deg = modulus.bit_length() - 1
    for d in range(1, deg // 2 + 1):
        for f in range(1 << d, 1 << (d + 1)):
            # long division remainder
            r = modulus
            while r.bit_length() >= f.bit_length():
                r ^= f << (r.bit_length() - f.bit_length())
            if r == 0:
                return False
    return True


def eval_poly(coeffs, x: int, tau: int, modulus: int) -> int:
    """Sum of a_i * x^i with powers built by repeated multiplication."""
    total, power = 0, 1
    for c in coeffs:
        total ^= schoolbook_mul(c, power, modulus)
        power = schoolbook_mul(power, x, modulus)
    return total


def all_polynomials(d: int, tau: int):
    return itertools.product(range(1 << tau), repeat=d + 1)


def polys_through(points, d: int, tau: int, modulus: int, minimum: int):
    """Every degree-<=d polynomial passing through at least ``minimum`` of ``points``."""
    out = []
    for coeffs in all_polynomials(d, tau):
        hits = sum(eval_poly(coeffs, x, tau, modulus) == y for x, y in points)
        if hits >= minimum:
            out.append(tuple(coeffs))
    return out


def solve_vandermonde(points, tau: int, modulus: int, table=None) -> tuple[int, ...]:
    """Gaussian elimination over GF(2^tau) on the Vandermonde system.

    ``table`` (from :func:`product_table`) speeds up small fields.
    """
    if table is not None:
        def mul(a, b):
            return table[a][b]

        def inv(a):
            return table[a].index(1)
    else:
        def mul(a, b):
            return schoolbook_mul(a, b, modulus)

        def inv(a):
            return _pow(a, (1 << tau) - 2, modulus)

    n = len(points)
    rows = []
    for x, y in points:
        row, p = [], 1
        for _ in range(n):
            row.append(p)
            p = mul(p, x)
        rows.append(row + [y])
    for col in range(n):
        piv = next(r for r in range(col, n) if rows[r][col])
        rows[col], rows[piv] = rows[piv], rows[col]
        s = inv(rows[col][col])
        rows[col] = [mul(v, s) for v in rows[col]]
        for r in range(n):
            if r != col and rows[r][col]:
                f = rows[r][col]
                rows[r] = [v ^ mul(f, w) for v, w in zip(rows[r], rows[col])]
    return tuple(r[n] for r in rows)


def _pow(a: int, e: int, modulus: int) -> int:
    result = 1
    while e:
        if e & 1:
            result = schoolbook_mul(result, a, modulus)
        a = schoolbook_mul(a, a, modulus)
        e >>= 1
    return result
