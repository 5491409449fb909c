"""Polynomials over GF(2^tau) and secret <-> coefficient encoding."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gf import DEFAULT_FIELD, FieldSpec


class InterpolationError(ValueError):
    """Degenerate or wrongly sized interpolation input."""


class SecretLengthError(ValueError):
    pass


@dataclass(frozen=True)
class SecretBits:
    """A bit string of fixed ``length`` held as a big-endian integer."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0 or not 0 <= self.value < (1 << self.length):
            raise SecretLengthError(f"value does not fit in {self.length} bits")

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "SecretBits":
        nbytes = -(-length // 8)
        raw = int.from_bytes(rng.bytes(nbytes), "big")
        return cls(raw >> (8 * nbytes - length), length)

    @classmethod
    def from_hex(cls, text: str, length: int) -> "SecretBits":
        try:
            value = int(text, 16)
        except ValueError as exc:
            raise SecretLengthError(f"malformed hex secret {text!r}") from exc
        if len(text) != -(-length // 4):
            raise SecretLengthError(f"expected {-(-length // 4)} hex digits for {length} bits, got {len(text)}")
        return cls(value, length)

    @classmethod
    def from_bitstring(cls, bits: str) -> "SecretBits":
        return cls(int(bits, 2) if bits else 0, len(bits))

    def to_bitstring(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(-(-self.length // 8), "big")

    def hex(self) -> str:
        return format(self.value, f"0{-(-self.length // 4)}x")

    def __len__(self) -> int:
        return self.length


@dataclass(frozen=True)
class Polynomial:
    """Coefficients a_0..a_d (index = power of x); trailing zeros allowed."""

    coefficients: tuple[int, ...]
    field: FieldSpec = DEFAULT_FIELD

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(int(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValueError("polynomial needs at least one coefficient")
        for c in self.coefficients:
            self.field.validate(c)

    @property
    def degree_bound(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: int) -> int:
        return poly_eval(self, x)


def poly_eval(p: Polynomial, x: int) -> int:
    """Horner evaluation of ``p`` at ``x``."""
    f = p.field
    acc = 0
    for c in reversed(p.coefficients):
        acc = f.mul(acc, x) ^ c
    return acc


def poly_eval_array(p: Polynomial, xs) -> np.ndarray:
    f = p.field
    xs = np.asarray(xs, dtype=np.uint64)
    acc = np.zeros(xs.shape, dtype=np.uint64)
    for c in reversed(p.coefficients):
        acc = f.mul_array(acc, xs) ^ np.uint64(c)
    return acc


def lagrange_interpolate(points: Sequence[tuple[int, int]], d: int,
                         field: FieldSpec = DEFAULT_FIELD) -> Polynomial:
    """The unique polynomial of degree <= d through exactly d+1 points."""
    if len(points) != d + 1:
        raise InterpolationError(f"need exactly {d + 1} points for degree {d}, got {len(points)}")
    xs = [field.validate(x) for x, _ in points]
    if len(set(xs)) != len(xs):
        raise InterpolationError("x-coordinates must be pairwise distinct")

    coeffs = [0] * (d + 1)
    for j, (xj, yj) in enumerate(points):
        # basis numerator prod_{i != j} (x + x_i), built low-order first
        basis = [1]
        denom = 1
        for i, (xi, _) in enumerate(points):
            if i == j:
                continue
            shifted = [0] + basis
            for k, b in enumerate(basis):
                shifted[k] ^= field.mul(b, xi)
            basis = shifted
            denom = field.mul(denom, xj ^ xi)
        scale = field.mul(yj, field.inv(denom))
        for k, b in enumerate(basis):
            coeffs[k] ^= field.mul(b, scale)
    return Polynomial(tuple(coeffs), field)


def interpolate_batch(xs, ys, field: FieldSpec = DEFAULT_FIELD) -> np.ndarray:
    """Vectorised Lagrange interpolation of many point sets at once.

    ``xs`` and ``ys`` have shape (batch, m); every row must have distinct
    x values (not checked). Returns coefficients of shape (batch, m),
    lowest power first.
    """
    xs = np.asarray(xs, dtype=np.uint64)
    ys = np.asarray(ys, dtype=np.uint64)
    batch, m = xs.shape

    # master polynomial prod_i (z + x_i), coefficient of z^k in column k
    master = np.zeros((batch, m + 1), dtype=np.uint64)
    master[:, 0] = 1
    for i in range(m):
        cur = master[:, :i + 1].copy()
        master[:, 1:i + 2] = cur
        master[:, 0] = 0
        master[:, :i + 1] ^= field.mul_array(cur, xs[:, i:i + 1])

    # basis numerators master / (z + x_j) by synthetic division, all j at once
    quot = np.zeros((batch, m, m), dtype=np.uint64)
    quot[:, :, m - 1] = master[:, m:m + 1]
    for k in range(m - 1, 0, -1):
        quot[:, :, k - 1] = master[:, k:k + 1] ^ field.mul_array(xs, quot[:, :, k])

    # denominators prod_{i != j} (x_j + x_i) = quotient_j evaluated at x_j
    denom = np.zeros((batch, m), dtype=np.uint64)
    for k in range(m - 1, -1, -1):
        denom = field.mul_array(denom, xs) ^ quot[:, :, k]

    scale = field.mul_array(ys, field.inv_array(denom))
    terms = field.mul_array(quot, scale[:, :, None])
    return np.bitwise_xor.reduce(terms, axis=1)


def encode_secret(k: SecretBits, d: int, field: FieldSpec = DEFAULT_FIELD) -> Polynomial:
    """Split ``k`` into d+1 tau-bit coefficients, a_0 taking the leading bits."""
    expected = (d + 1) * field.tau
    if len(k) != expected:
        raise SecretLengthError(f"secret must be {expected} bits for d={d}, tau={field.tau}; got {len(k)}")
    mask = field.order - 1
    coeffs = [(k.value >> ((d - i) * field.tau)) & mask for i in range(d + 1)]
    return Polynomial(tuple(coeffs), field)


def decode_secret(p: Polynomial, field: FieldSpec | None = None) -> SecretBits:
    field = field or p.field
    value = 0
    for c in p.coefficients:
        value = (value << field.tau) | c
    return SecretBits(value, len(p.coefficients) * field.tau)


def pack_coefficients(coeffs, tau: int) -> int:
    """Integer form of :func:`decode_secret` for a raw coefficient row."""
    value = 0
    for c in coeffs:
        value = (value << tau) | int(c)
    return value
