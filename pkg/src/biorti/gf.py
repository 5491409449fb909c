"""Binary extension fields GF(2^tau).

Elements are plain Python ints whose bits are the coefficients of a
GF(2)[x] polynomial of degree < tau (bit i <-> x^i). A :class:`FieldSpec`
carries the modulus and does the arithmetic. The ``*_array`` methods are
numpy-vectorised twins used on the hot paths (vault chaff generation and
the combination search in the vault opener).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_TAU = 24
DEFAULT_MODULUS = 0x100001B  # x^24 + x^4 + x^3 + x + 1


class FieldError(ValueError):
    """Invalid field parameters or element."""


class NonInvertibleError(ZeroDivisionError):
    """Raised when inverting zero."""


def clmul(a: int, b: int) -> int:
    """Carry-less (GF(2)[x]) product of two non-negative ints."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        b >>= 1
    return result


def poly_mod(a: int, m: int) -> int:
    """Remainder of ``a`` divided by ``m`` in GF(2)[x]."""
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def poly_divmod(a: int, m: int) -> tuple[int, int]:
    """Quotient and remainder of ``a`` by ``m`` in GF(2)[x]."""
    q = 0
    dm = m.bit_length()
    while a.bit_length() >= dm:
        shift = a.bit_length() - dm
        q |= 1 << shift
        a ^= m << shift
    return q, a


def is_irreducible(modulus: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2."""
    deg = modulus.bit_length() - 1
    if deg < 1:
        return False
    for divisor in range(2, 1 << (deg // 2 + 1)):
        if poly_mod(modulus, divisor) == 0:
            return False
    return True


@lru_cache(maxsize=None)
def _checked_irreducible(modulus: int) -> bool:
    return is_irreducible(modulus)


@dataclass(frozen=True)
class FieldSpec:
    """GF(2^tau) defined by an irreducible ``modulus`` bitmask.

    Construction runs a (cached) trial-division irreducibility check.
    """

    tau: int = DEFAULT_TAU
    modulus: int = DEFAULT_MODULUS

    def __post_init__(self):
        if self.tau < 1:
            raise FieldError(f"tau must be positive, got {self.tau}")
        if self.modulus.bit_length() - 1 != self.tau:
            raise FieldError(f"modulus {self.modulus:#x} is not of degree {self.tau}")
        if not self.modulus & 1:
            raise FieldError(f"modulus {self.modulus:#x} has no constant term")
        if not _checked_irreducible(self.modulus):
            raise FieldError(f"modulus {self.modulus:#x} is reducible over GF(2)")

    @property
    def order(self) -> int:
        return 1 << self.tau

    @property
    def hex_width(self) -> int:
        return -(-self.tau // 4)

    def validate(self, a: int) -> int:
        if not 0 <= a < self.order:
            raise FieldError(f"{a!r} is not an element of GF(2^{self.tau})")
        return a

    # scalar arithmetic

    def add(self, a: int, b: int) -> int:
        return a ^ b

    sub = add

    def mul(self, a: int, b: int) -> int:
        return poly_mod(clmul(a, b), self.modulus)

    def inv(self, a: int) -> int:
        """Inverse by the extended Euclidean algorithm over GF(2)[x]."""
        if a == 0:
            raise NonInvertibleError("zero has no multiplicative inverse")
        r0, r1 = self.modulus, a
        s0, s1 = 0, 1
        while r1:
            q, r = poly_divmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, s0 ^ clmul(q, s1)
        if r0 != 1:
            raise NonInvertibleError(f"{a:#x} is not invertible")
        return poly_mod(s0, self.modulus)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        result = 1
        while e:
            if e & 1:
                result = self.mul(result, a)
            a = self.mul(a, a)
            e >>= 1
        return result

    # serialisation

    def to_hex(self, a: int) -> str:
        return format(a, f"0{self.hex_width}x")

    def from_hex(self, text: str) -> int:
        if len(text) != self.hex_width or text != text.lower():
            raise FieldError(f"expected {self.hex_width} lowercase hex digits, got {text!r}")
        try:
            value = int(text, 16)
        except ValueError as exc:
            raise FieldError(f"malformed hex {text!r}") from exc
        return self.validate(value)

    # vectorised arithmetic on uint64 arrays (tau <= 31 keeps products in range)

    def mul_array(self, a, b) -> np.ndarray:
        if self.tau > 31:
            raise FieldError("vectorised arithmetic supports tau <= 31")
        a = np.asarray(a, dtype=np.uint64)
        b = np.asarray(b, dtype=np.uint64)
        a, b = np.broadcast_arrays(a, b)
        one = np.uint64(1)
        acc = np.zeros(a.shape, dtype=np.uint64)
        for i in range(self.tau):
            acc ^= (a << np.uint64(i)) * ((b >> np.uint64(i)) & one)
        return self._reduce_array(acc)

    def _reduce_array(self, p: np.ndarray) -> np.ndarray:
        tau = np.uint64(self.tau)
        low_mask = np.uint64(self.order - 1)
        tail_bits = [np.uint64(i) for i in range(self.tau) if self.modulus >> i & 1]
        high = p >> tau
        while high.any():
            p = p & low_mask
            for j in tail_bits:
                p ^= high << j
            high = p >> tau
        return p

    def inv_array(self, a) -> np.ndarray:
        """Elementwise inverse via a^(2^tau - 2); zeros map to zero."""
        a = np.asarray(a, dtype=np.uint64)
        result = np.ones(a.shape, dtype=np.uint64)
        base = a.copy()
        e = self.order - 2
        while e:
            if e & 1:
                result = self.mul_array(result, base)
            e >>= 1
            if e:
                base = self.mul_array(base, base)
        return result


DEFAULT_FIELD = FieldSpec()


def gf_add(a: int, b: int, field: FieldSpec = DEFAULT_FIELD) -> int:
    return field.add(a, b)


def gf_mul(a: int, b: int, field: FieldSpec = DEFAULT_FIELD) -> int:
    return field.mul(a, b)


def gf_inv(a: int, field: FieldSpec = DEFAULT_FIELD) -> int:
    return field.inv(a)
