"""Hashing, signatures and a simulated group credential.

Signatures are Ed25519 over the SHA-256 digest of the message; Ed25519 is
deterministic, so protocol transcripts replay byte-for-byte under a fixed
seed. Verification always takes the message the verifier *expects*; the
message itself is never carried alongside the signature.

The group signature is simulated: one group master key signs every
session public key, so a credential shows "issued by some RoT" and
nothing about which one.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

ALG = "ed25519"
DIGEST_SIZE = 32
SIGNATURE_SIZE = 64


class KeyMaterialError(ValueError):
    """Malformed or wrong-sized key bytes."""


def digest(message: bytes) -> bytes:
    """SHA-256 of ``message``."""
    return hashlib.sha256(message).digest()


def _private(sk: bytes) -> Ed25519PrivateKey:
    if not isinstance(sk, (bytes, bytearray)) or len(sk) != 32:
        raise KeyMaterialError("secret key must be 32 bytes")
    return Ed25519PrivateKey.from_private_bytes(bytes(sk))


def _public(pk: bytes) -> Ed25519PublicKey:
    if not isinstance(pk, (bytes, bytearray)) or len(pk) != 32:
        raise KeyMaterialError("public key must be 32 bytes")
    try:
        return Ed25519PublicKey.from_public_bytes(bytes(pk))
    except ValueError as exc:
        raise KeyMaterialError(str(exc)) from exc


def public_key(sk: bytes) -> bytes:
    return _private(sk).public_key().public_bytes_raw()


def generate_keypair(rng: np.random.Generator) -> tuple[bytes, bytes]:
    """(sk, pk) from 32 bytes of ``rng`` output."""
    sk = rng.bytes(32)
    return sk, public_key(sk)


def sign(sk: bytes, message: bytes) -> bytes:
    return _private(sk).sign(digest(message))


def verify(pk: bytes, sig: bytes, expected_message: bytes) -> bool:
    key = _public(pk)
    try:
        key.verify(bytes(sig), digest(expected_message))
    except InvalidSignature:
        return False
    return True


@dataclass(frozen=True)
class GroupAuthority:
    """Holder of the group master key that certifies RoT session keys."""

    master_sk: bytes
    master_pk: bytes

    @classmethod
    def create(cls, rng: np.random.Generator) -> "GroupAuthority":
        sk, pk = generate_keypair(rng)
        return cls(sk, pk)


@dataclass(frozen=True)
class SessionKeyPair:
    pk: bytes
    sk: bytes
    group_cred: bytes


def rot_gen_keys(group_master_sk: bytes, rng: np.random.Generator) -> SessionKeyPair:
    """Fresh session keypair plus its group credential."""
    sk, pk = generate_keypair(rng)
    return SessionKeyPair(pk=pk, sk=sk, group_cred=sign(group_master_sk, pk))


def group_verify(group_master_pk: bytes, pk: bytes, group_cred: bytes) -> bool:
    try:
        return verify(group_master_pk, group_cred, pk)
    except KeyMaterialError:
        return False


# key files: "alg=<name>" header then one lowercase hex line

def write_key_file(path, key: bytes, alg: str = ALG) -> None:
    Path(path).write_text(f"alg={alg}\n{key.hex()}\n", encoding="utf-8")


def read_key_file(path) -> tuple[str, bytes]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) != 2 or not lines[0].startswith("alg="):
        raise KeyMaterialError(f"{path}: expected 'alg=<name>' header and one hex line")
    try:
        key = bytes.fromhex(lines[1])
    except ValueError as exc:
        raise KeyMaterialError(f"{path}: malformed hex") from exc
    return lines[0][4:], key
