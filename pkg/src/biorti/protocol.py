"""RoT identification protocols: fuzzy-vault challenge, proxy, and naive baseline.

Messages travel as frames ``tag (1 byte) | length (4 bytes, big endian) |
payload``. Payloads:

* HD (0x01): the vault file bytes.
* Response (0x02): ``aborted (1 byte)`` then sigma, pk and group_cred,
  each as a 2-byte big-endian length followed by the bytes.
* ProxyAttestation (0x03): template text, sigma_bt and proxy_pk, each
  length-prefixed the same way (template with a 4-byte length).
* NaiveChallenge (0x10): the raw challenge bytes.
* NaiveResponse (0x11): sigma, pk, group_cred, length-prefixed.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from . import cryptoshim
from .biotemplate import InsufficientMinutiaeError, Template, TemplateError
from .cryptoshim import SessionKeyPair
from .poly import SecretBits
from .vault import (Challenge, HelperData, RecoveryFailure, VaultError, VaultParams,
                    deserialize_vault, fv_gen, fv_open, serialize_vault)

TAG_HD = 0x01
TAG_RESPONSE = 0x02
TAG_PROXY = 0x03
TAG_NAIVE_CHALLENGE = 0x10
TAG_NAIVE_RESPONSE = 0x11

ABORT_SENTINEL = bytes(cryptoshim.SIGNATURE_SIZE)
NAIVE_CHALLENGE_BYTES = 32


class ProtocolError(ValueError):
    """Malformed frame or message."""


class SessionStateError(RuntimeError):
    """A session method was called out of order."""


class UnidentifiedProxyError(ProtocolError):
    pass


class IntegrityError(ProtocolError):
    pass


# -- framing -----------------------------------------------------------------

def encode_frame(tag: int, payload: bytes) -> bytes:
    return struct.pack(">BI", tag, len(payload)) + payload


def decode_frame(data: bytes, expect: int | None = None) -> tuple[int, bytes]:
    if len(data) < 5:
        raise ProtocolError("frame shorter than its 5-byte header")
    tag, length = struct.unpack(">BI", data[:5])
    payload = data[5:]
    if len(payload) != length:
        raise ProtocolError(f"frame declares {length} payload bytes, carries {len(payload)}")
    if expect is not None and tag != expect:
        raise ProtocolError(f"expected frame type {expect:#04x}, got {tag:#04x}")
    return tag, payload


def _pack_fields(*items: bytes, wide_first: bool = False) -> bytes:
    out = []
    for i, item in enumerate(items):
        fmt = ">I" if (wide_first and i == 0) else ">H"
        out.append(struct.pack(fmt, len(item)) + item)
    return b"".join(out)


def _unpack_fields(data: bytes, count: int, wide_first: bool = False) -> list[bytes]:
    items = []
    pos = 0
    for i in range(count):
        size = 4 if (wide_first and i == 0) else 2
        if pos + size > len(data):
            raise ProtocolError("truncated field length")
        (n,) = struct.unpack(">I" if size == 4 else ">H", data[pos:pos + size])
        pos += size
        if pos + n > len(data):
            raise ProtocolError("truncated field")
        items.append(data[pos:pos + n])
        pos += n
    if pos != len(data):
        raise ProtocolError("trailing bytes after last field")
    return items


# -- messages ----------------------------------------------------------------

@dataclass(frozen=True)
class HdMessage:
    hd: HelperData

    def to_frame(self) -> bytes:
        return encode_frame(TAG_HD, serialize_vault(self.hd))

    @classmethod
    def from_frame(cls, data: bytes) -> "HdMessage":
        _, payload = decode_frame(data, TAG_HD)
        try:
            return cls(deserialize_vault(payload))
        except VaultError as exc:
            raise ProtocolError(f"bad helper data: {exc}") from exc


@dataclass(frozen=True)
class ResponseMessage:
    sigma: bytes
    pk: bytes
    group_cred: bytes
    aborted: bool = False

    def __post_init__(self):
        if self.aborted and self.sigma != ABORT_SENTINEL:
            raise ProtocolError("aborted response must carry the sentinel signature")

    def to_frame(self) -> bytes:
        payload = bytes([1 if self.aborted else 0]) + _pack_fields(self.sigma, self.pk, self.group_cred)
        return encode_frame(TAG_RESPONSE, payload)

    @classmethod
    def from_frame(cls, data: bytes) -> "ResponseMessage":
        _, payload = decode_frame(data, TAG_RESPONSE)
        if not payload or payload[0] not in (0, 1):
            raise ProtocolError("bad aborted flag")
        sigma, pk, cred = _unpack_fields(payload[1:], 3)
        return cls(sigma, pk, cred, aborted=bool(payload[0]))


@dataclass(frozen=True)
class ProxyAttestation:
    bt: Template
    sigma_bt: bytes
    proxy_pk: bytes

    def to_frame(self) -> bytes:
        payload = _pack_fields(self.bt.serialize(), self.sigma_bt, self.proxy_pk, wide_first=True)
        return encode_frame(TAG_PROXY, payload)

    @classmethod
    def from_frame(cls, data: bytes) -> "ProxyAttestation":
        _, payload = decode_frame(data, TAG_PROXY)
        text, sigma, pk = _unpack_fields(payload, 3, wide_first=True)
        try:
            bt = Template.deserialize(text)
        except (TemplateError, UnicodeDecodeError) as exc:
            raise ProtocolError(f"bad template: {exc}") from exc
        return cls(bt, sigma, pk)


@dataclass(frozen=True)
class NaiveChallenge:
    c: bytes

    def to_frame(self) -> bytes:
        return encode_frame(TAG_NAIVE_CHALLENGE, self.c)

    @classmethod
    def from_frame(cls, data: bytes) -> "NaiveChallenge":
        return cls(decode_frame(data, TAG_NAIVE_CHALLENGE)[1])


@dataclass(frozen=True)
class NaiveResponse:
    sigma: bytes
    pk: bytes
    group_cred: bytes

    def to_frame(self) -> bytes:
        return encode_frame(TAG_NAIVE_RESPONSE, _pack_fields(self.sigma, self.pk, self.group_cred))

    @classmethod
    def from_frame(cls, data: bytes) -> "NaiveResponse":
        return cls(*_unpack_fields(decode_frame(data, TAG_NAIVE_RESPONSE)[1], 3))


# -- FV-based identification ---------------------------------------------------

class State(enum.Enum):
    STARTED = "started"
    AWAITING_RESPONSE = "awaiting-response"
    DONE = "done"


@dataclass
class VerifierSession:
    """Verifier-side state. ``chal`` never leaves this object."""

    chal: Challenge = field(repr=False)
    bt: Template = field(repr=False)
    params: VaultParams
    group_pk: bytes
    state: State = State.STARTED
    decision: int | None = None

    def finish(self, decision: int) -> int:
        self.state = State.DONE
        self.decision = decision
        return decision


def verifier_start(bt: Template, params: VaultParams, rng: np.random.Generator,
                   group_pk: bytes) -> tuple[VerifierSession, HdMessage]:
    """Draw a challenge, lock it under ``bt`` and return the HD message."""
    if len(bt) < params.d + 1:
        raise InsufficientMinutiaeError(f"template has {len(bt)} minutiae, need {params.d + 1}")
    chal = SecretBits.random(params.secret_bits, rng)
    hd = fv_gen(chal, bt, params, rng)
    session = VerifierSession(chal=chal, bt=bt, params=hd.params, group_pk=group_pk)
    session.state = State.AWAITING_RESPONSE
    return session, HdMessage(hd)


def prover_respond(msg: HdMessage | bytes, bt2: Template, keys: SessionKeyPair) -> ResponseMessage:
    """RoT side: open the vault with the hardwired sample and sign the result."""
    if isinstance(msg, (bytes, bytearray)):
        msg = HdMessage.from_frame(bytes(msg))
    try:
        chal2 = fv_open(msg.hd, bt2)
    except RecoveryFailure:
        return ResponseMessage(ABORT_SENTINEL, keys.pk, keys.group_cred, aborted=True)
    return ResponseMessage(cryptoshim.sign(keys.sk, chal2.to_bytes()), keys.pk, keys.group_cred)


def verifier_finish(session: VerifierSession, resp: ResponseMessage | bytes) -> int:
    """1 iff the key is group-certified, not aborted, and signed our challenge."""
    if session.state is not State.AWAITING_RESPONSE:
        raise SessionStateError(f"cannot finish a session in state {session.state.value}")
    if isinstance(resp, (bytes, bytearray)):
        try:
            resp = ResponseMessage.from_frame(bytes(resp))
        except ProtocolError:
            return session.finish(0)
    if resp.aborted or not cryptoshim.group_verify(session.group_pk, resp.pk, resp.group_cred):
        return session.finish(0)
    try:
        ok = cryptoshim.verify(resp.pk, resp.sigma, session.chal.to_bytes())
    except cryptoshim.KeyMaterialError:
        ok = False
    return session.finish(int(ok))


# -- proxy-assisted identification --------------------------------------------

class IdentifiedRegistry:
    """Device label -> public key of a previously identified RoT."""

    def __init__(self, entries: dict[str, bytes] | None = None):
        self._keys = dict(entries or {})

    def register(self, label: str, pk: bytes) -> None:
        self._keys[label] = pk

    def label_for(self, pk: bytes) -> str | None:
        for label, known in self._keys.items():
            if known == pk:
                return label
        return None

    def __contains__(self, pk: bytes) -> bool:
        return self.label_for(pk) is not None

    def __len__(self) -> int:
        return len(self._keys)


def proxy_sample_and_sign(bt: Template, proxy_keys: SessionKeyPair) -> ProxyAttestation:
    return ProxyAttestation(bt, cryptoshim.sign(proxy_keys.sk, bt.serialize()), proxy_keys.pk)


def verifier_check_proxy(att: ProxyAttestation, registry: IdentifiedRegistry) -> Template:
    if att.proxy_pk not in registry:
        raise UnidentifiedProxyError("proxy key was never identified")
    try:
        ok = cryptoshim.verify(att.proxy_pk, att.sigma_bt, att.bt.serialize())
    except cryptoshim.KeyMaterialError:
        ok = False
    if not ok:
        raise IntegrityError("template signature does not verify")
    return att.bt


# -- naive challenge-response ----------------------------------------------------

@dataclass
class NaiveSession:
    c: bytes = field(repr=False)
    group_pk: bytes
    state: State = State.AWAITING_RESPONSE
    decision: int | None = None


def naive_verifier_start(rng: np.random.Generator, group_pk: bytes) -> tuple[NaiveSession, NaiveChallenge]:
    c = rng.bytes(NAIVE_CHALLENGE_BYTES)
    return NaiveSession(c, group_pk), NaiveChallenge(c)


def naive_prover_run(challenge: NaiveChallenge | bytes, keys: SessionKeyPair) -> NaiveResponse:
    if isinstance(challenge, (bytes, bytearray)):
        challenge = NaiveChallenge.from_frame(bytes(challenge))
    return NaiveResponse(cryptoshim.sign(keys.sk, challenge.c), keys.pk, keys.group_cred)


def naive_verifier_finish(session: NaiveSession, resp: NaiveResponse | bytes) -> int:
    """Accept whatever certified key signed ``c``; nothing binds it to a device."""
    if session.state is not State.AWAITING_RESPONSE:
        raise SessionStateError(f"cannot finish a session in state {session.state.value}")
    if isinstance(resp, (bytes, bytearray)):
        resp = NaiveResponse.from_frame(bytes(resp))
    ok = cryptoshim.group_verify(session.group_pk, resp.pk, resp.group_cred)
    if ok:
        try:
            ok = cryptoshim.verify(resp.pk, resp.sigma, session.c)
        except cryptoshim.KeyMaterialError:
            ok = False
    session.state = State.DONE
    session.decision = int(ok)
    return session.decision
