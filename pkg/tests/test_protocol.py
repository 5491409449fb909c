from pathlib import Path

import numpy as np
import pytest

from biorti import cryptoshim, protocol
from biorti.biotemplate import (InsufficientMinutiaeError, Minutia, Template, load_template,
                                random_impostor_template)
from biorti.protocol import (ABORT_SENTINEL, HdMessage, IdentifiedRegistry, IntegrityError, NaiveChallenge,
                             NaiveResponse, ProtocolError, ProxyAttestation, ResponseMessage,
                             SessionStateError, State, UnidentifiedProxyError, decode_frame, encode_frame)
from biorti.vault import VaultParams, deserialize_vault

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def world():
    rng = np.random.default_rng(42)
    group = cryptoshim.GroupAuthority.create(rng)
    keys = cryptoshim.rot_gen_keys(group.master_sk, rng)
    bt = random_impostor_template(20, rng)
    return rng, group, keys, bt


def test_honest_session(world):
    rng, group, keys, bt = world
    session, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    assert session.state is State.AWAITING_RESPONSE and len(session.chal) == 240
    resp = protocol.prover_respond(msg.to_frame(), bt, keys)
    assert not resp.aborted
    assert protocol.verifier_finish(session, resp.to_frame()) == 1
    assert session.state is State.DONE and session.decision == 1


def test_challenge_never_serialized(world):
    rng, group, keys, bt = world
    session, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    resp = protocol.prover_respond(msg, bt, keys)
    chal = session.chal.to_bytes()
    for frame in (msg.to_frame(), resp.to_frame()):
        assert chal not in frame
        assert session.chal.hex().encode() not in frame
    assert session.chal.hex() not in repr(session)


def test_same_seed_same_hd(world):
    _, group, _, bt = world
    a = protocol.verifier_start(bt, VaultParams(), np.random.default_rng(1), group.master_pk)[1]
    b = protocol.verifier_start(bt, VaultParams(), np.random.default_rng(1), group.master_pk)[1]
    assert a.to_frame() == b.to_frame()


def test_small_template_rejected_before_any_message(world):
    rng, group, _, _ = world
    with pytest.raises(InsufficientMinutiaeError):
        protocol.verifier_start(random_impostor_template(8, rng), VaultParams(), rng, group.master_pk)


def test_impostor_gets_aborted_response(world):
    rng, group, keys, bt = world
    session, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    resp = protocol.prover_respond(msg, random_impostor_template(20, rng), keys)
    assert resp.aborted and resp.sigma == ABORT_SENTINEL and resp.pk == keys.pk
    assert protocol.verifier_finish(session, resp) == 0


def test_truncated_hd_is_protocol_error(world):
    rng, group, keys, bt = world
    _, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    frame = msg.to_frame()
    with pytest.raises(ProtocolError):
        protocol.prover_respond(frame[:-10], bt, keys)
    # length consistent but vault body cut short
    body = frame[5:].split(b"\n")
    short = b"\n".join(body[:-3]) + b"\n"
    with pytest.raises(ProtocolError):
        protocol.prover_respond(encode_frame(protocol.TAG_HD, short), bt, keys)


def test_wrong_challenge_signature_rejected(world):
    rng, group, keys, bt = world
    session, _ = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    forged = ResponseMessage(cryptoshim.sign(keys.sk, b"something else"), keys.pk, keys.group_cred)
    assert protocol.verifier_finish(session, forged) == 0


def test_bad_group_credential_rejected(world):
    rng, group, keys, bt = world
    session, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    resp = protocol.prover_respond(msg, bt, keys)
    tampered = ResponseMessage(resp.sigma, resp.pk, bytes(64))
    assert protocol.verifier_finish(session, tampered) == 0


def test_uncertified_key_rejected_even_with_valid_signature(world):
    rng, group, keys, bt = world
    rogue = cryptoshim.rot_gen_keys(cryptoshim.GroupAuthority.create(rng).master_sk, rng)
    session, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    assert protocol.verifier_finish(session, protocol.prover_respond(msg, bt, rogue)) == 0


def test_out_of_order_finish(world):
    rng, group, keys, bt = world
    session, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    resp = protocol.prover_respond(msg, bt, keys)
    protocol.verifier_finish(session, resp)
    with pytest.raises(SessionStateError):
        protocol.verifier_finish(session, resp)
    naive, challenge = protocol.naive_verifier_start(rng, group.master_pk)
    protocol.naive_verifier_finish(naive, protocol.naive_prover_run(challenge, keys))
    with pytest.raises(SessionStateError):
        protocol.naive_verifier_finish(naive, protocol.naive_prover_run(challenge, keys))


def test_garbled_response_frame_decides_zero(world):
    rng, group, keys, bt = world
    session, _ = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    assert protocol.verifier_finish(session, b"\x02\x00\x00\x00\x01\x07") == 0


def test_aborted_response_requires_sentinel():
    with pytest.raises(ProtocolError):
        ResponseMessage(b"\x01" * 64, b"pk", b"cred", aborted=True)


# -- proxy ------------------------------------------------------------------------

def test_proxy_flow(world):
    rng, group, keys, bt = world
    registry = IdentifiedRegistry()
    registry.register("Dev-A", keys.pk)
    att = protocol.proxy_sample_and_sign(bt, keys)
    back = ProxyAttestation.from_frame(att.to_frame())
    checked = protocol.verifier_check_proxy(back, registry)
    assert checked.serialize() == bt.serialize()
    assert registry.label_for(keys.pk) == "Dev-A" and len(registry) == 1


def test_proxy_rejections(world):
    rng, group, keys, bt = world
    registry = IdentifiedRegistry({"Dev-A": keys.pk})
    att = protocol.proxy_sample_and_sign(bt, keys)
    with pytest.raises(UnidentifiedProxyError):
        protocol.verifier_check_proxy(att, IdentifiedRegistry())
    mutated = ProxyAttestation(Template(bt.minutiae[1:]), att.sigma_bt, att.proxy_pk)
    with pytest.raises(IntegrityError):
        protocol.verifier_check_proxy(mutated, registry)
    flipped = ProxyAttestation(bt, bytes([att.sigma_bt[0] ^ 1]) + att.sigma_bt[1:], att.proxy_pk)
    with pytest.raises(IntegrityError):
        protocol.verifier_check_proxy(flipped, registry)


# -- naive -------------------------------------------------------------------------

def test_naive_honest_and_relayed(world):
    rng, group, keys, _ = world
    session, c = protocol.naive_verifier_start(rng, group.master_pk)
    assert protocol.naive_verifier_finish(session, protocol.naive_prover_run(c.to_frame(), keys).to_frame()) == 1
    # an accomplice RoT answers instead: still accepted, nothing binds pk to a device
    accomplice = cryptoshim.rot_gen_keys(group.master_sk, rng)
    session, c = protocol.naive_verifier_start(rng, group.master_pk)
    assert protocol.naive_verifier_finish(session, protocol.naive_prover_run(c, accomplice)) == 1


def test_fv_protocol_under_relay_rejects(world):
    rng, group, keys, bt = world
    accomplice = cryptoshim.rot_gen_keys(group.master_sk, rng)
    session, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    # the accomplice RoT can only sample its own finger
    resp = protocol.prover_respond(msg.to_frame(), random_impostor_template(20, rng), accomplice)
    assert protocol.verifier_finish(session, resp.to_frame()) == 0


# -- framing -------------------------------------------------------------------------

def test_frame_header():
    assert encode_frame(0x10, b"abc") == b"\x10\x00\x00\x00\x03abc"
    assert decode_frame(b"\x10\x00\x00\x00\x03abc") == (0x10, b"abc")
    with pytest.raises(ProtocolError):
        decode_frame(b"\x10\x00")
    with pytest.raises(ProtocolError):
        decode_frame(b"\x10\x00\x00\x00\x04abc")
    with pytest.raises(ProtocolError):
        decode_frame(b"\x10\x00\x00\x00\x03abc", expect=0x11)


def test_message_roundtrips(world):
    rng, group, keys, bt = world
    _, msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
    assert HdMessage.from_frame(msg.to_frame()) == msg
    resp = protocol.prover_respond(msg, bt, keys)
    assert ResponseMessage.from_frame(resp.to_frame()) == resp
    c = NaiveChallenge(b"\x00" * 32)
    assert NaiveChallenge.from_frame(c.to_frame()) == c
    r = protocol.naive_prover_run(c, keys)
    assert NaiveResponse.from_frame(r.to_frame()) == r
    with pytest.raises(ProtocolError):
        NaiveResponse.from_frame(r.to_frame() + b"x")
    with pytest.raises(ProtocolError):
        ResponseMessage.from_frame(encode_frame(protocol.TAG_RESPONSE, b"\x05"))


GOLDEN = ["hd", "response", "aborted", "proxy", "naive_challenge", "naive_response"]


@pytest.mark.parametrize("name", GOLDEN)
def test_golden_frames_roundtrip(name):
    data = (FIXTURES / f"frame_{name}.bin").read_bytes()
    cls = {"hd": HdMessage, "response": ResponseMessage, "aborted": ResponseMessage,
           "proxy": ProxyAttestation, "naive_challenge": NaiveChallenge,
           "naive_response": NaiveResponse}[name]
    assert cls.from_frame(data).to_frame() == data


def test_golden_frames_regenerate_identically():
    import json
    reg = json.loads((FIXTURES / "regression.json").read_text())
    keys_rng = np.random.default_rng(reg["keys_seed"])
    group = cryptoshim.GroupAuthority.create(keys_rng)
    keys = cryptoshim.rot_gen_keys(group.master_sk, keys_rng)
    hd = deserialize_vault((FIXTURES / "golden_vault.fv").read_bytes())
    enrol = load_template(FIXTURES / "enrol_template.txt")
    impostor = load_template(FIXTURES / "impostor_template.txt")
    assert HdMessage(hd).to_frame() == (FIXTURES / "frame_hd.bin").read_bytes()
    assert protocol.prover_respond(HdMessage(hd), enrol, keys).to_frame() == \
        (FIXTURES / "frame_response.bin").read_bytes()
    assert protocol.prover_respond(HdMessage(hd), impostor, keys).to_frame() == \
        (FIXTURES / "frame_aborted.bin").read_bytes()
    assert protocol.proxy_sample_and_sign(enrol, keys).to_frame() == (FIXTURES / "frame_proxy.bin").read_bytes()
