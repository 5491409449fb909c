from dataclasses import replace

import pytest

from biorti import protocol, simnet
from biorti.simnet import (NodeKind, NodeSpec, ProtocolKind, ReplayError, Scenario, ScenarioError, Strategy,
                           Transcript, audit_routing, matrix_scenario, parse_scenario, replay_transcript,
                           run_scenario, scenario_matrix)

P, S = ProtocolKind, Strategy


def test_matrix_matches_expected_table():
    rows = scenario_matrix()
    assert {(r.protocol, r.strategy, r.variant) for r in rows} == set(simnet.EXPECTED_MATRIX)
    for r in rows:
        assert r.ok, r


@pytest.mark.parametrize("seed", [1, 7, 99])
def test_matrix_holds_for_other_seeds(seed):
    assert all(r.ok for r in scenario_matrix(seed))


def test_benign_transcript_routes():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.NONE))
    assert [(e.sender, e.receiver) for e in out.transcript] == [("Vrf", "Dev-A"), ("Dev-A", "Vrf")]
    assert out.transcript.entries[0].frame[0] == protocol.TAG_HD
    assert out.transcript.entries[1].frame[0] == protocol.TAG_RESPONSE


@pytest.mark.parametrize("strategy,hops", [
    (S.EVIL_TWIN, [("Vrf", "Dev*"), ("Dev*", "Vrf")]),
    (S.CUCKOO, [("Vrf", "Dev-A"), ("Dev-A", "Dev*"), ("Dev*", "Dev-A"), ("Dev-A", "Vrf")]),
    (S.CUCKOO_CHALLENGER, [("Vrf", "Dev-A"), ("Dev-A", "AccChal"), ("AccChal", "Dev*"),
                           ("Dev*", "AccChal"), ("AccChal", "Dev-A"), ("Dev-A", "Vrf")]),
])
def test_attack_routes(strategy, hops):
    out = run_scenario(matrix_scenario(P.FV_RTI, strategy))
    assert [(e.sender, e.receiver) for e in out.transcript] == hops
    assert out.decision == 0


def test_relays_forward_frames_whole():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.CUCKOO_CHALLENGER))
    frames = [e.frame for e in out.transcript]
    assert len(set(frames[:3])) == 1 and len(set(frames[3:])) == 1


def test_interface_check_blocks_plain_cuckoo_only():
    plain = run_scenario(matrix_scenario(P.NAIVE, S.CUCKOO, "rot-checks-interface"))
    assert plain.decision == 0 and any("refuses" in n for n in plain.notes)
    chal = run_scenario(matrix_scenario(P.NAIVE, S.CUCKOO_CHALLENGER, "rot-checks-interface"))
    assert chal.decision == 1


def test_cloned_biometric_is_accepted():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.CLONED_BIOMETRIC))
    assert out.decision == 1
    assert any("cloned" in n for n in out.notes)


def test_unregistered_proxy_rejected_before_vault():
    out = run_scenario(matrix_scenario(P.PROXY_RTI, S.NONE, "unregistered-proxy"))
    assert out.decision == 0 and out.rejection == "unidentified-proxy"
    assert len(out.transcript) == 1
    assert "rejection=unidentified-proxy" in out.report()


def test_deterministic_outcome_bytes():
    s = matrix_scenario(P.FV_RTI, S.CUCKOO, seed=5)
    assert run_scenario(s).to_bytes() == run_scenario(s).to_bytes()
    assert run_scenario(s).to_bytes() != run_scenario(replace(s, seed=6)).to_bytes()


@pytest.mark.parametrize("key", list(simnet.EXPECTED_MATRIX))
def test_routing_soundness(key):
    out = run_scenario(matrix_scenario(*key))
    assert audit_routing(out) == []


def test_audit_catches_leaked_sample():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.NONE))
    label, _, sample = out.sensor_log[-1]
    out.transcript.entries.append(simnet.TranscriptEntry(label, "Vrf", sample.serialize()))
    assert audit_routing(out)


@pytest.mark.parametrize("key", list(simnet.EXPECTED_MATRIX))
def test_replay_reproduces_decision(key):
    out = run_scenario(matrix_scenario(*key))
    again = replay_transcript(out.transcript)
    assert again.decision == out.decision
    assert again.rejection == out.rejection


def test_replay_with_dropped_frame():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.NONE))
    for i in range(len(out.transcript)):
        entries = out.transcript.entries[:i] + out.transcript.entries[i + 1:]
        t = Transcript(out.transcript.scenario, entries)
        try:
            assert replay_transcript(t).decision == 0
        except ReplayError:
            pass


def test_replay_of_cuckoo_decides_zero():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.CUCKOO))
    assert replay_transcript(out.transcript).decision == 0


def test_replay_rejects_altered_verifier_frame():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.NONE))
    first = out.transcript.entries[0]
    bad = simnet.TranscriptEntry(first.sender, first.receiver, first.frame[:-2] + b"0\n")
    with pytest.raises(ReplayError):
        replay_transcript(Transcript(out.transcript.scenario, [bad] + out.transcript.entries[1:]))
    with pytest.raises(ReplayError):
        replay_transcript(Transcript(out.transcript.scenario, []))


def test_replay_rejects_acausal_frames():
    out = run_scenario(matrix_scenario(P.FV_RTI, S.CUCKOO))
    entries = list(out.transcript.entries)
    entries.insert(0, simnet.TranscriptEntry("Dev*", "Vrf", entries[-1].frame))
    with pytest.raises(ReplayError):
        replay_transcript(Transcript(out.transcript.scenario, entries))


def test_transcript_dump_is_hex_lines():
    out = run_scenario(matrix_scenario(P.NAIVE, S.EVIL_TWIN))
    lines = out.transcript.dump().splitlines()
    assert len(lines) == len(out.transcript)
    sender, receiver, frame = lines[0].split(" ")
    assert (sender, receiver) == ("Vrf", "Dev*")
    assert bytes.fromhex(frame) == out.transcript.entries[0].frame


# -- validation ----------------------------------------------------------------------

def nodes(*specs):
    return tuple(specs)


VRF = NodeSpec("Vrf", NodeKind.VERIFIER)
DEV = NodeSpec("Dev-A", NodeKind.DEVICE, True, True, False)
ACC = NodeSpec("Dev*", NodeKind.ACCOMPLICE_DEVICE, True, True, True)


@pytest.mark.parametrize("scenario", [
    Scenario(nodes(VRF, DEV, ACC), S.CUCKOO),  # target OS not compromised
    Scenario(nodes(VRF, DEV), S.EVIL_TWIN),  # no accomplice
    Scenario(nodes(DEV, ACC), S.NONE),  # no verifier
    Scenario(nodes(VRF, VRF, DEV), S.NONE),  # duplicate label
    Scenario(nodes(VRF, replace(DEV, compromised_os=True), ACC), S.CUCKOO_CHALLENGER),  # no challenger
    Scenario(nodes(VRF, replace(DEV, sensor_wired_to_rot=False)), S.NONE),
    Scenario(nodes(VRF, replace(DEV, has_rot=False)), S.NONE, ProtocolKind.NAIVE),
    Scenario(nodes(VRF, DEV), S.NONE, ProtocolKind.PROXY_RTI),  # proxy needs two devices
    Scenario(nodes(VRF, DEV, NodeSpec("C", NodeKind.ACCOMPLICE_CHALLENGER, has_rot=True)), S.NONE),
])
def test_inconsistent_scenarios_rejected(scenario):
    with pytest.raises(ScenarioError):
        run_scenario(scenario)


# -- scenario files --------------------------------------------------------------------

def test_bundled_scenarios():
    expected = {"benign": 1, "evil_twin": 0, "cuckoo": 0, "cuckoo_challenger": 0,
                "cloned_biometric": 1, "naive_evil_twin": 1, "proxy": 1, "proxy_unregistered": 0}
    bundled = simnet.bundled_scenarios()
    assert set(bundled) == set(expected)
    for name, path in bundled.items():
        assert run_scenario(simnet.load_scenario(path)).decision == expected[name], name


def test_parse_scenario_file():
    s = parse_scenario("""
[scenario]
protocol = FvRti
strategy = CuckooRelay
seed = 11
degree = 8
chaff = 150
sigma_xy = 2.5

[node Vrf]
kind = Verifier

[node Dev-A]
kind = Device
has_rot = yes
sensor_wired_to_rot = true
compromised_os = true

[node Dev*]
kind = AccompliceDevice
has_rot = true
""")
    assert s.seed == 11 and s.params.d == 8 and s.params.n_chaff == 150 and s.noise.sigma_xy == 2.5
    assert s.adversary_strategy is S.CUCKOO and [n.label for n in s.nodes] == ["Vrf", "Dev-A", "Dev*"]
    assert run_scenario(s).decision == 0


@pytest.mark.parametrize("text", [
    "garbage",
    "[node Vrf]\nkind = Verifier\n",
    "[scenario]\nprotocol = Quantum\n[node Vrf]\nkind = Verifier\n",
    "[scenario]\n[node Vrf]\nkind = Robot\n",
    "[scenario]\n[node Vrf]\nkind = Verifier\n[node D]\nkind = Device\nhas_rot = maybe\n",
    "[scenario]\n[other]\nx = 1\n",
    "[scenario]\nseed = x\n",
])
def test_malformed_scenario_files(text):
    with pytest.raises(ScenarioError):
        parse_scenario(text)
