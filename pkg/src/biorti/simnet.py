"""Lock-step simulation of verifiers, devices, RoTs, humans and adversary relays.

Every run is a pure function of its :class:`Scenario` (seed included).
Each actor draws from its own named random stream, so the verifier's
state can be rebuilt independently when replaying a transcript.

Routing rules:

* A device's sensor sample goes straight to its own RoT over the hardwire
  and is never put in a frame.
* A compromised OS relays frames to the accomplice device (cuckoo), or to
  an accomplice challenger which re-presents them to the accomplice device.
* An evil twin answers the verifier's wireless request in place of the
  target device.
* Relays forward frames whole; they never parse payloads.
"""
from __future__ import annotations

import configparser
import enum
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import cryptoshim, protocol
from .biotemplate import NoiseModel, Template, perturb_template, random_impostor_template
from .cryptoshim import GroupAuthority, SessionKeyPair
from .vault import VaultParams

TEMPLATE_SIZE = 20


class ScenarioError(ValueError):
    """Scenario topology or file is invalid."""


class ReplayError(RuntimeError):
    pass


class NodeKind(enum.Enum):
    VERIFIER = "Verifier"
    DEVICE = "Device"
    ACCOMPLICE_DEVICE = "AccompliceDevice"
    ACCOMPLICE_CHALLENGER = "AccompliceChallenger"


class Strategy(enum.Enum):
    NONE = "None"
    EVIL_TWIN = "EvilTwinRelay"
    CUCKOO = "CuckooRelay"
    CUCKOO_CHALLENGER = "CuckooWithAccompliceChallenger"
    CLONED_BIOMETRIC = "ClonedBiometric"


class ProtocolKind(enum.Enum):
    FV_RTI = "FvRti"
    NAIVE = "Naive"
    PROXY_RTI = "ProxyRti"


@dataclass(frozen=True)
class NodeSpec:
    label: str
    kind: NodeKind
    has_rot: bool = False
    sensor_wired_to_rot: bool = False
    compromised_os: bool = False


@dataclass(frozen=True)
class HumanActor:
    true_template: Template
    noise: NoiseModel
    cloned_available: bool = False

    def touch(self, rng: np.random.Generator) -> Template:
        return perturb_template(self.true_template, self.noise, rng)


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[NodeSpec, ...]
    adversary_strategy: Strategy = Strategy.NONE
    protocol: ProtocolKind = ProtocolKind.FV_RTI
    seed: int = 0
    proxy_registered: bool = True
    rot_checks_interface: bool = False
    noise: NoiseModel = NoiseModel()
    params: VaultParams = VaultParams()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))


@dataclass(frozen=True)
class TranscriptEntry:
    sender: str
    receiver: str
    frame: bytes


@dataclass
class Transcript:
    scenario: Scenario
    entries: list[TranscriptEntry] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def dump(self) -> str:
        return "".join(f"{e.sender} {e.receiver} {e.frame.hex()}\n" for e in self.entries)


@dataclass
class ScenarioOutcome:
    decision: int
    transcript: Transcript
    notes: list[str] = field(default_factory=list)
    rejection: str | None = None
    sensor_log: list[tuple[str, str, Template]] = field(default_factory=list, repr=False)

    def report(self) -> str:
        s = self.transcript.scenario
        lines = [f"protocol={s.protocol.value}", f"strategy={s.adversary_strategy.value}",
                 f"seed={s.seed}", f"decision={self.decision}"]
        if self.rejection:
            lines.append(f"rejection={self.rejection}")
        lines.append(f"frames={len(self.transcript)}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"

    def to_bytes(self) -> bytes:
        return (self.report() + self.transcript.dump()).encode()


# -- topology ----------------------------------------------------------------

@dataclass(frozen=True)
class _Roles:
    verifier: NodeSpec
    target: NodeSpec
    proxy: NodeSpec | None
    accomplice: NodeSpec | None
    challenger: NodeSpec | None


def validate_scenario(s: Scenario) -> _Roles:
    labels = [n.label for n in s.nodes]
    if len(set(labels)) != len(labels):
        raise ScenarioError("node labels must be unique")
    by_kind = {k: [n for n in s.nodes if n.kind is k] for k in NodeKind}
    if len(by_kind[NodeKind.VERIFIER]) != 1:
        raise ScenarioError("exactly one Verifier node is required")
    devices = by_kind[NodeKind.DEVICE]
    needed = 2 if s.protocol is ProtocolKind.PROXY_RTI else 1
    if len(devices) < needed:
        raise ScenarioError(f"{s.protocol.value} needs {needed} Device node(s)")
    for dev in devices[:needed]:
        if not dev.has_rot:
            raise ScenarioError(f"device {dev.label} has no RoT")
        if s.protocol is not ProtocolKind.NAIVE and not dev.sensor_wired_to_rot:
            raise ScenarioError(f"device {dev.label} needs its sensor hardwired to the RoT")
    for ch in by_kind[NodeKind.ACCOMPLICE_CHALLENGER]:
        if ch.has_rot:
            raise ScenarioError(f"accomplice challenger {ch.label} cannot have a RoT")
    for v in by_kind[NodeKind.VERIFIER]:
        if v.has_rot:
            raise ScenarioError("the verifier is modelled without a RoT")

    proxy = devices[0] if s.protocol is ProtocolKind.PROXY_RTI else None
    target = devices[needed - 1]
    accomplices = by_kind[NodeKind.ACCOMPLICE_DEVICE]
    accomplice = accomplices[0] if accomplices else None
    challengers = by_kind[NodeKind.ACCOMPLICE_CHALLENGER]
    challenger = challengers[0] if challengers else None

    strategy = s.adversary_strategy
    if strategy is not Strategy.NONE:
        if accomplice is None or not accomplice.has_rot:
            raise ScenarioError(f"{strategy.value} needs an AccompliceDevice with a RoT")
    if strategy in (Strategy.CUCKOO, Strategy.CUCKOO_CHALLENGER, Strategy.CLONED_BIOMETRIC):
        if not target.compromised_os:
            raise ScenarioError(f"{strategy.value} needs compromised_os on {target.label}")
    if strategy is Strategy.CUCKOO_CHALLENGER and challenger is None:
        raise ScenarioError("CuckooWithAccompliceChallenger needs an AccompliceChallenger node")
    return _Roles(by_kind[NodeKind.VERIFIER][0], target, proxy, accomplice, challenger)


def standard_nodes(protocol: ProtocolKind, strategy: Strategy) -> tuple[NodeSpec, ...]:
    """Canonical topology for a (protocol, strategy) pair."""
    compromised = strategy in (Strategy.CUCKOO, Strategy.CUCKOO_CHALLENGER, Strategy.CLONED_BIOMETRIC)
    nodes = [NodeSpec("Vrf", NodeKind.VERIFIER)]
    if protocol is ProtocolKind.PROXY_RTI:
        nodes.append(NodeSpec("Dev-A", NodeKind.DEVICE, True, True, False))
        nodes.append(NodeSpec("Dev-B", NodeKind.DEVICE, True, True, compromised))
    else:
        nodes.append(NodeSpec("Dev-A", NodeKind.DEVICE, True, True, compromised))
    if strategy is not Strategy.NONE:
        nodes.append(NodeSpec("Dev*", NodeKind.ACCOMPLICE_DEVICE, True, True, True))
    if strategy is Strategy.CUCKOO_CHALLENGER:
        nodes.append(NodeSpec("AccChal", NodeKind.ACCOMPLICE_CHALLENGER))
    return tuple(nodes)


# -- world construction --------------------------------------------------------

def _stream(seed: int, name: str) -> np.random.Generator:
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")
    return np.random.default_rng([seed & (2**64 - 1), tag])


class _World:
    """Actors and keys derived deterministically from a scenario."""

    def __init__(self, s: Scenario):
        self.scenario = s
        self.roles = validate_scenario(s)
        self.authority = GroupAuthority.create(_stream(s.seed, "group-authority"))
        self.keys: dict[str, SessionKeyPair] = {
            n.label: cryptoshim.rot_gen_keys(self.authority.master_sk, _stream(s.seed, f"rot:{n.label}"))
            for n in s.nodes if n.has_rot
        }
        cloned = s.adversary_strategy is Strategy.CLONED_BIOMETRIC
        self.user = HumanActor(random_impostor_template(TEMPLATE_SIZE, _stream(s.seed, "human:user")),
                               s.noise, cloned_available=cloned)
        self.accomplice_user = HumanActor(
            random_impostor_template(TEMPLATE_SIZE, _stream(s.seed, "human:accomplice")), s.noise)
        self.registry = protocol.IdentifiedRegistry()
        if self.roles.proxy is not None and s.proxy_registered:
            self.registry.register(self.roles.proxy.label, self.keys[self.roles.proxy.label].pk)
        self.verifier_rng = _stream(s.seed, "verifier")

    def sensor(self, label: str) -> np.random.Generator:
        return _stream(self.scenario.seed, f"sensor:{label}")


# -- execution -----------------------------------------------------------------

class _Run:
    def __init__(self, s: Scenario):
        self.world = _World(s)
        self.roles = self.world.roles
        self.transcript = Transcript(s)
        self.notes: list[str] = []
        self.sensor_log: list[tuple[str, str, Template]] = []
        self.kinds = {n.label: n.kind for n in s.nodes}

    def send(self, sender: str, receiver: str, frame: bytes) -> None:
        self.transcript.entries.append(TranscriptEntry(sender, receiver, frame))

    def note(self, text: str) -> None:
        self.notes.append(text)

    def outbound_path(self) -> list[str]:
        """Hops a verifier frame takes before reaching the responding RoT's device."""
        r = self.roles
        strategy = self.world.scenario.adversary_strategy
        vrf, tgt = r.verifier.label, r.target.label
        if strategy is Strategy.NONE:
            return [vrf, tgt]
        if strategy is Strategy.EVIL_TWIN:
            return [vrf, r.accomplice.label]
        if strategy is Strategy.CUCKOO_CHALLENGER:
            return [vrf, tgt, r.challenger.label, r.accomplice.label]
        return [vrf, tgt, r.accomplice.label]

    def deliver(self, path: list[str], frame: bytes) -> None:
        for a, b in zip(path, path[1:]):
            self.send(a, b, frame)

    def rot_accepts(self, path: list[str]) -> bool:
        if not self.world.scenario.rot_checks_interface:
            return True
        last_hop = self.kinds[path[-2]]
        return last_hop in (NodeKind.VERIFIER, NodeKind.ACCOMPLICE_CHALLENGER)

    def rot_sample(self, label: str) -> Template:
        """What the RoT on ``label`` reads from its hardwired sensor."""
        w = self.world
        if self.roles.accomplice is not None and label == self.roles.accomplice.label:
            human = w.user if w.user.cloned_available else w.accomplice_user
            who = "cloned copy of the user's biometric" if w.user.cloned_available else "accomplice's biometric"
        else:
            human, who = w.user, "user's biometric"
        sample = human.touch(w.sensor(label))
        self.sensor_log.append((label, "rot", sample))
        self.note(f"{label} RoT samples the {who} over its hardwire ({len(sample)} minutiae)")
        return sample

    def outcome(self, decision: int, rejection: str | None = None) -> ScenarioOutcome:
        return ScenarioOutcome(decision, self.transcript, self.notes, rejection, self.sensor_log)

    # protocols

    def run(self) -> ScenarioOutcome:
        kind = self.world.scenario.protocol
        if kind is ProtocolKind.NAIVE:
            return self.run_naive()
        if kind is ProtocolKind.PROXY_RTI:
            return self.run_proxy()
        bt = self.world.user.touch(self.world.sensor(self.roles.verifier.label))
        self.sensor_log.append((self.roles.verifier.label, "verifier", bt))
        self.note(f"{self.roles.verifier.label} samples the user's biometric ({len(bt)} minutiae)")
        return self.run_fv(bt)

    def run_fv(self, bt: Template) -> ScenarioOutcome:
        w = self.world
        session, msg = protocol.verifier_start(bt, w.scenario.params, w.verifier_rng, w.authority.master_pk)
        self.note("verifier locks a fresh challenge in a fuzzy vault")
        path = self.outbound_path()
        self.deliver(path, msg.to_frame())
        responder = path[-1]
        if not self.rot_accepts(path):
            self.note(f"{responder} RoT refuses a frame from an unexpected interface")
            return self.outcome(session.finish(0))
        resp = protocol.prover_respond(msg.to_frame(), self.rot_sample(responder), w.keys[responder])
        self.note(f"{responder} RoT {'aborts: vault did not open' if resp.aborted else 'signs the recovered challenge'}")
        self.deliver(path[::-1], resp.to_frame())
        decision = protocol.verifier_finish(session, resp.to_frame())
        self.note(f"verifier decision {decision}")
        return self.outcome(decision)

    def run_naive(self) -> ScenarioOutcome:
        w = self.world
        session, msg = protocol.naive_verifier_start(w.verifier_rng, w.authority.master_pk)
        self.note("verifier issues a random challenge")
        path = self.outbound_path()
        self.deliver(path, msg.to_frame())
        responder = path[-1]
        if not self.rot_accepts(path):
            self.note(f"{responder} RoT refuses a frame from an unexpected interface")
            session.state = protocol.State.DONE
            session.decision = 0
            return self.outcome(0)
        resp = protocol.naive_prover_run(msg.to_frame(), w.keys[responder])
        self.note(f"{responder} RoT signs the challenge")
        self.deliver(path[::-1], resp.to_frame())
        decision = protocol.naive_verifier_finish(session, resp.to_frame())
        self.note(f"verifier decision {decision}")
        return self.outcome(decision)

    def run_proxy(self) -> ScenarioOutcome:
        w = self.world
        proxy = self.roles.proxy.label
        bt = w.user.touch(w.sensor(proxy))
        self.sensor_log.append((proxy, "proxy", bt))
        self.note(f"{proxy} RoT samples the user's biometric and signs it")
        att = protocol.proxy_sample_and_sign(bt, w.keys[proxy])
        self.send(proxy, self.roles.verifier.label, att.to_frame())
        try:
            checked = protocol.verifier_check_proxy(
                protocol.ProxyAttestation.from_frame(att.to_frame()), w.registry)
        except protocol.UnidentifiedProxyError:
            self.note("verifier rejects: proxy RoT was never identified")
            return self.outcome(0, "unidentified-proxy")
        except protocol.IntegrityError:
            self.note("verifier rejects: template signature invalid")
            return self.outcome(0, "integrity")
        return self.run_fv(checked)


def run_scenario(s: Scenario) -> ScenarioOutcome:
    return _Run(s).run()


def audit_routing(outcome: ScenarioOutcome) -> list[str]:
    """Sensor samples that leaked into frames they should not be in."""
    problems = []
    kinds = {n.label: n.kind for n in outcome.transcript.scenario.nodes}
    for label, purpose, sample in outcome.sensor_log:
        blob = sample.serialize()
        if not blob:
            continue
        for e in outcome.transcript:
            if blob not in e.frame:
                continue
            if purpose == "proxy" and kinds[e.receiver] is NodeKind.VERIFIER and e.sender == label:
                continue
            problems.append(f"{purpose} sample of {label} seen in frame {e.sender}->{e.receiver}")
    return problems


# -- replay ----------------------------------------------------------------------

def replay_transcript(t: Transcript) -> ScenarioOutcome:
    """Re-run the verifier against the recorded frames.

    The verifier's state is rebuilt from the scenario seed; every recorded
    frame must be causally possible (the sender originated the exchange or
    previously received a frame) and the verifier's own frames must match
    what it would send now.
    """
    s = t.scenario
    world = _World(s)
    vrf = world.roles.verifier.label
    entries = list(t.entries)
    if not entries:
        raise ReplayError("empty transcript")

    origin = world.roles.proxy.label if s.protocol is ProtocolKind.PROXY_RTI else vrf
    holders = {origin}
    for e in entries:
        if e.sender not in holders and e.sender != vrf:
            raise ReplayError(f"{e.sender} sends a frame without having received one")
        holders.add(e.receiver)

    notes = ["replayed"]
    sent_by_vrf = [e.frame for e in entries if e.sender == vrf]
    to_vrf = [e.frame for e in entries if e.receiver == vrf]

    def first_tag(frames, tag):
        for f in frames:
            if f and f[0] == tag:
                return f
        return None

    if s.protocol is ProtocolKind.NAIVE:
        session, msg = protocol.naive_verifier_start(world.verifier_rng, world.authority.master_pk)
        if not sent_by_vrf or sent_by_vrf[0] != msg.to_frame():
            raise ReplayError("verifier challenge frame missing or altered")
        resp = first_tag(to_vrf, protocol.TAG_NAIVE_RESPONSE)
        if resp is None:
            if s.rot_checks_interface:
                return ScenarioOutcome(0, t, notes)  # the RoT refused; verifier times out
            raise ReplayError("no response frame reaches the verifier")
        decision = protocol.naive_verifier_finish(session, resp)
        return ScenarioOutcome(decision, t, notes)

    if s.protocol is ProtocolKind.PROXY_RTI:
        frame = first_tag(to_vrf, protocol.TAG_PROXY)
        if frame is None:
            raise ReplayError("no proxy attestation frame")
        try:
            bt = protocol.verifier_check_proxy(protocol.ProxyAttestation.from_frame(frame), world.registry)
        except protocol.UnidentifiedProxyError:
            return ScenarioOutcome(0, t, notes, "unidentified-proxy")
        except protocol.IntegrityError:
            return ScenarioOutcome(0, t, notes, "integrity")
    else:
        bt = world.user.touch(world.sensor(vrf))

    session, msg = protocol.verifier_start(bt, s.params, world.verifier_rng, world.authority.master_pk)
    if not sent_by_vrf or sent_by_vrf[0] != msg.to_frame():
        raise ReplayError("verifier HD frame missing or altered")
    resp = first_tag(to_vrf, protocol.TAG_RESPONSE)
    if resp is None:
        if s.rot_checks_interface:
            return ScenarioOutcome(session.finish(0), t, notes)  # the RoT refused; verifier times out
        raise ReplayError("no response frame reaches the verifier")
    return ScenarioOutcome(protocol.verifier_finish(session, resp), t, notes)


# -- matrix --------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixRow:
    protocol: ProtocolKind
    strategy: Strategy
    variant: str
    expected: str
    decision: int
    rejection: str | None

    @property
    def observed(self) -> str:
        return "rejection" if self.rejection else str(self.decision)

    @property
    def ok(self) -> bool:
        return self.observed == self.expected


# (protocol, strategy, variant) -> expected; variant tweaks the scenario
EXPECTED_MATRIX = {
    (ProtocolKind.NAIVE, Strategy.NONE, ""): "1",
    (ProtocolKind.NAIVE, Strategy.EVIL_TWIN, ""): "1",
    (ProtocolKind.NAIVE, Strategy.CUCKOO, ""): "1",
    (ProtocolKind.NAIVE, Strategy.CUCKOO, "rot-checks-interface"): "0",
    (ProtocolKind.NAIVE, Strategy.CUCKOO_CHALLENGER, "rot-checks-interface"): "1",
    (ProtocolKind.FV_RTI, Strategy.NONE, ""): "1",
    (ProtocolKind.FV_RTI, Strategy.EVIL_TWIN, ""): "0",
    (ProtocolKind.FV_RTI, Strategy.CUCKOO, ""): "0",
    (ProtocolKind.FV_RTI, Strategy.CUCKOO_CHALLENGER, ""): "0",
    (ProtocolKind.FV_RTI, Strategy.CUCKOO_CHALLENGER, "rot-checks-interface"): "0",
    (ProtocolKind.FV_RTI, Strategy.CLONED_BIOMETRIC, ""): "1",
    (ProtocolKind.PROXY_RTI, Strategy.NONE, ""): "1",
    (ProtocolKind.PROXY_RTI, Strategy.NONE, "unregistered-proxy"): "rejection",
    (ProtocolKind.PROXY_RTI, Strategy.CUCKOO, ""): "0",
}


def matrix_scenario(protocol_kind: ProtocolKind, strategy: Strategy, variant: str = "",
                    seed: int = 2024, **overrides) -> Scenario:
    s = Scenario(standard_nodes(protocol_kind, strategy), strategy, protocol_kind, seed, **overrides)
    if variant == "rot-checks-interface":
        s = replace(s, rot_checks_interface=True)
    elif variant == "unregistered-proxy":
        s = replace(s, proxy_registered=False)
    elif variant:
        raise ScenarioError(f"unknown variant {variant!r}")
    return s


def scenario_matrix(seed: int = 2024) -> list[MatrixRow]:
    rows = []
    for (pk, st, variant), expected in EXPECTED_MATRIX.items():
        out = run_scenario(matrix_scenario(pk, st, variant, seed))
        rows.append(MatrixRow(pk, st, variant, expected, out.decision, out.rejection))
    return rows


# -- scenario files ----------------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _flag(section, key: str, default: bool = False) -> bool:
    raw = section.get(key)
    if raw is None:
        return default
    raw = raw.strip().lower()
    if raw in _TRUE:
        return True
    if raw in _FALSE:
        return False
    raise ScenarioError(f"{key}: expected a boolean, got {raw!r}")


def parse_scenario(text: str) -> Scenario:
    """Parse INI-style ``[scenario]`` and ``[node <label>]`` sections."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"unparseable scenario: {exc}") from None
    if "scenario" not in cp:
        raise ScenarioError("missing [scenario] section")
    sec = cp["scenario"]
    try:
        protocol_kind = ProtocolKind(sec.get("protocol", "FvRti").strip())
        strategy = Strategy(sec.get("strategy", "None").strip())
        seed = int(sec.get("seed", "0"))
        params = VaultParams(d=int(sec.get("degree", 9)), n_chaff=int(sec.get("chaff", 200)),
                             w=int(sec.get("w", 20)), beta=float(sec.get("beta", 0.2)))
        noise = NoiseModel(float(sec.get("sigma_xy", 3.0)), float(sec.get("sigma_theta", 4.0)),
                           float(sec.get("drop_rate", 0.1)))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    nodes = []
    for name in cp.sections():
        if name == "scenario":
            continue
        if not name.startswith("node "):
            raise ScenarioError(f"unknown section [{name}]")
        ns = cp[name]
        try:
            kind = NodeKind(ns.get("kind", "").strip())
        except ValueError:
            raise ScenarioError(f"[{name}]: unknown kind {ns.get('kind')!r}") from None
        nodes.append(NodeSpec(name[5:].strip(), kind, _flag(ns, "has_rot"),
                              _flag(ns, "sensor_wired_to_rot"), _flag(ns, "compromised_os")))
    s = Scenario(tuple(nodes), strategy, protocol_kind, seed,
                 proxy_registered=_flag(sec, "proxy_registered", True),
                 rot_checks_interface=_flag(sec, "rot_checks_interface"),
                 noise=noise, params=params)
    validate_scenario(s)
    return s


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def bundled_scenarios() -> dict[str, Path]:
    here = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(here.glob("*.ini"))}
