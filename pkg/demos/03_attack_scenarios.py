"""
Evil twins, cuckoos and accomplices
===================================

Runs every (protocol, adversary) pair in the simulator and prints who
talked to whom.
"""

# %%
from biorti import simnet

for row in simnet.scenario_matrix(seed=2024):
    mark = "ok " if row.ok else "BAD"
    print(f"{mark} {row.protocol.value:<8} {row.strategy.value:<31} {row.variant:<21} -> {row.observed}")

# %%
# One cuckoo run in detail: malware on Dev-A forwards the vault to the
# accomplice device, whose RoT sees the accomplice's finger.
P, S = simnet.ProtocolKind, simnet.Strategy
out = simnet.run_scenario(simnet.matrix_scenario(P.FV_RTI, S.CUCKOO))
print(out.report())
for e in out.transcript:
    print(f"{e.sender:>7} -> {e.receiver:<7} {len(e.frame):5d} bytes  tag {e.frame[0]:#04x}")

# %%
# The transcript replays to the same decision, and no sensor sample ever
# shows up in a frame.
print("replayed decision:", simnet.replay_transcript(out.transcript).decision)
print("routing problems:", simnet.audit_routing(out))

# %%
# The limit of the approach: with a physical copy of the user's finger the
# accomplice RoT unlocks the vault and the verifier accepts.
out = simnet.run_scenario(simnet.matrix_scenario(P.FV_RTI, S.CLONED_BIOMETRIC))
print(out.report())

# %%
# Scenario files ship with the package; the CLI runs them by name.
for name, path in simnet.bundled_scenarios().items():
    print(f"{name:<20} decision={simnet.run_scenario(simnet.load_scenario(path)).decision}")
