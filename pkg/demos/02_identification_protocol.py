"""
Identifying the RoT in front of you
===================================

The verifier samples the user's finger itself, locks a random challenge
under it and sends only the vault. Only a RoT whose own sensor sees the
same finger can unlock and sign the challenge.
"""

# %%
import numpy as np

from biorti import cryptoshim, protocol
from biorti.biotemplate import NoiseModel, perturb_template, random_impostor_template
from biorti.vault import VaultParams

rng = np.random.default_rng(11)
group = cryptoshim.GroupAuthority.create(rng)
rot_a = cryptoshim.rot_gen_keys(group.master_sk, rng)      # RoT inside the user's device
rot_star = cryptoshim.rot_gen_keys(group.master_sk, rng)   # an equally legitimate RoT elsewhere
user = random_impostor_template(20, rng)

# %%
# Honest run: both samples come from the user's finger.
session, hd_msg = protocol.verifier_start(perturb_template(user, NoiseModel(), rng), VaultParams(),
                                          rng, group.master_pk)
frame = hd_msg.to_frame()
print("HD frame:", len(frame), "bytes, tag", hex(frame[0]))
resp = protocol.prover_respond(frame, perturb_template(user, NoiseModel(), rng), rot_a)
print("decision:", protocol.verifier_finish(session, resp.to_frame()))

# %%
# The vault relayed to RoT*: its sensor sees someone else's finger, so it
# cannot recover the challenge and aborts.
session, hd_msg = protocol.verifier_start(perturb_template(user, NoiseModel(), rng), VaultParams(),
                                          rng, group.master_pk)
resp = protocol.prover_respond(hd_msg, random_impostor_template(20, rng), rot_star)
print("aborted:", resp.aborted, "decision:", protocol.verifier_finish(session, resp))

# %%
# Contrast: a plain challenge-response accepts RoT* because its group
# credential is valid and nothing ties its key to the user's device.
naive, c = protocol.naive_verifier_start(rng, group.master_pk)
print("naive decision with RoT*:", protocol.naive_verifier_finish(naive, protocol.naive_prover_run(c, rot_star)))

# %%
# Proxy variant: an already identified RoT signs the template it sampled,
# standing in for the verifier's own sensor.
registry = protocol.IdentifiedRegistry({"Dev-A": rot_a.pk})
att = protocol.proxy_sample_and_sign(perturb_template(user, NoiseModel(), rng), rot_a)
bt = protocol.verifier_check_proxy(protocol.ProxyAttestation.from_frame(att.to_frame()), registry)
rot_b = cryptoshim.rot_gen_keys(group.master_sk, rng)
session, hd_msg = protocol.verifier_start(bt, VaultParams(), rng, group.master_pk)
resp = protocol.prover_respond(hd_msg, perturb_template(user, NoiseModel(), rng), rot_b)
print("proxy-assisted decision:", protocol.verifier_finish(session, resp))
