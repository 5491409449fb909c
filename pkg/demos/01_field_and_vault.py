"""
Locking a secret under a fingerprint
====================================

Walks through the arithmetic and the fuzzy vault: pack minutiae into
GF(2^24), hide a polynomial among chaff, then unlock it with a noisy
re-sample of the same finger.
"""

# %%
# Field arithmetic. Elements are plain ints; addition is XOR and
# multiplication reduces modulo x^24 + x^4 + x^3 + x + 1.
import numpy as np

from biorti.gf import DEFAULT_FIELD, gf_inv, gf_mul

a = 0x800000
print("x^23 * x =", hex(gf_mul(a, 2)))  # wraps around to x^4 + x^3 + x + 1
print("a * a^-1 =", gf_mul(a, gf_inv(a)))
print("hex form:", DEFAULT_FIELD.to_hex(0x1B))

# %%
# A minutia (x, y, theta) becomes one field element: 9 bits each for the
# coordinates and 6 bits for a 5.625 degree angle bin.
from biorti.biotemplate import Minutia, decode_minutia, encode_minutia

m = Minutia(100, 200, 90.0)
e = encode_minutia(m)
print(m, "->", hex(e), "->", decode_minutia(e))

# %%
# Lock a 240-bit secret with a degree-9 polynomial. Twenty genuine points
# are mixed with 200 chaff points and shuffled.
from biorti.biotemplate import NoiseModel, perturb_template, random_impostor_template
from biorti.poly import SecretBits
from biorti.vault import VaultParams, fv_gen, fv_open, serialize_vault

rng = np.random.default_rng(7)
finger = random_impostor_template(20, rng)
secret = SecretBits.random(240, rng)
hd = fv_gen(secret, finger, VaultParams(), rng)
print(len(hd.points), "vault points")
print(serialize_vault(hd).decode().splitlines()[:5])

# %%
# A fresh touch of the same finger: jittered positions, a couple of
# minutiae missing. The vault still opens.
touch = perturb_template(finger, NoiseModel(), rng)
print(len(touch), "minutiae in the re-sample")
print("recovered:", fv_open(hd, touch) == secret)

# %%
# A different finger finds too few close vault points.
from biorti.vault import RecoveryFailure

try:
    fv_open(hd, random_impostor_template(20, rng))
except RecoveryFailure as exc:
    print("impostor:", exc.reason, "with", exc.candidates, "candidates")
