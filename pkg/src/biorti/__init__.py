"""Remote identification of a hardware root of trust bound to a biometric sample."""
from .gf import DEFAULT_FIELD, FieldSpec, gf_add, gf_inv, gf_mul
from .poly import Polynomial, SecretBits, decode_secret, encode_secret, lagrange_interpolate
from .biotemplate import Minutia, NoiseModel, Template, load_template, perturb_template
from .vault import HelperData, RecoveryFailure, VaultParams, fv_gen, fv_open

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_FIELD", "FieldSpec", "gf_add", "gf_inv", "gf_mul",
    "Polynomial", "SecretBits", "decode_secret", "encode_secret", "lagrange_interpolate",
    "Minutia", "NoiseModel", "Template", "load_template", "perturb_template",
    "HelperData", "RecoveryFailure", "VaultParams", "fv_gen", "fv_open",
]
