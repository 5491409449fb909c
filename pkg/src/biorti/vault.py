"""Fuzzy vault over GF(2^tau) keyed by a minutiae template.

Locking evaluates the secret polynomial at the encoded genuine minutiae
and hides those points among chaff; unlocking picks, for every query
minutia, the nearest vault point within ``w`` and searches the
(d+1)-subsets of those candidates for one whose interpolant hashes to
the published digest.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import cryptoshim
from .biotemplate import (DEFAULT_BETA, DEFAULT_W, InsufficientMinutiaeError, Template,
                          TemplateError, decode_minutiae_array, distance_matrix, encode_minutia)
from .gf import DEFAULT_FIELD, FieldError, FieldSpec
from .poly import (SecretBits, encode_secret, interpolate_batch, lagrange_interpolate,
                   pack_coefficients, poly_eval_array)

MAGIC = "FVAULT1"
DEFAULT_DEGREE = 9
DEFAULT_LP = 20
DEFAULT_CHAFF = 200
DEFAULT_COMBO_CAP = 10**6
MAX_CONSECUTIVE_REJECTS = 10**4
SEARCH_BATCH = 2048
SCALAR_PROBES = 32  # below this many subsets, scalar interpolation beats numpy overhead

Challenge = SecretBits


class VaultError(ValueError):
    pass


class ChaffSaturationError(VaultError):
    pass


class VaultFormatError(VaultError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class RecoveryFailure(Exception):
    """The vault could not be opened with the given template.

    ``reason`` is ``"insufficient-candidates"`` when fewer than d+1 vault
    points matched, ``"exhausted"`` when every subset was tried, or
    ``"cap"`` when the attempt budget ran out first.
    """

    def __init__(self, reason: str, candidates: int, attempts: int):
        self.reason = reason
        self.candidates = candidates
        self.attempts = attempts
        super().__init__(f"{reason}: {candidates} candidates, {attempts} interpolations")


@dataclass(frozen=True)
class VaultParams:
    field: FieldSpec = DEFAULT_FIELD
    d: int = DEFAULT_DEGREE
    lp: int = DEFAULT_LP
    n_chaff: int = DEFAULT_CHAFF
    w: int = DEFAULT_W
    beta: float = DEFAULT_BETA
    khash: bytes = b""
    combo_cap: int = DEFAULT_COMBO_CAP

    def __post_init__(self):
        if self.d < 0:
            raise VaultError(f"degree must be non-negative, got {self.d}")
        if self.lp < self.d + 1:
            raise VaultError(f"lp={self.lp} must be at least d+1={self.d + 1}")
        if self.n_chaff < 0:
            raise VaultError("n_chaff must be non-negative")
        if not self.w > 0:
            raise VaultError("w must be positive")
        if self.combo_cap < 1:
            raise VaultError("combo_cap must be positive")
        if self.lp + self.n_chaff > self.field.order:
            raise VaultError("more vault points than field elements")

    @property
    def secret_bits(self) -> int:
        return (self.d + 1) * self.field.tau


@dataclass(frozen=True)
class HelperData:
    params: VaultParams
    points: tuple[tuple[int, int], ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((int(x), int(y)) for x, y in self.points))

    def xs(self) -> np.ndarray:
        return np.array([x for x, _ in self.points], dtype=np.uint64)

    def ys(self) -> np.ndarray:
        return np.array([y for _, y in self.points], dtype=np.uint64)


def secret_hash(k: SecretBits) -> bytes:
    return cryptoshim.digest(k.to_bytes())


def fv_gen(k: Challenge, bt: Template, params: VaultParams, rng: np.random.Generator) -> HelperData:
    """Lock ``k`` under template ``bt``."""
    f = params.field
    if len(bt) < params.d + 1:
        raise InsufficientMinutiaeError(f"template has {len(bt)} minutiae, degree {params.d} needs {params.d + 1}")
    poly = encode_secret(k, params.d, f)  # raises on wrong length
    lp = min(params.lp, len(bt))

    genuine = [encode_minutia(m, f.tau) for m in bt.minutiae[:lp]]
    if len(set(genuine)) != lp:
        raise TemplateError(f"genuine minutiae collide on the GF(2^{f.tau}) lattice")
    gx = np.array(genuine, dtype=np.uint64)
    gy = poly_eval_array(poly, gx)
    genuine_decoded = decode_minutiae_array(gx, f.tau)

    cx, cy = _draw_chaff(poly, set(genuine), genuine_decoded, params, rng)
    xs = np.concatenate([gx, cx])
    ys = np.concatenate([gy, cy])
    order = rng.permutation(len(xs))
    params = replace(params, lp=lp, khash=secret_hash(k))
    return HelperData(params, tuple(zip(xs[order].tolist(), ys[order].tolist())))


def _draw_chaff(poly, taken: set[int], genuine_decoded, params: VaultParams, rng):
    """Rejection-sample chaff points.

    A draw is rejected if its X repeats an earlier X or decodes to a
    minutia within ``w`` of a genuine one; Y values on the secret
    polynomial are re-drawn.
    """
    f = params.field
    need = params.n_chaff
    xs_out: list[int] = []
    ys_out: list[int] = []
    taken = set(taken)
    rejects = 0
    while len(xs_out) < need:
        block = max(2 * (need - len(xs_out)), 16)
        cand_x = rng.integers(0, f.order, size=block, dtype=np.uint64)
        cand_y = rng.integers(0, f.order, size=block, dtype=np.uint64)
        dist = distance_matrix(decode_minutiae_array(cand_x, f.tau), genuine_decoded, params.beta)
        far = dist.min(axis=1) > params.w
        on_poly = cand_y == poly_eval_array(poly, cand_x)
        for x, y, ok, bad_y in zip(cand_x.tolist(), cand_y.tolist(), far, on_poly):
            if len(xs_out) == need:
                break
            if not ok or x in taken:
                rejects += 1
                if rejects >= MAX_CONSECUTIVE_REJECTS:
                    raise ChaffSaturationError(
                        f"{MAX_CONSECUTIVE_REJECTS} consecutive chaff draws rejected after {len(xs_out)} accepted")
                continue
            while bad_y:
                y = int(rng.integers(0, f.order))
                bad_y = y == poly(x)
            rejects = 0
            taken.add(x)
            xs_out.append(x)
            ys_out.append(y)
    return np.array(xs_out, dtype=np.uint64), np.array(ys_out, dtype=np.uint64)


def select_candidates(hd: HelperData, bt2: Template) -> list[int]:
    """Vault indices matched by ``bt2``, closest first.

    Each query minutia contributes its single nearest vault point (lower
    index on ties) if that point is strictly closer than ``w``. Duplicates
    keep their smallest distance; the result is ordered by (distance, index).
    """
    if len(bt2) == 0 or not hd.points:
        return []
    p = hd.params
    dist = distance_matrix(bt2.arrays(), decode_minutiae_array(hd.xs(), p.field.tau), p.beta)
    nearest = dist.argmin(axis=1)
    best: dict[int, float] = {}
    for q, j in enumerate(nearest.tolist()):
        dj = float(dist[q, j])
        if dj < p.w and dj < best.get(j, np.inf):
            best[j] = dj
    return sorted(best, key=lambda j: (best[j], j))


def fv_open(hd: HelperData, bt2: Template) -> Challenge:
    """Recover the locked secret or raise :class:`RecoveryFailure`."""
    p = hd.params
    m = p.d + 1
    cands = select_candidates(hd, bt2)
    if len(cands) < m:
        raise RecoveryFailure("insufficient-candidates", len(cands), 0)

    xs = hd.xs()[cands]
    ys = hd.ys()[cands]
    tau = p.field.tau
    nbits = m * tau
    nbytes = -(-nbits // 8)
    combos = itertools.combinations(range(len(cands)), m)
    attempts = 0

    def matches(row) -> SecretBits | None:
        value = pack_coefficients(row, tau)
        if cryptoshim.digest(value.to_bytes(nbytes, "big")) == p.khash:
            return SecretBits(value, nbits)
        return None

    for subset in itertools.islice(combos, min(SCALAR_PROBES, p.combo_cap)):
        attempts += 1
        pts = [(int(xs[i]), int(ys[i])) for i in subset]
        found = matches(lagrange_interpolate(pts, p.d, p.field).coefficients)
        if found is not None:
            return found
    while attempts < p.combo_cap:
        chunk = list(itertools.islice(combos, min(SEARCH_BATCH, p.combo_cap - attempts)))
        if not chunk:
            raise RecoveryFailure("exhausted", len(cands), attempts)
        idx = np.array(chunk, dtype=np.intp)
        for row in interpolate_batch(xs[idx], ys[idx], p.field).tolist():
            attempts += 1
            found = matches(row)
            if found is not None:
                return found
    raise RecoveryFailure("cap", len(cands), attempts)


def vault_polynomials(hd: HelperData) -> set[tuple[int, ...]]:
    """Every distinct interpolant of a (d+1)-subset of the vault points.

    Exponential in vault size; meant for toy-scale security analysis.
    """
    p = hd.params
    m = p.d + 1
    xs, ys = hd.xs(), hd.ys()
    found: set[tuple[int, ...]] = set()
    combos = itertools.combinations(range(len(xs)), m)
    while True:
        chunk = list(itertools.islice(combos, SEARCH_BATCH))
        if not chunk:
            return found
        idx = np.array(chunk, dtype=np.intp)
        found.update(map(tuple, interpolate_batch(xs[idx], ys[idx], p.field).tolist()))


# -- file format -------------------------------------------------------------

def serialize_vault(hd: HelperData) -> bytes:
    p = hd.params
    f = p.field
    lines = [
        MAGIC,
        f"tau={f.tau} modulus={f.modulus:#x} d={p.d} lp={p.lp} n={p.n_chaff} w={p.w} beta={p.beta!r}",
        f"hk={p.khash.hex()}",
    ]
    lines.extend(f"{f.to_hex(x)} {f.to_hex(y)}" for x, y in hd.points)
    return ("\n".join(lines) + "\n").encode("ascii")


_HEADER_KEYS = ("tau", "modulus", "d", "lp", "n", "w", "beta")


def deserialize_vault(data: bytes, combo_cap: int = DEFAULT_COMBO_CAP) -> HelperData:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise VaultFormatError("vault is not ASCII text") from exc
    if not text.endswith("\n"):
        raise VaultFormatError("missing final newline")
    lines = text[:-1].split("\n")
    if lines[0] != MAGIC:
        raise VaultFormatError(f"bad magic {lines[0]!r}", 1)
    if len(lines) < 3:
        raise VaultFormatError("truncated header", len(lines))

    fields = {}
    for token in lines[1].split(" "):
        key, sep, value = token.partition("=")
        if not sep or key not in _HEADER_KEYS or key in fields:
            raise VaultFormatError(f"bad header token {token!r}", 2)
        fields[key] = value
    if tuple(fields) != _HEADER_KEYS:
        raise VaultFormatError("header fields missing or out of order", 2)
    try:
        fspec = FieldSpec(int(fields["tau"]), int(fields["modulus"], 16))
        params = VaultParams(field=fspec, d=int(fields["d"]), lp=int(fields["lp"]),
                             n_chaff=int(fields["n"]), w=int(fields["w"]),
                             beta=float(fields["beta"]), combo_cap=combo_cap)
    except (ValueError, FieldError) as exc:
        raise VaultFormatError(str(exc), 2) from None

    if not lines[2].startswith("hk="):
        raise VaultFormatError("expected hk=<hex>", 3)
    hk = lines[2][3:]
    if len(hk) != 2 * cryptoshim.DIGEST_SIZE or hk != hk.lower():
        raise VaultFormatError("hk must be 64 lowercase hex digits", 3)
    try:
        khash = bytes.fromhex(hk)
    except ValueError:
        raise VaultFormatError("hk is not hex", 3) from None
    params = replace(params, khash=khash)

    body = lines[3:]
    expected = params.lp + params.n_chaff
    if len(body) != expected:
        raise VaultFormatError(f"header declares {expected} points, found {len(body)}")
    points = []
    seen = set()
    for lineno, line in enumerate(body, start=4):
        parts = line.split(" ")
        if len(parts) != 2:
            raise VaultFormatError(f"expected '<X> <Y>', got {line!r}", lineno)
        try:
            x, y = fspec.from_hex(parts[0]), fspec.from_hex(parts[1])
        except FieldError as exc:
            raise VaultFormatError(str(exc), lineno) from None
        if x in seen:
            raise VaultFormatError(f"duplicate X {parts[0]}", lineno)
        seen.add(x)
        points.append((x, y))
    return HelperData(params, tuple(points))
