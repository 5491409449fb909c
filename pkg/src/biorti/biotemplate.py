"""Fingerprint minutiae templates: field encoding, matching distance, I/O.

A minutia (x, y, theta) is packed into one GF(2^tau) element as
``x-cell | y-cell | theta-bin``. At the default tau=24 the split is 9/9/6
bits, so pixel coordinates in [0, 512) are kept exactly and theta is
quantised to 64 bins of 5.625 degrees. Smaller fields (used for
exhaustive tests) keep the same layout with coarser cells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

COORD_LIMIT = 512
COORD_BITS = 9
DEFAULT_BETA = 0.2
DEFAULT_W = 20
DEFAULT_COUNT = 20


class TemplateError(ValueError):
    pass


class MinutiaRangeError(TemplateError):
    pass


class TemplateParseError(TemplateError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InsufficientMinutiaeError(TemplateError):
    pass


@dataclass(frozen=True)
class Minutia:
    x: int
    y: int
    theta: float

    def __post_init__(self):
        if not (0 <= self.x < COORD_LIMIT and 0 <= self.y < COORD_LIMIT):
            raise MinutiaRangeError(f"coordinates ({self.x}, {self.y}) outside [0, {COORD_LIMIT})")
        if not 0.0 <= self.theta < 360.0:
            raise MinutiaRangeError(f"theta {self.theta} outside [0, 360)")


@dataclass(frozen=True)
class RawMinutia:
    minutia: Minutia
    confidence: float = 1.0

    def __post_init__(self):
        if not self.confidence >= 0:
            raise TemplateError(f"confidence must be non-negative, got {self.confidence}")


@dataclass(frozen=True)
class NoiseModel:
    """Synthetic re-sampling noise: Gaussian jitter plus independent dropout."""

    sigma_xy: float = 3.0
    sigma_theta: float = 4.0
    drop_rate: float = 0.1

    def __post_init__(self):
        if self.sigma_xy < 0 or self.sigma_theta < 0:
            raise ValueError("noise deviations must be non-negative")
        if not 0.0 <= self.drop_rate <= 1.0:
            raise ValueError("drop_rate must lie in [0, 1]")


ZERO_NOISE = NoiseModel(0.0, 0.0, 0.0)


# -- lattice encoding --------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    """Bit layout for packing minutiae into a tau-bit field element."""

    tau: int

    @property
    def coord_bits(self) -> int:
        return min(COORD_BITS, 3 * self.tau // 8)

    @property
    def angle_bits(self) -> int:
        return self.tau - 2 * self.coord_bits

    @property
    def cell_shift(self) -> int:
        return COORD_BITS - self.coord_bits

    @property
    def bin_width(self) -> float:
        return 360.0 / (1 << self.angle_bits)

    def theta_bin(self, theta: float) -> int:
        return min(int(theta // self.bin_width), (1 << self.angle_bits) - 1)


def _lattice(tau: int) -> Lattice:
    lat = Lattice(tau)
    if lat.coord_bits < 1 or lat.angle_bits < 0:
        raise ValueError(f"tau={tau} too small to encode a minutia")
    return lat


def encode_minutia(m: Minutia, tau: int = 24) -> int:
    lat = _lattice(tau)
    if not (0 <= m.x < COORD_LIMIT and 0 <= m.y < COORD_LIMIT and 0 <= m.theta < 360):
        raise MinutiaRangeError(f"minutia {m} out of range")
    xc = m.x >> lat.cell_shift
    yc = m.y >> lat.cell_shift
    return (xc << (lat.coord_bits + lat.angle_bits)) | (yc << lat.angle_bits) | lat.theta_bin(m.theta)


def decode_minutia(e: int, tau: int = 24) -> Minutia:
    """Inverse of :func:`encode_minutia`; cells and bins decode to their lower edge."""
    lat = _lattice(tau)
    abits, cbits = lat.angle_bits, lat.coord_bits
    tbin = e & ((1 << abits) - 1)
    yc = (e >> abits) & ((1 << cbits) - 1)
    xc = (e >> (abits + cbits)) & ((1 << cbits) - 1)
    return Minutia(xc << lat.cell_shift, yc << lat.cell_shift, tbin * lat.bin_width)


def decode_minutiae_array(es, tau: int = 24) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised decode to float arrays (x, y, theta)."""
    lat = _lattice(tau)
    es = np.asarray(es, dtype=np.int64)
    abits, cbits = lat.angle_bits, lat.coord_bits
    tbin = es & ((1 << abits) - 1)
    yc = (es >> abits) & ((1 << cbits) - 1)
    xc = (es >> (abits + cbits)) & ((1 << cbits) - 1)
    return ((xc << lat.cell_shift).astype(float), (yc << lat.cell_shift).astype(float),
            tbin * lat.bin_width)


# -- distance ----------------------------------------------------------------

def angle_difference(t1: float, t2: float) -> float:
    diff = abs(t1 - t2)
    return min(diff, 360.0 - diff)


def minutia_distance(p: Minutia, q: Minutia, beta: float = DEFAULT_BETA) -> float:
    return math.hypot(p.x - q.x, p.y - q.y) + beta * angle_difference(p.theta, q.theta)


def distance_matrix(query: tuple, ref: tuple, beta: float = DEFAULT_BETA) -> np.ndarray:
    """Pairwise distances between two (x, y, theta) array triples, shape (len(query), len(ref))."""
    qx, qy, qt = (np.asarray(a, dtype=float)[:, None] for a in query)
    rx, ry, rt = (np.asarray(a, dtype=float)[None, :] for a in ref)
    diff = np.abs(qt - rt)
    return np.hypot(qx - rx, qy - ry) + beta * np.minimum(diff, 360.0 - diff)


# -- templates ---------------------------------------------------------------

@dataclass(frozen=True)
class Template:
    """A set of minutiae with pairwise-distinct lattice encodings."""

    minutiae: tuple[Minutia, ...]

    def __post_init__(self):
        object.__setattr__(self, "minutiae", tuple(self.minutiae))
        codes = [encode_minutia(m) for m in self.minutiae]
        if len(set(codes)) != len(codes):
            raise TemplateError("two minutiae share a lattice cell")

    @classmethod
    def deduplicated(cls, minutiae: Iterable[Minutia]) -> "Template":
        """Keep the first minutia of every lattice cell, preserving order."""
        seen = set()
        kept = []
        for m in minutiae:
            code = encode_minutia(m)
            if code not in seen:
                seen.add(code)
                kept.append(m)
        return cls(tuple(kept))

    def __len__(self) -> int:
        return len(self.minutiae)

    def __iter__(self):
        return iter(self.minutiae)

    def __getitem__(self, i):
        return self.minutiae[i]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.array([m.x for m in self.minutiae], dtype=float),
                np.array([m.y for m in self.minutiae], dtype=float),
                np.array([m.theta for m in self.minutiae], dtype=float))

    def lattice_cells(self) -> set[int]:
        return {encode_minutia(m) for m in self.minutiae}

    def serialize(self) -> bytes:
        """Canonical text form: lattice-sorted, one ``x y theta`` line each."""
        ordered = sorted(self.minutiae, key=encode_minutia)
        # clamp so rounding never prints 360.0000
        return "".join(f"{m.x} {m.y} {min(m.theta, 359.9999):.4f}\n" for m in ordered).encode()

    @classmethod
    def deserialize(cls, data: bytes) -> "Template":
        raws = parse_minutiae(data.decode("utf-8"))
        return cls(tuple(r.minutia for r in raws))


def select_top_minutiae(raw: Sequence[RawMinutia], count: int = DEFAULT_COUNT) -> Template:
    """Highest-confidence ``count`` minutiae, ties kept in input order, one per lattice cell."""
    if not raw:
        raise InsufficientMinutiaeError("no minutiae to select from")
    order = sorted(range(len(raw)), key=lambda i: (-raw[i].confidence, i))
    seen = set()
    kept = []
    for i in order:
        m = raw[i].minutia
        code = encode_minutia(m)
        if code in seen:
            continue
        seen.add(code)
        kept.append(m)
        if len(kept) == count:
            break
    return Template(tuple(kept))


def parse_minutiae(text: str) -> list[RawMinutia]:
    """Parse ``x y theta [confidence]`` lines; '#' comments and blanks skipped."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cols = stripped.split()
        if len(cols) not in (3, 4):
            raise TemplateParseError(f"expected 3 or 4 columns, got {len(cols)}", lineno)
        try:
            x, y = int(cols[0]), int(cols[1])
            theta = float(cols[2])
            conf = float(cols[3]) if len(cols) == 4 else 1.0
        except ValueError as exc:
            raise TemplateParseError(str(exc), lineno) from None
        try:
            out.append(RawMinutia(Minutia(x, y, theta), conf))
        except MinutiaRangeError as exc:
            raise MinutiaRangeError(f"line {lineno}: {exc}") from None
        except TemplateError as exc:
            raise TemplateParseError(str(exc), lineno) from None
    return out


def load_template(path, count: int = DEFAULT_COUNT) -> Template:
    text = Path(path).read_text(encoding="utf-8")
    raws = parse_minutiae(text)
    if not raws:
        raise InsufficientMinutiaeError(f"{path}: no minutiae")
    return select_top_minutiae(raws, count)


def write_template(t: Template, path) -> None:
    Path(path).write_bytes(t.serialize())


# -- synthesis ---------------------------------------------------------------

def perturb_template(t: Template, noise: NoiseModel, rng: np.random.Generator) -> Template:
    """A noisy re-sample of ``t``: jitter, clamp/wrap, then independent dropout.

    Draws are made for every minutia regardless of dropout so the stream
    consumed depends only on ``len(t)``.
    """
    n = len(t)
    dx = rng.normal(0.0, 1.0, n) * noise.sigma_xy
    dy = rng.normal(0.0, 1.0, n) * noise.sigma_xy
    dt = rng.normal(0.0, 1.0, n) * noise.sigma_theta
    keep = rng.random(n) >= noise.drop_rate
    out = []
    for i, m in enumerate(t.minutiae):
        if not keep[i]:
            continue
        x = int(min(max(round(m.x + dx[i]), 0), COORD_LIMIT - 1))
        y = int(min(max(round(m.y + dy[i]), 0), COORD_LIMIT - 1))
        theta = float((m.theta + dt[i]) % 360.0)
        if theta >= 360.0:
            theta = 0.0
        out.append(Minutia(x, y, theta))
    return Template.deduplicated(out)


def random_impostor_template(size: int, rng: np.random.Generator) -> Template:
    """``size`` uniformly random minutiae on distinct lattice cells."""
    if size < 1:
        raise ValueError("size must be at least 1")
    seen = set()
    out = []
    while len(out) < size:
        x, y = (int(v) for v in rng.integers(0, COORD_LIMIT, 2))
        theta = float(rng.uniform(0.0, 360.0))
        m = Minutia(x, y, theta)
        code = encode_minutia(m)
        if code in seen:
            continue
        seen.add(code)
        out.append(m)
    return Template(tuple(out))
