"""Accuracy sweeps (GAR/FAR against polynomial degree) and timing benchmarks.

Every trial gets its own random streams derived from ``(seed, kind,
trial)``, never from the degree. The chaff layout of a trial is therefore
the same at every degree, and a trial that opens at degree d also opens
at every smaller degree, which makes both columns of a sweep monotone.
"""
from __future__ import annotations

import csv
import io
import platform
import re
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import cryptoshim
from .biotemplate import (DEFAULT_COUNT, NoiseModel, Template, TemplateError, load_template,
                          perturb_template, random_impostor_template)
from .poly import SecretBits
from .vault import RecoveryFailure, VaultParams, fv_gen, fv_open

CSV_HEADER = ("degree", "gar", "far", "genuine_trials", "impostor_trials")
DEFAULT_IMPOSTOR_TRIALS = 1000

_GENUINE, _IMPOSTOR, _PAIRING = 1, 2, 3


class ParameterError(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    subjects: tuple[tuple[str, tuple[Template, ...]], ...]

    def __post_init__(self):
        subjects = tuple((str(sid), tuple(samples)) for sid, samples in self.subjects)
        object.__setattr__(self, "subjects", subjects)
        for sid, samples in subjects:
            if len(samples) < 2:
                raise DatasetError(f"subject {sid} has {len(samples)} sample(s), need at least 2")

    def __len__(self) -> int:
        return sum(len(s) for _, s in self.subjects)


@dataclass(frozen=True)
class AccuracyRow:
    degree: int
    gar: float
    far: float
    genuine_trials: int
    impostor_trials: int
    genuine_accepts: int = field(default=0, repr=False)
    impostor_accepts: int = field(default=0, repr=False)

    def as_csv_row(self) -> list[str]:
        return [str(self.degree), f"{self.gar:.4f}", f"{self.far:.4f}",
                str(self.genuine_trials), str(self.impostor_trials)]


# -- datasets --------------------------------------------------------------------

def synth_dataset(subjects: int, samples_per: int, noise: NoiseModel = NoiseModel(),
                  rng: np.random.Generator | None = None, size: int = DEFAULT_COUNT) -> Dataset:
    """Independent random base templates, each re-sampled ``samples_per`` times."""
    if subjects < 1 or samples_per < 1:
        raise ParameterError("subjects and samples_per must be at least 1")
    if samples_per < 2:
        raise ParameterError("genuine pairing needs at least 2 samples per subject")
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for s in range(subjects):
        base = random_impostor_template(size, rng)
        out.append((f"s{s:03d}", tuple(perturb_template(base, noise, rng) for _ in range(samples_per))))
    return Dataset(tuple(out))


_NAME = re.compile(r"^(?P<subject>.+)_(?P<sample>[^_]+)\.txt$")


def _natural(key: str):
    return (0, int(key), "") if key.isdigit() else (1, 0, key)


def load_dataset(directory, count: int = DEFAULT_COUNT) -> Dataset:
    """Read ``<subject>_<sample>.txt`` minutiae files from ``directory``."""
    root = Path(directory)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    groups: dict[str, list[tuple[str, Path]]] = {}
    for path in root.iterdir():
        m = _NAME.match(path.name)
        if m and path.is_file():
            groups.setdefault(m["subject"], []).append((m["sample"], path))
    if not groups:
        raise DatasetError(f"{root}: no <subject>_<sample>.txt files")
    subjects = []
    for sid in sorted(groups, key=_natural):
        files = sorted(groups[sid], key=lambda t: _natural(t[0]))
        try:
            subjects.append((sid, tuple(load_template(p, count) for _, p in files)))
        except TemplateError as exc:
            raise DatasetError(f"subject {sid}: {exc}") from exc
    return Dataset(tuple(subjects))


# -- accuracy --------------------------------------------------------------------

def _streams(seed: int, kind: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    ss = np.random.SeedSequence([seed, kind, trial])
    chal_seq, vault_seq = ss.spawn(2)
    return np.random.default_rng(chal_seq), np.random.default_rng(vault_seq)


def _trial(args) -> bool:
    """One lock/unlock; True if the secret came back."""
    enrol, query, params, seed, kind, trial = args
    if len(enrol) < params.d + 1:
        return False  # failure to enrol counts as a rejection
    chal_rng, vault_rng = _streams(seed, kind, trial)
    k = SecretBits.random(params.secret_bits, chal_rng)
    hd = fv_gen(k, enrol, params, vault_rng)
    try:
        return fv_open(hd, query) == k
    except RecoveryFailure:
        return False


def genuine_pairs(data: Dataset) -> list[tuple[Template, Template]]:
    """All ordered (enrol, query) pairs of distinct samples of one subject."""
    return [(a, b) for _, samples in data.subjects
            for i, a in enumerate(samples) for j, b in enumerate(samples) if i != j]


def impostor_pairs(data: Dataset, trials: int, seed: int) -> list[tuple[Template, Template]]:
    """``trials`` seeded cross-subject pairs (drawn with replacement)."""
    if len(data.subjects) < 2:
        raise DatasetError("impostor trials need at least two subjects")
    rng = np.random.default_rng([seed, _PAIRING])
    n = len(data.subjects)
    out = []
    for _ in range(trials):
        a, b = rng.choice(n, size=2, replace=False)
        sa, sb = data.subjects[a][1], data.subjects[b][1]
        out.append((sa[rng.integers(len(sa))], sb[rng.integers(len(sb))]))
    return out


def _run(jobs: list, workers: int) -> list[bool]:
    if workers <= 1:
        return [_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def sweep_accuracy(data: Dataset, degrees: Iterable[int], params: VaultParams = VaultParams(),
                   seed: int = 0, impostor_trials: int = DEFAULT_IMPOSTOR_TRIALS,
                   workers: int = 1) -> list[AccuracyRow]:
    """GAR and FAR for each degree; deterministic in ``seed``."""
    degrees = list(degrees)
    for d in degrees:
        if not 1 <= d < params.lp:
            raise ParameterError(f"degree {d} outside [1, {params.lp - 1}]")
    if impostor_trials < 1:
        raise ParameterError("impostor_trials must be positive")
    gen = genuine_pairs(data)
    imp = impostor_pairs(data, impostor_trials, seed)
    rows = []
    for d in degrees:
        p = replace(params, d=d)
        g = _run([(a, b, p, seed, _GENUINE, i) for i, (a, b) in enumerate(gen)], workers)
        f = _run([(a, b, p, seed, _IMPOSTOR, i) for i, (a, b) in enumerate(imp)], workers)
        ga, fa = sum(g), sum(f)
        rows.append(AccuracyRow(d, ga / len(g), fa / len(f), len(g), len(f), ga, fa))
    return rows


def write_csv(rows: Sequence[AccuracyRow], out=None) -> str:
    """Render rows as CSV; also write to ``out`` (path or text file) if given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(r.as_csv_row())
    text = buf.getvalue()
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
    return text


# -- timing ------------------------------------------------------------------------

@dataclass(frozen=True)
class OpStats:
    samples: tuple[float, ...]  # seconds

    @property
    def median_ms(self) -> float:
        return statistics.median(self.samples) * 1e3

    @property
    def mean_ms(self) -> float:
        return statistics.fmean(self.samples) * 1e3


@dataclass(frozen=True)
class BenchReport:
    trials: int
    host: str
    params: VaultParams
    ops: dict[str, OpStats]

    def format(self) -> str:
        lines = [f"host: {self.host}", f"trials: {self.trials}",
                 f"geometry: d={self.params.d} lp={self.params.lp} n={self.params.n_chaff}",
                 f"{'operation':<10} {'median_ms':>10} {'mean_ms':>10}"]
        for name, st in self.ops.items():
            lines.append(f"{name:<10} {st.median_ms:>10.3f} {st.mean_ms:>10.3f}")
        return "\n".join(lines) + "\n"


def host_id() -> str:
    return f"{platform.node()} {platform.machine()} {platform.system()} {platform.release()} python-{platform.python_version()}"


def bench_fv(params: VaultParams = VaultParams(), trials: int = 1000, seed: int = 0) -> BenchReport:
    """Wall-clock fv_gen, fv_open (zero-noise re-sample) and sign over ``trials`` runs."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    sk, _ = cryptoshim.generate_keypair(rng)
    times = {"fv_gen": [], "fv_open": [], "sign": []}
    clock = time.perf_counter
    for _ in range(trials):
        bt = random_impostor_template(params.lp, rng)
        k = SecretBits.random(params.secret_bits, rng)
        t0 = clock()
        hd = fv_gen(k, bt, params, rng)
        t1 = clock()
        k2 = fv_open(hd, bt)
        t2 = clock()
        cryptoshim.sign(sk, k2.to_bytes())
        t3 = clock()
        times["fv_gen"].append(t1 - t0)
        times["fv_open"].append(t2 - t1)
        times["sign"].append(t3 - t2)
    return BenchReport(trials, host_id(), params, {k: OpStats(tuple(v)) for k, v in times.items()})
