"""Command-line entry point.

Settings resolve as: command-line flag, then ``--config`` file
(``key = value`` lines), then built-in defaults.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import experiments, simnet
from .biotemplate import (InsufficientMinutiaeError, NoiseModel, TemplateError, load_template,
                          write_template)
from .gf import FieldError, FieldSpec
from .poly import SecretBits, SecretLengthError
from .vault import (RecoveryFailure, VaultError, VaultParams, deserialize_vault, fv_gen, fv_open,
                    secret_hash, serialize_vault)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_PARAM = 2
EXIT_NO_RECOVERY = 3

CONFIG_KEYS = {
    "seed": int, "tau": int, "modulus": lambda s: int(s, 0), "degree": int, "lp": int,
    "chaff": int, "w": int, "beta": float, "combo_cap": int,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CliConfig:
    tau: int = 24
    modulus: int = 0x100001B
    degree: int = 9
    lp: int = 20
    chaff: int = 200
    w: int = 20
    beta: float = 0.2
    combo_cap: int = 10**6
    seed: int | None = None

    def vault_params(self) -> VaultParams:
        return VaultParams(field=FieldSpec(self.tau, self.modulus), d=self.degree, lp=self.lp,
                           n_chaff=self.chaff, w=self.w, beta=self.beta, combo_cap=self.combo_cap)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def read_config(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (p.strip() for p in line.partition("="))
        if not sep or key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: expected one of {sorted(CONFIG_KEYS)} as 'key = value'")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def resolve_config(args) -> CliConfig:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for key in ("seed", "degree", "chaff", "w", "beta"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return CliConfig(**values)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# -- commands --------------------------------------------------------------------

def cmd_vault_gen(args, cfg: CliConfig) -> int:
    try:
        bt = load_template(args.template, cfg.lp)
    except InsufficientMinutiaeError as exc:
        _err(str(exc))
        return EXIT_PARAM
    except (TemplateError, OSError, UnicodeDecodeError) as exc:
        _err(str(exc))
        return EXIT_PARSE
    try:
        params = cfg.vault_params()
        rng = cfg.rng()
        if args.random:
            k = SecretBits.random(params.secret_bits, rng)
        else:
            k = SecretBits.from_hex(args.secret, params.secret_bits)
        hd = fv_gen(k, bt, params, rng)
    except (VaultError, FieldError, TemplateError, SecretLengthError, ValueError) as exc:
        _err(str(exc))
        return EXIT_PARAM
    Path(args.out).write_bytes(serialize_vault(hd))
    print(f"hk={secret_hash(k).hex()}")
    if args.random:
        print(f"secret={k.hex()}")
    return EXIT_OK


def cmd_vault_open(args, cfg: CliConfig) -> int:
    try:
        hd = deserialize_vault(Path(args.vault).read_bytes(), combo_cap=cfg.combo_cap)
        bt = load_template(args.template, cfg.lp)
    except (VaultError, TemplateError, OSError) as exc:
        _err(str(exc))
        return EXIT_PARSE
    try:
        k = fv_open(hd, bt)
    except RecoveryFailure as exc:
        _err(f"no recovery ({exc})")
        return EXIT_NO_RECOVERY
    print(f"secret={k.hex()}")
    return EXIT_OK


def _scenario_path(name: str) -> Path:
    path = Path(name)
    if not path.exists():
        bundled = simnet.bundled_scenarios()
        if name in bundled:
            return bundled[name]
    return path


def cmd_scenario_run(args, cfg: CliConfig) -> int:
    try:
        s = simnet.load_scenario(_scenario_path(args.scenario))
        if args.seed is not None:
            s = replace(s, seed=args.seed)
        overrides = {k: v for k, v in (("d", args.degree), ("n_chaff", args.chaff),
                                       ("w", args.w), ("beta", args.beta)) if v is not None}
        if overrides:
            s = replace(s, params=replace(s.params, **overrides))
        outcome = simnet.run_scenario(s)
    except (simnet.ScenarioError, VaultError, OSError, UnicodeDecodeError) as exc:
        _err(str(exc))
        return EXIT_PARSE
    sys.stdout.write(outcome.report())
    if args.transcript:
        Path(args.transcript).write_text(outcome.transcript.dump(), encoding="utf-8")
    return EXIT_OK


def cmd_scenario_list(args, cfg: CliConfig) -> int:
    for name, path in simnet.bundled_scenarios().items():
        print(f"{name}\t{path}")
    return EXIT_OK


def cmd_scenario_matrix(args, cfg: CliConfig) -> int:
    rows = simnet.scenario_matrix(cfg.seed if cfg.seed is not None else 2024)
    print("protocol,strategy,variant,expected,observed")
    for r in rows:
        print(f"{r.protocol.value},{r.strategy.value},{r.variant},{r.expected},{r.observed}")
    return EXIT_OK if all(r.ok for r in rows) else 1


def _degree_range(text: str) -> range:
    lo, sep, hi = text.partition(":")
    try:
        return range(int(lo), int(hi) + 1) if sep else range(int(lo), int(lo) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def cmd_sweep(args, cfg: CliConfig) -> int:
    seed = cfg.seed if cfg.seed is not None else 0
    try:
        params = cfg.vault_params()
        if args.dataset:
            data = experiments.load_dataset(args.dataset, cfg.lp)
        else:
            data = experiments.synth_dataset(args.subjects, args.samples, NoiseModel(),
                                             np.random.default_rng(seed))
        rows = experiments.sweep_accuracy(data, args.degrees, params, seed,
                                          args.impostors, args.workers)
        text = experiments.write_csv(rows, args.out)
    except (experiments.ParameterError, experiments.DatasetError, VaultError, OSError) as exc:
        _err(str(exc))
        return 1
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args, cfg: CliConfig) -> int:
    try:
        report = experiments.bench_fv(cfg.vault_params(), args.trials,
                                      cfg.seed if cfg.seed is not None else 0)
        text = report.format()
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
    except (experiments.ParameterError, VaultError, OSError) as exc:
        _err(str(exc))
        return 1
    sys.stdout.write(text)
    return EXIT_OK


def cmd_dataset_synth(args, cfg: CliConfig) -> int:
    try:
        data = experiments.synth_dataset(args.subjects, args.samples, NoiseModel(), cfg.rng())
        out = Path(args.outdir)
        out.mkdir(parents=True, exist_ok=True)
        for sid, samples in data.subjects:
            for i, t in enumerate(samples, start=1):
                write_template(t, out / f"{sid}_{i}.txt")
    except (experiments.ParameterError, OSError) as exc:
        _err(str(exc))
        return 1
    print(f"wrote {len(data)} templates for {len(data.subjects)} subjects to {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _global_flags(default) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=default)
    p.add_argument("--seed", type=int, help="RNG seed (64-bit)")
    p.add_argument("--config", help="file of 'key = value' defaults")
    p.add_argument("--degree", type=int, help="polynomial degree d")
    p.add_argument("--chaff", type=int, help="number of chaff points")
    p.add_argument("--w", type=int, help="matching threshold")
    p.add_argument("--beta", type=float, help="angle weight in the distance")
    return p


def build_parser() -> argparse.ArgumentParser:
    # globals are accepted before or after the subcommand
    sub_globals = _global_flags(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="biorti", parents=[_global_flags(None)],
                                     description="Fuzzy-vault RoT identification toolkit")
    cmds = parser.add_subparsers(dest="command", required=True)

    vault = cmds.add_parser("vault", help="lock or unlock a fuzzy vault").add_subparsers(dest="action", required=True)
    gen = vault.add_parser("gen", parents=[sub_globals], help="lock a secret under a template")
    gen.add_argument("template")
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--secret", help="secret as hex, (d+1)*tau bits")
    src.add_argument("--random", action="store_true", help="draw a random secret")
    gen.add_argument("-o", "--out", required=True)
    gen.set_defaults(func=cmd_vault_gen)
    opn = vault.add_parser("open", parents=[sub_globals], help="unlock a vault with a template")
    opn.add_argument("vault")
    opn.add_argument("template")
    opn.set_defaults(func=cmd_vault_open)

    scen = cmds.add_parser("scenario", help="attack scenarios").add_subparsers(dest="action", required=True)
    run = scen.add_parser("run", parents=[sub_globals], help="run a scenario file or bundled name")
    run.add_argument("scenario")
    run.add_argument("--transcript", help="write a hex frame dump here")
    run.set_defaults(func=cmd_scenario_run)
    scen.add_parser("list", parents=[sub_globals], help="bundled scenarios").set_defaults(func=cmd_scenario_list)
    scen.add_parser("matrix", parents=[sub_globals],
                    help="run the protocol/strategy table").set_defaults(func=cmd_scenario_matrix)

    sweep = cmds.add_parser("sweep", parents=[sub_globals], help="GAR/FAR against degree")
    src = sweep.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset", help="directory of <subject>_<sample>.txt files")
    src.add_argument("--synthetic", action="store_true")
    sweep.add_argument("--degrees", type=_degree_range, default=range(7, 13), help="LO:HI inclusive")
    sweep.add_argument("--subjects", type=int, default=10)
    sweep.add_argument("--samples", type=int, default=5)
    sweep.add_argument("--impostors", type=int, default=experiments.DEFAULT_IMPOSTOR_TRIALS)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", help="CSV path (stdout if omitted)")
    sweep.set_defaults(func=cmd_sweep)

    bench = cmds.add_parser("bench", parents=[sub_globals], help="time fv_gen, fv_open and sign")
    bench.add_argument("--trials", type=int, default=1000)
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_bench)

    ds = cmds.add_parser("dataset", help="datasets").add_subparsers(dest="action", required=True)
    synth = ds.add_parser("synth", parents=[sub_globals], help="write a synthetic dataset")
    synth.add_argument("outdir")
    synth.add_argument("--subjects", type=int, default=10)
    synth.add_argument("--samples", type=int, default=5)
    synth.set_defaults(func=cmd_dataset_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError, TypeError) as exc:
        _err(str(exc))
        return 1
    return args.func(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
