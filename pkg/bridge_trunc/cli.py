"""
Command line: sample weight matrices, export grid paths, verify presets, run probes

    python -m bridge_trunc sample --ensemble dft --n 4
    python -m bridge_trunc path rand-truncation --ensemble unitary --n 50 --seed 1
    python -m bridge_trunc verify thm-3.3-dft --seed 42 --threads 4
    python -m bridge_trunc probe conjecture-2 --n 100,200,400 --seed 9

Exit codes: 0 pass, 1 statistical failure, 2 configuration error, 3 I/O error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from .config import settings
from .core.ensembles import EnsembleKind, EnsembleSpec, sample_weights
from .core.environment import sample_environment
from .core.errors import BridgeTruncError, ConfigError, NumericalError, OutputError
from .core.file_handler import OutputManager, output_manager
from .core.log_manager import log_manager, setup_log_capture
from .core.presets import PRESET_ALIASES, PRESETS, resolve_preset, run_preset
from .core.probes import ProbeKind, run_probe
from .core.processes import (
    Grid,
    det_truncation_path,
    empirical_copula_path,
    rand_truncation_path,
    subordinated_path,
    v_process,
)
from .core.random_streams import ENVIRONMENT, MATRIX, RngState
from .models import CliConfig

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_IO = 3

ENSEMBLES = [k.value for k in EnsembleKind]

PATH_BUILDERS = {
    "det-truncation": lambda weights, env, grid: det_truncation_path(weights, grid),
    "rand-truncation": rand_truncation_path,
    "subordinated": subordinated_path,
    "v": v_process,
    "copula": lambda weights, env, grid: empirical_copula_path(env, weights.sigma, grid),
}


def parse_points(text: str) -> List[List[float]]:
    """'s:t,s:t' -> [[s, t], ...]"""
    points = []
    for item in text.split(","):
        try:
            s, t = item.split(":")
            points.append([float(s), float(t)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad point '{item}', expected s:t")
    return points


def parse_sizes(text: str) -> List[int]:
    try:
        return [int(n) for n in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list '{text}', expected n or n1,n2,...")


def _common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--ensemble", "--group", dest="ensemble", choices=ENSEMBLES)
    parser.add_argument("--seed", type=int, help="master seed (required)")
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--grid-m", dest="grid_m", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out-dir", dest="out_dir", help="default: $BRIDGE_TRUNC_OUT or ./reports")
    parser.add_argument("--log-format", dest="log_format", choices=["text", "json", "csv"], default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridge_trunc",
                                     description="Random truncations of random matrices")
    commands = parser.add_subparsers(dest="command", required=True)

    sample = commands.add_parser("sample", help="write the squared-modulus weights of one matrix")
    _common_arguments(sample)
    sample.add_argument("--n", type=int)

    path = commands.add_parser("path", help="write one realization of a grid process as s,t,value")
    path.add_argument("kind", choices=list(PATH_BUILDERS))
    _common_arguments(path)
    path.add_argument("--n", type=int)

    verify = commands.add_parser("verify", help="run a verification preset")
    verify.add_argument("preset", help=", ".join([*PRESETS, *PRESET_ALIASES]))
    _common_arguments(verify)
    verify.add_argument("--n", type=int)
    verify.add_argument("--points", type=parse_points, help="s:t,s:t,...")
    verify.add_argument("--z-threshold", dest="z_threshold", type=float)
    verify.add_argument("--identity-permutation", dest="identity_permutation",
                        action="store_true", default=None)

    probe = commands.add_parser("probe", help="run a moment or conjecture probe")
    probe.add_argument("kind", help=", ".join(k.value for k in ProbeKind))
    _common_arguments(probe)
    probe.add_argument("--n", type=parse_sizes, help="n or n1,n2,...")
    probe.add_argument("--s", type=float, default=0.5)
    probe.add_argument("--t", type=float, default=0.5)
    return parser


def load_config(args: argparse.Namespace) -> CliConfig:
    """--config document, then every flag that was given"""
    document = {}
    if args.config:
        path = Path(args.config)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"config {path} must be a JSON object")

    flags = {
        "ensemble": args.ensemble,
        "seed": args.seed,
        "replicates": args.replicates,
        "grid_m": args.grid_m,
        "threads": args.threads,
        "out_dir": args.out_dir,
        "test_points": getattr(args, "points", None),
        "z_threshold": getattr(args, "z_threshold", None),
        "identity_permutation": getattr(args, "identity_permutation", None),
    }
    if isinstance(getattr(args, "n", None), int):
        flags["n"] = args.n
    document.update({k: v for k, v in flags.items() if v is not None})
    return CliConfig(**document)


def _output(config: CliConfig) -> OutputManager:
    return OutputManager(config.out_dir) if config.out_dir else output_manager


def _finish(output: OutputManager, stem: str, args) -> None:
    output.write_log(stem, args.log_format)


def cmd_sample(args, config: CliConfig) -> int:
    if config.ensemble is None or config.n is None:
        raise ConfigError("sample needs --ensemble and --n")
    if config.seed is None and config.ensemble is not EnsembleKind.DFT:
        raise ConfigError("a seed is required (--seed or \"seed\" in the config file)")
    seed = config.seed or 0
    weights = sample_weights(EnsembleSpec(config.ensemble, config.n), RngState(seed).fixed(MATRIX),
                             check_unitary=True)
    output = _output(config)
    stem = f"weights_{config.ensemble.value}_n{config.n}" + ("" if config.seed is None else f"_seed{seed}")
    output.write_weights(f"{stem}.csv", weights)
    log_manager.add_detailed_log("sample", {"ensemble": config.ensemble.value, "n": config.n, "seed": seed})
    _finish(output, stem, args)
    return EXIT_PASS


def cmd_path(args, config: CliConfig) -> int:
    if config.ensemble is None or config.n is None:
        raise ConfigError("path needs --ensemble and --n")
    if config.seed is None:
        raise ConfigError("a seed is required (--seed or \"seed\" in the config file)")
    if args.kind == "copula" and config.ensemble is not EnsembleKind.PERMUTATION:
        raise ConfigError("the copula path needs the permutation ensemble")
    root = RngState(config.seed)
    weights = sample_weights(EnsembleSpec(config.ensemble, config.n), root.fixed(MATRIX),
                             check_unitary=True)
    env = sample_environment(config.n, root.fixed(ENVIRONMENT))
    grid = Grid(config.grid_m or settings.default_grid_m)
    path = PATH_BUILDERS[args.kind](weights, env, grid)

    output = _output(config)
    stem = f"path_{args.kind}_{config.ensemble.value}_n{config.n}_seed{config.seed}"
    output.write_path(f"{stem}.csv", path)
    log_manager.add_detailed_log("path", {"kind": args.kind, "ensemble": config.ensemble.value,
                                          "n": config.n, "seed": config.seed, "m": grid.m})
    _finish(output, stem, args)
    return EXIT_PASS


def cmd_verify(args, config: CliConfig) -> int:
    name = resolve_preset(args.preset)
    report = run_preset(name, config.experiment_overrides(), config.threads)
    log_manager.record_report(name, report)
    output = _output(config)
    output.write_report(name, report)
    _finish(output, name, args)
    print(f"{name}: {'PASS' if report.verdict else 'FAIL'}")
    return EXIT_PASS if report.verdict else EXIT_FAIL


def cmd_probe(args, config: CliConfig) -> int:
    if config.seed is None:
        raise ConfigError("a seed is required (--seed or \"seed\" in the config file)")
    sizes = args.n or ([config.n] if config.n is not None else [100])
    report = run_probe(args.kind, sizes, config.seed, config.ensemble or EnsembleKind.UNITARY,
                       config.replicates, args.s, args.t, config.grid_m, config.threads)
    log_manager.record_report(args.kind, report)
    output = _output(config)
    output.write_report(args.kind, report)
    _finish(output, args.kind, args)
    for row in report.rows:
        print(f"{row.label}: estimate {row.estimate:.6g} +- {row.se:.3g}, target {row.target}")
    if report.verdict is None:
        return EXIT_PASS
    return EXIT_PASS if report.verdict else EXIT_FAIL


COMMANDS = {"sample": cmd_sample, "path": cmd_path, "verify": cmd_verify, "probe": cmd_probe}


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.log_level, format=settings.log_format)
    setup_log_capture()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        return COMMANDS[args.command](args, config)
    except OutputError as e:
        logger.error(f"Output failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (BridgeTruncError, ValidationError, ValueError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"I/O failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
