#!/usr/bin/env python3
"""Main entry point for the reinforced CLI."""

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from . import __version__
from .commands import CommandProcessor, mode_names
from .config import OUTPUT_DIR_ENV, load_config, validation_to_config_error
from .exceptions import ExitCodes, OracleFailure
from .input_output import InputOutput, log_level, setup_logging
from .state import RunManifest


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _band(text: str) -> List[float]:
    values = _float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError("band takes two comma-separated numbers, e.g. 0.333,3")
    return values


def _profile_parser() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("weight profile")
    group.add_argument("--family", choices=["logpoly", "takei"], help="Weight family (default: logpoly)")
    group.add_argument("--alpha", type=float, help="Power-law exponent")
    group.add_argument("--beta", type=float, help="Log-power exponent (required for logpoly)")
    group.add_argument("--delta", type=float, help="Reinforcement increment (default: 1)")
    return parent


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser for the reinforced CLI."""
    parser = argparse.ArgumentParser(
        prog="reinforced",
        description="Edge-reinforced random walks on the half-line: exact laws, moments and experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="JSON config file; flags win over its values")
    parser.add_argument(
        "--output-dir",
        type=Path,
        help=f"Directory for outputs (default: ${OUTPUT_DIR_ENV} or ./runs)",
    )
    parser.add_argument("--name", help="Output file stem (default: the subcommand or experiment mode)")
    parser.add_argument("--threads", type=int, help="Worker processes for replica ensembles (default: 1)")
    parser.add_argument("--seed", type=int, help="Master seed (default: 0)")
    parser.add_argument("--debug", action="store_true", default=None, help="Enable debug mode")
    parser.add_argument("--verbose", action="store_true", default=None, help="Log progress")
    parser.add_argument("--no-color", action="store_true", default=None, help="Disable colored output")

    profile = _profile_parser()
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("classify", parents=[profile], help="Recurrence or transience of a profile")
    p.add_argument("--truncation", type=int, default=10_000, help="N for the diagnostic partial sum")

    p = sub.add_parser("weights", parents=[profile], help="Export w0(0..x_max)")
    p.add_argument("--x-max", type=int, default=100)

    p = sub.add_parser("resistance", parents=[profile], help="Resistances, hitting times and bound checks")
    p.add_argument("--x-max", type=int, default=1000)
    p.add_argument("--weights-csv", type=Path, help="Use an exported weight sequence instead of a profile")
    p.add_argument("--z-upper", type=float, help="Certified upper bound on the total reversing mass")
    p.add_argument("--verify", action="store_true", help="Cross-check T and gamma against direct sums")

    p = sub.add_parser("moments", parents=[profile], help="E[S_x], V[S_x] and their asymptotic curves")
    p.add_argument("--xs", type=_int_list, default=[10, 100, 1000, 10_000, 100_000])
    p.add_argument("--epsilon", type=float, default=0.3)

    p = sub.add_parser("oracle", parents=[profile], help="Exact path-law equivalence suite")
    p.add_argument("--max-len", type=int, default=12)
    p.add_argument("--grid", choices=["default", "profile"], default="default")

    p = sub.add_parser("simulate", parents=[profile], help="Reinforced walk trajectories")
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--checkpoints", type=_int_list, help="Default: powers of two")
    p.add_argument("--levels", type=_int_list, default=[], help="Levels whose first hitting times are recorded")
    p.add_argument("--exact", type=int, metavar="N", help="Also export the exact law of X_N")

    p = sub.add_parser("environment", parents=[profile], help="Sample or replay a Beta environment")
    p.add_argument("--x-max", type=int, default=1000)
    p.add_argument("--env-seed", type=int, help="Environment seed (default: --seed)")
    p.add_argument("--replay", type=Path, help="Load an exported environment CSV")
    p.add_argument("--s-x", type=int, help="Also compare Monte Carlo S_x with its mean and variance")
    p.add_argument("--n-envs", type=int, default=1000)

    p = sub.add_parser("experiment", parents=[profile], help="Ensemble experiments")
    p.add_argument("--mode", choices=mode_names())
    p.add_argument("--steps", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--checkpoints", type=_int_list)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--band", type=_band, help="Accepted final median ratio range, low,high")
    p.add_argument("--quenched", action="store_true", help="Walk in a sampled environment per replica")
    p.add_argument("--levels", type=_int_list)
    p.add_argument("--n-walks", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--env-seed", type=int)
    p.add_argument("--xs", type=_int_list)
    p.add_argument("--n-envs", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--strict", action="store_true", help="Exit 3 when a statistical verdict fails")

    return parser


def main(args: Optional[list] = None) -> int:
    """Main entry point."""
    parser = create_parser()
    argv = list(sys.argv[1:] if args is None else args)
    parsed_args = parser.parse_args(argv)
    io = InputOutput(no_color=bool(parsed_args.no_color))
    exit_codes = ExitCodes()
    started = time.perf_counter()

    try:
        config = load_config(
            parsed_args.config,
            {
                "output_dir": parsed_args.output_dir,
                "threads": parsed_args.threads,
                "seed": parsed_args.seed,
                "debug": parsed_args.debug,
                "verbose": parsed_args.verbose,
                "no_color": parsed_args.no_color,
            },
        )
        setup_logging(log_level(config.debug, config.verbose), config.no_color)

        processor = CommandProcessor(config, io, name=parsed_args.name)
        result = processor.run(parsed_args.command, parsed_args)

        manifest = RunManifest(
            command=parsed_args.command,
            argv=argv,
            config=result.config_echo,
            master_seed=config.seed,
            output_paths=[str(p) for p in result.outputs.values()],
            wall_time=time.perf_counter() - started,
        )
        stem = processor.name or parsed_args.command
        result.outputs["manifest"] = manifest.save_to_file(Path(config.output_dir) / f"{stem}.manifest.json")
        io.display_outputs({k: str(v) for k, v in result.outputs.items()})
        if result.failure:
            raise OracleFailure(result.failure)
        return 0

    except KeyboardInterrupt:
        io.display_error("Interrupted by user.")
        return 1
    except Exception as e:
        if parsed_args.debug:
            raise
        if isinstance(e, ValidationError):
            e = validation_to_config_error(e)
        io.display_error(f"{type(e).__name__}: {e}", exit_codes.get_ex_info(e).description)
        return exit_codes.exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
