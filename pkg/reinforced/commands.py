"""Subcommand handlers for the reinforced CLI."""

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from .config import Config, validation_to_config_error
from .environment import Environment, sample_environment, s_statistics
from .exceptions import ConfigError
from .experiments import (
    ExperimentConfig,
    HittingReport,
    Mode,
    ReplicaJob,
    ScalingReport,
    SllnReport,
    run_experiment,
    run_replicas,
)
from .input_output import InputOutput
from .lerrw import distribution_of_position, geometric_checkpoints
from .oracle import DEFAULT_GRID, OracleReport, run_oracle
from .resistance import (
    WeightSequence,
    build_resistance_profile,
    check_bounds,
    gamma_by_ratios,
    hitting_time_double_sum,
)
from .specialfn import moment_table
from .state import (
    write_bounds_csv,
    write_distribution_csv,
    write_hitting_csv,
    write_json,
    write_moment_csv,
    write_scaling_csv,
    write_slln_csv,
    write_summary_json,
    write_trajectories_csv,
    write_walks_csv,
)
from .weights import Family, WeightProfile, classify_recurrence, parse_family

logger = logging.getLogger(__name__)

VERIFY_REL_TOL = 1e-9
_VERIFY_MAX_X = 2000


@dataclass
class CommandResult:
    failure: Optional[str] = None
    outputs: Dict[str, Path] = field(default_factory=dict)
    config_echo: Dict[str, Any] = field(default_factory=dict)


def resolve_profile(config: Config, args: argparse.Namespace) -> WeightProfile:
    """Profile from the config file's ``profile`` object, overridden by flags."""
    data = dict(config.profile or {})
    for key in ("family", "alpha", "beta", "delta"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if "alpha" not in data:
        raise ConfigError("required", field="alpha")
    try:
        family = parse_family(data.get("family", Family.LOG_POLY))
    except (ValueError, AttributeError) as e:
        raise ConfigError(str(e), field="family")
    if family is Family.LOG_POLY and "beta" not in data:
        raise ConfigError("required for the log-power family", field="beta")
    data["family"] = family
    try:
        return WeightProfile(**data)
    except ValidationError as e:
        raise validation_to_config_error(e)


class CommandProcessor:
    """Runs one parsed subcommand and reports the files it wrote."""

    def __init__(self, config: Config, io: InputOutput, name: Optional[str] = None):
        self.config = config
        self.io = io
        self.name = name

        self.commands: Dict[str, Callable[[argparse.Namespace], CommandResult]] = {
            "classify": self.classify_command,
            "weights": self.weights_command,
            "resistance": self.resistance_command,
            "moments": self.moments_command,
            "oracle": self.oracle_command,
            "simulate": self.simulate_command,
            "environment": self.environment_command,
            "experiment": self.experiment_command,
        }

    def run(self, command: str, args: argparse.Namespace) -> CommandResult:
        if command not in self.commands:
            raise ConfigError(f"unknown command {command!r}", field="command")
        return self.commands[command](args)

    def output_path(self, stem: str, kind: str) -> Path:
        return Path(self.config.output_dir) / f"{self.name or stem}.{kind}"

    # -- profile-level commands ------------------------------------------

    def classify_command(self, args: argparse.Namespace) -> CommandResult:
        profile = resolve_profile(self.config, args)
        verdict = classify_recurrence(profile, args.truncation)
        self.io.display_line(verdict.verdict.value)
        logger.info("partial sum of 1/w0 up to %d: %.6g", verdict.truncation, verdict.phi0_partial)
        path = write_json(
            self.output_path("classify", "json"),
            {"profile": profile.to_json(), **verdict.model_dump(mode="json")},
        )
        return CommandResult(outputs={"classification": path}, config_echo={"profile": profile.to_json()})

    def weights_command(self, args: argparse.Namespace) -> CommandResult:
        profile = resolve_profile(self.config, args)
        w = WeightSequence.from_profile(profile, args.x_max)
        path = w.to_csv(self.output_path("weights", "csv"))
        shown = w.weights[: min(w.x_max + 1, 10)]
        self.io.display_table("w0(x)", ["x", "w0"], [(x, float(v)) for x, v in enumerate(shown)])
        return CommandResult(outputs={"weights": path}, config_echo={"profile": profile.to_json(), "x_max": args.x_max})

    def resistance_command(self, args: argparse.Namespace) -> CommandResult:
        echo: Dict[str, Any] = {"x_max": args.x_max, "z_upper": args.z_upper}
        if args.weights_csv:
            w = WeightSequence.from_csv(args.weights_csv)
            echo["weights_csv"] = str(args.weights_csv)
        else:
            profile = resolve_profile(self.config, args)
            w = WeightSequence.from_profile(profile, args.x_max)
            echo["profile"] = profile.to_json()
        p = build_resistance_profile(w)
        report = check_bounds(p, z_upper=args.z_upper)
        outputs = {
            "resistance": p.to_csv(self.output_path("resistance", "csv")),
            "bounds": write_bounds_csv(report, self.output_path("resistance", "bounds.csv")),
        }
        self.io.display_table(
            "Hitting-time bounds",
            ["bound", "x", "relative slack", "holds"],
            [(c.bound.value, c.x, c.relative_slack, c.holds) for c in report.checks],
        )
        ok = report.ok
        if args.verify:
            ok = self._verify_resistance(w, p) and ok
        failure = None if ok else "resistance bound or cross-check failed"
        return CommandResult(failure=failure, outputs=outputs, config_echo=echo)

    def _verify_resistance(self, w: WeightSequence, p) -> bool:
        """Compare the prefix-sum T and gamma with their direct evaluations."""
        top = min(w.x_max + 1, _VERIFY_MAX_X)
        xs = sorted({top} | {2**k for k in range(top.bit_length()) if 2**k <= top})
        worst_t = max(abs(p.t[x] - hitting_time_double_sum(w, x)) / p.t[x] for x in xs)
        direct = gamma_by_ratios(w)
        worst_gamma = float(np.max(np.abs(direct - p.gamma) / p.gamma))
        self.io.display_line(f"max relative error: T {worst_t:.3g}, gamma {worst_gamma:.3g}")
        return worst_t <= VERIFY_REL_TOL and worst_gamma <= VERIFY_REL_TOL

    def moments_command(self, args: argparse.Namespace) -> CommandResult:
        profile = resolve_profile(self.config, args)
        table = moment_table(profile, args.xs, args.epsilon)
        path = write_moment_csv(table, self.output_path("moments", "csv"))
        self.io.display_table(
            "Moments of S_x",
            ["x", "E[S_x]", "V[S_x]", "mean curve", "variance curve"],
            [(r.x, r.mean_s, r.var_s, r.predictor_mean, r.predictor_var) for r in table.rows()],
        )
        return CommandResult(
            outputs={"moments": path},
            config_echo={"profile": profile.to_json(), "xs": list(args.xs), "epsilon": args.epsilon},
        )

    def oracle_command(self, args: argparse.Namespace) -> CommandResult:
        profiles = list(DEFAULT_GRID) if args.grid == "default" else [resolve_profile(self.config, args)]
        report = run_oracle(profiles, max_len=args.max_len)
        path = report.to_csv(self.output_path("oracle", "csv"))
        self._show_oracle(report)
        return CommandResult(
            failure=None if report.ok else "path laws disagree",
            outputs={"oracle": path},
            config_echo={"grid": args.grid, "max_len": args.max_len, "profiles": [p.to_json() for p in profiles]},
        )

    def _show_oracle(self, report: OracleReport) -> None:
        self.io.display_table(
            "Path-law equivalence",
            ["family", "alpha", "beta", "delta", "paths", "max rel error", "normalization", "passed"],
            [
                (r.profile.family.value, r.profile.alpha, r.profile.beta, r.profile.delta,
                 r.n_paths, r.max_rel_error, r.normalization_error, r.passed)
                for r in report.rows
            ],
        )

    # -- stochastic commands ----------------------------------------------

    def simulate_command(self, args: argparse.Namespace) -> CommandResult:
        profile = resolve_profile(self.config, args)
        checkpoints = tuple(args.checkpoints or geometric_checkpoints(args.steps))
        jobs = [
            ReplicaJob(profile, args.steps, checkpoints, self.config.seed, r, hit_levels=tuple(args.levels))
            for r in range(args.replicas)
        ]
        walks = [stats for _, stats, _ in run_replicas(jobs, self.config.threads)]
        outputs = {
            "walks": write_walks_csv(walks, self.output_path("simulate", "csv")),
            "summary": write_json(
                self.output_path("simulate", "json"),
                {"walks": [w.model_dump(mode="json") for w in walks]},
            ),
        }
        self.io.display_table(
            "Walks",
            ["replica", "steps", "max", "final", "returns to 0"],
            [(k, w.n_steps, w.max_position, w.final_position, w.returns_to_origin) for k, w in enumerate(walks)],
        )
        if args.exact is not None:
            dist = distribution_of_position(profile, args.exact)
            outputs["distribution"] = write_distribution_csv(dist, self.output_path("simulate", "distribution.csv"))
        echo = {
            "profile": profile.to_json(),
            "steps": args.steps,
            "replicas": args.replicas,
            "checkpoints": list(checkpoints),
            "levels": list(args.levels),
            "exact": args.exact,
        }
        return CommandResult(outputs=outputs, config_echo=echo)

    def environment_command(self, args: argparse.Namespace) -> CommandResult:
        profile = resolve_profile(self.config, args)
        echo: Dict[str, Any] = {"profile": profile.to_json()}
        if args.replay:
            env = Environment.from_csv(args.replay, profile)
            echo["replay"] = str(args.replay)
        else:
            env_seed = self.config.seed if args.env_seed is None else args.env_seed
            env = sample_environment(profile, args.x_max, env_seed)
            echo.update(x_max=args.x_max, env_seed=env_seed)
        outputs = {"environment": env.to_csv(self.output_path("environment", "csv"))}
        self.io.display_line(f"S_{env.x_max} = {env.s(env.x_max):.17g}")
        if args.s_x is not None:
            stats = s_statistics(profile, args.s_x, args.n_envs, self.config.seed)
            outputs["s_statistics"] = write_summary_json(
                stats, self.output_path("environment", "s_statistics.json")
            )
            self.io.display_table(
                f"S_{args.s_x} over {args.n_envs} environment(s)",
                ["sample mean", "E[S_x]", "z (mean)", "sample var", "V[S_x]", "z (var)"],
                [(stats.sample_mean, stats.mean_s, stats.mean_z, stats.sample_var, stats.var_s, stats.var_z)],
            )
            echo.update(s_x=args.s_x, n_envs=args.n_envs)
        return CommandResult(outputs=outputs, config_echo=echo)

    def experiment_command(self, args: argparse.Namespace) -> CommandResult:
        exp = self.experiment_config(args)
        self.name = self.name or exp.mode.value
        report = run_experiment(exp, self.config.threads)
        outputs: Dict[str, Path] = {}
        failure: Optional[str] = None
        if isinstance(report, ScalingReport):
            outputs["report"] = write_scaling_csv(report, self.output_path("experiment", "csv"))
            outputs["trajectories"] = write_trajectories_csv(report, self.output_path("experiment", "trajectories.csv"))
            self.io.display_table(
                f"{exp.mode.value} ({report.case})",
                ["n", "median M_n", "predictor", "lower", "upper", "median ratio", "in envelope"],
                [
                    (r.n, r.quantiles["0.5"], r.predictor, r.lower, r.upper, r.median_ratio, r.in_envelope)
                    for r in report.rows
                ],
            )
            if args.strict and report.final_in_band is False:
                failure = "final median ratio outside the band"
        elif isinstance(report, HittingReport):
            outputs["report"] = write_hitting_csv(report, self.output_path("experiment", "csv"))
            self.io.display_table(
                "Hitting times",
                ["x", "T(x)", "MC mean", "MC se", "z", "censored"],
                [(r.x, r.t, r.mc_mean, r.mc_se, r.z_score, r.n_censored) for r in report.rows],
            )
            if args.strict and any(r.z_score is not None and abs(r.z_score) > 3 for r in report.rows):
                failure = "a hitting-time z-score exceeds 3"
        elif isinstance(report, SllnReport):
            outputs["report"] = write_slln_csv(report, self.output_path("experiment", "csv"))
            self.io.display_table(
                f"S_x laws ({report.case})",
                ["x", "E[S_x]", "S_x/E[S_x]", "normalised", "limit", "regime ratio"],
                [(r.x, r.mean_s, r.slln_ratio, r.normalised, r.limit, r.regime_ratio) for r in report.rows],
            )
        else:
            outputs["report"] = report.to_csv(self.output_path("experiment", "csv"))
            self._show_oracle(report)
            failure = None if report.ok else "path laws disagree"
        outputs["summary"] = write_summary_json(report, self.output_path("experiment", "json"))
        return CommandResult(failure=failure, outputs=outputs, config_echo=exp.model_dump(mode="json"))

    def experiment_config(self, args: argparse.Namespace) -> ExperimentConfig:
        """File ``experiment`` object, overridden by flags; profile and seed from the run config."""
        data = dict(self.config.experiment or {})
        data.pop("profile", None)
        flags = {
            "mode": args.mode,
            "n_steps": args.steps,
            "n_replicas": args.replicas,
            "checkpoints": args.checkpoints,
            "epsilon": args.epsilon,
            "band": args.band,
            "quenched": True if args.quenched else None,
            "levels": args.levels,
            "n_walks": args.n_walks,
            "horizon": args.horizon,
            "environment_seed": args.env_seed,
            "xs": args.xs,
            "n_envs": args.n_envs,
            "max_len": args.max_len,
        }
        data.update({k: v for k, v in flags.items() if v is not None})
        if "mode" not in data:
            raise ConfigError("required", field="mode")
        data["profile"] = resolve_profile(self.config, args)
        data["master_seed"] = self.config.seed
        try:
            return ExperimentConfig(**data)
        except ValidationError as e:
            raise validation_to_config_error(e, "experiment")


def mode_names() -> List[str]:
    return [m.value for m in Mode]
