"""Ensemble experiments: running-maximum scaling, hitting times and S_x laws.

Every experiment is a pure function of its ``ExperimentConfig``. Replicas draw
from streams keyed by (master_seed, replica), so reports do not depend on the
number of worker processes.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .environment import (
    BLOCK_SIZE,
    quenched_step_weights,
    sample_environment,
    sample_hitting_times,
    sample_s_values,
    simulate_in_environment,
)
from .exceptions import IncompatibleConfigError, NoRegimeError
from .lerrw import WalkStats, simulate
from .oracle import DEFAULT_MAX_LEN, OracleReport, run_oracle
from .resistance import WeightSequence, build_resistance_profile
from .specialfn import Target, mean_S, regime_predictor, var_S
from .streams import ENVIRONMENT_SEED, derive_seed, replica_stream
from .weights import Family, WeightProfile

logger = logging.getLogger(__name__)

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


class Mode(str, Enum):
    REINFORCED_SCALING = "reinforced-scaling"
    UNREINFORCED_SCALING = "unreinforced-scaling"
    ALPHA1_SCALING = "alpha1-scaling"
    SLLN_CHECK = "slln-check"
    HITTING_TIME = "hitting-time"
    ORACLE_SUITE = "oracle-suite"


class ExperimentConfig(BaseModel):
    """Everything that determines an experiment's output."""

    model_config = ConfigDict(frozen=True)

    profile: WeightProfile
    mode: Mode
    n_steps: int = Field(default=10**6, ge=0, description="Walk length for scaling runs")
    n_replicas: int = Field(default=20, ge=1, description="Independent trajectories")
    master_seed: int = Field(default=0, ge=0)
    checkpoints: Optional[List[int]] = Field(
        default=None, description="Steps at which M_n is recorded; decades up to n_steps when omitted"
    )
    epsilon: float = Field(default=0.3, gt=0.0, lt=1.0, description="Width parameter of the envelope statements")
    band: Tuple[float, float] = Field(
        default=(1.0 / 3.0, 3.0), description="Accepted range of the final median ratio"
    )
    quenched: bool = Field(default=False, description="Walk in a sampled environment per replica")
    levels: List[int] = Field(default_factory=lambda: [3, 5, 8], description="Hitting-time targets")
    n_walks: int = Field(default=10**5, ge=2, description="Monte Carlo walks per hitting level")
    horizon: Optional[int] = Field(default=None, ge=1, description="Censoring horizon for hitting times")
    environment_seed: Optional[int] = Field(default=None, description="Frozen environment for quenched hitting times")
    xs: List[int] = Field(default_factory=lambda: [10**3, 10**4, 10**5, 10**6], description="Sites for S_x checks")
    n_envs: int = Field(default=1, ge=1, description="Environments per S_x check")
    max_len: int = Field(default=DEFAULT_MAX_LEN, ge=0, le=22, description="Oracle path length")

    @model_validator(mode="after")
    def _check_ranges(self) -> "ExperimentConfig":
        lo, hi = self.band
        if not 0 < lo < hi:
            raise ValueError("band must satisfy 0 < low < high")
        if self.checkpoints is not None and any(c < 1 for c in self.checkpoints):
            raise ValueError("checkpoints must be >= 1")
        if any(v < 1 for v in self.levels) or any(x < 1 for x in self.xs):
            raise ValueError("levels and xs must be >= 1")
        return self


def decade_checkpoints(n_steps: int) -> List[int]:
    """10, 100, ... up to ``n_steps``, plus ``n_steps``; [1] for an empty run."""
    if n_steps < 1:
        return [1]
    points = []
    k = 10
    while k <= n_steps:
        points.append(k)
        k *= 10
    if not points or points[-1] != n_steps:
        points.append(n_steps)
    return points


def _checkpoints(config: ExperimentConfig) -> List[int]:
    if config.n_steps == 0:
        return [1]
    if config.checkpoints is None:
        return decade_checkpoints(config.n_steps)
    return sorted(set(c for c in config.checkpoints if c <= config.n_steps)) or [config.n_steps]


# ---------------------------------------------------------------------------
# Replica execution


@dataclass(frozen=True)
class ReplicaJob:
    profile: WeightProfile
    n_steps: int
    checkpoints: Tuple[int, ...]
    master_seed: int
    replica: int
    quenched: bool = False
    x_max: int = 0
    hit_levels: Tuple[int, ...] = ()


def _run_replica(job: ReplicaJob) -> Tuple[int, WalkStats, int]:
    rng = replica_stream(job.master_seed, job.replica)
    if not job.quenched:
        return job.replica, simulate(job.profile, job.n_steps, job.checkpoints, job.hit_levels, rng=rng), 0
    env_seed = derive_seed(job.master_seed, ENVIRONMENT_SEED, job.replica)
    env = sample_environment(job.profile, job.x_max, env_seed)
    stats, env = simulate_in_environment(env, job.n_steps, job.checkpoints, job.hit_levels, rng=rng)
    return job.replica, stats, env.x_max


def run_replicas(jobs: Sequence[ReplicaJob], threads: int = 1) -> List[Tuple[int, WalkStats, int]]:
    """Run the jobs, in a process pool when ``threads`` > 1; results ordered by replica."""
    if threads <= 1 or len(jobs) <= 1:
        results = [_run_replica(j) for j in jobs]
    else:
        results = []
        with ProcessPoolExecutor(max_workers=threads) as ex:
            futures = {ex.submit(_run_replica, j): j for j in jobs}
            for f in as_completed(futures):
                results.append(f.result())
                logger.debug("replica %d finished", results[-1][0])
    return sorted(results, key=lambda r: r[0])


# ---------------------------------------------------------------------------
# Scaling reports


class ScalingRow(BaseModel):
    n: int
    predictor: Optional[float] = Field(default=None, description="Scale the maxima are divided by")
    lower: Optional[float] = None
    upper: Optional[float] = None
    quantiles: Dict[str, float] = Field(description="Quantiles of M_n over replicas")
    median_ratio: Optional[float] = None
    in_envelope: Optional[int] = Field(default=None, description="Replicas with lower <= M_n <= upper")


class ScalingReport(BaseModel):
    config: ExperimentConfig
    case: str = Field(description="Case row whose law is being checked")
    rows: List[ScalingRow]
    maxima: List[List[int]] = Field(description="M_n per replica (outer) and checkpoint (inner)")
    positions: List[List[int]] = Field(description="X_n per replica and checkpoint")
    verdict_bands: Dict[int, Tuple[float, float]] = Field(default_factory=dict)
    final_in_band: Optional[bool] = None
    envelope_fraction: Optional[float] = None
    grown_environments: int = Field(default=0, description="Quenched replicas whose environment outgrew 4x the scale")
    notes: List[str] = Field(default_factory=list)

    @property
    def final(self) -> ScalingRow:
        return self.rows[-1]


def _at(fn: Callable[[float], object], n: int):
    """Curve value at n, or None where ln n or ln ln n degenerates."""
    if n < 2:
        return None
    try:
        return fn(float(n))
    except (ValueError, ArithmeticError):
        return None


def _quantiles(values: np.ndarray) -> Dict[str, float]:
    return {f"{q:g}": float(np.quantile(values, q)) for q in QUANTILES}


def _simulate_ensemble(config: ExperimentConfig, scale_at_end: Optional[float], threads: int):
    ns = _checkpoints(config)
    steps = max(config.n_steps, 1)
    x_max = 0
    if config.quenched:
        guess = 4.0 * scale_at_end if scale_at_end else BLOCK_SIZE
        x_max = int(min(steps + 1, max(BLOCK_SIZE, math.ceil(guess))))
    jobs = [
        ReplicaJob(config.profile, steps, tuple(ns), config.master_seed, r, config.quenched, x_max)
        for r in range(config.n_replicas)
    ]
    logger.info(
        "%s: %d replicas x %d steps (seed %d, %d worker(s))",
        config.mode.value, config.n_replicas, steps, config.master_seed, threads,
    )
    results = run_replicas(jobs, threads)
    maxima = np.array([[c.max_position for c in stats.running_max] for _, stats, _ in results], dtype=np.int64)
    positions = [[c.position for c in stats.running_max] for _, stats, _ in results]
    grown = sum(1 for _, _, final_x in results if config.quenched and final_x > x_max)
    if grown:
        logger.info("%d environment(s) grown beyond the initial x_max=%d", grown, x_max)
    return ns, maxima, positions, grown


def _require_mode(config: ExperimentConfig, mode: Mode) -> None:
    if config.mode is not mode:
        raise IncompatibleConfigError(f"expected mode {mode.value}, got {config.mode.value}", field="mode")


def run_reinforced_scaling(config: ExperimentConfig, threads: int = 1) -> ScalingReport:
    """M_n against (K ln n)^{1/(1-alpha)} for alpha < 1."""
    _require_mode(config, Mode.REINFORCED_SCALING)
    profile = config.profile
    if profile.delta <= 0:
        raise IncompatibleConfigError("reinforced scaling needs delta > 0", field="delta")
    if profile.alpha >= 1:
        raise IncompatibleConfigError("reinforced scaling needs alpha < 1; use alpha1-scaling", field="alpha")
    try:
        pred = regime_predictor(profile, Target.LIMSUP_SCALE, config.epsilon)
    except NoRegimeError as e:
        raise IncompatibleConfigError(str(e), field="beta") from e

    ns, maxima, positions, grown = _simulate_ensemble(config, _at(pred, max(config.n_steps, 1)), threads)
    lo, hi = config.band
    rows, bands = [], {}
    for j, n in enumerate(ns):
        scale = _at(pred, n)
        col = maxima[:, j]
        ratio = float(np.median(col)) / scale if scale else None
        if scale:
            bands[n] = (lo * scale, hi * scale)
        rows.append(
            ScalingRow(
                n=n,
                predictor=scale,
                lower=lo * scale if scale else None,
                upper=hi * scale if scale else None,
                quantiles=_quantiles(col),
                median_ratio=ratio,
            )
        )
    final = rows[-1].median_ratio
    return ScalingReport(
        config=config,
        case=pred.regime.value,
        rows=rows,
        maxima=maxima.tolist(),
        positions=positions,
        verdict_bands=bands,
        final_in_band=None if final is None else lo <= final <= hi,
        grown_environments=grown,
    )


def run_alpha1_scaling(config: ExperimentConfig, threads: int = 1) -> ScalingReport:
    """M_n between the lower and upper envelopes of the alpha = 1 laws."""
    _require_mode(config, Mode.ALPHA1_SCALING)
    profile = config.profile
    if profile.alpha != 1:
        raise IncompatibleConfigError("alpha1 scaling needs alpha = 1", field="alpha")
    if profile.delta <= 0:
        raise IncompatibleConfigError("alpha1 scaling needs delta > 0", field="delta")
    try:
        pred = regime_predictor(profile, Target.LIMSUP_SCALE, config.epsilon)
    except NoRegimeError as e:
        raise IncompatibleConfigError(str(e), field="beta") from e

    end = _at(pred, max(config.n_steps, 1))
    ns, maxima, positions, grown = _simulate_ensemble(config, end[1] if end else None, threads)
    rows, bands = [], {}
    for j, n in enumerate(ns):
        env = _at(pred, n)
        col = maxima[:, j]
        lower, upper = env if env else (None, None)
        inside = None
        if env:
            bands[n] = (lower, upper)
            inside = int(np.count_nonzero((col >= lower) & (col <= upper)))
        rows.append(ScalingRow(n=n, lower=lower, upper=upper, quantiles=_quantiles(col), in_envelope=inside))
    final = rows[-1]
    median = final.quantiles["0.5"]
    return ScalingReport(
        config=config,
        case=pred.regime.value,
        rows=rows,
        maxima=maxima.tolist(),
        positions=positions,
        verdict_bands=bands,
        final_in_band=None if final.lower is None else final.lower <= median <= final.upper,
        envelope_fraction=None if final.in_envelope is None else final.in_envelope / config.n_replicas,
        grown_environments=grown,
        notes=["envelope constants are not sharp at alpha = 1; x_max grows lazily in quenched runs"],
    )


Envelope = Callable[[float], float]


def unreinforced_envelopes(profile: WeightProfile, epsilon: float) -> Tuple[str, Envelope, Envelope]:
    """(case, lower, upper) for the fixed-weight walk (delta = 0).

    ``lower(n)`` is a scale the limsup of X_n reaches, ``upper(n)`` one that X_n
    eventually stays below.
    """
    a, b, eps = profile.alpha, profile.beta, epsilon

    def upper(power: float) -> Envelope:
        return lambda n: (n * math.log(n) ** (1 + eps)) ** power

    def lower(power: float) -> Envelope:
        return lambda n: n**power

    if profile.family is Family.TAKEI_POLY:
        if a < -1:
            return "takei:alpha<-1", lower(1 / (1 - a)), upper(1 / (1 - a))
        if a == -1:
            return "takei:alpha=-1", lower((1 - eps) / 2), upper(0.5)
        if a <= 1:
            return "takei:-1<alpha<=1", lower(0.5), upper(0.5)
        raise IncompatibleConfigError(f"alpha={a} > 1 is transient; no envelope", field="alpha")
    if a < -1:
        if 1 - a - eps * abs(b) <= 0:
            raise IncompatibleConfigError("epsilon * |beta| must be below 1 - alpha for this case", field="epsilon")
        return "alpha<-1", lower(1 / (1 - a + eps * abs(b))), upper(1 / (1 - a - eps * abs(b)))
    if a == -1:
        if b < -1:
            if 2 + eps * b <= 0:
                raise IncompatibleConfigError("epsilon * |beta| must be below 2 for this case", field="epsilon")
            return "alpha=-1,beta<-1", lower(1 / (2 - eps * b)), upper(1 / (2 + eps * b))
        return "alpha=-1,beta>=-1", lower((1 - eps) / 2), upper(0.5)
    if a <= 0:
        return "-1<alpha<=0", lower(0.5), upper(0.5)
    if a < 1 or (a == 1 and b <= 1):
        if eps * abs(b) >= 1:
            raise IncompatibleConfigError("epsilon * |beta| must be below 1 for this case", field="epsilon")
        return (
            "0<alpha<1 or alpha=1,beta<=1",
            lower(1 / (2 * (1 + eps * abs(b)))),
            upper(1 / (2 * (1 - eps * abs(b)))),
        )
    raise IncompatibleConfigError(f"alpha={a}, beta={b} is transient; no envelope", field="alpha")


def run_unreinforced_scaling(config: ExperimentConfig, threads: int = 1) -> ScalingReport:
    """Fixed-weight walk: M_n / lower(n) in the configured band and M_n <= upper(n)."""
    _require_mode(config, Mode.UNREINFORCED_SCALING)
    profile = config.profile
    if profile.delta != 0:
        raise IncompatibleConfigError("unreinforced scaling needs delta = 0", field="delta")
    if config.quenched:
        logger.info("delta = 0: the environment is the deterministic weight sequence")
        config = config.model_copy(update={"quenched": False})
    case, lower, upper = unreinforced_envelopes(profile, config.epsilon)

    ns, maxima, positions, _ = _simulate_ensemble(config, None, threads)
    lo, hi = config.band
    rows, bands = [], {}
    for j, n in enumerate(ns):
        scale, top = _at(lower, n), _at(upper, n)
        col = maxima[:, j]
        if scale:
            bands[n] = (lo * scale, hi * scale)
        rows.append(
            ScalingRow(
                n=n,
                predictor=scale,
                lower=scale,
                upper=top,
                quantiles=_quantiles(col),
                median_ratio=float(np.median(col)) / scale if scale else None,
                in_envelope=int(np.count_nonzero(col <= top)) if top else None,
            )
        )
    final = rows[-1]
    return ScalingReport(
        config=config,
        case=case,
        rows=rows,
        maxima=maxima.tolist(),
        positions=positions,
        verdict_bands=bands,
        final_in_band=None if final.median_ratio is None else lo <= final.median_ratio <= hi,
        envelope_fraction=None if final.in_envelope is None else final.in_envelope / config.n_replicas,
    )


# ---------------------------------------------------------------------------
# Hitting times


class HittingRow(BaseModel):
    x: int
    t: float = Field(description="E_0[tau_x] from the resistance profile")
    mc_mean: Optional[float] = None
    mc_se: Optional[float] = None
    z_score: Optional[float] = Field(default=None, description="None for censored rows")
    n_censored: int = 0

    @property
    def censored(self) -> bool:
        return self.n_censored > 0


class HittingReport(BaseModel):
    config: ExperimentConfig
    environment_seed: Optional[int] = None
    rows: List[HittingRow]


def hitting_weights(config: ExperimentConfig) -> Tuple[WeightSequence, Optional[int]]:
    """Fixed weights for delta = 0, or the quenched weights of a frozen environment."""
    top = max(config.levels)
    profile = config.profile
    if profile.delta == 0:
        return WeightSequence.from_profile(profile, top), None
    if config.environment_seed is None:
        raise IncompatibleConfigError(
            "hitting times with delta > 0 need a frozen environment (environment_seed)", field="environment_seed"
        )
    env = sample_environment(profile, top, config.environment_seed)
    return quenched_step_weights(env), config.environment_seed


def run_hitting_time_suite(config: ExperimentConfig, weights: Optional[WeightSequence] = None) -> HittingReport:
    """Monte Carlo tau_x against T(x) for each configured level."""
    _require_mode(config, Mode.HITTING_TIME)
    env_seed = None
    if weights is None:
        weights, env_seed = hitting_weights(config)
    if max(config.levels) > weights.x_max + 1:
        raise IncompatibleConfigError(f"levels exceed the weight sequence (x_max={weights.x_max})", field="levels")
    profile = build_resistance_profile(weights)
    rows = []
    for x in sorted(set(config.levels)):
        t = float(profile.t[x])
        horizon = config.horizon or int(max(1000, math.ceil(100 * t)))
        sample = sample_hitting_times(weights, x, config.n_walks, config.master_seed, horizon)
        observed = sample.observed.astype(np.float64)
        n_censored = int(sample.censored.sum())
        row = HittingRow(x=x, t=t, n_censored=n_censored)
        if observed.size >= 2:
            row.mc_mean = float(observed.mean())
            row.mc_se = float(observed.std(ddof=1) / math.sqrt(observed.size))
            if n_censored == 0 and row.mc_se > 0:
                row.z_score = (row.mc_mean - t) / row.mc_se
        if n_censored:
            logger.info("level %d: %d censored walks, excluded from the z-score", x, n_censored)
        rows.append(row)
    return HittingReport(config=config, environment_seed=env_seed, rows=rows)


# ---------------------------------------------------------------------------
# Laws of large numbers for S_x


class SllnRow(BaseModel):
    x: int
    mean_s: float
    var_s: float
    sample_mean: float
    slln_ratio: float = Field(description="median over environments of S_x / E[S_x]")
    normalised: Optional[float] = Field(default=None, description="median of S_x / normaliser(x)")
    limit: Optional[float] = Field(default=None, description="almost-sure limit of S_x / normaliser(x)")
    regime_ratio: Optional[float] = Field(default=None, description="normalised / limit")
    band_lower_ratio: Optional[float] = Field(default=None, description="median S_x / lower band curve")
    band_upper_ratio: Optional[float] = Field(default=None, description="median S_x / upper band curve")


class SllnReport(BaseModel):
    config: ExperimentConfig
    case: str
    rows: List[SllnRow]


def slln_case(profile: WeightProfile, epsilon: float) -> Tuple[str, Optional[Envelope], Optional[float]]:
    """(case, normaliser, limit) for the almost-sure behaviour of S_x.

    The alpha < 0 rows are bands; their normaliser is None and the band is read
    from the mean predictor.
    """
    a, b, d = profile.alpha, profile.beta, profile.delta
    if a < 0 and profile.family is Family.LOG_POLY:
        return "alpha<0", None, None
    if a < 1:
        pred = regime_predictor(profile, Target.MEAN_S, epsilon)
        return "0<=alpha<1", pred.predictor, 1.0
    if a == 1:
        if profile.family is Family.LOG_POLY and b < 0:
            return "alpha=1,beta<0", (lambda x: math.log(x) ** (1 - b)), d / (1 - b)
        if profile.family is Family.LOG_POLY and 0 < b <= 1:
            return "alpha=1,0<beta<=1", math.log, -1.0
        if profile.family is Family.TAKEI_POLY or b == 0:
            return "alpha=1,power", math.log, d - 1
    raise IncompatibleConfigError(f"no law of large numbers for alpha={a}, beta={b}", field="alpha")


def run_slln_check(config: ExperimentConfig) -> SllnReport:
    _require_mode(config, Mode.SLLN_CHECK)
    profile = config.profile
    if profile.delta <= 0:
        raise IncompatibleConfigError("S_x checks need delta > 0", field="delta")
    case, normaliser, limit = slln_case(profile, config.epsilon)
    band = regime_predictor(profile, Target.MEAN_S, config.epsilon) if normaliser is None else None
    xs = sorted(set(config.xs))
    logger.info("slln-check: %d environment(s) up to x=%d (seed %d)", config.n_envs, xs[-1], config.master_seed)
    samples = sample_s_values(profile, xs, config.n_envs, config.master_seed)
    rows = []
    for j, x in enumerate(xs):
        s = samples[:, j]
        med = float(np.median(s))
        mean_s = mean_S(profile, x)
        row = SllnRow(
            x=x,
            mean_s=mean_s,
            var_s=var_S(profile, x),
            sample_mean=float(s.mean()),
            slln_ratio=float(np.median(s / mean_s)),
            limit=limit,
        )
        if normaliser is not None:
            scale = _at(normaliser, x)
            if scale:
                row.normalised = med / scale
                if limit:
                    row.regime_ratio = row.normalised / limit
        elif band is not None:
            curve = _at(band.predictor, x)
            if curve:
                row.band_lower_ratio, row.band_upper_ratio = med / curve[0], med / curve[1]
        rows.append(row)
    return SllnReport(config=config, case=case, rows=rows)


# ---------------------------------------------------------------------------
# Dispatch


Report = Union[ScalingReport, HittingReport, SllnReport, OracleReport]


def run_oracle_suite(config: ExperimentConfig) -> OracleReport:
    _require_mode(config, Mode.ORACLE_SUITE)
    if config.profile.delta <= 0:
        raise IncompatibleConfigError("the path-law oracle needs delta > 0", field="delta")
    return run_oracle([config.profile], max_len=config.max_len)


def run_experiment(config: ExperimentConfig, threads: int = 1) -> Report:
    """Run ``config`` with the handler for its mode."""
    handlers: Dict[Mode, Callable[[], Report]] = {
        Mode.REINFORCED_SCALING: lambda: run_reinforced_scaling(config, threads),
        Mode.ALPHA1_SCALING: lambda: run_alpha1_scaling(config, threads),
        Mode.UNREINFORCED_SCALING: lambda: run_unreinforced_scaling(config, threads),
        Mode.HITTING_TIME: lambda: run_hitting_time_suite(config),
        Mode.SLLN_CHECK: lambda: run_slln_check(config),
        Mode.ORACLE_SUITE: lambda: run_oracle_suite(config),
    }
    return handlers[config.mode]()
