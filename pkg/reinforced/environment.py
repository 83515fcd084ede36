"""Random-environment picture of the reinforced walk.

Site i >= 1 carries p_i ~ Beta(w0(i)/2d, (w0(i-1)+d)/2d), independently, and
p_0 = 1. A walk that steps right from i with probability p_i, averaged over the
environment, has the same path law as the reinforced walk.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .exceptions import DomainError, InvalidPathError
from .lerrw import Checkpoint, RandomSource, WalkStats, as_generator, geometric_checkpoints
from .resistance import WeightSequence
from .specialfn import log_beta, mean_S, var_S
from .streams import ENVIRONMENT_BLOCK, HITTING, MOMENTS, stream
from .weights import WeightProfile

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1024
_MOMENT_CELLS = 1 << 21


def _require_reinforced(profile: WeightProfile) -> None:
    if profile.delta <= 0:
        raise DomainError("a Beta environment needs delta > 0")


def beta_shapes(profile: WeightProfile, sites: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(A_i, B_i) = (w0(i)/2d, (w0(i-1)+d)/2d) for sites i >= 1."""
    _require_reinforced(profile)
    sites = np.asarray(sites, dtype=np.int64)
    if sites.size and sites.min() < 1:
        raise ValueError("Beta shapes are defined for sites i >= 1")
    two_delta = 2.0 * profile.delta
    a = np.exp(profile.log_weights(sites)) / two_delta
    b = (np.exp(profile.log_weights(sites - 1)) + profile.delta) / two_delta
    return a, b


def log_gamma_variates(rng: np.random.Generator, shape: np.ndarray, size=None) -> np.ndarray:
    """ln G with G ~ Gamma(shape, 1), exact for every positive shape.

    Shapes below one use G_a = G_{a+1} U^{1/a}, kept in log space so that tiny
    shapes do not underflow. One gamma and one uniform are drawn per cell
    whatever the shape, so the stream consumption is fixed.
    """
    shape = np.asarray(shape, dtype=np.float64)
    if size is not None:
        shape = np.broadcast_to(shape, size)
    small = shape < 1.0
    g = rng.standard_gamma(np.where(small, shape + 1.0, shape))
    u = 1.0 - rng.random(shape.shape)  # (0, 1]
    with np.errstate(divide="ignore"):
        out = np.log(g)
    return np.where(small, out + np.log(u) / shape, out)


def _sample_block(profile: WeightProfile, seed: int, block: int) -> Tuple[np.ndarray, np.ndarray]:
    sites = np.arange(block * BLOCK_SIZE + 1, (block + 1) * BLOCK_SIZE + 1)
    a, b = beta_shapes(profile, sites)
    rng = stream(seed, ENVIRONMENT_BLOCK, block)
    lga = log_gamma_variates(rng, a)
    lgb = log_gamma_variates(rng, b)
    log_norm = np.logaddexp(lga, lgb)
    return lga - log_norm, lgb - log_norm


@dataclass(frozen=True, eq=False)
class Environment:
    """Realised p_1..p_{x_max} with ln p, ln q and S_x = ln gamma_x.

    Array index k holds site k + 1. Sampled environments are generated in
    blocks keyed by (seed, block), so ``extended`` keeps the existing prefix.
    """

    profile: WeightProfile
    log_p: np.ndarray
    log_q: np.ndarray
    seed: Optional[int] = None
    log_s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        log_p = np.asarray(self.log_p, dtype=np.float64)
        log_q = np.asarray(self.log_q, dtype=np.float64)
        if log_p.ndim != 1 or log_p.size == 0 or log_p.shape != log_q.shape:
            raise ValueError("an environment needs matching ln p and ln q arrays over sites 1..x_max")
        if not (np.all(log_p <= 0) and np.all(log_q <= 0) and np.all(np.isfinite(log_q - log_p))):
            raise ValueError("environment probabilities must lie strictly inside (0, 1)")
        log_s = np.cumsum(log_q - log_p)
        for arr in (log_p, log_q, log_s):
            arr.setflags(write=False)
        object.__setattr__(self, "log_p", log_p)
        object.__setattr__(self, "log_q", log_q)
        object.__setattr__(self, "log_s", log_s)

    @property
    def x_max(self) -> int:
        return self.log_p.size

    @property
    def p(self) -> np.ndarray:
        return np.exp(self.log_p)

    @property
    def q(self) -> np.ndarray:
        return np.exp(self.log_q)

    def s(self, x: int) -> float:
        """S_x; S_0 = 0."""
        if not 0 <= x <= self.x_max:
            raise ValueError(f"x must lie in 0..{self.x_max}, got {x}")
        return 0.0 if x == 0 else float(self.log_s[x - 1])

    def extended(self, x_max: int) -> "Environment":
        """The same environment materialised up to ``x_max`` (never shrinks)."""
        if x_max <= self.x_max:
            return self
        if self.seed is None:
            raise ValueError("an imported environment cannot be extended beyond its recorded sites")
        logger.info("extending environment (seed %d) from x_max=%d to %d", self.seed, self.x_max, x_max)
        return sample_environment(self.profile, x_max, self.seed)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["i", "p", "S"])
            for i, (lp, s) in enumerate(zip(self.log_p.tolist(), self.log_s.tolist()), start=1):
                writer.writerow([i, f"{math.exp(lp):.17g}", f"{s:.17g}"])
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], profile: WeightProfile) -> "Environment":
        """Replay an exported environment; S is recomputed from p."""
        with Path(path).open(newline="", encoding="utf-8") as f:
            rows = sorted((int(r["i"]), float(r["p"])) for r in csv.DictReader(f))
        if [i for i, _ in rows] != list(range(1, len(rows) + 1)):
            raise ValueError(f"{path}: i column must be 1, 2, 3, ... without gaps")
        p = np.array([v for _, v in rows])
        with np.errstate(divide="ignore"):
            return cls(profile=profile, log_p=np.log(p), log_q=np.log1p(-p))

    @classmethod
    def from_probabilities(cls, profile: WeightProfile, p: Sequence[float]) -> "Environment":
        p = np.asarray(p, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            return cls(profile=profile, log_p=np.log(p), log_q=np.log1p(-p))


def sample_environment(profile: WeightProfile, x_max: int, seed: int) -> Environment:
    """Independent Beta draws for sites 1..x_max, deterministic in ``seed``."""
    _require_reinforced(profile)
    if x_max < 1:
        raise ValueError(f"x_max must be >= 1, got {x_max}")
    n_blocks = (x_max + BLOCK_SIZE - 1) // BLOCK_SIZE
    parts = [_sample_block(profile, seed, k) for k in range(n_blocks)]
    log_p = np.concatenate([lp for lp, _ in parts])[:x_max]
    log_q = np.concatenate([lq for _, lq in parts])[:x_max]
    return Environment(profile=profile, log_p=log_p, log_q=log_q, seed=int(seed))


def quenched_step_weights(env: Environment) -> WeightSequence:
    """ln w(x, omega) = -S_x with w(0, omega) = 1."""
    return WeightSequence(np.concatenate([[0.0], -env.log_s]))


# ---------------------------------------------------------------------------
# Path laws


def _crossings(path: Sequence[int]) -> Optional[Tuple[Dict[int, int], Dict[int, int]]]:
    """Per-site right and left step counts; None when the path steps left from 0."""
    path = [int(v) for v in path]
    if not path or path[0] != 0:
        raise InvalidPathError("path must start at 0")
    right: Dict[int, int] = {}
    left: Dict[int, int] = {}
    for n, (a, b) in enumerate(zip(path, path[1:]), start=1):
        if abs(b - a) != 1:
            raise InvalidPathError(f"step {n} jumps from {a} to {b}")
        if b < 0:
            return None
        counts = right if b > a else left
        counts[a] = counts.get(a, 0) + 1
    return right, left


def log_annealed_path_probability(profile: WeightProfile, path: Sequence[int]) -> float:
    """ln E[prod_i p_i^{a_i} q_i^{b_i}] from the Beta moments at each visited site."""
    _require_reinforced(profile)
    counts = _crossings(path)
    if counts is None:
        return -math.inf
    right, left = counts
    terms = []
    for site in sorted(set(right) | set(left)):
        if site == 0:
            continue
        a, b = right.get(site, 0), left.get(site, 0)
        shape_a, shape_b = (float(v[0]) for v in beta_shapes(profile, np.array([site])))
        terms.append(log_beta(shape_a + a, shape_b + b) - log_beta(shape_a, shape_b))
    return math.fsum(terms)


def annealed_path_probability(profile: WeightProfile, path: Sequence[int]) -> float:
    return math.exp(log_annealed_path_probability(profile, path))


def quenched_path_probability(env: Environment, path: Sequence[int]) -> float:
    """P^omega of the path: product of p_i and q_i along its steps."""
    counts = _crossings(path)
    if counts is None:
        return 0.0
    right, left = counts
    top = max(list(right) + list(left), default=0)
    if top > env.x_max:
        raise ValueError(f"path steps from site {top} beyond the environment's x_max={env.x_max}")
    terms = [0.0]
    for site, n in right.items():
        if site:
            terms.append(n * float(env.log_p[site - 1]))
    for site, n in left.items():
        terms.append(n * float(env.log_q[site - 1]))
    return math.exp(math.fsum(terms))


# ---------------------------------------------------------------------------
# S_x statistics


class SStatistics(BaseModel):
    """Monte Carlo S_x against its closed-form mean and variance."""

    profile: WeightProfile
    x: int
    n_envs: int
    master_seed: int
    sample_mean: float
    sample_var: Optional[float] = Field(default=None, description="None for a single environment")
    mean_se: Optional[float] = None
    var_se: Optional[float] = None
    mean_s: float = Field(description="E[S_x]")
    var_s: float = Field(description="V[S_x]")
    slln_ratios: List[float] = Field(description="S_x / E[S_x] per environment")

    @property
    def mean_z(self) -> Optional[float]:
        if not self.mean_se:
            return None
        return (self.sample_mean - self.mean_s) / self.mean_se

    @property
    def var_z(self) -> Optional[float]:
        if not self.var_se:
            return None
        return (self.sample_var - self.var_s) / self.var_se


def sample_s_values(profile: WeightProfile, xs: Sequence[int], n_envs: int, master_seed: int) -> np.ndarray:
    """S_x for ``n_envs`` independent environments at every x in ``xs``; shape (n_envs, len(xs)).

    Sites are drawn in full-width chunks, so the value at a given x does not
    depend on which other x are requested.
    """
    _require_reinforced(profile)
    targets = [int(x) for x in xs]
    if not targets or min(targets) < 1 or n_envs < 1:
        raise ValueError("s statistics need x >= 1 and n_envs >= 1")
    rng = stream(master_seed, MOMENTS)
    out = np.empty((n_envs, len(targets)))
    s = np.zeros(n_envs)
    width = max(1, _MOMENT_CELLS // n_envs)
    for start in range(1, max(targets) + 1, width):
        a, b = beta_shapes(profile, np.arange(start, start + width))
        inc = log_gamma_variates(rng, b, (n_envs, width)) - log_gamma_variates(rng, a, (n_envs, width))
        for j, x in enumerate(targets):
            if start <= x < start + width:
                out[:, j] = s + inc[:, : x - start + 1].sum(axis=1)
        s += inc.sum(axis=1)
    return out


def s_statistics(profile: WeightProfile, x: int, n_envs: int, master_seed: int) -> SStatistics:
    s = sample_s_values(profile, [x], n_envs, master_seed)[:, 0]
    mean_s, var_s = mean_S(profile, x), var_S(profile, x)
    stats = dict(sample_mean=float(s.mean()))
    if n_envs > 1:
        centred = s - s.mean()
        sample_var = float(centred.var(ddof=1))
        m4 = float(np.mean(centred**4))
        stats.update(
            sample_var=sample_var,
            mean_se=math.sqrt(sample_var / n_envs),
            var_se=math.sqrt(max(m4 - sample_var**2, 0.0) / n_envs),
        )
    return SStatistics(
        profile=profile,
        x=x,
        n_envs=n_envs,
        master_seed=master_seed,
        mean_s=mean_s,
        var_s=var_s,
        slln_ratios=(s / mean_s).tolist(),
        **stats,
    )


# ---------------------------------------------------------------------------
# Walks in a fixed environment


class HittingTimes(NamedTuple):
    times: np.ndarray
    censored: np.ndarray

    @property
    def observed(self) -> np.ndarray:
        return self.times[~self.censored]


def sample_hitting_times(
    weights: WeightSequence, level: int, n_walks: int, seed: int, horizon: int
) -> HittingTimes:
    """tau_level for ``n_walks`` independent fixed-weight walks from 0, stepped together.

    Walks still short of ``level`` after ``horizon`` steps are censored.
    """
    if not 1 <= level <= weights.x_max + 1:
        raise ValueError(f"level must lie in 1..{weights.x_max + 1}, got {level}")
    if n_walks < 1 or horizon < 1:
        raise ValueError("n_walks and horizon must be >= 1")
    p = weights.step_right_probabilities()
    rng = stream(seed, HITTING, level)
    times = np.full(n_walks, horizon, dtype=np.int64)
    censored = np.ones(n_walks, dtype=bool)
    idx = np.arange(n_walks)
    pos = np.zeros(n_walks, dtype=np.int64)
    for t in range(1, horizon + 1):
        pos += np.where(rng.random(pos.size) < p[pos], 1, -1)
        hit = pos == level
        if hit.any():
            times[idx[hit]] = t
            censored[idx[hit]] = False
            keep = ~hit
            idx, pos = idx[keep], pos[keep]
            if not idx.size:
                break
    if idx.size:
        logger.info("%d of %d walks censored at horizon %d (level %d)", idx.size, n_walks, horizon, level)
    return HittingTimes(times=times, censored=censored)


def simulate_in_environment(
    env: Environment,
    n_steps: int,
    checkpoints: Optional[Sequence[int]] = None,
    hit_levels: Sequence[int] = (),
    rng: RandomSource = 0,
) -> Tuple[WalkStats, Environment]:
    """Walk ``n_steps`` in the frozen environment, growing it if the walk outruns x_max.

    Returns the statistics and the (possibly extended) environment.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    rng = as_generator(rng)
    marks = sorted(set(int(c) for c in (checkpoints if checkpoints is not None else geometric_checkpoints(n_steps))))
    marks = [c for c in marks if 1 <= c <= n_steps]
    levels = sorted(set(int(v) for v in hit_levels))
    first_hit: Dict[int, Optional[int]] = {v: (0 if v == 0 else None) for v in levels}
    pending = [v for v in levels if v > 0]

    p: List[float] = [1.0] + env.p.tolist()
    x = running_max = returns = 0
    records: List[Checkpoint] = []
    mark_iter = iter(marks)
    next_mark = next(mark_iter, None)
    done = 0
    while done < n_steps:
        for u in rng.random(min(1 << 16, n_steps - done)).tolist():
            if u < p[x]:
                x += 1
                if x > running_max:
                    running_max = x
                    if x >= len(p):
                        env = env.extended(2 * env.x_max)
                        p = [1.0] + env.p.tolist()
                    while pending and pending[0] <= x:
                        first_hit[pending.pop(0)] = done + 1
            else:
                x -= 1
                if x == 0:
                    returns += 1
            done += 1
            if next_mark is not None and done == next_mark:
                records.append(Checkpoint(n=done, max_position=running_max, position=x))
                next_mark = next(mark_iter, None)
    stats = WalkStats(
        n_steps=n_steps,
        running_max=records,
        first_hit=first_hit,
        returns_to_origin=returns,
        final_position=x,
        max_position=running_max,
    )
    return stats, env
