"""Exact equivalence of the reinforced walk and the walk in a Beta environment.

Every admissible path up to a given length is enumerated; the reinforced path
probability is compared with the annealed (Beta-moment) probability.
"""

import csv
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .environment import annealed_path_probability, beta_shapes, log_gamma_variates
from .lerrw import enumerate_paths, path_probability
from .streams import MOMENTS, stream
from .weights import Family, WeightProfile

logger = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 12
DEFAULT_REL_TOL = 1e-10
DEFAULT_NORM_TOL = 1e-12

DEFAULT_GRID: Tuple[WeightProfile, ...] = (
    WeightProfile(alpha=-1, beta=1, delta=1),
    WeightProfile(alpha=0, beta=-1, delta=1),
    WeightProfile(alpha=0, beta=1, delta=2),
    WeightProfile(alpha=0.5, beta=1, delta=1),
    WeightProfile(alpha=1, beta=-2, delta=1),
    WeightProfile(alpha=1, beta=1, delta=0.5),
    WeightProfile(family=Family.TAKEI_POLY, alpha=0.5, delta=1),
)


class OracleRow(BaseModel):
    profile: WeightProfile
    max_len: int
    n_paths: int = Field(description="Paths of every length 0..max_len")
    max_rel_error: float
    worst_path: List[int] = Field(default_factory=list)
    normalization_error: float = Field(description="|sum over length-max_len paths - 1|")
    passed: bool


class OracleReport(BaseModel):
    rows: List[OracleRow]
    rel_tol: float
    norm_tol: float

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(
                ["family", "alpha", "beta", "delta", "max_len", "n_paths", "max_rel_error", "normalization_error", "passed"]
            )
            for r in self.rows:
                p = r.profile
                writer.writerow(
                    [
                        p.family.value,
                        f"{p.alpha:.17g}",
                        f"{p.beta:.17g}",
                        f"{p.delta:.17g}",
                        r.max_len,
                        r.n_paths,
                        f"{r.max_rel_error:.17g}",
                        f"{r.normalization_error:.17g}",
                        str(r.passed).lower(),
                    ]
                )
        return path


def check_profile(
    profile: WeightProfile,
    max_len: int = DEFAULT_MAX_LEN,
    rel_tol: float = DEFAULT_REL_TOL,
    norm_tol: float = DEFAULT_NORM_TOL,
) -> OracleRow:
    worst, worst_path, n_paths = 0.0, [0], 0
    last_layer: List[float] = []
    for n in range(max_len + 1):
        last_layer = []
        for path in enumerate_paths(profile, n):
            reinforced = path_probability(profile, path)
            annealed = annealed_path_probability(profile, path)
            err = abs(reinforced - annealed) / annealed
            if err > worst:
                worst, worst_path = err, list(path)
            last_layer.append(reinforced)
            n_paths += 1
    norm_err = abs(math.fsum(last_layer) - 1.0)
    row = OracleRow(
        profile=profile,
        max_len=max_len,
        n_paths=n_paths,
        max_rel_error=worst,
        worst_path=worst_path,
        normalization_error=norm_err,
        passed=worst <= rel_tol and norm_err <= norm_tol,
    )
    logger.info(
        "oracle %s alpha=%g beta=%g delta=%g: %d paths, max rel error %.3g",
        profile.family.value, profile.alpha, profile.beta, profile.delta, n_paths, worst,
    )
    return row


def run_oracle(
    profiles: Sequence[WeightProfile] = DEFAULT_GRID,
    max_len: int = DEFAULT_MAX_LEN,
    rel_tol: float = DEFAULT_REL_TOL,
    norm_tol: float = DEFAULT_NORM_TOL,
) -> OracleReport:
    rows = [check_profile(p, max_len, rel_tol, norm_tol) for p in profiles]
    report = OracleReport(rows=rows, rel_tol=rel_tol, norm_tol=norm_tol)
    if not report.ok:
        logger.warning("path-law equivalence failed for %d profile(s)", sum(not r.passed for r in rows))
    return report


class QuenchedAverage(BaseModel):
    """Mean quenched path probability over sampled environments."""

    path: List[int]
    n_envs: int
    mean: float
    se: float
    annealed: float

    @property
    def z(self) -> Optional[float]:
        return (self.mean - self.annealed) / self.se if self.se > 0 else None


def quenched_average(profile: WeightProfile, path: Sequence[int], n_envs: int, seed: int) -> QuenchedAverage:
    """Average of P^omega(path) over ``n_envs`` environments restricted to the visited sites."""
    path = [int(v) for v in path]
    annealed = annealed_path_probability(profile, path)
    top = max(path)
    if top < 1 or annealed == 0.0:
        return QuenchedAverage(path=path, n_envs=n_envs, mean=annealed, se=0.0, annealed=annealed)
    a, b = beta_shapes(profile, np.arange(1, top + 1))
    rng = stream(seed, MOMENTS, 1)
    lga = log_gamma_variates(rng, a, (n_envs, top))
    lgb = log_gamma_variates(rng, b, (n_envs, top))
    log_norm = np.logaddexp(lga, lgb)
    log_p, log_q = lga - log_norm, lgb - log_norm
    log_prob = np.zeros(n_envs)
    for x, nxt in zip(path, path[1:]):
        if x == 0:
            continue
        log_prob += log_p[:, x - 1] if nxt > x else log_q[:, x - 1]
    prob = np.exp(log_prob)
    se = float(prob.std(ddof=1) / math.sqrt(n_envs)) if n_envs > 1 else 0.0
    return QuenchedAverage(path=path, n_envs=n_envs, mean=float(prob.mean()), se=se, annealed=annealed)
