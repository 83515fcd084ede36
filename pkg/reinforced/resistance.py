"""Electrical-network quantities of a nearest-neighbour walk on the half-line.

For conductances w_0, w_1, ... (w_{-1} = 0) the walk at x steps right with
probability w_x / (w_{x-1} + w_x). Resistances gamma_x = w_0 / w_x, the
harmonic scale h, the reversing measure pi and the expected hitting times T
are kept in log space and exponentiated only when they fit a double.
"""

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .exceptions import ResistanceOverflowError
from .weights import WeightProfile

logger = logging.getLogger(__name__)

_LOG_MAX = math.log(np.finfo(np.float64).max)
_RESCALE_MARGIN = 32.0

DEFAULT_REL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Natural logs of the conductances w_0..w_{x_max}."""

    log_w: np.ndarray

    def __post_init__(self):
        log_w = np.asarray(self.log_w, dtype=np.float64)
        if log_w.ndim != 1 or log_w.size == 0:
            raise ValueError("a weight sequence needs at least w_0")
        if not np.all(np.isfinite(log_w)):
            raise ValueError("weights must be strictly positive and finite")
        log_w.setflags(write=False)
        object.__setattr__(self, "log_w", log_w)

    @property
    def x_max(self) -> int:
        return self.log_w.size - 1

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_w)

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "WeightSequence":
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        return cls(np.log(w))

    @classmethod
    def from_profile(cls, profile: WeightProfile, x_max: int) -> "WeightSequence":
        return cls(profile.log_weights(np.arange(x_max + 1)))

    def step_right_probabilities(self) -> np.ndarray:
        """p_x = w_x / (w_{x-1} + w_x) for x = 0..x_max (p_0 = 1)."""
        p = np.ones_like(self.log_w)
        # 1 / (1 + w_{x-1}/w_x)
        p[1:] = 1.0 / (1.0 + np.exp(self.log_w[:-1] - self.log_w[1:]))
        return p

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["x", "w"])
            for x, lw in enumerate(self.log_w):
                writer.writerow([x, f"{math.exp(lw):.17g}"])
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "WeightSequence":
        with Path(path).open(newline="", encoding="utf-8") as f:
            rows = sorted((int(r["x"]), float(r["w"])) for r in csv.DictReader(f))
        if [x for x, _ in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: x column must be 0, 1, 2, ... without gaps")
        return cls.from_weights([w for _, w in rows])


def log_cumsum(log_terms: np.ndarray) -> np.ndarray:
    """Running log(sum(exp(log_terms[:k+1]))) with Kahan compensation.

    The accumulator is rescaled when a term exceeds the current exponent shift
    by more than ``_RESCALE_MARGIN``, so partial sums far beyond the double
    range stay representable.
    """
    out = np.empty(len(log_terms), dtype=np.float64)
    shift = -math.inf
    total = 0.0
    comp = 0.0
    for k, lt in enumerate(log_terms.tolist()):
        if lt > shift + _RESCALE_MARGIN or shift == -math.inf:
            scale = math.exp(shift - lt) if shift > -math.inf else 0.0
            total *= scale
            comp *= scale
            shift = lt
        y = math.exp(lt - shift) - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[k] = shift + math.log(total)
    return out


def _exp_checked(log_values: np.ndarray, first_x: int) -> np.ndarray:
    over = np.nonzero(log_values > _LOG_MAX)[0]
    if over.size:
        raise ResistanceOverflowError(first_x + int(over[0]))
    return np.exp(log_values)


@dataclass(frozen=True, eq=False)
class ResistanceProfile:
    """gamma, h, pi and T for one weight sequence.

    Index ranges: log_gamma and pi over x = 0..x_max; h and t over
    x = 0..x_max+1.
    """

    log_gamma: np.ndarray
    log_h: np.ndarray
    log_pi: np.ndarray
    log_t: np.ndarray
    h: np.ndarray
    pi: np.ndarray
    t: np.ndarray
    z_partial: float
    log_w0: float = 0.0

    @property
    def x_max(self) -> int:
        return self.log_gamma.size - 1

    @property
    def gamma(self) -> np.ndarray:
        return np.exp(self.log_gamma)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["x", "log_gamma", "h", "pi", "T"])
            for x in range(self.x_max + 2):
                log_gamma = f"{self.log_gamma[x]:.17g}" if x <= self.x_max else ""
                pi = f"{self.pi[x]:.17g}" if x <= self.x_max else ""
                writer.writerow([x, log_gamma, f"{self.h[x]:.17g}", pi, f"{self.t[x]:.17g}"])
        return path


def build_resistance_profile(w: WeightSequence) -> ResistanceProfile:
    """Prefix-sum construction of gamma, h, pi and T(x) = sum_{i<x} gamma_i sum_{j<=i} pi_j.

    Weights are taken relative to w_0, so pi and Z are in units of w_0 and T
    does not depend on the overall scale.
    """
    log_w = w.log_w - w.log_w[0]
    log_gamma = log_w[0] - log_w
    log_pi = np.empty_like(log_w)
    log_pi[0] = log_w[0]
    log_pi[1:] = np.logaddexp(log_w[:-1], log_w[1:])

    log_h = np.empty(log_w.size + 1)
    log_h[0] = -math.inf
    log_h[1:] = log_cumsum(log_gamma)

    log_pi_prefix = log_cumsum(log_pi)
    log_t = np.empty(log_w.size + 1)
    log_t[0] = -math.inf
    log_t[1:] = log_cumsum(log_gamma + log_pi_prefix)

    t = _exp_checked(log_t, 0)
    h = _exp_checked(log_h, 0)
    profile = ResistanceProfile(
        log_gamma=log_gamma,
        log_h=log_h,
        log_pi=log_pi,
        log_t=log_t,
        h=h,
        pi=np.exp(log_pi),
        t=t,
        z_partial=float(np.exp(log_pi_prefix[-1])),
        log_w0=float(w.log_w[0]),
    )
    for arr in (profile.log_gamma, profile.log_h, profile.log_pi, profile.log_t, profile.h, profile.pi, profile.t):
        arr.setflags(write=False)
    return profile


def expected_hitting_time(w: WeightSequence, x: int) -> float:
    """E_0[tau_x] = T(x)."""
    if not 1 <= x <= w.x_max + 1:
        raise ValueError(f"x must lie in 1..{w.x_max + 1}, got {x}")
    return float(build_resistance_profile(w).t[x])


def gamma_by_ratios(w: WeightSequence) -> np.ndarray:
    """gamma_x as the running product of q_i/p_i, evaluated directly."""
    p = w.step_right_probabilities()
    ratios = (1.0 - p[1:]) / p[1:]
    return np.concatenate([[1.0], np.cumprod(ratios)])


def hitting_time_double_sum(w: WeightSequence, x: int) -> float:
    """T(x) = sum_{j<x} pi_j (h(x) - h(j)), evaluated as a double sum."""
    weights = w.weights / w.weights[0]
    gamma = 1.0 / weights
    pi = np.concatenate([[weights[0]], weights[:-1] + weights[1:]])
    return math.fsum(pi[j] * math.fsum(gamma[j:x]) for j in range(x))


# ---------------------------------------------------------------------------
# Bound checks


class Bound(str, Enum):
    HITTING_OVER_HARMONIC = "T>=h"
    HARMONIC_OVER_MAX_RESISTANCE = "h>=max_gamma"
    MAX_OVER_LAST_RESISTANCE = "max_gamma>=gamma_last"
    QUADRATIC = "T<=2x^2*max_gamma*max_inv_gamma"
    MASS_HARMONIC = "T<=Z*h"
    MASS_LINEAR = "Z*h<=Z*x*max_gamma"


@dataclass(frozen=True)
class BoundCheck:
    """Tightest point of one inequality over x = 1..x_max+1."""

    bound: Bound
    x: int
    slack: float
    relative_slack: float
    holds: bool


@dataclass(frozen=True)
class BoundsReport:
    checks: List[BoundCheck]
    rel_tol: float

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)

    def by_bound(self, bound: Bound) -> Optional[BoundCheck]:
        return next((c for c in self.checks if c.bound is bound), None)


def relative_slacks(p: ResistanceProfile, z_upper: Optional[float] = None) -> Dict[Bound, np.ndarray]:
    """(larger side - smaller side) / T(x) for each inequality, indexed by x - 1.

    The mass bounds appear only when ``z_upper`` is supplied; the caller
    certifies that it dominates the full (convergent) sum of pi. ``z_upper``
    is in the units of the weights themselves and is rescaled by w_0 here.
    """
    xs = np.arange(1, p.x_max + 2, dtype=np.float64)
    log_t = p.log_t[1:]
    log_h = p.log_h[1:]
    log_max_gamma = np.maximum.accumulate(p.log_gamma)
    log_max_inv_gamma = np.maximum.accumulate(-p.log_gamma)

    sides = {
        Bound.HITTING_OVER_HARMONIC: (log_t, log_h),
        Bound.HARMONIC_OVER_MAX_RESISTANCE: (log_h, log_max_gamma),
        Bound.MAX_OVER_LAST_RESISTANCE: (log_max_gamma, p.log_gamma),
        Bound.QUADRATIC: (math.log(2.0) + 2.0 * np.log(xs) + log_max_gamma + log_max_inv_gamma, log_t),
    }
    if z_upper is not None:
        if not z_upper > 0:
            raise ValueError(f"z_upper must be positive, got {z_upper}")
        log_z = math.log(z_upper) - p.log_w0
        sides[Bound.MASS_HARMONIC] = (log_z + log_h, log_t)
        sides[Bound.MASS_LINEAR] = (log_z + np.log(xs) + log_max_gamma, log_z + log_h)
    with np.errstate(over="ignore"):
        return {b: np.exp(big - log_t) - np.exp(small - log_t) for b, (big, small) in sides.items()}


def check_bounds(
    p: ResistanceProfile, z_upper: Optional[float] = None, rel_tol: float = DEFAULT_REL_TOL
) -> BoundsReport:
    """Evaluate the hitting-time inequalities at every x and report the minimal slack.

    Violations are reported, never raised.
    """
    checks = []
    for bound, rel in relative_slacks(p, z_upper).items():
        k = int(np.argmin(rel))
        check = BoundCheck(
            bound=bound,
            x=k + 1,
            slack=float(rel[k] * p.t[k + 1]),
            relative_slack=float(rel[k]),
            holds=bool(rel[k] >= -rel_tol),
        )
        if not check.holds:
            logger.warning("bound %s violated at x=%d (relative slack %.3g)", bound.value, check.x, check.relative_slack)
        checks.append(check)
    return BoundsReport(checks=checks, rel_tol=rel_tol)
