"""Initial edge-weight profiles and the recurrence/transience classification."""

import logging
import math
from enum import Enum
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

_CHUNK = 1 << 20


class Family(str, Enum):
    """Initial-weight families on the half-line."""

    LOG_POLY = "logpoly"   # 1 at x=0,1; x^alpha (ln x)^beta for x >= 2
    TAKEI_POLY = "takei"   # 1 at x=0; x^alpha for x >= 1


class WeightProfile(BaseModel):
    """Immutable description of the initial weights w0 and the reinforcement delta."""

    model_config = ConfigDict(frozen=True)

    family: Family = Field(default=Family.LOG_POLY, description="Weight family")
    alpha: float = Field(description="Power-law exponent")
    beta: float = Field(default=0.0, description="Log-power exponent (LogPoly only)")
    delta: float = Field(default=1.0, ge=0.0, description="Reinforcement increment per traversal")

    @model_validator(mode="after")
    def _finite(self) -> "WeightProfile":
        for name in ("alpha", "beta", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        return self

    @property
    def reinforced(self) -> bool:
        return self.delta > 0

    def log_weight(self, x: int) -> float:
        """Natural log of w0(x)."""
        if x < 0:
            raise ValueError(f"weights are defined for x >= 0, got {x}")
        if self.family is Family.LOG_POLY:
            if x <= 1:
                return 0.0
            lx = math.log(x)
            return self.alpha * lx + self.beta * math.log(lx)
        if x == 0:
            return 0.0
        return self.alpha * math.log(x)

    def log_weights(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised ``log_weight`` over an integer array."""
        xs = np.asarray(xs, dtype=np.float64)
        out = np.zeros_like(xs)
        if self.family is Family.LOG_POLY:
            mask = xs >= 2
            lx = np.log(xs[mask])
            out[mask] = self.alpha * lx + self.beta * np.log(lx)
        else:
            mask = xs >= 1
            out[mask] = self.alpha * np.log(xs[mask])
        return out

    def weight(self, x: int) -> float:
        return initial_weight(self, x)

    def to_json(self) -> dict:
        return self.model_dump(mode="json")


class Verdict(str, Enum):
    RECURRENT = "recurrent"
    TRANSIENT = "transient"


class RecurrenceVerdict(BaseModel):
    """Analytic verdict plus a diagnostic partial sum of 1/w0."""

    verdict: Verdict
    phi0_partial: float = Field(description="sum_{x<=N} 1/w0(x), diagnostic only")
    truncation: int = Field(description="N used for phi0_partial")


def initial_weight(profile: WeightProfile, x: int) -> float:
    """w0(x) for the profile's family; strictly positive."""
    if profile.family is Family.LOG_POLY:
        if x <= 1:
            if x < 0:
                raise ValueError(f"weights are defined for x >= 0, got {x}")
            return 1.0
        return x ** profile.alpha * math.log(x) ** profile.beta
    if x <= 0:
        if x < 0:
            raise ValueError(f"weights are defined for x >= 0, got {x}")
        return 1.0
    return x ** profile.alpha


def initial_weights(profile: WeightProfile, x_max: int) -> np.ndarray:
    """Array (w0(0), ..., w0(x_max))."""
    return np.exp(profile.log_weights(np.arange(x_max + 1)))


def is_recurrent(profile: WeightProfile) -> bool:
    if profile.family is Family.TAKEI_POLY:
        return profile.alpha <= 1
    return profile.alpha < 1 or (profile.alpha == 1 and profile.beta <= 1)


def classify_recurrence(profile: WeightProfile, truncation: int = 10_000) -> RecurrenceVerdict:
    """Classify from (family, alpha, beta); the partial sum is only reported."""
    verdict = Verdict.RECURRENT if is_recurrent(profile) else Verdict.TRANSIENT
    return RecurrenceVerdict(
        verdict=verdict,
        phi0_partial=phi0_partial_sum(profile, truncation),
        truncation=truncation,
    )


def phi0_partial_sum(profile: WeightProfile, n: int) -> float:
    """sum_{x=0}^{n} 1/w0(x), accumulated chunk by chunk with ``math.fsum``."""
    if n < 1:
        raise ValueError(f"truncation must be >= 1, got {n}")
    partials = []
    for start in range(0, n + 1, _CHUNK):
        xs = np.arange(start, min(n + 1, start + _CHUNK))
        partials.append(math.fsum(np.exp(-profile.log_weights(xs))))
    return math.fsum(partials)


def parse_family(value: Union[str, Family]) -> Family:
    if isinstance(value, Family):
        return value
    try:
        return Family(value.lower())
    except ValueError:
        raise ValueError(f"unknown weight family {value!r}; expected 'logpoly' or 'takei'")
