"""Digamma-family special functions, environment moments and regime predictors.

``digamma`` and ``trigamma`` shift the argument upward with the recurrences
Psi(z+1) = Psi(z) + 1/z and Psi'(z+1) = Psi'(z) - 1/z**2 until z >= 8 and then
evaluate the Stirling-type series through the B14 Bernoulli term. Both accept
scalars or numpy arrays.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import special

from .exceptions import DomainError, NoRegimeError
from .weights import Family, WeightProfile

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SHIFT_THRESHOLD = 8.0
_CHUNK = 1 << 18

# B_{2k} / (2k), k = 1..7
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
# B_{2k}, k = 1..7
_TRIGAMMA_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def _horner(coeffs: Sequence[float], r2: ArrayLike) -> ArrayLike:
    acc = coeffs[-1] * r2
    for c in reversed(coeffs[:-1]):
        acc = (c + acc) * r2
    return acc


def _check_positive(z: ArrayLike, name: str) -> Tuple[np.ndarray, bool]:
    scalar = np.ndim(z) == 0
    arr = np.array(z, dtype=np.float64, ndmin=1)
    if not np.all(arr > 0):  # also catches NaN
        bad = arr[~(arr > 0)][0]
        raise DomainError(f"{name} requires a positive argument, got {bad!r}")
    return arr, scalar


def _shift(z: np.ndarray, power: int) -> Tuple[np.ndarray, np.ndarray]:
    z = z.copy()
    acc = np.zeros_like(z)
    mask = z < SHIFT_THRESHOLD
    while mask.any():
        acc[mask] += z[mask] ** -power
        z[mask] += 1.0
        mask = z < SHIFT_THRESHOLD
    return z, acc


def digamma(z: ArrayLike) -> ArrayLike:
    """Psi(z) = Gamma'(z)/Gamma(z) for z > 0."""
    arr, scalar = _check_positive(z, "digamma")
    shifted, acc = _shift(arr, 1)
    r = 1.0 / shifted
    value = np.log(shifted) - 0.5 * r - _horner(_DIGAMMA_COEFFS, r * r) - acc
    return float(value[0]) if scalar else value


def trigamma(z: ArrayLike) -> ArrayLike:
    """Psi'(z) for z > 0; strictly positive and decreasing."""
    arr, scalar = _check_positive(z, "trigamma")
    shifted, acc = _shift(arr, 2)
    r = 1.0 / shifted
    r2 = r * r
    value = r + 0.5 * r2 + r * _horner(_TRIGAMMA_COEFFS, r2) + acc
    return float(value[0]) if scalar else value


def log_beta(a: float, b: float) -> float:
    """ln B(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b)."""
    if not (a > 0 and b > 0):
        raise DomainError(f"log_beta requires positive arguments, got ({a!r}, {b!r})")
    return float(special.betaln(a, b))


class DifferenceBounds(NamedTuple):
    lower: float
    value: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.value <= self.upper


def digamma_difference_bounds(y: float, z: float) -> DifferenceBounds:
    """Sandwich ln y - ln z - 1/y <= Psi(y) - Psi(z) <= ln y - ln z + 1/z."""
    value = digamma(y) - digamma(z)
    log_ratio = math.log(y) - math.log(z)
    return DifferenceBounds(log_ratio - 1.0 / y, value, log_ratio + 1.0 / z)


# ---------------------------------------------------------------------------
# Environment moments


def _require_reinforced(profile: WeightProfile) -> None:
    if profile.delta <= 0:
        raise DomainError("environment moments need delta > 0 (Beta shapes are undefined at delta = 0)")


def _shape_arrays(profile: WeightProfile, i: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Beta shapes (w0(i)/2d, (w0(i-1)+d)/2d) for sites i >= 1."""
    two_delta = 2.0 * profile.delta
    w_cur = np.exp(profile.log_weights(i))
    w_prev = np.exp(profile.log_weights(i - 1))
    return w_cur / two_delta, (w_prev + profile.delta) / two_delta


def _mean_terms(profile: WeightProfile, i: np.ndarray) -> np.ndarray:
    a, b = _shape_arrays(profile, i)
    return digamma(b) - digamma(a)


def _var_terms(profile: WeightProfile, i: np.ndarray) -> np.ndarray:
    a, b = _shape_arrays(profile, i)
    return trigamma(b) + trigamma(a)


def _stream_sums(
    profile: WeightProfile,
    xs: Sequence[int],
    terms: Callable[[WeightProfile, np.ndarray], np.ndarray],
) -> List[float]:
    """Sums of ``terms`` over i = 1..x for every x in ``xs`` in one streaming pass."""
    targets = sorted(set(int(x) for x in xs))
    if not targets or targets[0] < 1:
        raise ValueError("moment sums need x >= 1")
    results = {}
    partials: List[float] = []
    pending = iter(targets)
    nxt = next(pending)
    start = 1
    while nxt is not None:
        stop = min(start + _CHUNK, targets[-1] + 1)
        chunk = terms(profile, np.arange(start, stop))
        while nxt is not None and nxt < stop:
            results[nxt] = math.fsum(partials + [math.fsum(chunk[: nxt - start + 1])])
            nxt = next(pending, None)
        partials.append(math.fsum(chunk))
        start = stop
    return [results[int(x)] for x in xs]


def mean_S(profile: WeightProfile, x: int) -> float:
    """E[S_x] = sum_{i=1}^{x} Psi((w0(i-1)+d)/2d) - Psi(w0(i)/2d)."""
    _require_reinforced(profile)
    return _stream_sums(profile, [x], _mean_terms)[0]


def mean_s_regrouped(profile: WeightProfile, x: int) -> float:
    """E[S_x] in the regrouped form: boundary term plus half-step digamma increments."""
    _require_reinforced(profile)
    if x < 1:
        raise ValueError("moment sums need x >= 1")
    two_delta = 2.0 * profile.delta
    boundary = digamma(profile.weight(0) / two_delta) - digamma(profile.weight(x) / two_delta)
    partials = [boundary]
    for start in range(0, x, _CHUNK):
        z = np.exp(profile.log_weights(np.arange(start, min(x, start + _CHUNK)))) / two_delta
        partials.append(math.fsum(digamma(z + 0.5) - digamma(z)))
    return math.fsum(partials)


def var_S(profile: WeightProfile, x: int) -> float:
    """V[S_x] = sum_{i=1}^{x} Psi'((w0(i-1)+d)/2d) + Psi'(w0(i)/2d)."""
    _require_reinforced(profile)
    return _stream_sums(profile, [x], _var_terms)[0]


# ---------------------------------------------------------------------------
# Constants and regimes


def k_constant(profile: WeightProfile) -> float:
    """Scale constant K of the running-maximum law (K ln n)^{1/(1-alpha)}."""
    _require_reinforced(profile)
    alpha, beta, delta = profile.alpha, profile.beta, profile.delta
    if alpha >= 1:
        raise NoRegimeError(f"K is defined for alpha < 1, got alpha={alpha}")
    if alpha < 0:
        return (1.0 - alpha) / (2.0 * delta)
    if alpha > 0:
        return (1.0 - alpha) / delta
    if profile.family is Family.TAKEI_POLY:
        half = 1.0 / (2.0 * delta)
        return 1.0 / (digamma(half + 0.5) - digamma(half))
    if beta < 0:
        return 1.0 / (2.0 * delta)
    if beta > 0:
        return 1.0 / delta
    raise NoRegimeError("K is undefined for the log-power family at alpha = 0, beta = 0")


class Target(str, Enum):
    MEAN_S = "mean_s"
    VAR_S = "var_s"
    LIMSUP_SCALE = "limsup_scale"


class Regime(str, Enum):
    ALPHA_NEGATIVE = "alpha<0"
    ALPHA_ZERO_BETA_NEGATIVE = "alpha=0,beta<0"
    ALPHA_ZERO_BETA_POSITIVE = "alpha=0,beta>0"
    ALPHA_FRACTIONAL = "0<alpha<1"
    ALPHA_ONE_BETA_BELOW_ONE = "alpha=1,beta<1"
    ALPHA_ONE_BETA_ONE = "alpha=1,beta=1"
    ALPHA_ONE_BETA_NEGATIVE = "alpha=1,beta<0"
    ALPHA_ONE_BETA_POSITIVE = "alpha=1,0<beta<=1"
    TAKEI_ALPHA_NEGATIVE = "takei:alpha<0"
    TAKEI_ALPHA_ZERO = "takei:alpha=0"
    TAKEI_ALPHA_FRACTIONAL = "takei:0<alpha<1"
    TAKEI_ALPHA_ONE = "takei:alpha=1"


Band = Tuple[float, float]


@dataclass(frozen=True)
class RegimePredictor:
    """Closed-form asymptotic for one case row.

    ``predictor(x)`` returns a single value, or a ``(lower, upper)`` pair for
    the rows whose statement is an epsilon-band rather than an equivalence.
    """

    profile: WeightProfile
    target: Target
    regime: Regime
    predictor: Callable[[float], Union[float, Band]]
    is_band: bool = False
    epsilon: Optional[float] = None

    def __call__(self, x: float) -> Union[float, Band]:
        return self.predictor(x)


def moment_regime(profile: WeightProfile) -> Regime:
    """Case row for the mean/variance asymptotics of S_x."""
    alpha, beta = profile.alpha, profile.beta
    if profile.family is Family.TAKEI_POLY:
        if alpha < 0:
            return Regime.TAKEI_ALPHA_NEGATIVE
        if alpha == 0:
            return Regime.TAKEI_ALPHA_ZERO
        if alpha < 1:
            return Regime.TAKEI_ALPHA_FRACTIONAL
        if alpha == 1:
            return Regime.TAKEI_ALPHA_ONE
        raise NoRegimeError(f"no moment asymptotics for alpha={alpha} > 1")
    if alpha < 0:
        return Regime.ALPHA_NEGATIVE
    if alpha == 0:
        if beta < 0:
            return Regime.ALPHA_ZERO_BETA_NEGATIVE
        if beta > 0:
            return Regime.ALPHA_ZERO_BETA_POSITIVE
        raise NoRegimeError("alpha = 0 with beta = 0 is the power-law family; use family 'takei'")
    if alpha < 1:
        return Regime.ALPHA_FRACTIONAL
    if alpha == 1:
        if beta < 1:
            return Regime.ALPHA_ONE_BETA_BELOW_ONE
        if beta == 1:
            return Regime.ALPHA_ONE_BETA_ONE
    raise NoRegimeError(f"no moment asymptotics for alpha={alpha}, beta={beta}")


def limsup_regime(profile: WeightProfile) -> Regime:
    """Case row for the running-maximum scale of the reinforced walk."""
    alpha, beta = profile.alpha, profile.beta
    if alpha < 1:
        if profile.family is Family.LOG_POLY and alpha == 0 and beta == 0:
            raise NoRegimeError("alpha = 0 with beta = 0 is the power-law family; use family 'takei'")
        return moment_regime(profile)
    if alpha == 1:
        if profile.family is Family.TAKEI_POLY:
            return Regime.TAKEI_ALPHA_ONE
        if beta < 0:
            return Regime.ALPHA_ONE_BETA_NEGATIVE
        if 0 < beta <= 1:
            return Regime.ALPHA_ONE_BETA_POSITIVE
    raise NoRegimeError(f"no running-maximum law for alpha={alpha}, beta={beta}")


def _loglog(x: float) -> float:
    return math.log(math.log(x))


def _mean_predictor(profile: WeightProfile, regime: Regime, eps: float) -> Tuple[Callable, bool]:
    a, b, d = profile.alpha, profile.beta, profile.delta
    if regime is Regime.ALPHA_NEGATIVE:
        lo_exp, hi_exp = 1 - a - eps * abs(b), 1 - a + eps * abs(b)
        return (
            lambda x: (
                (2 * d - eps / 2) / lo_exp * x ** lo_exp,
                (2 * d + eps / 2) / hi_exp * x ** hi_exp,
            ),
            True,
        )
    if regime is Regime.ALPHA_ZERO_BETA_POSITIVE:
        return (lambda x: d * x * math.log(x) ** -b), False
    if regime is Regime.ALPHA_ZERO_BETA_NEGATIVE:
        return (lambda x: 2 * d * x * math.log(x) ** -b), False
    if regime is Regime.ALPHA_FRACTIONAL:
        return (lambda x: d / (1 - a) * x ** (1 - a) * math.log(x) ** -b), False
    if regime is Regime.ALPHA_ONE_BETA_BELOW_ONE:
        return (lambda x: -math.log(x) + d / (1 - b) * math.log(x) ** (1 - b)), False
    if regime is Regime.ALPHA_ONE_BETA_ONE:
        return (lambda x: -math.log(x) + (d - 1) * _loglog(x)), False
    if regime is Regime.TAKEI_ALPHA_ONE:
        return (lambda x: (d - 1) * math.log(x)), False
    k = k_constant(profile)
    return (lambda x: x ** (1 - a) / k), False


def _var_predictor(profile: WeightProfile, regime: Regime, eps: float) -> Tuple[Callable, bool]:
    a, b, d = profile.alpha, profile.beta, profile.delta
    if regime is Regime.ALPHA_NEGATIVE:
        lo_exp, hi_exp = 1 - 2 * a - 2 * eps * abs(b), 1 - 2 * a + 2 * eps * abs(b)
        return (
            lambda x: (
                (4 * d * d - eps) / lo_exp * x ** lo_exp,
                (4 * d * d + eps) / hi_exp * x ** hi_exp,
            ),
            True,
        )
    if regime is Regime.ALPHA_ZERO_BETA_POSITIVE:
        return (lambda x: 4 * d * x * math.log(x) ** -b), False
    if regime is Regime.ALPHA_ZERO_BETA_NEGATIVE:
        return (lambda x: 4 * d * d * x * math.log(x) ** (-2 * b)), False
    if regime is Regime.ALPHA_FRACTIONAL:
        return (lambda x: 4 * d / (1 - a) * x ** (1 - a) * math.log(x) ** -b), False
    if regime is Regime.ALPHA_ONE_BETA_BELOW_ONE:
        return (lambda x: 4 * d / (1 - b) * math.log(x) ** (1 - b)), False
    if regime is Regime.ALPHA_ONE_BETA_ONE:
        return (lambda x: 4 * d * _loglog(x)), False
    if regime is Regime.TAKEI_ALPHA_NEGATIVE:
        return (lambda x: 4 * d * d / (1 - 2 * a) * x ** (1 - 2 * a)), False
    if regime is Regime.TAKEI_ALPHA_ZERO:
        per_site = trigamma((1 + d) / (2 * d)) + trigamma(1 / (2 * d))
        return (lambda x: per_site * x), False
    if regime is Regime.TAKEI_ALPHA_FRACTIONAL:
        return (lambda x: 4 * d / (1 - a) * x ** (1 - a)), False
    return (lambda x: 4 * d * math.log(x)), False


def _limsup_predictor(profile: WeightProfile, regime: Regime, eps: float) -> Tuple[Callable, bool]:
    a, b, d = profile.alpha, profile.beta, profile.delta
    if regime is Regime.ALPHA_ONE_BETA_NEGATIVE:
        return (
            lambda n: (
                math.exp(math.log(n) ** ((1 - eps) / (1 - b))),
                math.exp(math.log(n) ** ((1 + eps) / (1 - b))),
            ),
            True,
        )
    if regime is Regime.ALPHA_ONE_BETA_POSITIVE:
        return (lambda n: (n ** ((1 - eps) / 2), n ** ((1 + eps) / 2))), True
    if regime is Regime.TAKEI_ALPHA_ONE:
        scale = d if d > 2 else 2.0
        return (lambda n: (n ** ((1 - eps) / scale), n ** ((1 + eps) / scale))), True
    k = k_constant(profile)
    return (lambda n: (k * math.log(n)) ** (1.0 / (1.0 - a))), False


def regime_predictor(
    profile: WeightProfile, target: Union[Target, str], epsilon: float = 0.3
) -> RegimePredictor:
    """Closed-form predictor matching the profile's case row for ``target``."""
    target = Target(target)
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    _require_reinforced(profile)
    if target is Target.LIMSUP_SCALE:
        regime = limsup_regime(profile)
        fn, band = _limsup_predictor(profile, regime, epsilon)
    else:
        regime = moment_regime(profile)
        if regime is Regime.ALPHA_NEGATIVE and epsilon * abs(profile.beta) >= 1:
            raise DomainError(f"epsilon must lie in (0, 1/|beta|) for this case, got {epsilon} with beta={profile.beta}")
        builder = _mean_predictor if target is Target.MEAN_S else _var_predictor
        fn, band = builder(profile, regime, epsilon)
    return RegimePredictor(
        profile=profile,
        target=target,
        regime=regime,
        predictor=fn,
        is_band=band,
        epsilon=epsilon if band else None,
    )


# ---------------------------------------------------------------------------
# Moment tables


class MomentRow(BaseModel):
    x: int
    mean_s: float
    var_s: float
    predictor_mean: Optional[float] = None
    predictor_var: Optional[float] = None


class MomentTable(BaseModel):
    """E[S_x] and V[S_x] along a grid of x, with the matching asymptotic curves."""

    model_config = ConfigDict(frozen=True)

    profile: WeightProfile
    xs: List[int] = Field(description="Sites, increasing")
    mean_s: List[float]
    var_s: List[float]
    predictor_mean: List[Optional[float]]
    predictor_var: List[Optional[float]]

    def rows(self) -> List[MomentRow]:
        return [
            MomentRow(x=x, mean_s=m, var_s=v, predictor_mean=pm, predictor_var=pv)
            for x, m, v, pm, pv in zip(
                self.xs, self.mean_s, self.var_s, self.predictor_mean, self.predictor_var
            )
        ]


def _curve_values(profile: WeightProfile, target: Target, xs: Sequence[int], epsilon: float) -> List[Optional[float]]:
    try:
        pred = regime_predictor(profile, target, epsilon)
    except NoRegimeError:
        logger.debug("no %s predictor for %s", target.value, profile)
        return [None] * len(xs)
    except DomainError as e:
        logger.warning("skipping %s curve: %s", target.value, e)
        return [None] * len(xs)
    values: List[Optional[float]] = []
    for x in xs:
        try:
            value = pred(x)
        except (ValueError, ArithmeticError):  # ln x or ln ln x degenerate at small x
            values.append(None)
            continue
        if pred.is_band:
            # geometric midpoint; the band itself is reported by the experiments
            lo, hi = value
            value = math.sqrt(lo * hi)
        values.append(float(value))
    return values


def moment_table(profile: WeightProfile, xs: Sequence[int], epsilon: float = 0.3) -> MomentTable:
    _require_reinforced(profile)
    xs = sorted(set(int(x) for x in xs))
    return MomentTable(
        profile=profile,
        xs=xs,
        mean_s=_stream_sums(profile, xs, _mean_terms),
        var_s=_stream_sums(profile, xs, _var_terms),
        predictor_mean=_curve_values(profile, Target.MEAN_S, xs, epsilon),
        predictor_var=_curve_values(profile, Target.VAR_S, xs, epsilon),
    )
