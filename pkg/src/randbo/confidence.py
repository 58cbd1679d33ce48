"""Confidence-parameter schedules for UCB acquisition.

Eight schedule variants cover the deterministic log-growing width, the
Gamma-randomized width, shifted-exponential randomized widths (constant
shift for finite domains, log-growing shift for continuous domains and for
the anytime high-probability setting), a plain constant, and the two
dimension-scaled heuristics used in benchmark runs.

All samplers use inverse-transform draws from a single uniform per call,
so a fixed generator state maps one-to-one onto a draw sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma as _gamma_dist

from .errors import ConfigurationError
from .rng import as_generator


@dataclass(frozen=True)
class ConfidenceDraw:
    """One iteration's confidence parameter.

    ``value`` multiplies the posterior standard deviation as value**0.5.
    ``shift`` is the deterministic component: the shift of the exponential
    for randomized schedules, the value itself for deterministic ones, and
    zero for the Gamma schedule, which has no shift.
    """

    value: float
    shift: float


def sample_shifted_exponential(s: float, lam: float, rng) -> float:
    """Draw s + Z with Z exponential of rate ``lam`` by inverse transform.

    Consumes exactly one uniform; the result is never below s.
    """
    if not lam > 0:
        raise ConfigurationError("rate parameter must be positive")
    # 1 - random() lies in (0, 1], keeping the log finite.
    u = 1.0 - as_generator(rng).random()
    return s - math.log(u) / lam


def shift_finite(domain_size: int) -> float:
    """Constant shift 2 log(|X| / 2) for a finite domain of |X| >= 2 points."""
    if domain_size < 2:
        raise ConfigurationError(
            "shifted-exponential schedule needs a domain of at least 2 points"
        )
    return 2.0 * math.log(domain_size / 2.0)


def shift_continuous(a: float, b: float, r: float, d: int, t: int) -> float:
    """Iteration-t shift for a continuous domain under the smoothness constants.

    2 d log(b d r t^2 (sqrt(log(a d)) + sqrt(pi)/2)) - 2 log 2; monotone
    non-decreasing in t.
    """
    _check_smoothness_constants(a, b, r, d)
    if t < 1:
        raise ConfigurationError("iteration index must be >= 1")
    inner = b * d * r * t * t * (math.sqrt(math.log(a * d)) + math.sqrt(math.pi) / 2.0)
    if inner <= 0:
        raise ConfigurationError("shift argument must be positive")
    return 2.0 * d * math.log(inner) - 2.0 * math.log(2.0)


def beta_deterministic(domain_size: int, t: int, delta: float) -> float:
    """Anytime union-bound width 2 log(|X| t^2 pi^2 / (6 delta))."""
    if domain_size < 1:
        raise ConfigurationError("domain_size must be >= 1")
    if t < 1:
        raise ConfigurationError("iteration index must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ConfigurationError("delta must lie in (0, 1)")
    return 2.0 * math.log(domain_size * t * t * math.pi**2 / (6.0 * delta))


def gamma_shape(domain_size: int, t: int) -> float:
    """Gamma shape log(|X| t^2) / log(1.5) for the Gamma-randomized schedule."""
    if t < 1:
        raise ConfigurationError("iteration index must be >= 1")
    kappa = math.log(domain_size * t * t) / math.log(1.5)
    if kappa <= 0:
        raise ConfigurationError("Gamma shape requires |X| t^2 > 1")
    return kappa


def sample_gamma_confidence(domain_size: int, t: int, theta: float, rng) -> float:
    """Draw from Gamma(shape log(|X| t^2)/log 1.5, scale theta)."""
    if not theta > 0:
        raise ConfigurationError("theta must be positive")
    kappa = gamma_shape(domain_size, t)
    return float(as_generator(rng).gamma(shape=kappa, scale=theta))


def heuristic_beta(d: int, t: int) -> float:
    """Benchmark heuristic width 0.2 d log(2 t)."""
    if t < 1:
        raise ConfigurationError("iteration index must be >= 1")
    return 0.2 * d * math.log(2.0 * t)


def _check_smoothness_constants(a: float, b: float, r: float, d: int) -> None:
    if not (a > 0 and b > 0 and r > 0):
        raise ConfigurationError("smoothness constants a, b, r must be positive")
    if d < 1:
        raise ConfigurationError("dimension d must be >= 1")
    if a * d <= 1.0:
        raise ConfigurationError("need a*d > 1 so sqrt(log(a d)) is defined")


def discretization_grid_size(a: float, b: float, r: float, d: int, u_t: float) -> int:
    """Per-coordinate point count ceil(b d r u_t (sqrt(log(a d)) + sqrt(pi)/2))."""
    _check_smoothness_constants(a, b, r, d)
    if not u_t > 0:
        raise ConfigurationError("u_t must be positive")
    tau = b * d * r * u_t * (math.sqrt(math.log(a * d)) + math.sqrt(math.pi) / 2.0)
    return int(math.ceil(tau))


def discretization_coordinates(a: float, b: float, r: float, d: int,
                               u_t: float) -> np.ndarray:
    """Per-coordinate grid values j r/(tau+1) for j = 1..tau, strictly inside (0, r).

    The induced grid over [0, r]^d is the d-fold product, tau^d points.
    """
    tau = discretization_grid_size(a, b, r, d, u_t)
    return r * np.arange(1, tau + 1) / (tau + 1)


# ---------------------------------------------------------------------------
# Schedule variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """Fixed confidence value for every iteration."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigurationError("constant confidence must be positive")


@dataclass(frozen=True)
class DeterministicUcb:
    """Deterministic anytime width, growing like log t."""

    domain_size: int
    delta: float

    def __post_init__(self):
        if self.domain_size < 1:
            raise ConfigurationError("domain_size must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class GammaRandomized:
    """Gamma-distributed confidence with iteration-growing shape."""

    domain_size: int
    theta: float = 1.0

    def __post_init__(self):
        if self.domain_size < 1:
            raise ConfigurationError("domain_size must be >= 1")
        if not self.theta > 0:
            raise ConfigurationError("theta must be positive")
        gamma_shape(self.domain_size, 1)  # fail early on |X| = 1


@dataclass(frozen=True)
class ShiftedExpFinite:
    """Shifted exponential with constant shift 2 log(|X|/2) and rate 1/2.

    Rejected for |X| < 2 rather than clamped: the shift would be negative
    and the schedule is out of theory there.
    """

    domain_size: int

    def __post_init__(self):
        shift_finite(self.domain_size)


@dataclass(frozen=True)
class ShiftedExpContinuous:
    """Shifted exponential with the smoothness-constant shift, rate 1/2."""

    a: float
    b: float
    r: float
    d: int

    def __post_init__(self):
        _check_smoothness_constants(self.a, self.b, self.r, self.d)


@dataclass(frozen=True)
class ShiftedExpHighProb:
    """Shifted exponential whose shift is the anytime width, rate 1/2."""

    domain_size: int
    delta: float

    def __post_init__(self):
        beta_deterministic(self.domain_size, 1, self.delta)


@dataclass(frozen=True)
class HeuristicUcb:
    """Deterministic heuristic 0.2 d log(2 t)."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError("dimension d must be >= 1")


@dataclass(frozen=True)
class HeuristicShiftedExp:
    """Shifted exponential with shift d/2 and rate 1/2."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError("dimension d must be >= 1")


ConfidenceSchedule = (
    Constant
    | DeterministicUcb
    | GammaRandomized
    | ShiftedExpFinite
    | ShiftedExpContinuous
    | ShiftedExpHighProb
    | HeuristicUcb
    | HeuristicShiftedExp
)

RATE = 0.5  # exponential rate shared by every shifted-exponential variant


def _shift_of(schedule: ConfidenceSchedule, t: int) -> float:
    if isinstance(schedule, ShiftedExpFinite):
        return shift_finite(schedule.domain_size)
    if isinstance(schedule, ShiftedExpContinuous):
        return shift_continuous(schedule.a, schedule.b, schedule.r, schedule.d, t)
    if isinstance(schedule, ShiftedExpHighProb):
        return beta_deterministic(schedule.domain_size, t, schedule.delta)
    if isinstance(schedule, HeuristicShiftedExp):
        return schedule.d / 2.0
    raise TypeError(f"{type(schedule).__name__} has no exponential shift")


def is_randomized(schedule: ConfidenceSchedule) -> bool:
    return isinstance(
        schedule,
        (GammaRandomized, ShiftedExpFinite, ShiftedExpContinuous,
         ShiftedExpHighProb, HeuristicShiftedExp),
    )


def next_confidence(schedule: ConfidenceSchedule, t: int, rng) -> ConfidenceDraw:
    """Produce iteration t's confidence parameter.

    Deterministic variants ignore the generator; randomized ones advance it
    by exactly one draw, so a fixed seed reproduces the sequence.
    """
    if t < 1:
        raise ConfigurationError("iteration index must be >= 1")
    if isinstance(schedule, Constant):
        return ConfidenceDraw(schedule.c, schedule.c)
    if isinstance(schedule, DeterministicUcb):
        beta = beta_deterministic(schedule.domain_size, t, schedule.delta)
        return ConfidenceDraw(beta, beta)
    if isinstance(schedule, HeuristicUcb):
        beta = heuristic_beta(schedule.d, t)
        return ConfidenceDraw(beta, beta)
    if isinstance(schedule, GammaRandomized):
        value = sample_gamma_confidence(schedule.domain_size, t, schedule.theta, rng)
        return ConfidenceDraw(value, 0.0)
    s = _shift_of(schedule, t)
    return ConfidenceDraw(sample_shifted_exponential(s, RATE, rng), s)


def schedule_mean(schedule: ConfidenceSchedule, t: int) -> float:
    """Analytic expectation of the iteration-t confidence value."""
    if isinstance(schedule, Constant):
        return schedule.c
    if isinstance(schedule, DeterministicUcb):
        return beta_deterministic(schedule.domain_size, t, schedule.delta)
    if isinstance(schedule, HeuristicUcb):
        return heuristic_beta(schedule.d, t)
    if isinstance(schedule, GammaRandomized):
        return schedule.theta * gamma_shape(schedule.domain_size, t)
    return _shift_of(schedule, t) + 1.0 / RATE


def schedule_quantile(schedule: ConfidenceSchedule, t: int, q: float) -> float:
    """Analytic q-quantile of the iteration-t confidence value.

    Deterministic schedules are point masses, so every quantile equals the
    value itself. Shifted-exponential quantiles are s - log(1 - q)/rate.
    """
    if not 0.0 < q < 1.0:
        raise ConfigurationError("quantile level must lie in (0, 1)")
    if isinstance(schedule, (Constant, DeterministicUcb, HeuristicUcb)):
        return schedule_mean(schedule, t)
    if isinstance(schedule, GammaRandomized):
        kappa = gamma_shape(schedule.domain_size, t)
        return float(_gamma_dist.ppf(q, kappa, scale=schedule.theta))
    return _shift_of(schedule, t) - math.log(1.0 - q) / RATE
