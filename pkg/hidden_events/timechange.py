# MIT License

# Copyright (c) 2024 hidden-events developers

# Time change
# ..................................................................................................................
# ..................................................................................................................

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.special import ndtr

from .calendars import CovariateSpec, HolidayCalendar

DISTRIBUTIONS = ("exponential", "lognormal")

TAIL_TOLERANCE = 1e-6
MAX_HORIZON = 3650

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _norm_pdf(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


@dataclass(frozen=True)
class TimeChangedDistribution:

    """

    Law of the time-changed delay: unit exponential, or lognormal with mu = 0 and scale sigma.

    Args:
        kind: 'exponential' or 'lognormal'
        sigma: lognormal scale (ignored by the exponential kind)

    Examples:
        >>> round(float(TimeChangedDistribution().cdf(0.22)), 6)
        0.197481
        >>> float(TimeChangedDistribution("lognormal", 1.0).cdf(1.0))
        0.5

    """

    kind: str = "exponential"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise ValueError(f"kind should be one of {DISTRIBUTIONS}, got {self.kind!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive")
        if self.kind == "exponential":
            object.__setattr__(self, "sigma", 1.0)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_params(self) -> int:
        """Number of free distribution parameters (log sigma for the lognormal kind)."""
        return 1 if self.kind == "lognormal" else 0

    def with_log_sigma(self, rho: float) -> "TimeChangedDistribution":
        if self.kind == "exponential":
            return self
        return TimeChangedDistribution(self.kind, float(np.exp(rho)))

    def _z(self, u):
        with np.errstate(divide="ignore"):
            return np.log(u) / self.sigma

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return -np.expm1(-u)
        return np.where(u > 0, ndtr(self._z(np.maximum(u, 0.0))), 0.0)

    def sf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return np.exp(-u)
        return np.where(u > 0, ndtr(-self._z(np.maximum(u, 0.0))), 1.0)

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return np.exp(-u)
        ok = (u > 0) & np.isfinite(u)
        safe = np.where(ok, u, 1.0)
        z = self._z(safe)
        return np.where(ok, _norm_pdf(z) / (safe * self.sigma), 0.0)

    def pdf_derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return -np.exp(-u)
        ok = (u > 0) & np.isfinite(u)
        safe = np.where(ok, u, 1.0)
        z = self._z(safe)
        density = _norm_pdf(z) / (safe * self.sigma)
        return np.where(ok, -density * (z / self.sigma + 1.0) / safe, 0.0)

    # derivatives with respect to rho = log(sigma), zero for the exponential kind

    def cdf_rho(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return np.zeros_like(u)
        ok = (u > 0) & np.isfinite(u)
        z = self._z(np.where(ok, u, 1.0))
        return np.where(ok, -_norm_pdf(z) * z, 0.0)

    def cdf_rho2(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return np.zeros_like(u)
        ok = (u > 0) & np.isfinite(u)
        z = self._z(np.where(ok, u, 1.0))
        return np.where(ok, z * _norm_pdf(z) * (1.0 - z * z), 0.0)

    def pdf_rho(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return np.zeros_like(u)
        ok = (u > 0) & np.isfinite(u)
        safe = np.where(ok, u, 1.0)
        z = self._z(safe)
        density = _norm_pdf(z) / (safe * self.sigma)
        return np.where(ok, density * (z * z - 1.0), 0.0)

    def sample(self, rng: np.random.Generator, size=None):
        """Draws of the time-changed delay."""
        if self.kind == "exponential":
            return rng.standard_exponential(size)
        return np.exp(self.sigma * rng.standard_normal(size))

    def to_dict(self) -> Dict:
        if self.kind == "exponential":
            return {"kind": self.kind}
        return {"kind": self.kind, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: Dict) -> "TimeChangedDistribution":
        return cls(d["kind"], d.get("sigma", 1.0))


def _check_support(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("the time-changed delay is non-negative")
    return u


def distribution_cdf(dist: TimeChangedDistribution, u):
    return dist.cdf(_check_support(u))


def distribution_sf(dist: TimeChangedDistribution, u):
    return dist.sf(_check_support(u))


def distribution_pdf(dist: TimeChangedDistribution, u):
    return dist.pdf(_check_support(u))


def distribution_pdf_derivative(dist: TimeChangedDistribution, u):

    """

    Derivative of the density of the time-changed delay.

    Examples:
        >>> float(distribution_pdf_derivative(TimeChangedDistribution(), 0.0))
        -1.0

    """

    return dist.pdf_derivative(_check_support(u))


# Exposure model
# ..................................................................................................................


class ExposureModel:

    """

    Log-linear daily observation exposure alpha_{t,s} = exp(x'_{t,s} gamma).

    Args:
        spec: covariate specification
        gamma: coefficient vector, one entry per design column (default all zeros)

    """

    def __init__(self, spec: CovariateSpec, gamma: Optional[np.ndarray] = None):
        if gamma is None:
            gamma = np.zeros(spec.n_columns)
        gamma = np.asarray(gamma, dtype=float).reshape(-1)
        if len(gamma) != spec.n_columns:
            raise ValueError(
                f"gamma has {len(gamma)} entries, the specification {spec.n_columns} columns"
            )
        self.spec = spec
        self.gamma = gamma

    def linear_predictor(self, t, s, cal: HolidayCalendar) -> np.ndarray:
        return self.spec.linear_predictor(self.gamma, t, s, cal)

    def exposures(self, t, s, cal: HolidayCalendar) -> np.ndarray:
        return np.exp(self.linear_predictor(t, s, cal))

    def coefficients(self) -> Dict[str, float]:
        return dict(zip(self.spec.column_names, self.gamma.tolist()))

    def to_dict(self) -> Dict:
        return {"spec": self.spec.to_dict(), "gamma": self.gamma.tolist()}

    @classmethod
    def from_dict(cls, d: Dict) -> "ExposureModel":
        return cls(CovariateSpec.from_dict(d["spec"]), np.asarray(d["gamma"], dtype=float))

    def __repr__(self):
        return f"ExposureModel(columns={self.spec.n_columns})"


def exposure(model: ExposureModel, t: int, s: int, cal: HolidayCalendar) -> float:
    if s < t:
        raise ValueError(f"observation day {s} precedes occurrence day {t}")
    return float(model.exposures([t], [s], cal)[0])


@dataclass(frozen=True, eq=False)
class ExposureSchedule:

    """

    Exposures alpha_{t,t}, alpha_{t,t+1}, ... of one occurrence date, up to a horizon.

    Examples:
        >>> sched = ExposureSchedule(10, np.array([0.1, 0.1, 0.02]))
        >>> sched.horizon, round(phi(10, 3, sched), 12)
        (3, 0.22)

    """

    t: int
    alphas: np.ndarray

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float).reshape(-1)
        if np.any(~(alphas > 0)):
            raise ValueError("exposures must be strictly positive")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "cumulative", np.concatenate([[0.0], np.cumsum(alphas)]))

    @property
    def horizon(self) -> int:
        return len(self.alphas)


def exposure_schedule(
    model: ExposureModel,
    t: int,
    cal: HolidayCalendar,
    horizon: Optional[int] = None,
    dist: Optional[TimeChangedDistribution] = None,
    max_horizon: int = MAX_HORIZON,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> ExposureSchedule:

    """

    Exposure schedule of occurrence date t.

    With an explicit horizon the schedule has exactly that many days. Otherwise it stops at
    the smallest H with 1 - F(phi_t(H)) < tail_tolerance, and at max_horizon at the latest.

    """

    if horizon is not None:
        if horizon < 1:
            raise ValueError("horizon must be positive")
        s = np.arange(t, t + horizon)
        return ExposureSchedule(t, model.exposures(np.full(horizon, t), s, cal))

    dist = dist or TimeChangedDistribution()
    length = min(64, max_horizon)
    while True:
        s = np.arange(t, t + length)
        alphas = model.exposures(np.full(length, t), s, cal)
        tail = dist.sf(np.cumsum(alphas))
        below = np.flatnonzero(tail < tail_tolerance)
        if len(below):
            return ExposureSchedule(t, alphas[: below[0] + 1])
        if length >= max_horizon:
            return ExposureSchedule(t, alphas)
        length = min(4 * length, max_horizon)


def phi(t: int, d: int, sched: ExposureSchedule) -> float:

    """

    Time change phi_t(d): the sum of the first d exposures of occurrence date t.

    Examples:
        >>> phi(1, 0, ExposureSchedule(1, np.ones(5)))
        0.0
        >>> phi(1, 4, ExposureSchedule(1, np.ones(5)))
        4.0

    """

    if t != sched.t:
        raise ValueError(f"schedule belongs to occurrence day {sched.t}, not {t}")
    if d < 0 or d > sched.horizon:
        raise ValueError(f"delay {d} outside the schedule horizon {sched.horizon}")
    return float(sched.cumulative[d])


def cell_probability(
    t: int, s: int, sched: ExposureSchedule, dist: TimeChangedDistribution
) -> float:

    """

    Probability p_{t,s} that an event of occurrence date t is observed on date s.

    Examples:
        >>> sched = ExposureSchedule(1, np.full(3, 0.1))
        >>> round(cell_probability(1, 1, sched, TimeChangedDistribution()), 6)
        0.095163

    """

    if s < t:
        raise ValueError(f"observation day {s} precedes occurrence day {t}")
    lower = phi(t, s - t, sched)
    upper = phi(t, s - t + 1, sched)
    if dist.cdf(lower) < 0.5:
        p = dist.cdf(upper) - dist.cdf(lower)
    else:
        p = dist.sf(lower) - dist.sf(upper)
    return float(min(max(p, 0.0), 1.0))


def observed_probability(
    t: int, tau: int, sched: ExposureSchedule, dist: TimeChangedDistribution
) -> float:
    """Probability p_t^Obs(tau) that an event of occurrence date t is observed by tau."""
    if tau < t:
        raise ValueError("tau precedes the occurrence date")
    return float(dist.cdf(phi(t, tau - t + 1, sched)))


def sample(dist: TimeChangedDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)
