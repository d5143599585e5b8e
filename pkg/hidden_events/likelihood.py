# MIT License

# Copyright (c) 2024 hidden-events developers

# Likelihood
# ..................................................................................................................
# ..................................................................................................................

import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.stats import norm
from tqdm import tqdm

from .calendars import CovariateSpec, HolidayCalendar, default_calendar
from .counts import CountTriangle
from .errors import ConvergenceError, DataError, FitError, NonIdentifiableError
from .timechange import ExposureModel, TimeChangedDistribution
from .utils import dumps, group_in_batches, segment_cumsum, segment_starts

DEFAULT_BATCH_SIZE = 50_000


@dataclass
class FitOptions:

    """

    Stopping and safeguarding rules of the Newton-Raphson iteration.

    Args:
        max_iterations: maximum number of accepted Newton steps
        gradient_tolerance: convergence threshold on the sup-norm of the score
        step_tolerance: stop when the sup-norm of an accepted step falls below this
        ridge_floor: first ridge added to the information when it is not positive definite
        ridge_max: largest ridge tried, relative to the largest diagonal entry of the information
        step_halving_max: maximum number of step halvings per iteration
        boundary_bound: coefficients beyond this absolute value, or standard errors wider than it,
            signal drift to the boundary
        max_batch_size: maximum number of (t, s) pairs evaluated at once

    """

    max_iterations: int = 100
    gradient_tolerance: float = 1e-6
    step_tolerance: float = 1e-8
    ridge_floor: float = 1e-8
    ridge_max: float = 1e8
    step_halving_max: int = 20
    boundary_bound: float = 25.0
    max_batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        for name in ("gradient_tolerance", "step_tolerance", "ridge_floor", "ridge_max", "boundary_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.step_halving_max < 0:
            raise ValueError("step_halving_max must be non-negative")
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be positive")


# Data layout
# ..................................................................................................................


@dataclass(eq=False)
class _RowBatch:
    lengths: np.ndarray
    signature: np.ndarray
    row_totals: np.ndarray
    cell_row: np.ndarray
    cell_delay: np.ndarray
    cell_count: np.ndarray

    @property
    def padded_starts(self) -> np.ndarray:
        """Position of phi_t(0) of every row in the padded layout of segment_cumsum."""
        return segment_starts(self.lengths) + np.arange(len(self.lengths))


def weighted_gram(codes: np.ndarray, weights: np.ndarray, n_columns: int) -> np.ndarray:

    """

    X' diag(weights) X for 0/1 design rows given by their active column indices.

    Examples:
        >>> codes = np.array([[0, -1], [0, 1]])
        >>> weighted_gram(codes, np.array([1.0, 2.0]), 2).tolist()
        [[3.0, 2.0], [2.0, 2.0]]

    """

    size = n_columns * n_columns
    gram = np.zeros(size)
    for i in range(codes.shape[1]):
        ci = codes[:, i]
        for j in range(codes.shape[1]):
            cj = codes[:, j]
            ok = (ci >= 0) & (cj >= 0)
            gram += np.bincount(ci[ok] * n_columns + cj[ok], weights=weights[ok], minlength=size)
    return gram.reshape(n_columns, n_columns)


def weighted_sum(codes: np.ndarray, weights: np.ndarray, n_columns: int) -> np.ndarray:
    """X' weights for 0/1 design rows given by their active column indices."""
    total = np.zeros(n_columns)
    for i in range(codes.shape[1]):
        ci = codes[:, i]
        ok = ci >= 0
        total += np.bincount(ci[ok], weights=weights[ok], minlength=n_columns)
    return total


class LikelihoodData:

    """

    Precomputed layout of a count triangle for likelihood evaluation.

    Occurrence rows with at least one observed event are split in batches of at most
    max_batch_size (t, s) pairs. Pairs are mapped to the distinct design vectors
    (signatures) they share, so the exposures are computed once per signature.

    Args:
        triangle: observed counts
        spec: covariate specification
        cal: holiday calendar (its origin must match the triangle's)
        truncation: keep the right-truncation term of the likelihood
        max_batch_size: maximum number of pairs per batch

    """

    def __init__(
        self,
        triangle: CountTriangle,
        spec: CovariateSpec,
        cal: HolidayCalendar,
        truncation: bool = True,
        max_batch_size: int = DEFAULT_BATCH_SIZE,
    ):
        if cal.origin != triangle.origin:
            raise DataError(
                f"calendar origin {cal.origin} differs from the data origin {triangle.origin}"
            )
        self.spec = spec
        self.tau = triangle.eval_date
        self.truncation = truncation
        self.n_columns = spec.n_columns

        totals = triangle.row_totals
        keep = totals > 0
        rows = triangle.days[keep]
        row_totals = totals[keep].astype(float)
        lengths = self.tau - rows + 1
        cell_row = np.searchsorted(rows, triangle.occurrence)

        self.rows = rows
        self.n_events = int(triangle.count.sum())
        self.n_cells = int(len(triangle.count))

        raw = []
        unique_blocks = []
        for batch in group_in_batches(lengths.tolist(), max_batch_size=max_batch_size):
            first, last = batch[0], batch[-1]
            batch_lengths = lengths[first : last + 1]
            t_pairs = np.repeat(rows[first : last + 1], batch_lengths)
            offsets = np.arange(batch_lengths.sum()) - np.repeat(
                segment_starts(batch_lengths), batch_lengths
            )
            codes = spec.design_codes(t_pairs, t_pairs + offsets, cal)
            uniq, inverse = _unique_rows(codes)
            lo, hi = np.searchsorted(cell_row, [first, last + 1])
            raw.append((first, last, batch_lengths, inverse, lo, hi))
            unique_blocks.append(uniq)

        self.signature_codes, merged = _unique_rows(np.vstack(unique_blocks))
        self.batches: List[_RowBatch] = []
        offset = 0
        for (first, last, batch_lengths, inverse, lo, hi), uniq in zip(raw, unique_blocks):
            self.batches.append(
                _RowBatch(
                    lengths=batch_lengths,
                    signature=merged[offset + inverse],
                    row_totals=row_totals[first : last + 1],
                    cell_row=cell_row[lo:hi] - first,
                    cell_delay=triangle.delay[lo:hi],
                    cell_count=triangle.count[lo:hi].astype(float),
                )
            )
            offset += len(uniq)

    @property
    def n_signatures(self) -> int:
        return len(self.signature_codes)

    def signature_exposures(self, gamma: np.ndarray) -> np.ndarray:
        padded = np.append(np.asarray(gamma, dtype=float), 0.0)
        return np.exp(padded[self.signature_codes].sum(axis=1))

    def split(self, theta: np.ndarray, dist: TimeChangedDistribution):
        theta = np.asarray(theta, dtype=float)
        if len(theta) != self.n_columns + dist.n_params:
            raise ValueError(
                f"expected {self.n_columns + dist.n_params} parameters, got {len(theta)}"
            )
        gamma = theta[: self.n_columns]
        if dist.n_params:
            dist = dist.with_log_sigma(theta[self.n_columns])
        return gamma, dist

    def loglik_exponential(self, gamma: np.ndarray) -> float:
        alpha_sig = self.signature_exposures(gamma)
        total = 0.0
        for batch in self.batches:
            alpha = alpha_sig[batch.signature]
            phi = segment_cumsum(alpha, batch.lengths)
            starts = batch.padded_starts
            lower = starts[batch.cell_row] + batch.cell_delay
            alpha_cell = alpha[lower - batch.cell_row]
            total -= np.sum(batch.cell_count * (phi[lower] - np.log(-np.expm1(-alpha_cell))))
            if self.truncation:
                end = phi[starts + batch.lengths]
                total -= np.sum(batch.row_totals * np.log(-np.expm1(-end)))
        return float(total)

    def evaluate(
        self, theta: np.ndarray, dist: TimeChangedDistribution, order: int = 2
    ) -> Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:

        """

        Loglikelihood and, up to the given order, its score and Hessian in theta.

        theta holds gamma followed, for the lognormal kind, by log(sigma).

        Returns:
            (loglik, score or None, hessian or None); loglik is -inf when an observed cell
            has zero probability.

        """

        theta = np.asarray(theta, dtype=float)
        if dist.n_params and len(theta) == self.n_columns + 1 and not abs(theta[-1]) < 50.0:
            return -np.inf, None, None
        gamma, dist = self.split(theta, dist)
        P = self.n_columns
        n_theta = P + dist.n_params
        with_sigma = dist.n_params > 0
        alpha_sig = self.signature_exposures(gamma)

        loglik = 0.0
        omega_sig = np.zeros(self.n_signatures)
        outer = np.zeros((n_theta, n_theta))
        score_rho = 0.0

        for batch in self.batches:
            alpha = alpha_sig[batch.signature]
            phi = segment_cumsum(alpha, batch.lengths)
            starts = batch.padded_starts
            lower = starts[batch.cell_row] + batch.cell_delay
            upper = lower + 1
            end = starts + batch.lengths
            N = batch.cell_count
            NT = batch.row_totals if self.truncation else np.zeros_like(batch.row_totals)

            A, B, T = phi[lower], phi[upper], phi[end]
            FA = dist.cdf(A)
            p = np.where(FA < 0.5, dist.cdf(B) - FA, dist.sf(A) - dist.sf(B))
            FT = dist.cdf(T)
            if np.any(p <= 0) or np.any((NT > 0) & (FT <= 0)):
                return -np.inf, None, None
            with np.errstate(divide="ignore"):
                loglik += np.sum(N * np.log(p)) - np.sum(NT * np.log(np.where(NT > 0, FT, 1.0)))
            if order < 1:
                continue
            FT = np.where(NT > 0, FT, 1.0)

            fA, fB, fT = dist.pdf(A), dist.pdf(B), dist.pdf(T)
            size = len(phi)
            weights = (
                np.bincount(lower, weights=-N * fA / p, minlength=size)
                + np.bincount(upper, weights=N * fB / p, minlength=size)
                + np.bincount(end, weights=-NT * fT / FT, minlength=size)
            )
            # W_i: total weight placed at phi_t(k) for k > i, within the row of pair i
            cumulative = np.cumsum(weights)
            pair_row = np.repeat(np.arange(len(batch.lengths)), batch.lengths)
            pair_pad = np.arange(len(alpha)) + pair_row
            tail = cumulative[end][pair_row] - cumulative[pair_pad]
            omega_sig += np.bincount(batch.signature, weights=alpha * tail, minlength=self.n_signatures)

            if with_sigma:
                rA, rB, rT = dist.cdf_rho(A), dist.cdf_rho(B), dist.cdf_rho(T)
                r_cell = (rB - rA) / p
                score_rho += np.sum(N * r_cell) - np.sum(NT * rT / FT)

            if order < 2:
                continue

            ax = np.zeros((len(alpha), P))
            codes = self.signature_codes[batch.signature]
            for k in range(codes.shape[1]):
                ok = codes[:, k] >= 0
                ax[np.flatnonzero(ok), codes[ok, k]] += alpha[ok]
            U = segment_cumsum(ax, batch.lengths)
            UA, UB, UT = U[lower], U[upper], U[end]

            dA, dB, dT = dist.pdf_derivative(A), dist.pdf_derivative(B), dist.pdf_derivative(T)
            g = (fB / p)[:, None] * UB - (fA / p)[:, None] * UA
            gT = (fT / FT)[:, None] * UT
            block = (
                UB.T @ ((N * dB / p)[:, None] * UB)
                - UA.T @ ((N * dA / p)[:, None] * UA)
                - g.T @ (N[:, None] * g)
                - UT.T @ ((NT * dT / FT)[:, None] * UT)
                + gT.T @ (NT[:, None] * gT)
            )
            outer[:P, :P] += block

            if with_sigma:
                sA, sB, sT = dist.pdf_rho(A), dist.pdf_rho(B), dist.pdf_rho(T)
                qA, qB, qT = dist.cdf_rho2(A), dist.cdf_rho2(B), dist.cdf_rho2(T)
                mixed_cell = (sB / p)[:, None] * UB - (sA / p)[:, None] * UA - g * r_cell[:, None]
                mixed_end = (sT / FT)[:, None] * UT - gT * (rT / FT)[:, None]
                mixed = N @ mixed_cell - NT @ mixed_end
                outer[:P, P] += mixed
                outer[P, :P] += mixed
                outer[P, P] += np.sum(N * ((qB - qA) / p - r_cell**2)) - np.sum(
                    NT * (qT / FT - (rT / FT) ** 2)
                )

        if order < 1:
            return float(loglik), None, None

        score = np.zeros(n_theta)
        score[:P] = weighted_sum(self.signature_codes, omega_sig, P)
        if with_sigma:
            score[P] = score_rho
        if order < 2:
            return float(loglik), score, None

        hessian = outer
        hessian[:P, :P] += weighted_gram(self.signature_codes, omega_sig, P)
        hessian = 0.5 * (hessian + hessian.T)
        return float(loglik), score, hessian


def _unique_rows(codes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if codes.shape[1] == 0:
        return np.zeros((1, 0), dtype=np.int64), np.zeros(codes.shape[0], dtype=np.int64)
    uniq, inverse = np.unique(codes, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def _theta(model: ExposureModel, dist: TimeChangedDistribution) -> np.ndarray:
    if dist.n_params:
        return np.append(model.gamma, np.log(dist.sigma))
    return model.gamma.copy()


def _data(model, triangle, cal, data) -> LikelihoodData:
    if data is not None:
        return data
    return LikelihoodData(triangle, model.spec, cal)


# Loglikelihood, score and Hessian
# ..................................................................................................................


def loglik_generic(
    model: ExposureModel,
    triangle: CountTriangle,
    dist: TimeChangedDistribution,
    cal: HolidayCalendar,
    data: Optional[LikelihoodData] = None,
) -> float:

    """

    Right-truncated loglikelihood sum N_{t,s} log p_{t,s} - sum N_t^Obs log p_t^Obs(tau).

    Returns -inf when an observed cell has zero probability under the parameters.

    """

    data = _data(model, triangle, cal, data)
    return data.evaluate(_theta(model, dist), dist, order=0)[0]


def loglik_exponential(
    model: ExposureModel,
    triangle: CountTriangle,
    cal: HolidayCalendar,
    data: Optional[LikelihoodData] = None,
) -> float:
    """Loglikelihood for the unit-exponential time-changed delay, from the exposures directly."""
    data = _data(model, triangle, cal, data)
    return data.loglik_exponential(model.gamma)


def score(
    model: ExposureModel,
    triangle: CountTriangle,
    dist: TimeChangedDistribution,
    cal: HolidayCalendar,
    data: Optional[LikelihoodData] = None,
) -> np.ndarray:

    """

    Analytic gradient of the loglikelihood in gamma, followed by the derivative in log(sigma)
    for the lognormal kind.

    """

    data = _data(model, triangle, cal, data)
    loglik, grad, _ = data.evaluate(_theta(model, dist), dist, order=1)
    if grad is None:
        raise FitError("the loglikelihood is infinite at these parameters")
    return grad


def hessian(
    model: ExposureModel,
    triangle: CountTriangle,
    dist: TimeChangedDistribution,
    cal: HolidayCalendar,
    data: Optional[LikelihoodData] = None,
) -> np.ndarray:
    data = _data(model, triangle, cal, data)
    loglik, _, hess = data.evaluate(_theta(model, dist), dist, order=2)
    if hess is None:
        raise FitError("the loglikelihood is infinite at these parameters")
    return hess


# Fitting
# ..................................................................................................................


@dataclass(eq=False)
class FitResult:

    """

    Outcome of a Newton-Raphson fit.

    `hessian` and `score` are taken in theta = (gamma, [log sigma]); `trace` holds the
    loglikelihood at the start and after every accepted step.

    """

    model: ExposureModel
    dist: TimeChangedDistribution
    loglik: float
    score: np.ndarray
    hessian: np.ndarray
    iterations: int
    converged: bool
    boundary: bool = False
    message: str = ""
    trace: List[float] = field(default_factory=list)
    n_events: int = 0
    n_cells: int = 0

    @property
    def sigma(self) -> Optional[float]:
        return self.dist.sigma if self.dist.kind == "lognormal" else None

    @property
    def score_norm(self) -> float:
        return float(np.max(np.abs(self.score))) if len(self.score) else 0.0

    @property
    def theta(self) -> np.ndarray:
        return _theta(self.model, self.dist)

    @property
    def parameter_names(self) -> List[str]:
        names = list(self.model.spec.column_names)
        if self.dist.kind == "lognormal":
            names.append("log_sigma")
        return names

    def covariance(self) -> Optional[np.ndarray]:
        """Inverse of the observed information -H, or None when it is not positive definite."""
        information = -self.hessian
        if not np.all(np.isfinite(information)):
            return None
        try:
            factor = linalg.cho_factor(information)
        except linalg.LinAlgError:
            return None
        return linalg.cho_solve(factor, np.eye(len(information)))

    def standard_errors(self) -> np.ndarray:
        cov = self.covariance()
        if cov is None:
            return np.full(len(self.theta), np.nan)
        return np.sqrt(np.diag(cov))

    def to_dict(self) -> Dict:
        return {
            "spec": self.model.spec.to_dict(),
            "distribution": self.dist.to_dict(),
            "parameters": dict(zip(self.parameter_names, self.theta.tolist())),
            "standard_errors": dict(zip(self.parameter_names, self.standard_errors().tolist())),
            "loglik": self.loglik,
            "score_norm": self.score_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "boundary": self.boundary,
            "message": self.message,
            "trace": list(self.trace),
            "n_events": self.n_events,
            "n_cells": self.n_cells,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: Dict) -> "FitResult":
        spec = CovariateSpec.from_dict(d["spec"])
        dist = TimeChangedDistribution.from_dict(d["distribution"])
        gamma = np.array([d["parameters"][name] for name in spec.column_names])
        n_theta = len(gamma) + dist.n_params
        return cls(
            model=ExposureModel(spec, gamma),
            dist=dist,
            loglik=d["loglik"],
            score=np.full(n_theta, np.nan),
            hessian=np.full((n_theta, n_theta), np.nan),
            iterations=d["iterations"],
            converged=d["converged"],
            boundary=d.get("boundary", False),
            message=d.get("message", ""),
            trace=d.get("trace", []),
            n_events=d.get("n_events", 0),
            n_cells=d.get("n_cells", 0),
        )

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        return cls.from_dict(json.loads(text))


def check_identifiability(data: LikelihoodData, tolerance: float = 1e-9) -> List[str]:

    """

    Design columns that the observed pairs cannot identify: columns never active, and
    columns found linearly dependent on the others by a pivoted QR decomposition.

    """

    P = data.n_columns
    names = data.spec.column_names
    if P == 0:
        return []
    ones = np.ones(data.n_signatures)
    activity = weighted_sum(data.signature_codes, ones, P)
    active = np.flatnonzero(activity > 0)
    offending = [names[j] for j in np.flatnonzero(activity == 0)]
    if len(active):
        gram = weighted_gram(data.signature_codes, ones, P)[np.ix_(active, active)]
        R, pivots = linalg.qr(gram, mode="r", pivoting=True)
        diagonal = np.abs(np.diag(R))
        rank = int(np.sum(diagonal > tolerance * diagonal[0]))
        offending += [names[active[j]] for j in sorted(pivots[rank:])]
    return offending


def initial_parameters(triangle: CountTriangle, spec: CovariateSpec) -> np.ndarray:

    """

    Starting values from the pooled hazard exposures of the observed delays.

    The intercept starts at the log hazard exposure of the first delay bin (or of all
    delays pooled) and every other delay bin at its log ratio to the first one. Other
    coefficients start at 0.

    """

    from .binning import hazard_table

    gamma = np.zeros(spec.n_columns)
    intercept = spec.find("intercept")
    if intercept is None:
        return gamma
    table = hazard_table(triangle)
    delay = spec.find("delay")

    def pooled(lo: int, hi: Optional[int]) -> float:
        sel = (table.delay >= lo) if hi is None else (table.delay >= lo) & (table.delay < hi)
        n_geq = table.n_geq[sel].sum()
        if n_geq == 0:
            return np.nan
        h = table.n_equal[sel].sum() / n_geq
        with np.errstate(divide="ignore"):
            return float(np.clip(np.log(-np.log1p(-h)), -10.0, 10.0))

    if delay is None:
        value = pooled(0, None)
        gamma[intercept[1].start] = value if np.isfinite(value) else 0.0
        return gamma

    effect, columns = delay
    bounds = list(effect.starts[1:]) + [None]
    levels = [pooled(lo, hi) for lo, hi in zip(effect.starts, bounds)]
    base = levels[0] if np.isfinite(levels[0]) else 0.0
    gamma[intercept[1].start] = base
    for column, value in zip(range(columns.start, columns.stop), levels[1:]):
        gamma[column] = value - base if np.isfinite(value) else 0.0
    return gamma


def _newton_step(score_vec: np.ndarray, hess: np.ndarray, opts: FitOptions):
    information = -hess
    scale = max(1.0, float(np.max(np.abs(np.diag(information))))) if len(hess) else 1.0
    ridge = 0.0
    identity = np.eye(len(hess))
    while True:
        try:
            factor = linalg.cho_factor(information + ridge * identity)
            return linalg.cho_solve(factor, score_vec), ridge
        except (linalg.LinAlgError, ValueError):
            ridge = opts.ridge_floor * scale if ridge == 0.0 else 10.0 * ridge
            if ridge == 0.0 or ridge > opts.ridge_max * scale:
                return None, ridge


def fit(
    triangle: CountTriangle,
    spec: CovariateSpec,
    dist: Optional[TimeChangedDistribution] = None,
    cal: Optional[HolidayCalendar] = None,
    init: Optional[Union[np.ndarray, ExposureModel]] = None,
    opts: Optional[FitOptions] = None,
    truncation: bool = True,
    data: Optional[LikelihoodData] = None,
    progress_bar: bool = False,
) -> FitResult:

    """

    Maximum likelihood fit of the exposure model by Newton-Raphson.

    Every iteration solves (-H + ridge I) delta = S, with the ridge escalated from
    opts.ridge_floor by factors of 10 until the system is positive definite, and halves the
    step until the loglikelihood does not decrease.

    Args:
        triangle: observed counts at the computation date
        spec: covariate specification
        dist: law of the time-changed delay (default unit exponential); for the lognormal
            kind its sigma is the starting value
        cal: holiday calendar (default: the packaged calendar at the triangle's origin)
        init: starting coefficients (default from the hazard table)
        opts: stopping and safeguarding rules
        truncation: keep the right-truncation term of the likelihood
        data: precomputed layout, reused across fits of the same triangle and spec
        progress_bar: print a progress bar (default is False)

    Raises:
        NonIdentifiableError: collinear or never-active design columns
        ConvergenceError: the information could not be repaired by a ridge
        FitError: the starting point has zero likelihood

    """

    dist = dist or TimeChangedDistribution()
    cal = cal or default_calendar(triangle.origin)
    opts = opts or FitOptions()
    if data is None:
        data = LikelihoodData(triangle, spec, cal, truncation, opts.max_batch_size)

    offending = check_identifiability(data)
    if offending:
        raise NonIdentifiableError(
            f"the design does not identify: {', '.join(offending)}", offending
        )
    n_theta = spec.n_columns + dist.n_params
    if data.n_cells < n_theta:
        raise NonIdentifiableError(
            f"{data.n_cells} informative cells for {n_theta} parameters", []
        )

    if init is None:
        theta = initial_parameters(triangle, spec)
    elif isinstance(init, ExposureModel):
        theta = init.gamma.copy()
    else:
        theta = np.asarray(init, dtype=float).copy()
    if dist.n_params and len(theta) == spec.n_columns:
        theta = np.append(theta, np.log(dist.sigma))

    loglik, grad, hess = data.evaluate(theta, dist, order=2)
    if not np.isfinite(loglik):
        raise FitError("the starting parameters give an observed cell zero probability")

    def result(converged: bool, message: str) -> FitResult:
        gamma, fitted = data.split(theta, dist)
        return FitResult(
            model=ExposureModel(spec, gamma),
            dist=fitted,
            loglik=loglik,
            score=grad,
            hessian=hess,
            iterations=iterations,
            converged=converged,
            message=message,
            trace=trace,
            n_events=data.n_events,
            n_cells=data.n_cells,
        )

    trace = [loglik]
    iterations = 0
    converged = False
    message = ""
    if progress_bar:
        print("Fitting exposure model...")
    bar = tqdm(total=opts.max_iterations, disable=not progress_bar)

    while True:
        if np.max(np.abs(grad), initial=0.0) < opts.gradient_tolerance:
            converged, message = True, "gradient tolerance reached"
            break
        if iterations >= opts.max_iterations:
            message = "maximum number of iterations reached"
            break
        step, ridge = _newton_step(grad, hess, opts)
        if step is None:
            bar.close()
            raise ConvergenceError(
                f"the information matrix stays singular with a ridge of {ridge:.3g}",
                result(False, "singular information"),
            )
        factor = 1.0
        accepted = False
        for _ in range(opts.step_halving_max + 1):
            candidate = theta + factor * step
            value = data.evaluate(candidate, dist, order=0)[0]
            if np.isfinite(value) and value >= loglik - 1e-12 * max(1.0, abs(loglik)):
                accepted = True
                break
            factor /= 2.0
        if not accepted:
            message = "step halving could not increase the loglikelihood"
            break
        theta = candidate
        iterations += 1
        bar.update(1)
        loglik, grad, hess = data.evaluate(theta, dist, order=2)
        trace.append(loglik)
        if np.max(np.abs(factor * step)) < opts.step_tolerance:
            converged = np.max(np.abs(grad), initial=0.0) < opts.gradient_tolerance
            message = "gradient tolerance reached" if converged else "step tolerance reached"
            break
    bar.close()

    fitted = result(converged, message)
    fitted.boundary = _at_boundary(theta, hess, opts)
    if fitted.boundary:
        fitted.converged = False
        fitted.message = "parameters drift towards the boundary of the parameter space"
    if not fitted.converged:
        warnings.warn(f"fit did not converge: {fitted.message}", RuntimeWarning)
    return fitted


def _at_boundary(theta: np.ndarray, hess: np.ndarray, opts: FitOptions) -> bool:
    if np.any(np.abs(theta) > opts.boundary_bound):
        return True
    if len(hess) == 0:
        return False
    if not np.all(np.isfinite(hess)):
        return True
    eigenvalues = np.linalg.eigvalsh(-hess)
    # a standard error wider than the parameter box counts as a flat direction
    floor = max(1e-10 * max(1.0, eigenvalues[-1]), opts.boundary_bound**-2)
    return bool(eigenvalues[0] <= floor)


def confidence_intervals(fit_result: FitResult, level: float = 0.95) -> pd.DataFrame:

    """

    Wald intervals for the exposure multipliers exp(gamma) from the observed information.

    Reference levels are listed with the point interval {1}. For the lognormal kind the
    last row is sigma. When -H is not positive definite the intervals are NaN.

    """

    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if not fit_result.converged:
        warnings.warn("confidence intervals of a fit that did not converge", RuntimeWarning)
    z = norm.ppf(0.5 + level / 2.0)
    estimate = fit_result.theta
    se = fit_result.standard_errors()
    if np.any(np.isnan(se)):
        warnings.warn(
            "the information matrix is not positive definite: intervals withheld",
            RuntimeWarning,
        )
    names = list(fit_result.model.spec.column_names)
    if fit_result.dist.kind == "lognormal":
        names.append("sigma")
    frame = pd.DataFrame(
        {
            "parameter": names,
            "estimate": estimate,
            "std_error": se,
            "multiplier": np.exp(estimate),
            "lower": np.exp(estimate - z * se),
            "upper": np.exp(estimate + z * se),
            "reference": False,
        }
    )
    references = fit_result.model.spec.reference_names
    if references:
        frame = pd.concat(
            [
                frame,
                pd.DataFrame(
                    {
                        "parameter": references,
                        "estimate": 0.0,
                        "std_error": 0.0,
                        "multiplier": 1.0,
                        "lower": 1.0,
                        "upper": 1.0,
                        "reference": True,
                    }
                ),
            ],
            ignore_index=True,
        )
    return frame
