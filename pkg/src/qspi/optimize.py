"""Phase learning: multi-start Nelder-Mead on the analytic decision error."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .decision import DecisionProblem, h_s, perr_analytic
from .errors import DegenerateFit, NonFiniteObjective
from .laurent import PhaseSequence, build_laurent_recursive, recursive_coefficients
from .response import _spectrum, response_coefficients

log = logging.getLogger(__name__)

COARSE_ITERS_PER_ANGLE = 200
REFINE_ITERS_PER_ANGLE = 2000
MAX_POLISH_ROUNDS = 25
POLISH_GAIN = 1e-10


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    keep_top: int = 4
    max_iterations: Optional[int] = None  # None: 2000 (d + 1)
    angle_tolerance: float = 1e-5
    objective_tolerance: float = 1e-5
    rng_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.keep_top < 1:
            raise ValueError("restarts and keep_top must be >= 1")
        if self.keep_top > self.restarts:
            raise ValueError("keep_top cannot exceed restarts")
        if not (self.angle_tolerance > 0 and self.objective_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    def refine_cap(self, degree: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return REFINE_ITERS_PER_ANGLE * (degree + 1)

    def coarse_cap(self, degree: int) -> int:
        return min(COARSE_ITERS_PER_ANGLE * (degree + 1), self.refine_cap(degree))


@dataclass(frozen=True)
class NelderMeadResult:
    point: np.ndarray
    value: float
    iterations: int
    converged: bool
    trace: tuple = ()


@dataclass(frozen=True)
class OptimizationResult:
    phases: PhaseSequence
    p_err: float
    iterations: int
    converged: bool
    restart_index: int


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    start,
    cfg: OptimizerConfig,
    max_iterations: Optional[int] = None,
    step: float = 0.1,
    record_trace: bool = False,
) -> NelderMeadResult:
    """Minimise ``objective`` with the textbook simplex method.

    Coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
    Stops when the simplex objective spread is within
    ``cfg.objective_tolerance`` or every vertex coordinate is within
    ``cfg.angle_tolerance`` of the best vertex, or after ``max_iterations``.
    """
    max_iter = cfg.refine_cap(len(start) - 1) if max_iterations is None else max_iterations

    def fcall(x):
        v = float(objective(x))
        if not math.isfinite(v):
            raise NonFiniteObjective(f"objective returned {v} at {x!r}")
        return v

    x0 = np.asarray(start, dtype=float)
    n = x0.size
    simplex = np.empty((n + 1, n))
    simplex[0] = x0
    for i in range(n):
        simplex[i + 1] = x0
        simplex[i + 1, i] += step
    values = np.array([fcall(v) for v in simplex])

    trace = []
    iterations = 0
    converged = False
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if record_trace:
            trace.append((iterations, float(values[0])))
        spread_f = float(np.max(np.abs(values[1:] - values[0]), initial=0.0))
        spread_x = float(np.max(np.abs(simplex[1:] - simplex[0]), initial=0.0))
        if spread_f <= cfg.objective_tolerance or spread_x <= cfg.angle_tolerance:
            converged = True
            break
        if iterations >= max_iter:
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = fcall(xr)
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = fcall(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + 0.5 * (xr - centroid)  # outside contraction
            fc = fcall(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)  # inside contraction
            fc = fcall(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        best = simplex[0]
        simplex[1:] = best + 0.5 * (simplex[1:] - best)
        values[1:] = [fcall(v) for v in simplex[1:]]

    return NelderMeadResult(simplex[0].copy(), float(values[0]), iterations, converged, tuple(trace))


def polish(objective, start, cfg: OptimizerConfig, max_iterations: int) -> NelderMeadResult:
    """Nelder-Mead rebuilt around its own optimum until a round gains nothing.

    A collapsed simplex often stalls on a ridge; a fresh 0.1-rad simplex at the
    best point lets the search continue.  Iteration counts are summed.
    """
    res = nelder_mead(objective, start, cfg, max_iterations)
    total, converged = res.iterations, res.converged
    for _ in range(MAX_POLISH_ROUNDS):
        nxt = nelder_mead(objective, res.point, cfg, max_iterations)
        total += nxt.iterations
        gain = res.value - nxt.value
        if nxt.value < res.value:
            res = nxt
        converged = nxt.converged
        if gain <= POLISH_GAIN:
            break
    return NelderMeadResult(res.point, res.value, total, converged)


def make_objective(dp: DecisionProblem) -> Callable[[np.ndarray], float]:
    """p_err as a function of the angle vector, through the recursive builder."""
    H = np.array([h_s(s, dp) for s in range(-dp.degree, dp.degree + 1)])

    def objective(angles):
        # raw-array path; the public builders are checked against it in tests
        f, h = recursive_coefficients(angles)
        return float(_spectrum(f, h, dp.kappa) @ H)

    return objective


def evaluate_phases(phases: PhaseSequence) -> float:
    """Decision error of a phase sequence at its own (kappa, beta_th)."""
    dp = DecisionProblem(phases.kappa, phases.beta_th, phases.degree)
    rs = response_coefficients(build_laurent_recursive(phases), phases.kappa)
    return perr_analytic(rs, dp)


def restart_start(seed: int, restart_index: int, dim: int) -> np.ndarray:
    """Initial angles for one restart from a counter-based stream."""
    rng = np.random.Generator(np.random.Philox(key=seed + (restart_index << 64)))
    return rng.uniform(-math.pi, math.pi, size=dim)


def _result(dp, point, iterations, converged, restart_index) -> OptimizationResult:
    phases = PhaseSequence(tuple(float(a) for a in point), dp.kappa, dp.beta_th)
    return OptimizationResult(phases, evaluate_phases(phases), iterations, converged, restart_index)


def _pick_best(results):
    return min(results, key=lambda r: (r.p_err, r.restart_index))


def optimize_phases(dp: DecisionProblem, cfg: OptimizerConfig) -> OptimizationResult:
    """Coarse pass over random restarts, then full refinement of the best few."""
    d = dp.degree
    objective = make_objective(dp)
    coarse_cap = cfg.coarse_cap(d)

    def coarse(i):
        res = nelder_mead(objective, restart_start(cfg.rng_seed, i, d + 1), cfg, coarse_cap)
        return i, res

    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        coarse_runs = list(pool.map(coarse, range(cfg.restarts)))
    coarse_runs.sort(key=lambda item: (item[1].value, item[0]))
    chosen = coarse_runs[: cfg.keep_top]

    def refine(item):
        i, first = item
        res = polish(objective, first.point, cfg, cfg.refine_cap(d))
        return _result(dp, res.point, first.iterations + res.iterations, res.converged, i)

    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        refined = list(pool.map(refine, chosen))
    best = _pick_best(refined)
    log.debug("d=%d best p_err=%.6g from restart %d", d, best.p_err, best.restart_index)
    return best


def warm_start(
    prev: OptimizationResult, new_kappa: float, new_beta_th: float, cfg: OptimizerConfig
) -> OptimizationResult:
    """Re-optimise existing phases for a new (kappa, beta_th); no restarts."""
    d = prev.phases.degree
    dp = DecisionProblem(new_kappa, new_beta_th, d)
    res = polish(make_objective(dp), np.array(prev.phases.angles), cfg, cfg.refine_cap(d))
    out = _result(dp, res.point, res.iterations, res.converged, prev.restart_index)
    drift = np.abs(np.array(out.phases.angles) - np.array(prev.phases.angles))
    rel = drift / np.maximum(np.abs(prev.phases.angles), 1e-12)
    log.info(
        "warm start d=%d kappa %.6g -> %.6g: p_err %.6g -> %.6g, max rel drift %.3g",
        d, prev.phases.kappa, new_kappa, prev.p_err, out.p_err, float(np.max(rel)),
    )
    return out


def transfer_design(
    degree: int, kappa_from: float, kappa_to: float, cfg: OptimizerConfig
) -> tuple:
    """Design at ``kappa_from`` then warm-start to ``kappa_to``, both at beta_th = pi/(4 kappa).

    Returns ``(source, transferred)`` OptimizationResults.
    """
    source = optimize_phases(DecisionProblem.quarter_period(kappa_from, degree), cfg)
    return source, warm_start(source, kappa_to, math.pi / (4 * kappa_to), cfg)


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    stderr: float


def fit_power_law(points) -> PowerLawFit:
    """Least squares of log p_err against log d; slope error from the residuals."""
    pts = [(float(d), float(p)) for d, p in points]
    if len(pts) < 3:
        raise DegenerateFit(f"need at least 3 points, got {len(pts)}")
    if any(d <= 0 or p <= 0 for d, p in pts):
        raise DegenerateFit("power-law fit needs positive d and p_err")
    x = np.log([d for d, _ in pts])
    y = np.log([p for _, p in pts])
    if np.ptp(x) == 0:
        raise DegenerateFit("all points share the same d")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = y - A @ coef
    dof = len(pts) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return PowerLawFit(slope, intercept, stderr)


def fit_log_model_prefactor(points, kappa: float) -> float:
    """Least-squares prefactor a in p_err = a log(d) / (kappa d)."""
    basis = np.array([math.log(d) / (kappa * d) for d, _ in points])
    values = np.array([p for _, p in points])
    return float(basis @ values / (basis @ basis))


@dataclass(frozen=True)
class ScalingRow:
    degree: int
    p_err: float
    slope_running: float  # nan until three points are available
    result: OptimizationResult


@dataclass(frozen=True)
class ScalingReport:
    rows: tuple
    fit: Optional[PowerLawFit]  # None when fewer than three degrees
    prefactor: Optional[float]  # None when no degree >= 5

    @property
    def slope(self) -> float:
        return self.fit.slope if self.fit is not None else math.nan


def scaling_sweep(degrees, kappa: float, beta_th: float, cfg: OptimizerConfig) -> ScalingReport:
    degrees = list(degrees)
    if not degrees or degrees != sorted(degrees):
        raise ValueError("degrees must be a non-empty ascending list")
    rows = []
    points = []
    for d in degrees:
        res = optimize_phases(DecisionProblem(kappa, beta_th, d), cfg)
        points.append((d, res.p_err))
        try:
            running = fit_power_law(points).slope
        except DegenerateFit:
            running = math.nan
        rows.append(ScalingRow(d, res.p_err, running, res))
        log.info("scaling d=%d p_err=%.6g running slope=%.4g", d, res.p_err, running)
    try:
        fit = fit_power_law(points)
    except DegenerateFit:
        fit = None
    tail = [(d, p) for d, p in points if d >= 5]
    prefactor = fit_log_model_prefactor(tail, kappa) if tail else None
    return ScalingReport(tuple(rows), fit, prefactor)


def with_seed(cfg: OptimizerConfig, seed: int) -> OptimizerConfig:
    return replace(cfg, rng_seed=seed)
