"""Bit-by-bit estimation of beta in [0, R] from threshold decisions.

Each bisection step asks "is beta below the midpoint?" and answers with a
majority vote over M single-shot QSPI readouts.  Coupling is fixed to
kappa = pi/(2R), so the whole prior range is one sensing range.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize as sp_optimize
from scipy.special import gammaln
from scipy.stats import binom

from .decision import DecisionProblem
from .laurent import PhaseSequence
from .optimize import OptimizationResult, OptimizerConfig, optimize_phases, warm_start
from .response import ResponseSpectrum, response_probability

INTEGER_SLACK = 1e-12
CACHE_RESOLUTION = 1e-9


@dataclass(frozen=True)
class SearchPlan:
    R: float
    delta: float
    M: int = 1
    d: int = 13
    kappa: Optional[float] = None  # None: pi / (2 R)

    def __post_init__(self):
        if not (self.R > 0 and self.delta > 0):
            raise ValueError("R and delta must be positive")
        if not self.delta < self.R:
            raise ValueError("delta must be smaller than R")
        if self.M < 1 or self.M % 2 == 0:
            raise ValueError("M must be an odd integer >= 1")
        if self.d < 2:
            raise ValueError("the query budget needs d >= 2")
        if self.kappa is None:
            object.__setattr__(self, "kappa", math.pi / (2 * self.R))
        elif not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def n_decisions(self) -> int:
        return min(n_query_ideal(self.R, self.delta), n_query_max(self.d, self.kappa, self.R))


@dataclass(frozen=True)
class Decision:
    threshold: float
    below: bool
    votes_below: int
    votes_above: int


@dataclass(frozen=True)
class EstimateResult:
    interval: tuple
    queries_used: int
    decisions: tuple
    success_model: float

    @property
    def width(self) -> float:
        return self.interval[1] - self.interval[0]

    def contains(self, beta: float) -> bool:
        low, high = self.interval
        return low <= beta <= high


def n_query_ideal(R: float, delta: float) -> int:
    """ceil(log2(R / delta)); exact powers of two are not rounded up."""
    if not 0 < delta < R:
        raise ValueError("need 0 < delta < R")
    x = math.log2(R / delta)
    return max(0, math.ceil(x - INTEGER_SLACK))


def n_query_max(d: int, kappa: float, R: float) -> int:
    """floor(log2(kappa d R / log d)), clamped at zero."""
    if d < 2:
        raise ValueError("n_query_max needs d >= 2")
    x = math.log2(kappa * d * R / math.log(d))
    return max(0, math.floor(x + INTEGER_SLACK))


def majority_tail(p: float, M: int) -> float:
    """Probability that more than half of M independent votes are wrong."""
    return float(binom.sf(M // 2, M, p))


def stirling_tail(p: float, M: int) -> float:
    """Leading-term approximation M!/((M/2)!)^2 p^(M/2), for comparison only."""
    log_c = gammaln(M + 1) - 2 * gammaln(M / 2 + 1)
    return float(math.exp(log_c + (M / 2) * math.log(p)))


def failure_model(d: int, kappa: float, R: float, M: int, perr: float) -> float:
    """Union-bound failure probability of the whole search, capped at 1."""
    if not 0 < perr < 0.5:
        raise ValueError("perr must lie in (0, 0.5)")
    if M < 1 or M % 2 == 0:
        raise ValueError("M must be an odd integer >= 1")
    per_decision = perr if M == 1 else majority_tail(perr, M)
    return min(1.0, per_decision * n_query_max(d, kappa, R))


@dataclass(frozen=True)
class MajorityVote:
    below: bool
    votes_below: int
    votes_above: int


def majority_decide(oracle: Callable[[float], bool], threshold: float, M: int) -> MajorityVote:
    if M < 1 or M % 2 == 0:
        raise ValueError("M must be an odd integer >= 1")
    below = sum(1 for _ in range(M) if oracle(threshold))
    return MajorityVote(below > M // 2, below, M - below)


def binary_search_estimate(plan: SearchPlan, oracle, perr: Optional[float] = None) -> EstimateResult:
    """Midpoint bisection of [0, R] with majority-voted threshold decisions.

    ``perr`` (the single-shot decision error) only feeds the reported success
    model; pass None to skip it.
    """
    low, high = 0.0, float(plan.R)
    decisions = []
    for _ in range(plan.n_decisions):
        if high - low <= plan.delta:
            break
        mid = 0.5 * (low + high)
        vote = majority_decide(oracle, mid, plan.M)
        decisions.append(Decision(mid, vote.below, vote.votes_below, vote.votes_above))
        if vote.below:
            high = mid
        else:
            low = mid
    success = math.nan
    if perr is not None:
        success = 1.0 - failure_model(plan.d, plan.kappa, plan.R, plan.M, perr)
    return EstimateResult((low, high), plan.M * len(decisions), tuple(decisions), success)


def search_thresholds(plan: SearchPlan) -> list:
    """Every midpoint the search can visit, breadth first."""
    out = []
    level = [(0.0, float(plan.R))]
    for _ in range(plan.n_decisions):
        nxt = []
        for low, high in level:
            mid = 0.5 * (low + high)
            out.append(mid)
            nxt.extend([(low, mid), (mid, high)])
        level = nxt
    return out


class PhaseCache:
    """Designed phases per (d, kappa, beta_th), keyed at 1e-9 resolution.

    A miss warm-starts from the nearest cached threshold of the same (d, kappa)
    and falls back to a full multi-start design when there is none.
    """

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self._store: dict = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(d: int, kappa: float, beta_th: float):
        return (d, round(kappa / CACHE_RESOLUTION), round(beta_th / CACHE_RESOLUTION))

    def __len__(self):
        return len(self._store)

    def get(self, d: int, kappa: float, beta_th: float) -> OptimizationResult:
        key = self.key(d, kappa, beta_th)
        with self._lock:
            hit = self._store.get(key)
            if hit is not None:
                return hit
            near = [
                (abs(k[2] - key[2]), k[2], res)
                for k, res in self._store.items()
                if k[:2] == key[:2]
            ]
        if near:
            _, _, seed = min(near, key=lambda t: (t[0], t[1]))
            res = warm_start(seed, kappa, beta_th, self.cfg)
        else:
            res = optimize_phases(DecisionProblem(kappa, beta_th, d), self.cfg)
        with self._lock:
            return self._store.setdefault(key, res)

    def prepare(self, plan: SearchPlan) -> dict:
        """Design every threshold of ``plan`` in a fixed order; returns {threshold: result}."""
        return {t: self.get(plan.d, plan.kappa, t) for t in search_thresholds(plan)}


class QSPIOracle:
    """Single-shot readout sampler for a fixed true displacement.

    ``probability(phases, beta)`` gives P(down | beta); it is evaluated once
    per threshold and then Bernoulli-sampled, so repeated votes are cheap.
    """

    def __init__(self, true_beta: float, phases_for: Callable[[float], PhaseSequence], rng, probability):
        self.true_beta = float(true_beta)
        self.phases_for = phases_for
        self.rng = rng
        self.probability = probability
        self._memo: dict = {}
        self.calls = 0

    def p_below(self, threshold: float) -> float:
        if threshold not in self._memo:
            self._memo[threshold] = float(self.probability(self.phases_for(threshold), self.true_beta))
        return self._memo[threshold]

    def __call__(self, threshold: float) -> bool:
        self.calls += 1
        return bool(self.rng.random() < self.p_below(threshold))


def series_probability(phases: PhaseSequence, beta: float) -> float:
    from .laurent import build_laurent_recursive
    from .response import response_coefficients

    rs = response_coefficients(build_laurent_recursive(phases), phases.kappa)
    return response_probability(rs, beta)


def simulator_probability(N: int = 500):
    from .simulator import run_protocol

    def probability(phases: PhaseSequence, beta: float) -> float:
        return run_protocol(phases, beta, N, check_truncation=False)

    return probability


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    # stream 0 draws the true beta, stream 1 the readouts; both counter-based
    return np.random.Generator(np.random.Philox(key=seed + (trial << 64), counter=[0, 0, stream, 0]))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    true_beta: float
    low: float
    high: float
    queries: int
    success: bool


@dataclass(frozen=True)
class MonteCarloSummary:
    records: tuple = field(repr=False)
    failure_rate: float
    model: float
    sigma: float  # binomial standard error at the model rate

    @property
    def n_trials(self) -> int:
        return len(self.records)

    def within(self, n_sigma: float = 3.0) -> bool:
        return abs(self.failure_rate - self.model) <= n_sigma * self.sigma


def monte_carlo(
    plan: SearchPlan,
    designs: dict,
    n_trials: int,
    seed: int = 0,
    probability=series_probability,
    true_beta: Optional[float] = None,
    perr: Optional[float] = None,
) -> MonteCarloSummary:
    """Repeat the search with fresh readout noise.

    ``designs`` maps each threshold to its OptimizationResult (see
    :meth:`PhaseCache.prepare`).  With ``true_beta`` None each trial draws
    beta uniformly from [0, R).  ``perr`` defaults to the design error at the
    first threshold R/2.
    """
    phases_for = lambda t: designs[t].phases  # noqa: E731
    if perr is None:
        perr = designs[0.5 * plan.R].p_err
    model = failure_model(plan.d, plan.kappa, plan.R, plan.M, perr)
    records = []
    for trial in range(n_trials):
        beta = true_beta if true_beta is not None else float(trial_rng(seed, trial, 0).uniform(0, plan.R))
        oracle = QSPIOracle(beta, phases_for, trial_rng(seed, trial, 1), probability)
        res = binary_search_estimate(plan, oracle, perr)
        low, high = res.interval
        records.append(TrialRecord(trial, beta, low, high, res.queries_used, res.contains(beta)))
    rate = sum(not r.success for r in records) / n_trials
    sigma = math.sqrt(model * (1 - model) / n_trials)
    return MonteCarloSummary(tuple(records), rate, model, sigma)


def records_csv_rows(records):
    return [(r.trial, r.true_beta, r.low, r.high, r.queries, int(r.success)) for r in records]


def edge_width(rs: ResponseSpectrum, upper: float = 0.9, lower: float = 0.1, samples: int = 4097) -> float:
    """Distance between the first P=upper and the following P=lower crossing on [0, pi/2k]."""
    betas = np.linspace(0.0, math.pi / (2 * rs.kappa), samples)
    p = response_probability(rs, betas)

    def crossing(level, start):
        idx = np.nonzero((p[start:-1] >= level) & (p[start + 1 :] < level))[0]
        if idx.size == 0:
            return None, None
        i = start + int(idx[0])
        root = sp_optimize.brentq(lambda b: response_probability(rs, b) - level, betas[i], betas[i + 1])
        return root, i

    b_hi, i = crossing(upper, 0)
    if b_hi is None:
        return math.nan
    b_lo, _ = crossing(lower, i)
    return math.nan if b_lo is None else b_lo - b_hi
