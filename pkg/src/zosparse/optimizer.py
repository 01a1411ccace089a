"""Descent loops over black-box objectives with exact query accounting.

The sparse-estimate descent touches only the estimated support each
step.  The three dense baselines (Gaussian smoothing descent, sign
descent, and local search over shrinking radii) share the same
accounting conventions: f at the current iterate is measured once per
step and cached, and every run stops on its query budget or step limit,
whichever lands first.

Trace rows carry (step, cumulative queries, f(x_t), f(x_t)/f(x_1)); the
row for step t is written after the sampling performed at x_t, and the
returned best point is the earliest visited iterate with minimal
objective, judged only from values already paid for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .blackbox import BlackBoxFunction, BudgetExhaustedError, with_ledger
from .estimator import GraceConfig, grace_estimate
from .rng import RngStream

__all__ = [
    "METHODS",
    "OptimizerConfig",
    "TraceRecord",
    "RunTrace",
    "zo_gd_grace",
    "estimate_rs",
    "step_zo_signsgd",
    "step_gld",
    "run_optimizer",
]

METHODS = ("grace", "rs", "zo-signsgd", "gld")

# Step-size grid of the standard tuning sweep.
ETA_GRID = (0.5, 0.2, 0.1, 0.05, 0.02, 0.01)


@dataclass
class OptimizerConfig:
    """Settings of one descent run.

    epsilon_schedule overrides the estimator's constant finite
    difference per step when given (a callable of the 1-based step
    number); the default keeps it constant.  mu is the smoothing radius
    of the Gaussian baselines, directions the number of averaged
    estimates per sign-descent step, and batch its replica count, which
    is vacuous for deterministic objectives and kept only for interface
    parity.  At least one of budget and max_steps must be set.
    """

    method: str
    step_size: float
    budget: int | None = None
    max_steps: int | None = None
    epsilon_schedule: Callable[[int], float] | None = None
    mu: float = 1e-3
    directions: int = 10
    batch: int = 1
    gld_scales: int = 4

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.step_size > 0:
            raise ValueError(f"need step_size > 0, got {self.step_size}")
        if self.budget is None and self.max_steps is None:
            raise ValueError("need a stopping rule: budget, max_steps, or both")
        if self.budget is not None and self.budget < 1:
            raise ValueError(f"need budget >= 1, got {self.budget}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"need max_steps >= 1, got {self.max_steps}")
        if not self.mu > 0:
            raise ValueError(f"need mu > 0, got {self.mu}")
        if self.directions < 1 or self.batch < 1 or self.gld_scales < 1:
            raise ValueError("need directions, batch, and gld_scales >= 1")


@dataclass
class TraceRecord:
    step: int
    queries: int
    value: float
    normalized: float


@dataclass
class RunTrace:
    """Per-step records plus the best visited point.

    Queries are strictly increasing across records; best_value is the
    exact minimum of the recorded values, earliest minimizer kept.
    """

    records: list[TraceRecord]
    best_point: np.ndarray
    best_value: float


class _TraceBuilder:
    def __init__(self, x1: np.ndarray):
        self.records: list[TraceRecord] = []
        self.best_point = np.array(x1, dtype=float)
        self.best_value = math.inf
        self.initial_value: float | None = None

    def record(self, step: int, queries: int, value: float, point: np.ndarray) -> None:
        if self.records and queries <= self.records[-1].queries:
            return  # no new queries since the last row; nothing to account
        if self.initial_value is None:
            self.initial_value = value
        normalized = value / self.initial_value if self.initial_value != 0.0 else math.nan
        self.records.append(TraceRecord(step, queries, value, normalized))
        if value < self.best_value:
            self.best_value = value
            self.best_point = point.copy()

    def finish(self) -> RunTrace:
        return RunTrace(self.records, self.best_point, self.best_value)


def zo_gd_grace(
    f: BlackBoxFunction,
    x1: np.ndarray,
    opt: OptimizerConfig,
    grace: GraceConfig,
    rng: RngStream,
) -> RunTrace:
    """Descend using sparse estimates: x <- x - eta * g on the estimated support.

    Each step derives its own rng sub-stream, so a run is reproducible
    from (x1, configs, rng key) alone.  On budget exhaustion mid
    estimate the partial step is discarded; only its already-measured
    f(x_t) still enters the trace.
    """
    counted, ledger = with_ledger(f, opt.budget)
    x = np.array(x1, dtype=float)
    trace = _TraceBuilder(x)
    step = 0
    while opt.max_steps is None or step < opt.max_steps:
        step += 1
        cfg = grace
        if opt.epsilon_schedule is not None:
            cfg = replace(grace, epsilon=opt.epsilon_schedule(step))
        try:
            estimate = grace_estimate(counted, x, cfg, rng.derive(step))
        except BudgetExhaustedError as error:
            partial = error.partial
            if partial is not None and partial.base_value is not None:
                trace.record(step, ledger.count, partial.base_value, x)
            break
        trace.record(step, ledger.count, estimate.base_value, x)
        x = x.copy()
        for j, g in estimate.entries.items():
            x[j - 1] -= opt.step_size * g
    return trace.finish()


def estimate_rs(
    f: BlackBoxFunction, x: np.ndarray, f_x: float, mu: float, rng: RngStream
) -> np.ndarray:
    """Gaussian-smoothing gradient estimate ((f(x + mu u) - f_x) / mu) u.

    One query with the cached f_x; u is standard normal.
    """
    if not mu > 0:
        raise ValueError(f"need mu > 0, got {mu}")
    direction = rng.gen.standard_normal(f.dim)
    return ((f(x + mu * direction) - f_x) / mu) * direction


def step_zo_signsgd(
    f: BlackBoxFunction,
    x: np.ndarray,
    f_x: float,
    mu: float,
    batch: int,
    directions: int,
    eta: float,
    rng: RngStream,
) -> np.ndarray:
    """Average several smoothing estimates and move by the sign pattern.

    sign(0) = 0, so coordinates with a perfectly balanced estimate stay
    put.  Queries: directions per call.  batch replicates each estimate
    against the same deterministic objective, so it only repeats values
    and is not queried.
    """
    if batch < 1 or directions < 1:
        raise ValueError("need batch >= 1 and directions >= 1")
    total = np.zeros(f.dim)
    for _ in range(directions):
        total += estimate_rs(f, x, f_x, mu, rng)
    return x - eta * np.sign(total / directions)


def step_gld(
    f: BlackBoxFunction, x: np.ndarray, f_x: float, eta: float, scales: int, rng: RngStream
) -> tuple[np.ndarray, float]:
    """Gaussian local search over radii eta, eta/2, ..., eta/2^(scales-1).

    Evaluates one candidate per radius and keeps the best of the
    incumbent and the candidates (ties keep the incumbent).  Returns the
    chosen point with its objective value so the caller need not
    re-query it.  Queries: scales per call.
    """
    if not eta > 0:
        raise ValueError(f"need eta > 0, got {eta}")
    best_x, best_value = x, f_x
    for k in range(scales):
        candidate = x + (eta / 2**k) * rng.gen.standard_normal(f.dim)
        value = f(candidate)
        if value < best_value:
            best_x, best_value = candidate, value
    return best_x, best_value


def _run_baseline(
    f: BlackBoxFunction, x1: np.ndarray, opt: OptimizerConfig, rng: RngStream
) -> RunTrace:
    counted, ledger = with_ledger(f, opt.budget)
    x = np.array(x1, dtype=float)
    trace = _TraceBuilder(x)
    carried_value = None  # gld re-uses the accepted candidate's value as the next f_x
    step = 0
    while opt.max_steps is None or step < opt.max_steps:
        step += 1
        step_rng = rng.derive(step)
        f_x = None
        try:
            if opt.method == "gld":
                f_x = counted(x) if carried_value is None else carried_value
                next_x, carried_value = step_gld(
                    counted, x, f_x, opt.step_size, opt.gld_scales, step_rng
                )
            elif opt.method == "rs":
                f_x = counted(x)
                gradient = estimate_rs(counted, x, f_x, opt.mu, step_rng)
                next_x = x - opt.step_size * gradient
            else:  # zo-signsgd
                f_x = counted(x)
                next_x = step_zo_signsgd(
                    counted, x, f_x, opt.mu, opt.batch, opt.directions, opt.step_size, step_rng
                )
        except BudgetExhaustedError:
            # f(x_t) from the interrupted step enters the trace only if it is
            # known; the builder drops it unless new queries back the row.
            if f_x is not None:
                trace.record(step, ledger.count, f_x, x)
            break
        trace.record(step, ledger.count, f_x, x)
        x = next_x
    return trace.finish()


def run_optimizer(
    f: BlackBoxFunction,
    x1: np.ndarray,
    opt: OptimizerConfig,
    rng: RngStream,
    grace: GraceConfig | None = None,
) -> RunTrace:
    """Dispatch a run to the configured method."""
    if opt.method == "grace":
        if grace is None:
            raise ValueError("method 'grace' needs a GraceConfig")
        return zo_gd_grace(f, x1, opt, grace, rng)
    return _run_baseline(f, x1, opt, rng)
