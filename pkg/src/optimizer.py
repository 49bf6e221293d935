# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Real-parameter minimization shared by the state and unitary compilers.

Three entry points are offered: a derivative-free simplex search for stages with
a handful of parameters, a quasi-Newton refinement with central-difference
gradients for global stages, and a multi-start driver.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize

from exceptions import InvalidArgumentError, OptimizationError

logger = logging.getLogger(__name__)

Objective = Callable[[npt.NDArray[np.float64]], float]

# Max-norm of the final gradient below which a refinement that stopped on
# precision loss still counts as converged.
REFINE_GRADIENT_SLACK = 1e3


class OptimizerConfig(BaseModel):
    """Tunables for every optimization run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_evals: int = Field(
        default=4000,
        ge=1,
        description="Objective evaluations allowed for one run (per seed in multi-start)",
        examples=[4000],
    )
    xtol: float = Field(
        default=1e-8,
        gt=0,
        description="Absolute parameter tolerance of the simplex search",
        examples=[1e-8],
    )
    ftol: float = Field(
        default=1e-12,
        gt=0,
        description="Absolute objective tolerance of the simplex search and of restarts",
        examples=[1e-12],
    )
    fd_step: float = Field(
        default=1e-6,
        gt=0,
        description="Step of the central-difference gradient",
        examples=[1e-6],
    )
    gtol: float = Field(
        default=1e-9,
        gt=0,
        description="Gradient max-norm at which refinement stops",
        examples=[1e-9],
    )
    restarts: int = Field(
        default=2,
        ge=0,
        description="Refinement restarts from the best point found",
        examples=[2],
    )
    seed: int = Field(
        default=0,
        ge=0,
        description="Seed for every randomized start",
        examples=[0, 1234],
    )
    workers: int = Field(
        default=1,
        ge=1,
        description="Threads used by multi-start; 1 runs the seeds sequentially",
        examples=[1, 4],
    )


@dataclass
class OptimResult:
    """Outcome of one optimization run.

    ``x`` is the best point evaluated and ``fval`` the objective value there, so
    re-evaluating the objective at ``x`` reproduces ``fval``. ``history`` holds
    the best-so-far value after every evaluation and never increases.
    """

    x: npt.NDArray[np.float64]
    fval: float
    evals: int
    converged: bool
    history: List[float] = field(default_factory=list, repr=False)


class _BudgetExhausted(Exception):
    pass


class _TrackedObjective:
    """Wrap an objective to count evaluations and keep the best point seen."""

    def __init__(self, objective: Objective, max_evals: int):
        self._objective = objective
        self._max_evals = max_evals
        self.evals = 0
        self.best_x: Optional[npt.NDArray[np.float64]] = None
        self.best_f = np.inf
        self.history: List[float] = []

    @property
    def remaining(self) -> int:
        return max(0, self._max_evals - self.evals)

    def __call__(self, x: npt.NDArray[np.float64]) -> float:
        if self.evals >= self._max_evals:
            raise _BudgetExhausted()
        x = np.array(x, dtype=float)
        value = float(self._objective(x))
        self.evals += 1
        if not np.isfinite(value):
            value = np.inf
        if value < self.best_f:
            self.best_f = value
            self.best_x = x
        self.history.append(self.best_f)
        return value

    def result(self, converged: bool) -> OptimResult:
        assert self.best_x is not None
        return OptimResult(
            x=self.best_x.copy(),
            fval=self.best_f,
            evals=self.evals,
            converged=converged,
            history=list(self.history),
        )


def _start(objective: Objective, x0: Sequence[float], config: OptimizerConfig):
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.size < 1:
        raise InvalidArgumentError("At least one parameter is required")
    tracked = _TrackedObjective(objective, config.max_evals)
    if not np.isfinite(tracked(x0)):
        raise InvalidArgumentError(f"Objective is not finite at the starting point {x0}")
    return x0, tracked


def central_difference_gradient(
    objective: Objective, x: npt.NDArray[np.float64], step: float
) -> npt.NDArray[np.float64]:
    """Return the central-difference gradient of ``objective`` at ``x``.

    Args:
        objective: function of a real vector.
        x: evaluation point.
        step: finite-difference step, identical in every coordinate.

    Returns:
        The gradient estimate, exact for quadratics up to round-off.
    """
    x = np.asarray(x, dtype=float)
    gradient = np.empty_like(x)
    for i in range(x.size):
        shift = np.zeros_like(x)
        shift[i] = step
        gradient[i] = (objective(x + shift) - objective(x - shift)) / (2 * step)
    return gradient


def minimize_local(
    objective: Objective, x0: Sequence[float], config: Optional[OptimizerConfig] = None
) -> OptimResult:
    """Minimize ``objective`` from ``x0`` with a Nelder-Mead simplex search.

    Args:
        objective: pure function of a real vector.
        x0: starting point, at least one parameter.
        config: optimizer settings; defaults when omitted.

    Returns:
        OptimResult: the best point seen. Running out of evaluations gives
        ``converged=False`` rather than an error.

    Raises:
        InvalidArgumentError: if the objective is not finite at ``x0``.
    """
    config = config or OptimizerConfig()
    x0, tracked = _start(objective, x0, config)
    converged = False
    try:
        res = minimize(
            tracked,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": config.xtol,
                "fatol": config.ftol,
                "maxfev": max(1, tracked.remaining),
                "adaptive": x0.size > 3,
            },
        )
        converged = bool(res.success)
    except _BudgetExhausted:
        logger.debug("Simplex search ran out of its %d evaluations", config.max_evals)
    result = tracked.result(converged)
    logger.debug(
        "Simplex search: f=%.3e after %d evaluations (converged=%s)",
        result.fval,
        result.evals,
        result.converged,
    )
    return result


def minimize_refine(
    objective: Objective, x0: Sequence[float], config: Optional[OptimizerConfig] = None
) -> OptimResult:
    """Minimize ``objective`` from ``x0`` with BFGS on central-difference gradients.

    The run restarts from the best point up to ``config.restarts`` times while a
    restart still improves the objective by more than ``config.ftol``.

    Raises:
        InvalidArgumentError: if the objective is not finite at ``x0``.
    """
    config = config or OptimizerConfig()
    x0, tracked = _start(objective, x0, config)

    def gradient(x):
        return central_difference_gradient(tracked, x, config.fd_step)

    converged = False
    start = x0
    try:
        for attempt in range(config.restarts + 1):
            before = tracked.best_f
            res = minimize(
                tracked,
                start,
                jac=gradient,
                method="BFGS",
                options={"gtol": config.gtol, "maxiter": max(1, tracked.remaining)},
            )
            final_gradient = float(np.max(np.abs(res.jac))) if res.jac is not None else np.inf
            converged = bool(res.success) or final_gradient <= REFINE_GRADIENT_SLACK * config.gtol
            logger.debug(
                "Refinement pass %d: f=%.3e, |g|=%.1e, %s",
                attempt,
                tracked.best_f,
                final_gradient,
                res.message,
            )
            if attempt and before - tracked.best_f <= config.ftol:
                break
            assert tracked.best_x is not None
            start = tracked.best_x
    except _BudgetExhausted:
        converged = False
        logger.debug("Refinement ran out of its %d evaluations", config.max_evals)
    return tracked.result(converged)


def uniform_seeds(
    dim: int,
    count: int,
    config: Optional[OptimizerConfig] = None,
    low: float = -1.0,
    high: float = 1.0,
) -> List[npt.NDArray[np.float64]]:
    """Return ``count`` points drawn uniformly from [low, high]^dim with the config seed."""
    config = config or OptimizerConfig()
    rng = np.random.default_rng(config.seed)
    return [rng.uniform(low, high, size=dim) for _ in range(count)]


def multi_start(
    objective: Objective,
    seeds: Sequence[Sequence[float]],
    config: Optional[OptimizerConfig] = None,
) -> OptimResult:
    """Run :func:`minimize_local` from every seed and return the lowest result.

    Seeds are independent. With ``config.workers > 1`` they run on a thread
    pool; results are collected in seed order so the outcome is the same either
    way. Ties go to the earliest seed. ``evals`` of the returned result is the
    total over all seeds.

    Raises:
        InvalidArgumentError: if ``seeds`` is empty.
        OptimizationError: if every seed failed; ``diagnostics`` holds one line per seed.
    """
    config = config or OptimizerConfig()
    seeds = list(seeds)
    if not seeds:
        raise InvalidArgumentError("Multi-start needs at least one seed")

    def run(seed):
        try:
            return minimize_local(objective, seed, config), None
        except (InvalidArgumentError, ArithmeticError, ValueError) as e:
            return None, f"seed {np.asarray(seed).tolist()}: {e}"

    if config.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            outcomes = list(executor.map(run, seeds))
    else:
        outcomes = [run(seed) for seed in seeds]

    results = [result for result, _ in outcomes if result is not None]
    diagnostics = [message for _, message in outcomes if message is not None]
    if not results:
        logger.error("All %d multi-start seeds failed", len(seeds))
        raise OptimizationError(f"All {len(seeds)} seeds failed", diagnostics=diagnostics)
    for message in diagnostics:
        logger.warning("Multi-start %s", message)

    best = min(results, key=lambda result: result.fval)
    return replace(best, evals=sum(result.evals for result in results))
