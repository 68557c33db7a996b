from __future__ import annotations

import typing as t
from dataclasses import dataclass

from tenacity import (
    Retrying,
    WrappedFn,
    retry_if_exception_type,
    stop_after_attempt,
    wait_random_exponential,
)

# strict margin above the solver's KKT tolerance for the "Phi > 0" branch
EPS_WIN = 1e-7
# default slack for region membership tests. Target entry and domain checks use
# it: a point or segment target has no interior, and an agent steered onto it
# lands only within rounding of the exact point.
EPS_MEMBERSHIP = 1e-9


@dataclass
class RunConfig:
    """
    Configuration for timeouts, retries and the trial worker pool.
    """

    timeout: int = 600
    max_retries: int = 3
    max_wait: int = 10
    max_workers: int = 1
    exception_types: t.Union[
        t.Type[BaseException],
        t.Tuple[t.Type[BaseException], ...],
    ] = (OSError,)


def add_retry(fn: WrappedFn, run_config: RunConfig) -> WrappedFn:
    r = Retrying(
        wait=wait_random_exponential(multiplier=1, max=run_config.max_wait),
        stop=stop_after_attempt(run_config.max_retries),
        retry=retry_if_exception_type(run_config.exception_types),
        reraise=True,
    )
    return r.wraps(fn)


@dataclass(frozen=True)
class SolverConfig:
    """
    Knobs of the log-barrier interior point solver.

    Attributes
    ----------
    mu0 : float
        Initial barrier weight.
    mu_factor : float
        Divisor applied to the barrier weight after each centering stage.
    mu_min : float
        The outer loop stops once the barrier weight drops to this value.
    max_newton_per_stage : int
        Damped Newton iterations allowed per centering stage.
    max_iterations : int
        Total Newton iterations allowed, phase-1 excluded.
    newton_tol : float
        Stop a centering stage when half the squared Newton decrement is below this.
    eps_active : float
        Absolute threshold on |g(q)| for the active set.
    infeasible_tol : float
        Phase-1 optimum above this value declares the region empty.
    hessian_reg : float
        Diagonal regularisation of the capture frontier Hessian near its kink.
    """

    mu0: float = 1.0
    mu_factor: float = 10.0
    mu_min: float = 1e-10
    max_newton_per_stage: int = 100
    max_iterations: int = 2000
    newton_tol: float = 1e-14
    eps_active: float = 1e-6
    infeasible_tol: float = 1e-9
    hessian_reg: float = 1e-12


DEFAULT_SOLVER_CONFIG = SolverConfig()
