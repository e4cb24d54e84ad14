"""Polak-Ribiere nonlinear conjugate gradient with finite-difference gradients.

The objective may return ``+inf`` to mark infeasible points.  Trial steps are
truncated to the box ``[lower, upper]^K`` and accepted by Armijo backtracking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

__all__ = [
    "FiniteDiffScheme",
    "LineSearchParams",
    "CgConfig",
    "IterationRecord",
    "OptimTrace",
    "GradientError",
    "ConfigurationError",
    "ObjectiveError",
    "fd_gradient",
    "armijo_backtracking",
    "minimize",
]

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
# (objective, x, fx, grad, direction, alpha_init, alpha_max, params, lower, upper) -> (alpha, f_new) or None
LineSearch = Callable[..., Optional[tuple]]


class GradientError(RuntimeError):
    """A finite-difference probe could not be placed inside the feasible box."""


class ConfigurationError(ValueError):
    pass


class ObjectiveError(RuntimeError):
    """The objective returned NaN or a non-numeric value at a feasible point."""


@dataclass(frozen=True)
class FiniteDiffScheme:
    kind: Literal["forward", "backward", "centered"] = "centered"
    epsilon: float = 0.01

    def __post_init__(self):
        if self.kind not in ("forward", "backward", "centered"):
            raise ValueError(f"unknown finite-difference scheme {self.kind!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class LineSearchParams:
    c1: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 40

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValueError("initial step must be positive")


@dataclass(frozen=True)
class CgConfig:
    """Optimizer settings.

    ``restart_period`` defaults to the problem dimension when left as ``None``.
    A run is ``stalled`` after ``stall_iterations`` consecutive accepted steps
    whose relative decrease is below ``stall_tolerance``.
    """

    scheme: FiniteDiffScheme = field(default_factory=FiniteDiffScheme)
    max_iterations: int = 200
    gradient_tolerance: float = 1e-3
    line_search: LineSearchParams = field(default_factory=LineSearchParams)
    restart_period: Optional[int] = None
    stall_tolerance: float = 1e-8
    stall_iterations: int = 5
    lower: float = 0.0
    upper: float = 255.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.restart_period is not None and self.restart_period < 1:
            raise ValueError("restart_period must be positive")
        if not self.lower < self.upper:
            raise ValueError("box lower bound must be below upper bound")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    mu: tuple
    value: float
    gradient_norm: float
    step: float
    restart: bool


@dataclass
class OptimTrace:
    records: list = field(default_factory=list)
    termination: str = ""
    evaluations: int = 0

    @property
    def values(self) -> list:
        return [r.value for r in self.records]

    @property
    def iterations(self) -> int:
        return len(self.records) - 1 if self.records else 0

    def is_nonincreasing(self) -> bool:
        v = self.values
        return all(b <= a for a, b in zip(v, v[1:]))


def _checked(value, where) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ObjectiveError(f"objective returned non-numeric value {value!r} at {where}") from None
    if math.isnan(v):
        raise ObjectiveError(f"objective returned NaN at {where}")
    return v


def fd_gradient(objective: Objective, mu, scheme: FiniteDiffScheme = FiniteDiffScheme(),
                f0: Optional[float] = None) -> np.ndarray:
    """Finite-difference gradient of ``objective`` at ``mu``.

    Where a probe ``mu_i +/- epsilon`` evaluates to ``+inf`` the coordinate
    falls back to the one-sided quotient whose probe is finite.

    Parameters
    ----------
    objective : callable
        Maps a float vector to a float, ``+inf`` when infeasible.
    mu : array_like
        Point of evaluation; the objective must be finite there.
    scheme : FiniteDiffScheme
        Quotient kind and step.
    f0 : float, optional
        Known value at ``mu``, saves one evaluation for one-sided schemes.

    Raises
    ------
    GradientError
        If both probes of some coordinate are infeasible.
    """
    x = np.array(mu, dtype=np.float64).ravel()
    eps = scheme.epsilon
    grad = np.empty_like(x)
    center = None if f0 is None else float(f0)

    def at(i, delta):
        p = x.copy()
        p[i] = x[i] + delta
        return _checked(objective(p), p)

    def fcenter():
        nonlocal center
        if center is None:
            center = _checked(objective(x.copy()), x)
            if math.isinf(center):
                raise GradientError(f"objective is not finite at {x}")
        return center

    for i in range(x.size):
        if scheme.kind == "centered":
            fp, fm = at(i, eps), at(i, -eps)
            if math.isfinite(fp) and math.isfinite(fm):
                grad[i] = (fp - fm) / (2 * eps)
                continue
        elif scheme.kind == "forward":
            fp, fm = at(i, eps), None
        else:
            fp, fm = None, at(i, -eps)

        if fp is not None and math.isfinite(fp):
            grad[i] = (fp - fcenter()) / eps
            continue
        if fm is None:
            fm = at(i, -eps)
        if math.isfinite(fm):
            grad[i] = (fcenter() - fm) / eps
            continue
        if fp is None:
            fp = at(i, eps)
            if math.isfinite(fp):
                grad[i] = (fp - fcenter()) / eps
                continue
        raise GradientError(f"no feasible finite-difference probe for coordinate {i} at {x}")
    return grad


def _max_feasible_step(x, p, lower, upper) -> float:
    alpha = math.inf
    for xi, pi in zip(x, p):
        if pi > 0:
            alpha = min(alpha, (upper - xi) / pi)
        elif pi < 0:
            alpha = min(alpha, (lower - xi) / pi)
    return max(alpha, 0.0)


def armijo_backtracking(objective, x, fx, grad, p, alpha_init, alpha_max, params: LineSearchParams,
                        lower=-math.inf, upper=math.inf):
    """Backtrack from ``min(alpha_init, alpha_max)`` until sufficient decrease holds.

    Returns ``(alpha, f_new)``, or ``None`` when every trial fails.
    """
    slope = float(grad @ p)
    alpha = min(alpha_init, alpha_max)
    for _ in range(params.max_backtracks + 1):
        if alpha <= 0:
            break
        trial = np.clip(x + alpha * p, lower, upper)
        if np.array_equal(trial, x):
            break
        f_new = _checked(objective(trial), trial)
        if f_new <= fx + params.c1 * alpha * slope:
            return alpha, f_new
        alpha *= params.shrink
    return None


def minimize(objective: Objective, initial, config: CgConfig = CgConfig(),
             line_search: Optional[LineSearch] = None) -> tuple:
    """Minimize ``objective`` from ``initial`` with Polak-Ribiere CG.

    The search direction is reset to steepest descent whenever the PR
    coefficient is negative, every ``restart_period`` iterations, and when a
    conjugate direction fails to produce an acceptable step.  Gradient and
    direction components pointing out of the box at an active bound are
    dropped, so gradient norms in the trace are projected norms.

    Returns
    -------
    mu : ndarray
        Best point found (the last accepted iterate).
    trace : OptimTrace
        Initial point plus one record per accepted iteration.

    Raises
    ------
    ConfigurationError
        If the objective is infinite at ``initial``.
    ObjectiveError
        If the objective yields NaN or a non-number.
    """
    ls = line_search or armijo_backtracking
    calls = 0

    def f(v):
        nonlocal calls
        calls += 1
        return objective(v)

    x = np.array(initial, dtype=np.float64).ravel()
    if np.any(x < config.lower) or np.any(x > config.upper):
        raise ConfigurationError(f"initial point {x.tolist()} lies outside the feasible box")
    fx = _checked(f(x), x)
    if math.isinf(fx):
        raise ConfigurationError(f"objective is infinite at the initial point {x.tolist()}")

    k_dim = x.size
    period = config.restart_period or k_dim
    lo, hi = config.lower, config.upper

    def projected(point, grad):
        # drop components that push against an active bound
        out = grad.copy()
        out[(point <= lo) & (grad > 0)] = 0.0
        out[(point >= hi) & (grad < 0)] = 0.0
        return out

    g = projected(x, fd_gradient(f, x, config.scheme, f0=fx))
    trace = OptimTrace()
    trace.records.append(IterationRecord(0, tuple(x.tolist()), fx, float(np.linalg.norm(g)), 0.0, True))
    p = -g
    restart = True
    stall = 0
    since_restart = 0
    prev_decrease = None  # alpha * g.p of the last accepted step

    for it in range(1, config.max_iterations + 1):
        if float(np.linalg.norm(g)) <= config.gradient_tolerance:
            trace.termination = "gradient_tolerance"
            break
        p = -projected(x, -p)
        if float(g @ p) >= 0:
            p, restart = -g, True

        while True:
            slope = float(g @ p)
            # first trial reuses the last step's predicted decrease
            alpha_init = config.line_search.initial_step if prev_decrease is None else prev_decrease / slope
            alpha_max = _max_feasible_step(x, p, lo, hi)
            step = ls(f, x, fx, g, p, alpha_init, alpha_max, config.line_search, lo, hi)
            if step is not None or restart:
                break
            p, restart = -g, True
        if step is None:
            trace.termination = "line_search_failure"
            break

        alpha, f_new = step
        prev_decrease = alpha * slope
        x_new = np.clip(x + alpha * p, lo, hi)
        g_new = projected(x_new, fd_gradient(f, x_new, config.scheme, f0=f_new))
        rel = (fx - f_new) / max(abs(fx), 1e-300)
        stall = stall + 1 if rel < config.stall_tolerance else 0

        gnorm = float(np.linalg.norm(g_new))
        trace.records.append(IterationRecord(it, tuple(x_new.tolist()), f_new, gnorm, float(alpha), restart))
        logger.debug("iter %d  f=%.10g  |g|=%.3g  alpha=%.3g", it, f_new, gnorm, alpha)

        since_restart = 0 if restart else since_restart + 1
        beta = float(g_new @ (g_new - g)) / max(float(g @ g), 1e-300)
        if beta < 0 or since_restart + 1 >= period:
            p, restart = -g_new, True
        else:
            p, restart = -g_new + beta * p, False
        x, fx, g = x_new, f_new, g_new

        if gnorm > config.gradient_tolerance and stall >= config.stall_iterations:
            trace.termination = "stalled"
            break
    else:
        trace.termination = (
            "gradient_tolerance" if np.linalg.norm(g) <= config.gradient_tolerance else "max_iterations"
        )

    trace.evaluations = calls
    return x, trace
