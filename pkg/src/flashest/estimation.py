"""Histogram-based channel parameter estimation.

The estimated histogram for parameters ``alpha`` is the expected number of
cells per bin, ``N_hat[i] = sum_k N_k * P(bin i | level k)``.  Fitting
minimizes

    C(alpha) = sum_i ((N_ref[i] - N_hat[i]) / N) ** 2 = ||G(alpha)||**2

with residual ``G = (N_hat - N_ref) / N``.  Gradient descent, Gauss-Newton
and Levenberg-Marquardt (Marquardt diagonal scaling) are provided; all of
them use a finite-difference Jacobian of ``G``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .binning import BinBoundaries, Histogram
from .channel_model import PARAM_NAMES, ChannelParams, LevelLayout, bin_probability_matrix

__all__ = [
    "CostContext",
    "SolverConfig",
    "SolverReport",
    "LOWER_BOUNDS",
    "estimated_bin_counts",
    "cost",
    "residual_vector",
    "jacobian",
    "gradient",
    "solve_gd",
    "solve_gn",
    "solve_lm",
    "gn_step",
    "lm_step",
    "solve",
    "check_convergence",
    "SOLVERS",
]

# Only lambda has a hard floor.  sigma_p, sigma_e and gamma_sigma_r enter the
# model only through their squares, so they are left free and folded to |.|;
# clamping them would park iterates where their derivative vanishes.
LOWER_BOUNDS = np.array([1e-9, -np.inf, -np.inf, -np.inf, -np.inf])
_FOLDED = [1, 2, 3]


@dataclass(frozen=True)
class CostContext:
    """Reference histogram plus everything needed to predict one."""

    reference: Histogram
    bins: BinBoundaries
    layout: LevelLayout

    def __post_init__(self):
        if self.reference.M != self.bins.M:
            raise ValueError(
                f"reference has {self.reference.M} bins but boundaries define {self.bins.M}"
            )
        if abs(self.reference.total - self.layout.total) > 1e-6 * max(self.layout.total, 1):
            raise ValueError(
                f"reference total {self.reference.total} != layout cell count {self.layout.total}"
            )
        if self.layout.total <= 0:
            raise ValueError("layout has no cells")

    @property
    def N(self) -> int:
        return self.layout.total

    def residual(self, theta: np.ndarray) -> np.ndarray:
        """``(N_hat - N_ref) / N`` for a raw parameter vector."""
        return (_predicted(theta, self) - self.reference.as_array()) / self.N


@dataclass(frozen=True)
class SolverConfig:
    eta: float = 1e-8
    max_iterations: int = 500
    gd_step: float = 1e-2
    lm_beta0: float = 1e-2
    lm_v: float = 0.1
    fd_step_rel: float = 1e-5
    fd_step_abs: float = 1e-9
    # "running_max" or "current" (plain diag(J^T J) of the latest Jacobian)
    lm_scaling: str = "running_max"
    # recompute the Jacobian on every LM iteration, even after a rejected step
    lm_always_recompute_jacobian: bool = False

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.lm_v < 1:
            raise ValueError("lm_v must lie in (0, 1)")
        if not self.gd_step > 0:
            raise ValueError("gd_step must be positive")
        if not (self.fd_step_rel > 0 and self.fd_step_abs > 0):
            raise ValueError("finite-difference steps must be positive")
        if self.lm_scaling not in ("running_max", "current"):
            raise ValueError(f"unknown lm_scaling {self.lm_scaling!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown solver config key(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class SolverReport:
    solver: str
    estimate: ChannelParams
    iterations: int
    cost_trace: list[float]
    step_trace: list[float]
    converged_by_step: bool
    within_one_percent: Optional[bool] = None
    clamp_events: list[dict] = field(default_factory=list)
    rank_deficient: bool = False
    failure: Optional[str] = None
    param_trace: list[list[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "estimate": self.estimate.to_dict(),
            "iterations": self.iterations,
            "final_cost": self.cost_trace[-1],
            "converged_by_step": self.converged_by_step,
            "within_one_percent": self.within_one_percent,
            "rank_deficient": self.rank_deficient,
            "failure": self.failure,
            "clamp_events": self.clamp_events,
            "cost_trace": self.cost_trace,
            "step_trace": self.step_trace,
            "param_trace": self.param_trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# cost and derivatives
# ---------------------------------------------------------------------------


def _theta(params) -> np.ndarray:
    if isinstance(params, ChannelParams):
        return params.as_array()
    return np.asarray(params, dtype=float)


def _predicted(theta: np.ndarray, ctx: CostContext) -> np.ndarray:
    P = bin_probability_matrix(theta, ctx.layout.levels, ctx.bins.cuts)
    return np.asarray(ctx.layout.counts, dtype=float) @ P


def estimated_bin_counts(params, ctx: CostContext) -> np.ndarray:
    """Expected cell count per bin under ``params`` (real-valued)."""
    if not isinstance(params, ChannelParams):
        params = ChannelParams.from_array(params)
    return _predicted(params.as_array(), ctx)


def residual_vector(params, ctx: CostContext) -> np.ndarray:
    """``(N_hat - N_ref) / N``; sums to zero when both histograms hold N cells.

    The solvers only need ``ctx.residual(theta)``, so any object providing
    that method can stand in for a :class:`CostContext`.
    """
    return ctx.residual(_theta(params))


def cost(params, ctx: CostContext) -> float:
    g = residual_vector(params, ctx)
    return float(g @ g)


def _fd_steps(theta: np.ndarray, config: SolverConfig) -> np.ndarray:
    return np.maximum(config.fd_step_rel * np.abs(theta), config.fd_step_abs)


def jacobian(
    params,
    ctx: CostContext,
    config: SolverConfig = SolverConfig(),
    residual: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """Central-difference Jacobian of the residual, shape ``(M, 5)``.

    Where the backward point would leave the valid region a forward
    difference of the same step is used instead.
    """
    theta = _theta(params)
    if residual is None:
        def residual(t):
            return residual_vector(t, ctx)

    h = _fd_steps(theta, config)
    base = None
    cols = []
    for j in range(theta.size):
        up = theta.copy()
        up[j] += h[j]
        down = theta.copy()
        down[j] -= h[j]
        if down[j] < LOWER_BOUNDS[j] or (LOWER_BOUNDS[j] > 0 and down[j] <= 0):
            if base is None:
                base = residual(theta)
            cols.append((residual(up) - base) / h[j])
        else:
            cols.append((residual(up) - residual(down)) / (2 * h[j]))
    return np.column_stack(cols)


def gradient(params, ctx: CostContext, config: SolverConfig = SolverConfig()) -> np.ndarray:
    """``2 J^T G``."""
    theta = _theta(params)
    return 2.0 * jacobian(theta, ctx, config).T @ residual_vector(theta, ctx)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def _clamp(theta: np.ndarray, iteration: int, events: list) -> np.ndarray:
    low = theta < LOWER_BOUNDS
    if np.any(low):
        events.append(
            {
                "iteration": iteration,
                "action": "clamped",
                "parameters": [PARAM_NAMES[j] for j in np.flatnonzero(low)],
            }
        )
        theta = np.where(low, LOWER_BOUNDS, theta)
    return _fold(theta)


def _fold(theta: np.ndarray) -> np.ndarray:
    theta = theta.copy()
    theta[_FOLDED] = np.abs(theta[_FOLDED])
    return theta


def gn_step(J: np.ndarray, G: np.ndarray) -> tuple[np.ndarray, int]:
    """Minimum-norm solution of ``J delta = G`` and the numerical rank of ``J``."""
    delta, _, rank, _ = np.linalg.lstsq(J, G, rcond=None)
    return delta, int(rank)


def lm_step(A, rhs, beta, scale, free=None) -> np.ndarray:
    """Solve ``(A + beta * diag(scale)) delta = rhs`` over the ``free`` coordinates.

    ``A = J^T J`` and ``rhs = J^T G``; fixed coordinates get a zero step.
    Raises ``LinAlgError`` when the damped system is singular.
    """
    A = np.asarray(A, dtype=float)
    if free is None:
        free = np.ones(A.shape[0], dtype=bool)
    delta = np.zeros(A.shape[0])
    sub = np.ix_(free, free)
    delta[free] = np.linalg.solve(A[sub] + beta * np.diag(np.asarray(scale)[free]), rhs[free])
    return delta


def _finish(solver, theta, iterations, costs, steps, by_step, truth, **extra) -> SolverReport:
    theta = np.asarray(theta, dtype=float).copy()
    # an exact zero spread is a valid limit of the model but not a valid
    # ChannelParams; report the smallest representable spread instead
    theta[_FOLDED] = np.maximum(theta[_FOLDED], np.finfo(float).tiny)
    estimate = ChannelParams.from_array(theta)
    within = None if truth is None else check_convergence(estimate, truth)
    return SolverReport(
        solver=solver,
        estimate=estimate,
        iterations=iterations,
        cost_trace=costs,
        step_trace=steps,
        converged_by_step=by_step,
        within_one_percent=within,
        **extra,
    )


def _quiet(fn):
    """Diverging iterates legitimately overflow; outcomes are recorded, not warned."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(all="ignore"):
            return fn(*args, **kwargs)

    return wrapper


@_quiet
def solve_gd(
    ctx: CostContext,
    init: ChannelParams,
    config: SolverConfig = SolverConfig(),
    truth: Optional[ChannelParams] = None,
) -> SolverReport:
    """Fixed-step gradient descent on ``C``.

    A step that would raise the cost is not taken and the step size is
    halved instead.
    """
    theta = init.as_array()
    beta = config.gd_step
    g = residual_vector(theta, ctx)
    c = float(g @ g)
    costs, steps, events, path = [c], [], [], [theta.tolist()]
    by_step = False
    k = 0
    while k < config.max_iterations:
        grad = 2.0 * jacobian(theta, ctx, config).T @ g
        cand = _clamp(theta - beta * grad, k, events)
        step = float(np.linalg.norm(cand - theta))
        g_new = residual_vector(cand, ctx)
        c_new = float(g_new @ g_new)
        k += 1
        if not math.isfinite(c_new) or c_new > c:
            beta *= 0.5
        else:
            theta, g, c = cand, g_new, c_new
        costs.append(c)
        steps.append(step)
        path.append(theta.tolist())
        if step <= config.eta:
            by_step = True
            break
    return _finish(
        "gd", theta, k, costs, steps, by_step, truth, clamp_events=events, param_trace=path
    )


@_quiet
def solve_gn(
    ctx: CostContext,
    init: ChannelParams,
    config: SolverConfig = SolverConfig(),
    truth: Optional[ChannelParams] = None,
) -> SolverReport:
    """Undamped Gauss-Newton, ``alpha <- alpha - pinv(J) G``.

    The step is the minimum-norm least-squares solution, so a rank-deficient
    Jacobian still yields a step (and sets ``rank_deficient`` in the report).
    Divergence to non-finite residuals ends the run with ``failure`` set.
    """
    theta = init.as_array()
    g = residual_vector(theta, ctx)
    costs, steps, events, path = [float(g @ g)], [], [], [theta.tolist()]
    by_step = False
    rank_deficient = False
    failure = None
    k = 0
    while k < config.max_iterations:
        J = jacobian(theta, ctx, config)
        if not np.all(np.isfinite(J)):
            failure = f"non-finite Jacobian at iteration {k}"
            break
        delta, rank = gn_step(J, g)
        rank_deficient |= bool(rank < J.shape[1])
        cand = _clamp(theta - delta, k, events)
        step = float(np.linalg.norm(cand - theta))
        k += 1
        g_new = residual_vector(cand, ctx)
        if not np.all(np.isfinite(g_new)):
            failure = f"non-finite residual at iteration {k}"
            break
        theta, g = cand, g_new
        costs.append(float(g @ g))
        steps.append(step)
        path.append(theta.tolist())
        if step <= config.eta:
            by_step = True
            break
    return _finish(
        "gn", theta, k, costs, steps, by_step, truth,
        clamp_events=events, rank_deficient=rank_deficient, failure=failure, param_trace=path,
    )


@_quiet
def solve_lm(
    ctx: CostContext,
    init: ChannelParams,
    config: SolverConfig = SolverConfig(),
    truth: Optional[ChannelParams] = None,
) -> SolverReport:
    """Levenberg-Marquardt with ``(J^T J + beta * D) delta = J^T G``.

    A candidate ``alpha - delta`` is accepted only if it lowers the squared
    residual; the damping then shrinks by ``lm_v`` and the Jacobian is
    refreshed.  A rejected candidate grows the damping by ``1 / lm_v`` and
    keeps the old Jacobian.  The loop stops once a proposed step is no
    longer than ``eta``.

    ``D`` is ``diag(J^T J)``; with ``lm_scaling="running_max"`` each entry
    keeps the largest value seen so far, so a parameter whose sensitivity
    momentarily vanishes is still damped.  A parameter sitting on its lower
    bound whose descent direction points out of the domain is frozen for
    that step.
    """
    theta = init.as_array()
    beta = config.lm_beta0
    v = config.lm_v
    g = residual_vector(theta, ctx)
    sq = float(g @ g)
    costs, steps, events, path = [sq], [], [], [theta.tolist()]
    by_step = False
    update = True
    scale = np.zeros(theta.size)
    k = 0
    while k < config.max_iterations:
        if update or config.lm_always_recompute_jacobian:
            J = jacobian(theta, ctx, config)
            A = J.T @ J
            rhs = J.T @ g
            if config.lm_scaling == "running_max":
                scale = np.maximum(scale, np.diag(A))
            else:
                scale = np.diag(A)
        k += 1
        free = ~((theta <= LOWER_BOUNDS) & (rhs > 0))
        try:
            delta = lm_step(A, rhs, beta, scale, free)
            solved = bool(np.all(np.isfinite(delta)))
        except np.linalg.LinAlgError:
            solved = False
        if not solved:
            update = False
            beta /= v
            costs.append(sq)
            steps.append(float("nan"))
            path.append(theta.tolist())
            continue
        cand = _clamp(theta - delta, k - 1, events)
        step = float(np.linalg.norm(cand - theta))
        g_new = residual_vector(cand, ctx)
        sq_new = float(g_new @ g_new)
        if sq_new < sq or step == 0.0:
            update = True
            beta *= v
            theta, g, sq = cand, g_new, sq_new
        else:
            update = False
            beta /= v
        costs.append(sq)
        steps.append(step)
        path.append(theta.tolist())
        if step <= config.eta:
            by_step = True
            break
    return _finish(
        "lm", theta, k, costs, steps, by_step, truth, clamp_events=events, param_trace=path
    )


SOLVERS = {"gd": solve_gd, "gn": solve_gn, "lm": solve_lm}


def solve(name: str, ctx, init, config=SolverConfig(), truth=None) -> SolverReport:
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; expected one of {sorted(SOLVERS)}") from None
    return fn(ctx, init, config, truth)


def check_convergence(estimate: ChannelParams, truth: ChannelParams, rel: float = 0.01) -> bool:
    """True iff every parameter lies within ``rel`` (relative) of the truth."""
    t = truth.as_array()
    if np.any(t == 0):
        zero = [PARAM_NAMES[j] for j in np.flatnonzero(t == 0)]
        raise ValueError(f"relative check undefined for zero truth component(s): {zero}")
    return bool(np.all(np.abs(estimate.as_array() - t) <= rel * np.abs(t)))
