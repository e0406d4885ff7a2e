"""Bootstrapping operator, composite fixed-point iteration, Poincare rounds.

The forward update is the convex blend ``pull * phi + (1 - pull) * g(psi)``,
the minimal family whose Lipschitz constant in the content argument is known
exactly (= pull). That makes the contraction precondition
``pull * L_R < 1`` checkable instead of assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ConfigError, InputError, StateError, Trajectory, TransitionMemory, as_point
from .retrieval import estimate_retrieval_lipschitz, retract_to_cycle, retrieve_adapt, soft_retrieve

__all__ = [
    "BootstrapConfig",
    "IterationTrace",
    "AmortizationReport",
    "LinearRetrieval",
    "constant_target",
    "linear_target",
    "cycle_target",
    "bootstrap_step",
    "composite_step",
    "fixed_point_iterate",
    "poincare_compose",
    "amortization_gap",
    "contraction_precondition",
]


@dataclass(frozen=True)
class BootstrapConfig:
    """Contraction factor and context-conditioned target generator."""

    pull: float
    target_map: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not (0.0 < self.pull < 1.0):
            raise ConfigError(f"pull must lie in the open interval (0, 1), got {self.pull}")

    def target(self, psi: np.ndarray) -> np.ndarray:
        return as_point(self.target_map(psi), name="target_map output")


def constant_target(value) -> Callable[[np.ndarray], np.ndarray]:
    v = as_point(value, name="target value")
    return lambda psi: v


def linear_target(matrix, offset) -> Callable[[np.ndarray], np.ndarray]:
    a = np.asarray(matrix, dtype=np.float64)
    b = as_point(offset, name="target offset")
    return lambda psi: a @ np.asarray(psi, dtype=np.float64) + b


def cycle_target(cycle, propose: Callable[[np.ndarray], np.ndarray]):
    """Target that retracts a context-driven proposal onto a consolidated cycle."""
    return lambda psi: retract_to_cycle(propose(psi), cycle)


@dataclass(frozen=True)
class LinearRetrieval:
    """Engineered retrieval for contraction diagnostics: x -> center + gain (x - center).

    gain = 1 is exact retrieval (L_R = 1); gain > 1 is the adversarial
    expansive case used to demonstrate contraction failure.
    """

    gain: float = 1.0
    center: float = 0.0

    def reconstruct(self, target: np.ndarray) -> np.ndarray:
        return self.center + self.gain * (target - self.center)


@dataclass
class IterationTrace:
    """Iterates and residuals of a fixed-point run; non-convergence is data."""

    iterates: np.ndarray
    residuals: np.ndarray
    converged: bool
    contraction_estimate: float
    tol: float
    orbit: Optional[Trajectory] = field(default=None)

    def residual_ratios(self) -> np.ndarray:
        """Consecutive residual ratios with denominators below 10*tol ignored."""
        r = self.residuals
        keep = r[:-1] > 10.0 * self.tol
        return r[1:][keep] / r[:-1][keep]


@dataclass(frozen=True)
class AmortizationReport:
    """Loss of the cycle-constrained fixed point vs. an unconstrained oracle."""

    mai_loss: float
    oracle_loss: float
    gap: float
    mai_iterations: int
    oracle_iterations: int


def bootstrap_step(phi, psi, config: BootstrapConfig) -> np.ndarray:
    """pull * phi + (1 - pull) * g(psi); Lipschitz constant in phi is exactly pull."""
    phi = as_point(phi, name="content")
    psi = as_point(psi, name="context")
    target = config.target(psi)
    if target.size != phi.size:
        raise InputError(f"target dimension {target.size} != content dimension {phi.size}")
    return config.pull * phi + (1.0 - config.pull) * target


def _reconstruct(store, kernel, phi, psi) -> np.ndarray:
    """One retrieval pass. store=None means exact (identity) retrieval."""
    if store is None:
        return np.asarray(phi, dtype=np.float64)
    if isinstance(store, LinearRetrieval):
        return store.reconstruct(np.asarray(phi, dtype=np.float64))
    if isinstance(store, TransitionMemory):
        return retrieve_adapt(store, phi, psi, kernel).estimate
    raise InputError(f"unsupported retrieval source {type(store).__name__}")


def composite_step(store, kernel, config: BootstrapConfig, phi, psi) -> np.ndarray:
    """T(phi, psi) = F(R(phi, psi), psi)."""
    return bootstrap_step(_reconstruct(store, kernel, phi, psi), psi, config)


def _finish_trace(iterates, residuals, tol) -> IterationTrace:
    res = np.asarray(residuals, dtype=np.float64)
    converged = bool(len(res) and res[-1] <= tol)
    keep = res[:-1] > 10.0 * tol
    ratios = res[1:][keep] / res[:-1][keep]
    contraction = float(ratios.max()) if len(ratios) else 0.0
    return IterationTrace(
        iterates=np.asarray(iterates, dtype=np.float64),
        residuals=res,
        converged=converged,
        contraction_estimate=contraction,
        tol=float(tol),
    )


def fixed_point_iterate(
    store, kernel, config: BootstrapConfig, phi0, psi, tol: float, max_iter: int
) -> IterationTrace:
    """Iterate the composite map at fixed context until the residual drops below tol.

    Non-convergence within max_iter returns a trace with converged=False; the
    entropy/reversibility experiments need to observe that regime, so it is
    not an exception.
    """
    if not (tol > 0):
        raise InputError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise InputError(f"max_iter must be >= 1, got {max_iter}")
    cur = as_point(phi0, name="initial content")
    iterates = [cur]
    residuals = []
    for _ in range(max_iter):
        nxt = composite_step(store, kernel, config, cur, psi)
        residuals.append(float(np.linalg.norm(nxt - cur)))
        iterates.append(nxt)
        cur = nxt
        if residuals[-1] <= tol:
            break
    return _finish_trace(iterates, residuals, tol)


def poincare_compose(
    store,
    kernel,
    config: BootstrapConfig,
    context_cycle: Sequence,
    phi0,
    rounds: int,
    tol: float,
) -> IterationTrace:
    """Apply the composite map around a K-long context cycle, round by round.

    The per-round map composes K contractions, so its Lipschitz constant is at
    most (pull * L_R)^K. The trace indexes round endpoints; on the final round
    the K within-round states are emitted as a Trajectory (the periodic orbit)
    in the ``orbit`` field, state ``i`` being the content after context ``i``.
    """
    contexts = [as_point(c, name=f"context[{i}]") for i, c in enumerate(context_cycle)]
    if len(contexts) < 1:
        raise InputError("context cycle must have K >= 1 entries")
    if rounds < 1:
        raise InputError(f"rounds must be >= 1, got {rounds}")
    if not (tol > 0):
        raise InputError(f"tol must be > 0, got {tol}")
    cur = as_point(phi0, name="initial content")
    round_ends = [cur]
    residuals = []
    within = []
    for _ in range(rounds):
        within = []
        for psi in contexts:
            cur = composite_step(store, kernel, config, cur, psi)
            within.append(cur)
        residuals.append(float(np.linalg.norm(within[-1] - round_ends[-1])))
        round_ends.append(cur)
        if residuals[-1] <= tol:
            break
    trace = _finish_trace(round_ends, residuals, tol)
    trace.orbit = Trajectory(
        times=np.arange(len(contexts)),
        contexts=np.stack(contexts),
        contents=np.stack(within),
    )
    return trace


def _coordinate_descent(loss, psi, lo, hi, budget: int, rng) -> tuple[np.ndarray, float, int]:
    """Multi-start coordinate descent over a box; trustworthy at d <= 3."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    d = lo.size
    evals = 0
    n_starts = max(2, min(budget // 4, 8 * d))
    starts = rng.uniform(lo, hi, size=(n_starts, d))
    best_x, best_v = None, math.inf
    for s in starts:
        v = float(loss(psi, s))
        evals += 1
        if v < best_v:
            best_x, best_v = s.copy(), v
    step = (hi - lo) / 8.0
    while evals < budget and float(step.max()) > 1e-13:
        improved = False
        for i in range(d):
            for sgn in (1.0, -1.0):
                if evals >= budget:
                    return best_x, best_v, evals
                cand = best_x.copy()
                cand[i] = float(np.clip(cand[i] + sgn * step[i], lo[i], hi[i]))
                v = float(loss(psi, cand))
                evals += 1
                if v < best_v:
                    best_x, best_v = cand, v
                    improved = True
        if not improved:
            step /= 2.0
    return best_x, best_v, evals


def amortization_gap(
    env,
    store,
    kernel,
    config: BootstrapConfig,
    psi,
    loss,
    oracle_budget: int,
    tol: float = 1e-10,
    max_iter: int = 500,
    rng: Optional[np.random.Generator] = None,
) -> AmortizationReport:
    """Loss gap between the cycle-constrained fixed point and a brute oracle.

    The MAI side warm-starts from memory, iterates to its fixed point and is
    retracted onto the environment's consolidated cycle when one exists; the
    oracle side spends ``oracle_budget`` loss evaluations on multi-start
    coordinate descent over the environment's latent bounding box.
    """
    if oracle_budget < 1:
        raise InputError(f"oracle_budget must be >= 1, got {oracle_budget}")
    rng = rng if rng is not None else np.random.default_rng(0)
    psi = as_point(psi, name="context")

    if isinstance(store, TransitionMemory):
        phi0 = soft_retrieve(store, psi, kernel).estimate
    else:
        phi0 = config.target(psi)
    trace = fixed_point_iterate(store, kernel, config, phi0, psi, tol, max_iter)
    phi = trace.iterates[-1]
    cycle = getattr(env, "consolidated_cycle", None)
    cycle = cycle() if callable(cycle) else cycle
    if cycle is not None:
        phi = retract_to_cycle(phi, cycle)
    mai_loss = float(loss(psi, phi))
    mai_iterations = len(trace.residuals)

    lo, hi = env.latent_bounds()
    _, oracle_loss, oracle_iterations = _coordinate_descent(loss, psi, lo, hi, oracle_budget, rng)
    return AmortizationReport(
        mai_loss=mai_loss,
        oracle_loss=oracle_loss,
        gap=mai_loss - oracle_loss,
        mai_iterations=mai_iterations,
        oracle_iterations=oracle_iterations,
    )


def contraction_precondition(
    store, kernel, config: BootstrapConfig, context, rng: np.random.Generator
) -> float:
    """Estimated pull * L_R; below 1 the composite map is a contraction."""
    if store is None:
        lip = 1.0
    elif isinstance(store, LinearRetrieval):
        lip = abs(store.gain)
    else:
        lip = estimate_retrieval_lipschitz(store, kernel, context, rng)
    return config.pull * lip
