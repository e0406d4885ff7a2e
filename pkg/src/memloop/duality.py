"""Forward RL baselines and their time-reversed counterpart.

Forward: tabular TD(0) and Q-learning trained on rollouts, checked against
exact chain solutions. Backward: chained predecessor reconstruction from the
same transition memory. The two directions share one gridworld so the
duality can be measured, not just stated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import DataError, InputError, Kernel, StateError, Trajectory, TransitionMemory, make_rng
from .envs import GridWorld, grid_rollout
from .retrieval import retrieve_adapt, soft_retrieve

__all__ = [
    "TabularValue",
    "TabularQ",
    "DualityReport",
    "td0_update",
    "q_update",
    "greedy_action",
    "exact_state_values",
    "expected_td_update",
    "backward_reconstruct",
    "contextual_expected_reward",
    "duality_experiment",
]


@dataclass(frozen=True)
class TabularValue:
    values: np.ndarray
    alpha: float = 0.1
    discount: float = 0.9

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise InputError("values must be a finite 1-D array")
        if not (0.0 < self.alpha <= 1.0):
            raise InputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (0.0 <= self.discount < 1.0):
            raise InputError(f"discount must lie in [0, 1), got {self.discount}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class TabularQ:
    table: np.ndarray
    alpha: float = 0.1
    discount: float = 0.9

    def __post_init__(self):
        q = np.asarray(self.table, dtype=np.float64)
        if q.ndim != 2 or not np.all(np.isfinite(q)):
            raise InputError("table must be a finite 2-D array")
        if not (0.0 < self.alpha <= 1.0):
            raise InputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (0.0 <= self.discount < 1.0):
            raise InputError(f"discount must lie in [0, 1), got {self.discount}")
        object.__setattr__(self, "table", q)


def _check_index(i: int, size: int, what: str):
    if not (0 <= i < size):
        raise InputError(f"{what} index {i} out of range [0, {size})")


def td0_update(values: TabularValue, s: int, r: float, s_next: int,
               alpha: Optional[float] = None) -> TabularValue:
    """V(s) += alpha * (r + discount * V(s') - V(s)); only V(s) changes."""
    n = len(values.values)
    _check_index(s, n, "state")
    _check_index(s_next, n, "next state")
    if not np.isfinite(r):
        raise InputError("reward must be finite")
    a = values.alpha if alpha is None else float(alpha)
    v = values.values.copy()
    v[s] += a * (r + values.discount * v[s_next] - v[s])
    return replace(values, values=v)


def q_update(q: TabularQ, s: int, a: int, r: float, s_next: int,
             alpha: Optional[float] = None) -> TabularQ:
    """Damped Q backup; alpha = 1 is the bare assignment
    Q(s,a) <- r + discount * max_a' Q(s',a')."""
    n, m = q.table.shape
    _check_index(s, n, "state")
    _check_index(s_next, n, "next state")
    _check_index(a, m, "action")
    if not np.isfinite(r):
        raise InputError("reward must be finite")
    lr = q.alpha if alpha is None else float(alpha)
    t = q.table.copy()
    t[s, a] = (1.0 - lr) * t[s, a] + lr * (r + q.discount * t[s_next].max())
    return replace(q, table=t)


def greedy_action(q: TabularQ, s: int) -> int:
    """Argmax over actions; ties resolve to the lowest action index."""
    _check_index(s, q.table.shape[0], "state")
    return int(np.argmax(q.table[s]))


def exact_state_values(P: np.ndarray, r: np.ndarray, discount: float) -> np.ndarray:
    """Policy values by linear solve: V = (I - discount P)^-1 r."""
    P = np.asarray(P, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    return np.linalg.solve(np.eye(len(r)) - discount * P, r)


def expected_td_update(values: TabularValue, P: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Expected TD(0) increment per state; zero exactly at the true values."""
    v = values.values
    return values.alpha * (r + values.discount * (P @ v) - v)


# ---------------------------------------------------------------------------
# Backward reconstruction and contextual expectation
# ---------------------------------------------------------------------------


def backward_reconstruct(store: TransitionMemory, kernel: Kernel,
                         trajectory_suffix: Trajectory) -> list[np.ndarray]:
    """Chain backward retrieval along a suffix, newest step first.

    Suffix steps must be transition-aligned: step k pairs a content with the
    context of the transition that produced it, so the query (context of step
    k, successor = chained content) matches stored entries directly. The
    anchor is the newest suffix content; each emitted estimate becomes the
    next query target (no teacher forcing). Output k estimates the content one
    step before suffix step (last - k).
    """
    if len(store) == 0:
        raise StateError("cannot reconstruct from an empty memory")
    if len(trajectory_suffix) < 1:
        raise InputError("suffix needs at least one step")
    chained = trajectory_suffix.contents[-1]
    out = []
    for t in range(len(trajectory_suffix) - 1, -1, -1):
        est = retrieve_adapt(store, chained, trajectory_suffix.contexts[t], kernel).estimate
        out.append(est)
        chained = est
    return out


def contextual_expected_reward(store: TransitionMemory, kernel: Kernel,
                               context_samples) -> float:
    """Doubly nested expectation: mean over contexts of the retrieval-weighted
    stored reward. Matching an unrewarded entry (weight > 1e-12) is a data error."""
    samples = np.atleast_2d(np.asarray(context_samples, dtype=np.float64))
    if samples.shape[0] < 1:
        raise InputError("need at least one context sample")
    rewards = store.rewards()
    inner = np.empty(len(samples))
    for i, psi in enumerate(samples):
        res = soft_retrieve(store, psi, kernel)
        hot = res.weights > 1e-12
        if np.any(hot & np.isnan(rewards)):
            raise DataError("matched a memory entry that has no reward")
        inner[i] = float(res.weights[hot] @ rewards[hot])
    return float(inner.mean())


# ---------------------------------------------------------------------------
# The duality experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualityReport:
    """One checkpoint of the forward/backward comparison.

    backward_recon_error is NaN when no episodes have been ingested yet.
    """

    forward_value_error: float
    backward_recon_error: float
    memory_size: int
    iterations_forward: int
    iterations_backward: int
    episodes: int


def _anneal(alpha0: float, k: int, scale: float = 2000.0) -> float:
    return alpha0 * scale / (scale + k)


def duality_experiment(
    env: GridWorld,
    episodes: int,
    seeds,
    steps_per_episode: int = 40,
    discount: float = 0.9,
    alpha0: float = 1.0,
    kernel: Optional[Kernel] = None,
    holdout_suffixes: int = 20,
    suffix_len: int = 5,
    checkpoints: Optional[list] = None,
) -> dict:
    """Train the forward learners while filling memory; evaluate backward
    reconstruction on held-out suffixes at each checkpoint.

    Forward: TD(0) with annealed alpha on the deterministic loop-following
    chain, scored against the exact linear-solve values of that chain
    (restricted to its states). Backward: memory grows from random-policy
    episodes; held-out random suffixes from a separate stream are
    reconstructed and scored by mean distance to the true predecessors.

    Returns {seed: [DualityReport per checkpoint]}.
    """
    if kernel is None:
        kernel = Kernel(kind="gaussian", bandwidth=0.25, successor_weight=1.0)
    if checkpoints is None:
        checkpoints = sorted({max(1, episodes // 8), max(1, episodes // 4),
                              max(1, episodes // 2), episodes}) if episodes else [0]
    P, r, _ = env.policy_chain("loop-following")
    v_exact = exact_state_values(P, r, discount)

    results: dict = {}
    for seed in seeds:
        rng = make_rng(seed)
        holdout_rng = make_rng(seed + 10_000_019)

        # Forward learner on the loop chain.
        values = TabularValue(np.zeros(len(v_exact)), alpha=alpha0, discount=discount)
        q = TabularQ(np.zeros((env.n_states, 4)), alpha=alpha0, discount=discount)
        memory = TransitionMemory(context_dim=env.context_dim, content_dim=2)

        # Held-out evaluation suffixes (same behavior policy, separate stream).
        holdouts = []
        for _ in range(holdout_suffixes):
            traj, _, _ = grid_rollout(env, "random", suffix_len + 1, holdout_rng)
            holdouts.append(traj)

        reports = []
        updates = 0
        done_episodes = 0
        for cp in checkpoints:
            while done_episodes < cp:
                # forward: one lap of the loop chain
                loop = env.check_loop()
                for i in range(len(loop)):
                    j = (i + 1) % len(loop)
                    values = td0_update(values, i, r[i], j, alpha=_anneal(alpha0, updates))
                    updates += 1
                # backward: one random episode into memory (+ Q updates)
                traj, mem, rew = grid_rollout(env, "random", steps_per_episode, rng)
                for e in mem.entries:
                    memory.append(e)
                    s = env.cell_index((int(e.content[0] - 0.5), int(e.content[1] - 0.5)))
                    s_next = env.cell_index((int(e.successor[0] - 0.5), int(e.successor[1] - 0.5)))
                    q = q_update(q, s, int(e.context[-1]), e.reward, s_next,
                                 alpha=_anneal(alpha0, updates))
                done_episodes += 1

            forward_err = float(np.abs(values.values - v_exact).max())
            if len(memory) and done_episodes:
                errs, n_queries = [], 0
                for traj in holdouts:
                    # transition-aligned: context t with the content it produced
                    suffix = Trajectory(
                        times=traj.times[1:],
                        contexts=traj.contexts[:-1],
                        contents=traj.contents[1:],
                    )
                    ests = backward_reconstruct(memory, kernel, suffix)
                    n_queries += len(ests)
                    truth = traj.contents[-2::-1]  # contents preceding each suffix step
                    errs.extend(np.linalg.norm(np.stack(ests) - truth, axis=1))
                backward_err = float(np.median(errs))
            else:
                backward_err, n_queries = math.nan, 0
            reports.append(
                DualityReport(
                    forward_value_error=forward_err,
                    backward_recon_error=backward_err,
                    memory_size=len(memory),
                    iterations_forward=updates,
                    iterations_backward=n_queries,
                    episodes=done_episodes,
                )
            )
        results[seed] = reports
    return results
