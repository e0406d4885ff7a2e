"""Retrieval-and-adaptation over transition memory.

Forward addressing matches on context alone; backward retrieval matches on
(context, predicted successor) and reconstructs the predecessor content as a
kernel-weighted average. Adaptation is weighted averaging only; there is no
gradient refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    InputError,
    Kernel,
    StateError,
    TransitionMemory,
    UNDERFLOW,
    as_point,
    kernel_weight,
)
from .topology import CycleRepresentative

__all__ = [
    "RetrievalResult",
    "soft_retrieve",
    "retrieve_adapt",
    "retract_to_cycle",
    "cycle_consistency_residual",
    "estimate_retrieval_lipschitz",
]


@dataclass(frozen=True)
class RetrievalResult:
    """Weighted reconstruction from memory.

    ``weights`` sum to 1 over all entries; ``matched_indices`` lists entries
    with nonzero weight; ``effective_support`` is the inverse participation
    ratio 1 / sum(w^2) (1 for a hard match, N for a uniform match).
    """

    estimate: np.ndarray
    weights: np.ndarray
    matched_indices: np.ndarray
    effective_support: float


def _normalize(kernel: Kernel, dists: np.ndarray) -> np.ndarray:
    """Kernel weights over a batch of distances, normalized to sum 1.

    hard-nearest puts all mass on the closest entry (lowest index on ties).
    If every raw soft weight underflows (< 1e-300), falls back to
    hard-nearest so retrieval stays total.
    """
    if kernel.kind == "hard-nearest":
        w = np.zeros(len(dists))
        w[int(np.argmin(dists))] = 1.0
        return w
    raw = kernel_weight(kernel, dists)
    if np.all(raw < UNDERFLOW):
        w = np.zeros(len(dists))
        w[int(np.argmin(dists))] = 1.0
        return w
    return raw / raw.sum()


def _result(weights: np.ndarray, contents: np.ndarray) -> RetrievalResult:
    return RetrievalResult(
        estimate=weights @ contents,
        weights=weights,
        matched_indices=np.nonzero(weights)[0],
        effective_support=float(1.0 / np.sum(weights**2)),
    )


def soft_retrieve(store: TransitionMemory, query_context, kernel: Kernel) -> RetrievalResult:
    """Kernel-weighted content lookup keyed by context similarity."""
    if len(store) == 0:
        raise StateError("cannot retrieve from an empty memory")
    psi = as_point(query_context, dim=store.context_dim, name="query context")
    contexts, contents, _ = store.columns()
    dists = np.linalg.norm(contexts - psi, axis=1)
    return _result(_normalize(kernel, dists), contents)


def retrieve_adapt(
    store: TransitionMemory, target_successor, query_context, kernel: Kernel
) -> RetrievalResult:
    """Backward retrieval: reconstruct the predecessor content consistent with
    the given context and predicted successor.

    Distances mix context and successor mismatch with the kernel's
    successor_weight beta; the estimate averages stored *contents*, i.e. the
    states that preceded each matched successor.
    """
    if len(store) == 0:
        raise StateError("cannot retrieve from an empty memory")
    psi = as_point(query_context, dim=store.context_dim, name="query context")
    target = as_point(target_successor, dim=store.content_dim, name="target successor")
    contexts, contents, successors = store.columns()
    beta = kernel.successor_weight
    d2 = np.einsum("ij,ij->i", contexts - psi, contexts - psi)
    d2 = d2 + beta * np.einsum("ij,ij->i", successors - target, successors - target)
    return _result(_normalize(kernel, np.sqrt(d2)), contents)


def retract_to_cycle(point, cycle: CycleRepresentative) -> np.ndarray:
    """Nearest point on the polygonal cycle (vertex-or-edge projection)."""
    if not isinstance(cycle, CycleRepresentative):
        raise InputError("cycle must be a CycleRepresentative")
    projected, _, _, _ = cycle.project(point)
    return projected


def cycle_consistency_residual(store, kernel, config, phi, psi) -> float:
    """|| R(F(phi, psi), psi) - phi ||: how well backward retrieval inverts
    the forward update on this memory."""
    from .bootstrap import bootstrap_step  # deferred: bootstrap imports this module

    phi = as_point(phi, name="content")
    successor = bootstrap_step(phi, psi, config)
    est = retrieve_adapt(store, successor, psi, kernel).estimate
    return float(np.linalg.norm(est - phi))


def estimate_retrieval_lipschitz(
    store: TransitionMemory,
    kernel: Kernel,
    context,
    rng: np.random.Generator,
    n_pairs: int = 500,
    scale: float = 1.0,
) -> float:
    """Empirical Lipschitz constant of retrieve_adapt in its successor argument.

    Sampled over perturbation pairs around the stored successors; feeds the
    contraction precondition of the fixed-point iteration.
    """
    if len(store) == 0:
        raise StateError("cannot probe an empty memory")
    _, _, successors = store.columns()
    center = successors.mean(axis=0)
    spread = max(float(np.abs(successors - center).max()), 1e-6) * scale
    best = 0.0
    d = store.content_dim
    for _ in range(n_pairs):
        x = center + rng.uniform(-spread, spread, size=d)
        y = center + rng.uniform(-spread, spread, size=d)
        gap = float(np.linalg.norm(x - y))
        if gap < 1e-12:
            continue
        rx = retrieve_adapt(store, x, context, kernel).estimate
        ry = retrieve_adapt(store, y, context, kernel).estimate
        best = max(best, float(np.linalg.norm(rx - ry)) / gap)
    return best
