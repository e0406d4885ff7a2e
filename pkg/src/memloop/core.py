"""Shared domain types: transition memory, distance kernels, RNG plumbing.

Context and content points are plain 1-D float64 numpy arrays. A context is
the observable conditioning vector (dimension ``k``); a content point is the
latent vector being inferred (dimension ``d``). Everything downstream
(retrieval, bootstrapping, topology, entropy) builds on the types here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class EngineError(Exception):
    """Base class for engine errors."""


class InputError(EngineError, ValueError):
    """Raised when an argument violates an operation's precondition."""


class StateError(EngineError, RuntimeError):
    """Raised when an operation is called in an invalid state (e.g. empty memory)."""


class ConfigError(EngineError, ValueError):
    """Raised when a declarative configuration is inconsistent."""


class DataError(EngineError, ValueError):
    """Raised when stored data lacks a field an operation requires."""


def as_point(x, dim: Optional[int] = None, name: str = "point") -> np.ndarray:
    """Coerce to a finite 1-D float64 vector, optionally checking its dimension."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite coordinates")
    if dim is not None and arr.size != dim:
        raise InputError(f"{name} has dimension {arr.size}, expected {dim}")
    return arr


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

KERNEL_KINDS = ("gaussian", "inverse-distance", "hard-nearest")

# Raw weights below this underflow threshold trigger the hard-nearest fallback
# in the retrieval layer.
UNDERFLOW = 1e-300


@dataclass(frozen=True)
class Kernel:
    """Similarity kernel for soft addressing over memory.

    ``bandwidth`` is the length scale sigma (> 0). ``successor_weight`` (beta,
    >= 0) mixes successor distance into the match metric used by backward
    retrieval; beta = 0 recovers pure context-keyed addressing.
    """

    kind: str = "gaussian"
    bandwidth: float = 1.0
    successor_weight: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ConfigError(f"kernel bandwidth must be > 0, got {self.bandwidth}")
        if not (np.isfinite(self.successor_weight) and self.successor_weight >= 0):
            raise ConfigError(f"successor_weight must be >= 0, got {self.successor_weight}")


def kernel_weight(kernel: Kernel, dist) -> np.ndarray | float:
    """Unnormalized kernel weight of a distance (scalar or array).

    gaussian: exp(-d^2 / (2 sigma^2)); inverse-distance: 1 / (d + sigma).
    hard-nearest is resolved against the caller's batch at the retrieval
    layer; the scalar form here is the batch rule specialized to the minimal
    achievable distance, i.e. 1 at d == 0 and 0 otherwise, which keeps the
    standalone weight monotone non-increasing.
    """
    d = np.asarray(dist, dtype=np.float64)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise InputError("dist must be finite and non-negative")
    if kernel.kind == "gaussian":
        out = np.exp(-(d * d) / (2.0 * kernel.bandwidth**2))
    elif kernel.kind == "inverse-distance":
        out = 1.0 / (d + kernel.bandwidth)
    else:  # hard-nearest
        out = np.where(d == 0.0, 1.0, 0.0)
    return float(out) if np.isscalar(dist) or getattr(dist, "ndim", 1) == 0 else out


def pair_distance(a: tuple, b: tuple, beta: float) -> float:
    """Distance between (context, content) pairs: sqrt(|dpsi|^2 + beta |dphi|^2)."""
    psi_a, phi_a = a
    psi_b, phi_b = b
    psi_a = as_point(psi_a, name="context a")
    psi_b = as_point(psi_b, dim=psi_a.size, name="context b")
    phi_a = as_point(phi_a, name="content a")
    phi_b = as_point(phi_b, dim=phi_a.size, name="content b")
    if beta < 0:
        raise InputError(f"beta must be >= 0, got {beta}")
    dc = psi_a - psi_b
    dl = phi_a - phi_b
    return float(np.sqrt(dc @ dc + beta * (dl @ dl)))


# ---------------------------------------------------------------------------
# Transition memory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionEntry:
    """One stored transition: context, content, successor content, optional reward."""

    context: np.ndarray
    content: np.ndarray
    successor: np.ndarray
    reward: Optional[float] = None
    time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "context", as_point(self.context, name="context"))
        object.__setattr__(self, "content", as_point(self.content, name="content"))
        object.__setattr__(
            self, "successor", as_point(self.successor, dim=self.content.size, name="successor")
        )
        if self.reward is not None and not np.isfinite(self.reward):
            raise InputError(f"reward must be finite, got {self.reward}")
        if self.time < 0:
            raise InputError(f"time must be non-negative, got {self.time}")
        self.context.setflags(write=False)
        self.content.setflags(write=False)
        self.successor.setflags(write=False)


class TransitionMemory:
    """Append-only store of transitions with fixed context/content dimensions.

    Entries are immutable once inserted. Reads are safe to share; appends
    require exclusive access. Column views (`contexts`, `contents`,
    `successors`) are cached for vectorized retrieval and rebuilt on append.
    """

    def __init__(self, context_dim: int, content_dim: int):
        if context_dim <= 0 or content_dim <= 0:
            raise ConfigError("dimensions must be positive")
        self.context_dim = int(context_dim)
        self.content_dim = int(content_dim)
        self._entries: list[TransitionEntry] = []
        self._cols: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, i: int) -> TransitionEntry:
        return self._entries[i]

    @property
    def entries(self) -> Sequence[TransitionEntry]:
        return tuple(self._entries)

    def append(self, entry: TransitionEntry) -> "TransitionMemory":
        if entry.context.size != self.context_dim:
            raise InputError(
                f"entry context dim {entry.context.size} != store dim {self.context_dim}"
            )
        if entry.content.size != self.content_dim:
            raise InputError(
                f"entry content dim {entry.content.size} != store dim {self.content_dim}"
            )
        self._entries.append(entry)
        self._cols = None
        return self

    def columns(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(contexts, contents, successors) stacked as (N, k) / (N, d) arrays."""
        if not self._entries:
            raise StateError("memory is empty")
        if self._cols is None:
            self._cols = (
                np.stack([e.context for e in self._entries]),
                np.stack([e.content for e in self._entries]),
                np.stack([e.successor for e in self._entries]),
            )
        return self._cols

    def rewards(self) -> np.ndarray:
        """Rewards as a float array with NaN where absent."""
        return np.array(
            [np.nan if e.reward is None else e.reward for e in self._entries], dtype=np.float64
        )


def memory_insert(store: TransitionMemory, entry: TransitionEntry) -> TransitionMemory:
    """Append one transition; previous entries are untouched."""
    return store.append(entry)


# ---------------------------------------------------------------------------
# Trajectories and RNG
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed (context, content) sequence with strictly increasing times."""

    times: np.ndarray
    contexts: np.ndarray
    contents: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.int64)
        c = np.asarray(self.contexts, dtype=np.float64)
        z = np.asarray(self.contents, dtype=np.float64)
        if t.ndim != 1 or c.ndim != 2 or z.ndim != 2:
            raise InputError("trajectory arrays must be (T,), (T,k), (T,d)")
        if not (len(t) == len(c) == len(z)):
            raise InputError("trajectory arrays must share their leading dimension")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise InputError("trajectory times must be strictly increasing")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(z))):
            raise InputError("trajectory points must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "contexts", c)
        object.__setattr__(self, "contents", z)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class RngState:
    """Seed plus algorithm identifier; equal seeds reproduce runs bit-identically."""

    seed: int
    algorithm: str = "pcg64"

    def generator(self) -> np.random.Generator:
        if self.algorithm != "pcg64":
            raise ConfigError(f"unsupported rng algorithm {self.algorithm!r}")
        return np.random.Generator(np.random.PCG64(self.seed))


def make_rng(seed: int) -> np.random.Generator:
    return RngState(int(seed)).generator()
