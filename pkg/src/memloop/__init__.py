"""memloop: memory-amortized inference over transition memory.

Inference runs as a loop: kernel retrieval reconstructs a predecessor state
from stored transitions, a contractive bootstrap update pulls it toward a
context-conditioned target, and the composite map is iterated to its fixed
point. Trajectories are analyzed with Rips persistence, entropy estimators,
and tabular RL baselines; the `memloop` CLI runs declarative experiments.
"""

from ._backend import backend_name
from .core import (
    ConfigError,
    DataError,
    EngineError,
    InputError,
    Kernel,
    RngState,
    StateError,
    Trajectory,
    TransitionEntry,
    TransitionMemory,
    kernel_weight,
    make_rng,
    memory_insert,
    pair_distance,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend_name",
    "ConfigError",
    "DataError",
    "EngineError",
    "InputError",
    "Kernel",
    "RngState",
    "StateError",
    "Trajectory",
    "TransitionEntry",
    "TransitionMemory",
    "kernel_weight",
    "make_rng",
    "memory_insert",
    "pair_distance",
]
