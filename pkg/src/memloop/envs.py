"""Synthetic environments: the ring, gridworld mazes, and gluing-map stacks.

Observation models are deliberately minimal: ring contexts are (cos, sin)
encodings with optional antipodal aliasing (the fold theta -> 2*theta), and
gridworld contexts are one-hot cell codes with the action index appended.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ConfigError, InputError, Trajectory, TransitionEntry, TransitionMemory
from .topology import CycleRepresentative

__all__ = [
    "RingEnv",
    "GridWorld",
    "AffineMap",
    "PatchStack",
    "ring_rollout",
    "grid_rollout",
    "stack_run",
    "cocycle_defect",
]


# ---------------------------------------------------------------------------
# Ring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingEnv:
    """Circle of latent states; contexts may alias antipodal points."""

    radius: float = 1.0
    n_anchor: int = 64
    obs_noise: float = 0.0
    aliasing: str = "none"

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError(f"radius must be > 0, got {self.radius}")
        if self.n_anchor < 8:
            raise ConfigError(f"n_anchor must be >= 8, got {self.n_anchor}")
        if self.obs_noise < 0:
            raise ConfigError(f"obs_noise must be >= 0, got {self.obs_noise}")
        if self.aliasing not in ("none", "antipodal"):
            raise ConfigError(f"aliasing must be 'none' or 'antipodal', got {self.aliasing!r}")

    @property
    def default_step(self) -> float:
        """Anchor-to-anchor angular step."""
        return 2.0 * math.pi / self.n_anchor

    def latent(self, theta) -> np.ndarray:
        """Ground-truth content: radius * (cos theta, sin theta)."""
        t = np.asarray(theta, dtype=np.float64)
        out = self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
        return out

    def observe(self, theta, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Context encoding; antipodal aliasing folds theta to 2*theta."""
        t = np.asarray(theta, dtype=np.float64)
        folded = 2.0 * t if self.aliasing == "antipodal" else t
        psi = np.stack([np.cos(folded), np.sin(folded)], axis=-1)
        if self.obs_noise > 0:
            if rng is None:
                raise InputError("rng required when obs_noise > 0")
            psi = psi + rng.normal(0.0, self.obs_noise, size=psi.shape)
        return psi

    def consolidated_cycle(self) -> CycleRepresentative:
        """Anchor polygon approximating the latent circle.

        birth is the polygon side; persistence uses the Rips death of n points
        on a circle, 2 r sin(pi * ceil(n/3) / n).
        """
        n = self.n_anchor
        thetas = 2.0 * math.pi * np.arange(n) / n
        side = 2.0 * self.radius * math.sin(math.pi / n)
        death = 2.0 * self.radius * math.sin(math.pi * math.ceil(n / 3.0) / n)
        return CycleRepresentative(
            vertices=self.latent(thetas), persistence=death - side, birth=side
        )

    def latent_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        r = 1.25 * self.radius
        return np.array([-r, -r]), np.array([r, r])


def ring_rollout(
    env: RingEnv,
    steps: int,
    angular_step: float,
    rng: np.random.Generator,
    theta0: float = 0.0,
) -> tuple[Trajectory, TransitionMemory]:
    """Walk the ring and store consecutive transitions.

    A full loop (steps * angular_step >= 2 pi) leaves a topology-detectable
    cycle in the trajectory's content cloud.
    """
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    thetas = theta0 + angular_step * np.arange(steps, dtype=np.float64)
    contents = env.latent(thetas)
    contexts = env.observe(thetas, rng)
    traj = Trajectory(times=np.arange(steps), contexts=contexts, contents=contents)
    memory = TransitionMemory(context_dim=2, content_dim=2)
    for t in range(steps - 1):
        memory.append(
            TransitionEntry(
                context=contexts[t],
                content=contents[t],
                successor=contents[t + 1],
                reward=None,
                time=t,
            )
        )
    return traj, memory


# ---------------------------------------------------------------------------
# Gridworld
# ---------------------------------------------------------------------------

ACTIONS = ((0, -1), (1, 0), (0, 1), (-1, 0))  # up, right, down, left
ACTION_NAMES = ("up", "right", "down", "left")


@dataclass
class GridWorld:
    """Rectangular maze; the agent stays in place on blocked moves."""

    width: int
    height: int
    walls: frozenset = frozenset()
    rewards: dict = field(default_factory=dict)
    start: tuple = (0, 0)
    loop_cells: Optional[list] = None

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ConfigError("grid must be at least 2x2")
        self.walls = frozenset(tuple(w) for w in self.walls)
        self.rewards = {tuple(c): float(v) for c, v in self.rewards.items()}
        self.start = tuple(self.start)
        if self.start in self.walls:
            raise ConfigError("start cell is a wall")
        for c in itertools.chain(self.walls, self.rewards, [self.start]):
            if not self.in_bounds(c):
                raise ConfigError(f"cell {c} outside the {self.width}x{self.height} grid")
        if self.rewards and not any(c in self.reachable() for c in self.rewards):
            raise ConfigError("no reward-bearing cell is reachable from start")
        if self.loop_cells is None:
            self.loop_cells = self._perimeter_loop()
        else:
            self.loop_cells = [tuple(c) for c in self.loop_cells]

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and tuple(cell) not in self.walls

    def reachable(self) -> set:
        seen = {self.start}
        frontier = deque([self.start])
        while frontier:
            cell = frontier.popleft()
            for a in range(4):
                nxt = self.step_cell(cell, a)
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def step_cell(self, cell, action: int) -> tuple:
        dx, dy = ACTIONS[action]
        nxt = (cell[0] + dx, cell[1] + dy)
        return nxt if self.is_free(nxt) else tuple(cell)

    def _perimeter_loop(self) -> list:
        cells = [(x, 0) for x in range(self.width)]
        cells += [(self.width - 1, y) for y in range(1, self.height)]
        cells += [(x, self.height - 1) for x in range(self.width - 2, -1, -1)]
        cells += [(0, y) for y in range(self.height - 2, 0, -1)]
        return cells

    def check_loop(self) -> list:
        """The designated loop, or a config error if a wall blocks it."""
        loop = self.loop_cells
        blocked = [c for c in loop if not self.is_free(c)]
        if blocked:
            raise ConfigError(f"designated loop blocked by walls at {sorted(blocked)}")
        for a, b in zip(loop, loop[1:] + loop[:1]):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise ConfigError(f"loop cells {a} and {b} are not adjacent")
        return loop

    # --- encodings -------------------------------------------------------

    def cell_index(self, cell) -> int:
        return cell[1] * self.width + cell[0]

    @property
    def n_states(self) -> int:
        return self.width * self.height

    @property
    def context_dim(self) -> int:
        return self.n_states + 1

    def encode_context(self, cell, action: int) -> np.ndarray:
        psi = np.zeros(self.context_dim)
        psi[self.cell_index(cell)] = 1.0
        psi[-1] = float(action)
        return psi

    def cell_center(self, cell) -> np.ndarray:
        return np.array([cell[0] + 0.5, cell[1] + 0.5])

    def reward_at(self, cell) -> float:
        return self.rewards.get(tuple(cell), 0.0)

    def latent_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(2), np.array([float(self.width), float(self.height)])

    # --- exact chain models ------------------------------------------------

    def policy_chain(self, policy: str) -> tuple[np.ndarray, np.ndarray, list]:
        """(P, r, states) of the Markov chain a policy induces.

        'random' averages the four moves over all free cells;
        'loop-following' is the deterministic cycle over the designated loop.
        Rewards are collected on entering the next cell.
        """
        if policy == "random":
            states = sorted(c for c in itertools.product(range(self.width), range(self.height))
                            if self.is_free(c))
            index = {c: i for i, c in enumerate(states)}
            n = len(states)
            P = np.zeros((n, n))
            r = np.zeros(n)
            for c in states:
                for a in range(4):
                    nxt = self.step_cell(c, a)
                    P[index[c], index[nxt]] += 0.25
                    r[index[c]] += 0.25 * self.reward_at(nxt)
            return P, r, states
        if policy == "loop-following":
            loop = self.check_loop()
            n = len(loop)
            P = np.zeros((n, n))
            r = np.zeros(n)
            for i in range(n):
                j = (i + 1) % n
                P[i, j] = 1.0
                r[i] = self.reward_at(loop[j])
            return P, r, list(loop)
        raise ConfigError(f"unknown policy {policy!r}")


def grid_rollout(
    env: GridWorld,
    policy: str,
    steps: int,
    rng: np.random.Generator,
) -> tuple[Trajectory, TransitionMemory, list]:
    """Roll a policy, storing transitions and the reward log.

    Every move is legality-checked (no wall penetration). Contexts encode
    (cell, action); contents are cell centers.
    """
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    if policy == "loop-following":
        loop = env.check_loop()
        start = env.start if env.start in loop else loop[0]
        pos_in_loop = loop.index(start)
    elif policy != "random":
        raise ConfigError(f"unknown policy {policy!r}")

    cell = env.start if policy == "random" else loop[pos_in_loop]
    contexts, contents, actions, cells = [], [], [], []
    reward_log = []
    memory = TransitionMemory(context_dim=env.context_dim, content_dim=2)
    for t in range(steps):
        if policy == "random":
            action = int(rng.integers(0, 4))
        else:
            nxt_cell = loop[(pos_in_loop + 1) % len(loop)]
            delta = (nxt_cell[0] - cell[0], nxt_cell[1] - cell[1])
            action = ACTIONS.index(delta)
        nxt = env.step_cell(cell, action)
        assert env.is_free(nxt), "illegal move produced by step_cell"
        contexts.append(env.encode_context(cell, action))
        contents.append(env.cell_center(cell))
        cells.append(cell)
        actions.append(action)
        reward_log.append(env.reward_at(nxt))
        memory.append(
            TransitionEntry(
                context=contexts[-1],
                content=contents[-1],
                successor=env.cell_center(nxt),
                reward=reward_log[-1],
                time=t,
            )
        )
        cell = nxt
        if policy == "loop-following":
            pos_in_loop = (pos_in_loop + 1) % len(loop)
    traj = Trajectory(
        times=np.arange(steps), contexts=np.stack(contexts), contents=np.stack(contents)
    )
    return traj, memory, reward_log


# ---------------------------------------------------------------------------
# Affine gluing maps and the patch stack
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """x -> A x + b with A invertible."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=np.float64)
        b = np.asarray(self.offset, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
            raise ConfigError("matrix must be square and offset must match its size")
        if abs(np.linalg.det(a)) < 1e-12:
            raise ConfigError("gluing map must be invertible")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "offset", b)

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def rotation(cls, angle_rad: float, scale: float = 1.0, offset=(0.0, 0.0)) -> "AffineMap":
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        return cls(scale * np.array([[c, -s], [s, c]]), np.asarray(offset, dtype=np.float64))

    @classmethod
    def translation(cls, offset) -> "AffineMap":
        b = np.asarray(offset, dtype=np.float64)
        return cls(np.eye(b.size), b)

    def __call__(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64)
        return x @ self.matrix.T + self.offset

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self after inner: x -> self(inner(x))."""
        return AffineMap(self.matrix @ inner.matrix, self.matrix @ inner.offset + self.offset)

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.offset)

    def scale_factor(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False)[0])


@dataclass
class PatchStack:
    """Layered latent spaces linked by invertible affine gluings.

    ``gluings[l]`` maps layer l to layer l+1; ``return_map`` closes the loop
    from the top layer back to the bottom. The composed loop is recorded so
    closure can be tested rather than assumed.
    """

    gluings: list
    return_map: AffineMap
    pulls: list

    def __post_init__(self):
        if len(self.gluings) < 1:
            raise ConfigError("stack needs at least 2 layers (one gluing)")
        if len(self.pulls) != len(self.gluings) + 1:
            raise ConfigError("need one pull per layer")
        for p in self.pulls:
            if not (0.0 < p < 1.0):
                raise ConfigError(f"pull must lie in (0, 1), got {p}")

    @property
    def n_layers(self) -> int:
        return len(self.gluings) + 1

    def loop_map(self) -> AffineMap:
        """G_return after G_{L-1,L} after ... after G_{1,2}."""
        composed = self.gluings[0]
        for g in self.gluings[1:]:
            composed = g.compose(composed)
        return self.return_map.compose(composed)


def stack_run(
    stack: PatchStack,
    base_cycle: CycleRepresentative,
    rounds: int,
    tol: float,
) -> tuple[list, float]:
    """Lift a cycle layer by layer, converge each layer's loop, close the stack.

    Per layer the cycle vertices act as the context sequence and the next
    vertex is the bootstrap target, so each layer runs its own periodic-orbit
    iteration (exact retrieval; the stack tests hierarchy, not memory noise).
    closure_defect is the maximum displacement of the base vertices under the
    recorded round-trip map.
    """
    from .bootstrap import BootstrapConfig, poincare_compose

    traces = []
    verts = base_cycle.vertices
    for layer in range(stack.n_layers):
        layer_verts = verts

        def next_vertex(psi, _v=layer_verts):
            j = int(np.argmin(np.linalg.norm(_v - psi, axis=1)))
            return _v[(j + 1) % len(_v)]

        config = BootstrapConfig(pull=stack.pulls[layer], target_map=next_vertex)
        phi0 = layer_verts[0] + 0.1 * (layer_verts[1] - layer_verts[0])
        traces.append(
            poincare_compose(None, None, config, layer_verts, phi0, rounds, tol)
        )
        if layer < stack.n_layers - 1:
            verts = stack.gluings[layer](layer_verts)

    round_trip = stack.loop_map()(base_cycle.vertices)
    closure_defect = float(np.linalg.norm(round_trip - base_cycle.vertices, axis=1).max())
    return traces, closure_defect


def cocycle_defect(maps: dict, sample_points=None) -> float:
    """Worst triple-overlap inconsistency: max over x, (i,j,k) of
    || G_jk(G_ij(x)) - G_ik(x) ||.

    ``maps`` holds pairwise gluings keyed by (i, j) with i < j; every pair
    from the index set must be present.
    """
    keys = {(int(i), int(j)) for i, j in maps}
    indices = sorted({i for k in keys for i in k})
    if len(indices) < 3:
        raise ConfigError("need at least three patch indices for triple overlaps")
    for pair in itertools.combinations(indices, 2):
        if pair not in keys:
            raise ConfigError(f"missing gluing map for pair {pair}")
    dim = next(iter(maps.values())).matrix.shape[0]
    if sample_points is None:
        axes = [np.linspace(-1.0, 1.0, 3)] * dim
        sample_points = np.array(list(itertools.product(*axes)))
    pts = np.atleast_2d(np.asarray(sample_points, dtype=np.float64))

    worst = 0.0
    for i, j, k in itertools.combinations(indices, 3):
        via = maps[(j, k)](maps[(i, j)](pts))
        direct = maps[(i, k)](pts)
        worst = max(worst, float(np.linalg.norm(via - direct, axis=1).max()))
    return worst
