"""Plug-in histogram entropy estimators and the uncertainty checks built on them:
path-conditioned vs. stateless inference entropy, and the forward/backward
entropy bound against structural information.

All entropies are in bits. Estimator tolerance defaults to 0.05 bits at 1000
samples and scales as 1/sqrt(n); plug-in histograms are biased, which is fine
here because every asserted statement is an inequality with margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import InputError, Kernel, TransitionMemory, UNDERFLOW, kernel_weight
from .topology import CycleRepresentative

__all__ = [
    "Binning",
    "EntropyReport",
    "estimator_tolerance",
    "hist_entropy",
    "conditional_entropy",
    "mutual_information",
    "entropy_report",
    "contextual_entropy_compare",
    "reversibility_bound_check",
]


@dataclass(frozen=True)
class Binning:
    """Uniform grid over a declared bounding box; samples outside are clamped
    into the boundary bins and counted."""

    lows: np.ndarray
    highs: np.ndarray
    bins_per_dim: int

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lows, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.highs, dtype=np.float64))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InputError("lows/highs must be matching 1-D vectors")
        if not np.all(hi > lo):
            raise InputError("each high edge must exceed its low edge")
        if self.bins_per_dim < 2:
            raise InputError(f"bins_per_dim must be >= 2, got {self.bins_per_dim}")
        object.__setattr__(self, "lows", lo)
        object.__setattr__(self, "highs", hi)

    @classmethod
    def from_samples(cls, samples, bins_per_dim: int, pad: float = 1e-9) -> "Binning":
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        lo, hi = x.min(axis=0), x.max(axis=0)
        span = np.maximum(hi - lo, 1e-12)
        return cls(lo - pad * span, hi + pad * span, bins_per_dim)

    @property
    def dim(self) -> int:
        return self.lows.size

    @property
    def total_bins(self) -> int:
        return self.bins_per_dim**self.dim

    def symbols(self, samples) -> tuple[np.ndarray, int]:
        """Flat bin id per sample plus the count of clamped (overflow) samples."""
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] == 0:
            raise InputError("need at least one sample")
        if x.shape[1] != self.dim:
            raise InputError(f"samples have dimension {x.shape[1]}, binning expects {self.dim}")
        width = (self.highs - self.lows) / self.bins_per_dim
        idx = np.floor((x - self.lows) / width).astype(np.int64)
        overflow = int(np.any((idx < 0) | (idx >= self.bins_per_dim), axis=1).sum())
        idx = np.clip(idx, 0, self.bins_per_dim - 1)
        flat = np.zeros(len(x), dtype=np.int64)
        for j in range(self.dim):
            flat = flat * self.bins_per_dim + idx[:, j]
        return flat, overflow


def estimator_tolerance(n_samples: int) -> float:
    """0.05 bits at 1000 samples, scaled as 1/sqrt(n)."""
    return 0.05 * math.sqrt(1000.0 / max(int(n_samples), 1))


def _symbol_entropy(symbols: np.ndarray) -> float:
    _, counts = np.unique(symbols, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def _joint(sym_x: np.ndarray, sym_y: np.ndarray) -> np.ndarray:
    if len(sym_x) != len(sym_y):
        raise InputError("sample sequences must have equal length")
    return sym_x * (int(sym_y.max()) + 1) + sym_y


def hist_entropy(samples, binning: Binning) -> float:
    """Plug-in entropy -sum p log2 p over occupied bins."""
    sym, _ = binning.symbols(samples)
    return _symbol_entropy(sym)


def conditional_entropy(x_samples, y_samples, binning_x: Binning, binning_y: Binning) -> float:
    """H(X | Y) = H(X, Y) - H(Y) from the joint histogram."""
    sx, _ = binning_x.symbols(x_samples)
    sy, _ = binning_y.symbols(y_samples)
    return _symbol_entropy(_joint(sx, sy)) - _symbol_entropy(sy)


def mutual_information(x_samples, y_samples, binning_x: Binning, binning_y: Binning) -> float:
    """I(X; Y) = H(X) + H(Y) - H(X, Y)."""
    sx, _ = binning_x.symbols(x_samples)
    sy, _ = binning_y.symbols(y_samples)
    return _symbol_entropy(sx) + _symbol_entropy(sy) - _symbol_entropy(_joint(sx, sy))


@dataclass(frozen=True)
class EntropyReport:
    """Joint/marginal/conditional entropies and the structural information
    I(content; context) they imply."""

    h_joint: float
    h_phi: float
    h_psi: float
    h_phi_given_psi: float
    mutual_info: float
    sample_count: int


def entropy_report(phi_samples, psi_samples, binning_phi: Binning, binning_psi: Binning) -> EntropyReport:
    sphi, _ = binning_phi.symbols(phi_samples)
    spsi, _ = binning_psi.symbols(psi_samples)
    h_phi = _symbol_entropy(sphi)
    h_psi = _symbol_entropy(spsi)
    h_joint = _symbol_entropy(_joint(sphi, spsi))
    return EntropyReport(
        h_joint=h_joint,
        h_phi=h_phi,
        h_psi=h_psi,
        h_phi_given_psi=h_joint - h_psi,
        mutual_info=h_phi + h_psi - h_joint,
        sample_count=len(sphi),
    )


# ---------------------------------------------------------------------------
# Path-conditioned vs. stateless uncertainty
# ---------------------------------------------------------------------------


def _batched_weights(kernel: Kernel, dists: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Rows of normalized weights for a (batch, N) distance matrix.

    An optional boolean mask restricts each row's support. Rows whose soft
    weights all underflow fall back to the (masked) nearest entry.
    """
    masked = np.where(mask, dists, np.inf) if mask is not None else dists
    if kernel.kind == "hard-nearest":
        w = np.zeros_like(dists)
        w[np.arange(len(dists)), np.argmin(masked, axis=1)] = 1.0
        return w
    raw = kernel_weight(kernel, dists)
    if mask is not None:
        raw = raw * mask
    dead = raw.max(axis=1) < UNDERFLOW
    if np.any(dead):
        raw[dead] = 0.0
        raw[np.nonzero(dead)[0], np.argmin(masked[dead], axis=1)] = 1.0
    return raw / raw.sum(axis=1, keepdims=True)


def _batched_project_arcs(points: np.ndarray, cycle: CycleRepresentative) -> np.ndarray:
    """Arc-length coordinates of the nearest-point projections of a batch."""
    a = cycle.vertices
    b = np.roll(a, -1, axis=0)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = points[:, None, :] - a[None, :, :]
    t = np.einsum("bij,ij->bi", ap, ab)
    t = np.divide(t, denom, out=np.zeros_like(t), where=denom > 0)
    t = np.clip(t, 0.0, 1.0)
    proj = a[None] + t[..., None] * ab[None]
    d2 = np.einsum("bij,bij->bi", proj - points[:, None, :], proj - points[:, None, :])
    best = np.argmin(d2, axis=1)
    lengths = np.sqrt(denom)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])[:-1]
    rows = np.arange(len(points))
    return cum[best] + t[rows, best] * lengths[best]


def _arc_diff(a: np.ndarray, b, total: float) -> np.ndarray:
    """Signed minimal arc difference a - b on a loop of the given length."""
    d = (a - b) % total
    return np.where(d > total / 2.0, d - total, d)


def contextual_entropy_compare(
    env,
    store: TransitionMemory,
    kernel: Kernel,
    config,
    horizon: int,
    binning: Binning,
    episodes: int = 1000,
    rng: Optional[np.random.Generator] = None,
    coherent: bool = True,
) -> tuple[float, float]:
    """Conditional entropy of inferred content: path-conditioned vs. stateless.

    Stateless inference retrieves from the full memory keyed on the observed
    context and is scored against the binned context. Path-conditioned
    inference tracks an arc-length position on the environment's consolidated
    cycle (the summary statistic for the context history), restricts retrieval
    to an arc window around the predicted position, and is scored against the
    binned arc coordinate. With incoherent context sequences the values are
    still computed, but no inequality between them is implied.

    Returns (h_path, h_pointwise) in bits.
    """
    if horizon < 2:
        raise InputError("horizon must be >= 2")
    rng = rng if rng is not None else np.random.default_rng(0)
    cycle = env.consolidated_cycle()
    total = cycle.total_length()
    contexts, contents, _ = store.columns()
    entry_arcs = _batched_project_arcs(contents, cycle)

    # Traversal speed and anchor spacing implied by the stored loop.
    step_arc = float(np.median(np.abs(_arc_diff(entry_arcs[1:], entry_arcs[:-1], total))))
    spacing = total / len(store)
    window = max(1.5 * step_arc, 3.0 * spacing)

    thetas0 = rng.uniform(0.0, 2.0 * math.pi, size=episodes)
    all_psi, all_phi_pt, all_phi_path, all_arcs = [], [], [], []
    pos = None
    for t in range(horizon):
        if coherent:
            thetas = thetas0 + t * env.default_step
        else:
            thetas = rng.uniform(0.0, 2.0 * math.pi, size=episodes)
        psi = env.observe(thetas, rng)
        dists = np.linalg.norm(psi[:, None, :] - contexts[None, :, :], axis=2)
        w_pt = _batched_weights(kernel, dists)
        est_pt = w_pt @ contents

        if t == 0:
            pos = _batched_project_arcs(est_pt, cycle)
            est_path = est_pt
        else:
            predicted = (pos + step_arc) % total
            mask = np.abs(_arc_diff(entry_arcs[None, :], predicted[:, None], total)) <= window
            w_path = _batched_weights(kernel, dists, mask=mask)
            est_path = w_path @ contents
            pos = _batched_project_arcs(est_path, cycle)
        if t >= 1:  # step 0 has no history to condition on
            all_psi.append(psi)
            all_phi_pt.append(est_pt)
            all_phi_path.append(est_path)
            all_arcs.append(pos.copy())

    psi_s = np.concatenate(all_psi)
    phi_pt = np.concatenate(all_phi_pt)
    phi_path = np.concatenate(all_phi_path)
    arcs = np.concatenate(all_arcs)

    # Resolution-matched conditioners: both sides are 1-D circular coordinates
    # (context angle vs. cycle arc) binned at the memory's angular resolution,
    # so the comparison measures aliasing, not grid mismatch.
    n_cond = env.n_anchor
    psi_angle = np.arctan2(psi_s[:, 1], psi_s[:, 0])
    binning_angle = Binning(np.array([-math.pi - 1e-9]), np.array([math.pi + 1e-9]), n_cond)
    binning_arc = Binning(np.array([0.0]), np.array([total * (1 + 1e-12)]), n_cond)
    h_pointwise = conditional_entropy(phi_pt, psi_angle, binning, binning_angle)
    h_path = conditional_entropy(phi_path, arcs, binning, binning_arc)
    return h_path, h_pointwise


def reversibility_bound_check(
    forward_states,
    phi_samples,
    psi_samples,
    binning: Binning,
    recon_residuals=None,
    binning_forward: Optional[Binning] = None,
    binning_psi: Optional[Binning] = None,
) -> tuple[float, float, float, bool]:
    """Check Delta-H <= A: the forward/backward entropy gap against the
    structural information A = I(content; context).

    ``binning`` bins the content samples; context and forward-state binnings
    default to sample-range grids with the same resolution. The forward and
    backward sequences are aligned by time index on the same episode (the
    comparison convention is the caller's responsibility and is echoed in run
    metadata). epsilon_recon is the mean of ``recon_residuals`` when given,
    NaN otherwise.
    """
    fwd = np.asarray(forward_states, dtype=np.float64)
    phi = np.asarray(phi_samples, dtype=np.float64)
    psi = np.asarray(psi_samples, dtype=np.float64)
    if len(fwd) == 0 or len(phi) != len(psi):
        raise InputError("aligned non-empty sample sequences required")
    if binning_forward is None:
        fwd_dim = 1 if fwd.ndim == 1 else fwd.shape[1]
        if fwd_dim == binning.dim:
            binning_forward = binning  # same space, same grid
        else:
            binning_forward = Binning.from_samples(fwd, binning.bins_per_dim)
    if binning_psi is None:
        binning_psi = Binning.from_samples(psi, binning.bins_per_dim)
    h_forward = hist_entropy(fwd, binning_forward)
    h_phi = hist_entropy(phi, binning)
    delta_h = h_forward - h_phi
    info = mutual_information(phi, psi, binning, binning_psi)
    eps = float(np.mean(recon_residuals)) if recon_residuals is not None else math.nan
    tol = estimator_tolerance(min(len(fwd), len(phi)))
    return delta_h, info, eps, bool(delta_h <= info + tol)
