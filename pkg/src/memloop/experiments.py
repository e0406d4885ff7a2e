"""Experiment runners: one deterministic function per experiment kind.

Each runner maps (params, seed) to a flat metrics dict plus named CSV tables.
Everything is derived from the seed through a single PCG64 generator, so a
config run twice reproduces its outputs byte for byte.
"""

from __future__ import annotations

import math

import numpy as np

from .bootstrap import (
    BootstrapConfig,
    LinearRetrieval,
    constant_target,
    fixed_point_iterate,
    poincare_compose,
)
from .config import EXPERIMENT_KINDS
from .core import ConfigError, Kernel, Trajectory, make_rng
from .duality import duality_experiment
from .entropy import Binning, contextual_entropy_compare, reversibility_bound_check
from .envs import AffineMap, GridWorld, PatchStack, RingEnv, cocycle_defect, ring_rollout, stack_run
from .retrieval import retrieve_adapt
from .topology import PointCloud, bottleneck_distance, build_rips, is_nontrivial, persistence_z2


def _intervals_rows(seed, barcode):
    rows = []
    for dim in (0, 1):
        for birth, death in barcode.intervals.get(dim, []):
            rows.append([seed, dim, birth, "inf" if math.isinf(death) else death])
    return rows


# ---------------------------------------------------------------------------


def run_fixed_point(params: dict, seed: int):
    pull = params["pull"]
    target = np.asarray(params["target"], dtype=np.float64)
    tol = params.get("tol", 1e-10)
    max_iter = params.get("max_iter", 500)
    inits = params.get("inits", 20)
    scale = params.get("init_scale", 1.0)
    gain = params.get("retrieval_gain", 1.0)
    retrieval = None if gain == 1.0 else LinearRetrieval(gain=gain)
    config = BootstrapConfig(pull=pull, target_map=constant_target(target))
    rng = make_rng(seed)

    finals, ratios, iters, converged = [], [], [], []
    residual_rows = []
    for i in range(inits):
        phi0 = rng.uniform(-scale, scale, size=target.size)
        trace = fixed_point_iterate(retrieval, None, config, phi0, [0.0], tol, max_iter)
        finals.append(trace.iterates[-1])
        iters.append(len(trace.residuals))
        converged.append(trace.converged)
        r = trace.residual_ratios()
        if len(r):
            ratios.append(float(r.max()))
        for step, res in enumerate(trace.residuals):
            residual_rows.append([seed, i, step, res])
    finals = np.stack(finals)
    spread = float(
        max(np.linalg.norm(a - b) for a in finals for b in finals)
    ) if len(finals) > 1 else 0.0
    metrics = {
        "converged_fraction": float(np.mean(converged)),
        "fixed_point_spread": spread,
        "max_residual_ratio": max(ratios) if ratios else 0.0,
        "iterations_median": float(np.median(iters)),
        "contraction_precondition": pull * gain,
    }
    tables = {
        "residuals": (["seed", "init", "step", "residual"], residual_rows),
    }
    return metrics, tables


def run_closure(params: dict, seed: int):
    radius = params.get("radius", 1.0)
    K = params["n_contexts"]
    pull = params.get("pull", 0.3)
    rounds = params.get("rounds", 200)
    tol = params.get("tol", 1e-10)
    noise_floor = params.get("noise_floor", 0.5 * radius)
    rng = make_rng(seed)

    env = RingEnv(radius=radius, n_anchor=max(8, K))
    step = 2.0 * math.pi / K
    _, store = ring_rollout(env, steps=K + 1, angular_step=step, rng=rng)
    kernel = Kernel("gaussian", 0.2 * radius, successor_weight=1.0)

    def target(psi, env=env):
        return env.latent(math.atan2(psi[1], psi[0]))

    config = BootstrapConfig(pull=pull, target_map=target)
    contexts = [np.array([math.cos(i * step), math.sin(i * step)]) for i in range(K)]
    phi0 = rng.normal(size=2) * radius
    trace = poincare_compose(store, kernel, config, contexts, phi0, rounds, tol)
    orbit_flag, orbit_pers = is_nontrivial(trace.orbit, noise_floor=noise_floor)

    # contractible control of equal arc length
    line = np.column_stack([np.linspace(0.0, 2 * math.pi * radius, K), np.zeros(K)])
    line_traj = Trajectory(times=np.arange(K), contexts=np.stack(contexts), contents=line)
    line_flag, line_pers = is_nontrivial(line_traj, noise_floor=noise_floor)

    barcode = persistence_z2(
        build_rips(PointCloud(trace.orbit.contents), 2.5 * radius)
    )
    metrics = {
        "converged": bool(trace.converged),
        "orbit_nontrivial": bool(orbit_flag),
        "orbit_persistence": orbit_pers,
        "line_nontrivial": bool(line_flag),
        "line_persistence": line_pers,
        "h1_bars": len(barcode.intervals[1]),
    }
    orbit_rows = [[seed, i, p[0], p[1]] for i, p in enumerate(trace.orbit.contents)]
    tables = {
        "orbit": (["seed", "index", "x", "y"], orbit_rows),
        "intervals": (["seed", "dim", "birth", "death"], _intervals_rows(seed, barcode)),
    }
    return metrics, tables


def run_entropy_compare(params: dict, seed: int):
    env = RingEnv(
        radius=params.get("radius", 1.0),
        n_anchor=params.get("n_anchor", 64),
        obs_noise=params.get("obs_noise", 0.05),
        aliasing=params.get("aliasing", "antipodal"),
    )
    rng = make_rng(seed)
    _, store = ring_rollout(env, steps=2 * env.n_anchor + 1, angular_step=env.default_step, rng=rng)
    kernel = Kernel("gaussian", params.get("sigma", 0.05),
                    successor_weight=params.get("beta", 1.0))
    config = BootstrapConfig(pull=0.5, target_map=constant_target([0.0, 0.0]))
    r = env.radius
    binning = Binning(np.array([-1.3 * r, -1.3 * r]), np.array([1.3 * r, 1.3 * r]),
                      params.get("bins_per_dim", 12))
    h_path, h_pointwise = contextual_entropy_compare(
        env, store, kernel, config,
        horizon=params.get("horizon", 6),
        binning=binning,
        episodes=params.get("episodes", 1000),
        rng=rng,
    )
    metrics = {
        "h_path": h_path,
        "h_pointwise": h_pointwise,
        "gap": h_pointwise - h_path,
    }
    tables = {
        "entropies": (["seed", "h_path", "h_pointwise"], [[seed, h_path, h_pointwise]]),
    }
    return metrics, tables


def run_reversibility(params: dict, seed: int):
    mode = params["mode"]
    n = params.get("samples", 2000)
    bins = params.get("bins_per_dim", 8)
    rng = make_rng(seed)
    residuals = None
    if mode == "ring":
        env = RingEnv(
            radius=params.get("radius", 1.0),
            n_anchor=params.get("n_anchor", 64),
            obs_noise=params.get("obs_noise", 0.05),
        )
        traj, store = ring_rollout(env, steps=n + 2, angular_step=env.default_step, rng=rng)
        kernel = Kernel("gaussian", params.get("sigma", 0.1),
                        successor_weight=params.get("beta", 1.0))
        forward = traj.contents[2:]
        phi = traj.contents[:-2]
        psi = traj.contexts[1:-1]
        sample = rng.choice(len(store) - 1, size=min(64, len(store) - 1), replace=False)
        residuals = [
            float(np.linalg.norm(
                retrieve_adapt(store, store[int(i)].successor, store[int(i)].context, kernel).estimate
                - store[int(i)].content
            ))
            for i in np.sort(sample)
        ]
        r = env.radius
        binning = Binning(np.array([-1.2 * r, -1.2 * r]), np.array([1.2 * r, 1.2 * r]), bins)
    else:  # independent content: the bound is expected to fail
        phi = np.tile([[0.0, 0.0]], (n, 1)) + 0.01 * rng.standard_normal((n, 2))
        psi = rng.uniform(-1, 1, size=(n, 2))
        forward = rng.uniform(-1, 1, size=(n, 2))
        binning = Binning(np.array([-1.2, -1.2]), np.array([1.2, 1.2]), bins)

    delta_h, info, eps, holds = reversibility_bound_check(
        forward, phi, psi, binning, recon_residuals=residuals
    )
    metrics = {
        "delta_h": delta_h,
        "structural_info": info,
        "epsilon_recon": eps,
        "holds": bool(holds),
        "margin": info - delta_h,
    }
    tables = {
        "bound": (["seed", "delta_h", "structural_info", "holds"],
                  [[seed, delta_h, info, int(holds)]]),
    }
    return metrics, tables


def run_duality(params: dict, seed: int):
    rewards = {tuple(r["cell"]): r["value"] for r in params.get("rewards", [])}
    if not rewards:
        rewards = {(params.get("width", 5) - 1, params.get("height", 5) - 1): 1.0}
    env = GridWorld(
        width=params.get("width", 5),
        height=params.get("height", 5),
        walls={tuple(w) for w in params.get("walls", [])},
        rewards=rewards,
    )
    kernel = Kernel("gaussian", params.get("sigma", 0.25), successor_weight=1.0)
    episodes = params.get("episodes", 64)
    reports = duality_experiment(
        env,
        episodes=episodes,
        seeds=[seed],
        steps_per_episode=params.get("steps_per_episode", 25),
        discount=params.get("discount", 0.9),
        alpha0=params.get("alpha0", 1.0),
        kernel=kernel,
        holdout_suffixes=params.get("holdout_suffixes", 20),
        suffix_len=params.get("suffix_len", 5),
        checkpoints=params.get("checkpoints"),
    )[seed]
    final = reports[-1]
    metrics = {
        "forward_value_error": final.forward_value_error,
        "backward_recon_error": final.backward_recon_error,
        "memory_size": final.memory_size,
        "iterations_forward": final.iterations_forward,
        "iterations_backward": final.iterations_backward,
    }
    rows = [
        [seed, rep.episodes, rep.memory_size, rep.forward_value_error,
         "nan" if math.isnan(rep.backward_recon_error) else rep.backward_recon_error]
        for rep in reports
    ]
    tables = {
        "curves": (["seed", "episodes", "memory_size", "forward_value_error",
                    "backward_recon_error"], rows),
    }
    return metrics, tables


def _build_gluings(params: dict):
    gluings = []
    for spec_map in params["gluings"]:
        g = AffineMap.rotation(
            math.radians(spec_map.get("rotation_deg", 0.0)),
            scale=spec_map.get("scale", 1.0),
            offset=spec_map.get("offset", (0.0, 0.0)),
        )
        gluings.append(g)
    return gluings


def run_stack(params: dict, seed: int):
    gluings = _build_gluings(params)
    composed = gluings[0]
    for g in gluings[1:]:
        composed = g.compose(composed)
    return_map = composed.inverse()
    perturb = params.get("perturb")
    if perturb is not None:
        g = gluings[perturb["layer"]]
        gluings[perturb["layer"]] = AffineMap(
            g.matrix, g.offset + np.asarray(perturb["offset"], dtype=np.float64)
        )
    pulls = [params.get("pull", 0.4)] * (len(gluings) + 1)
    stack = PatchStack(gluings=gluings, return_map=return_map, pulls=pulls)

    n = params.get("base_vertices", 16)
    radius = params.get("radius", 1.0)
    th = 2 * np.pi * np.arange(n) / n
    from .topology import CycleRepresentative

    base = CycleRepresentative(
        vertices=radius * np.column_stack([np.cos(th), np.sin(th)]),
        persistence=radius,
        birth=2 * radius * math.sin(math.pi / n),
    )
    traces, defect = stack_run(stack, base, params.get("rounds", 100),
                               params.get("tol", 1e-10))
    round_trip = stack.loop_map()(base.vertices)
    bc0 = persistence_z2(build_rips(PointCloud(base.vertices), 2.5 * radius))
    bc1 = persistence_z2(build_rips(PointCloud(round_trip), 2.5 * radius * stack.loop_map().scale_factor() + 1.0))
    bottleneck = bottleneck_distance(bc0, bc1, 1)
    metrics = {
        "closure_defect": defect,
        "layers_converged_fraction": float(np.mean([t.converged for t in traces])),
        "roundtrip_bottleneck": bottleneck,
    }
    layer_rows = [
        [seed, i, len(t.residuals), t.residuals[-1], int(t.converged)]
        for i, t in enumerate(traces)
    ]
    tables = {
        "layers": (["seed", "layer", "rounds", "final_residual", "converged"], layer_rows),
        "closure": (["seed", "closure_defect", "roundtrip_bottleneck"],
                    [[seed, defect, bottleneck]]),
    }
    return metrics, tables


def run_cocycle(params: dict, seed: int):
    n = params["patches"]
    mode = params["mode"]
    rng = make_rng(seed)
    maps = {}
    if mode == "translation":
        gens = rng.uniform(-1.0, 1.0, size=(n - 1, 2))
        for i in range(n):
            for j in range(i + 1, n):
                maps[(i, j)] = AffineMap.translation(gens[i:j].sum(axis=0))
    else:
        angles = rng.uniform(-math.pi / 3, math.pi / 3, size=n - 1)
        for i in range(n):
            for j in range(i + 1, n):
                maps[(i, j)] = AffineMap.rotation(float(angles[i:j].sum()))
    perturb = params.get("perturb")
    if perturb is not None:
        key = tuple(perturb["pair"])
        g = maps[key]
        maps[key] = AffineMap(g.matrix, g.offset + np.asarray(perturb["offset"], dtype=np.float64))
    defect = cocycle_defect(maps)
    metrics = {"cocycle_defect": defect}
    tables = {"cocycle": (["seed", "defect"], [[seed, defect]])}
    return metrics, tables


def run_persistence(params: dict, seed: int):
    cloud_spec = params["cloud"]
    rng = make_rng(seed)
    if cloud_spec["kind"] == "circle":
        n = cloud_spec["n"]
        radius = cloud_spec.get("radius", 1.0)
        th = 2 * np.pi * np.arange(n) / n
        pts = radius * np.column_stack([np.cos(th), np.sin(th)])
        noise = cloud_spec.get("noise", 0.0)
        if noise:
            pts = pts + rng.uniform(-noise, noise, size=pts.shape)
    else:
        pts = np.loadtxt(cloud_spec["path"], delimiter=",", ndmin=2)
    barcode = persistence_z2(build_rips(PointCloud(pts), params["max_filtration"]))
    h1 = barcode.intervals[1]
    best = max(((d if math.isfinite(d) else barcode.max_filtration) - b for b, d in h1),
               default=0.0)
    metrics = {
        "points": len(pts),
        "h0_bars": len(barcode.intervals[0]),
        "h1_bars": len(h1),
        "max_h1_persistence": best,
    }
    tables = {
        "intervals": (["seed", "dim", "birth", "death"], _intervals_rows(seed, barcode)),
    }
    return metrics, tables


RUNNERS = {
    "fixed_point": run_fixed_point,
    "closure": run_closure,
    "entropy_compare": run_entropy_compare,
    "reversibility": run_reversibility,
    "duality": run_duality,
    "stack": run_stack,
    "cocycle": run_cocycle,
    "persistence": run_persistence,
}

assert set(RUNNERS) == set(EXPERIMENT_KINDS)


def run_seeds(config: dict):
    """Run every seed of a validated config.

    Returns (per_seed metrics, merged tables)."""
    runner = RUNNERS[config["kind"]]
    per_seed = {}
    tables: dict = {}
    for seed in config["seeds"]:
        metrics, seed_tables = runner(config["params"], int(seed))
        per_seed[int(seed)] = metrics
        for name, (header, rows) in seed_tables.items():
            if name in tables:
                if tables[name][0] != header:
                    raise ConfigError(f"table {name}: inconsistent headers across seeds")
                tables[name][1].extend(rows)
            else:
                tables[name] = (list(header), list(rows))
    return per_seed, tables
