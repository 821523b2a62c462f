"""Report-producing recipes shared by the command line and the acceptance suite.

Each recipe takes an :class:`ExperimentConfig` and an output directory,
writes its data files (CSV/JSON/binary) and, optionally, figures, and
returns the summary dictionary it also saved as ``summary.json``.  Data
files contain no timestamps or timings, so a rerun with the same config
and seed reproduces them byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import _rng
from .analysis.fixed_points import (HEAVISIDE_CONVENTION, jacobian_stability,
                                    rate_fixed_points_bruteforce,
                                    rate_fixed_points_iterative, reference_line_layout,
                                    robust_bump, simulate_rate_model)
from .analysis.pools import (extract_pools, pool_extents, pool_maps_to_csv,
                             pool_summary_to_csv, tiling_coverage)
from .analysis.scaling import scaling_benchmark, scaling_to_csv
from .analysis.waves import detect_waves, stats_to_csv, waves_to_csv
from .config import ExperimentConfig
from .dynamics import IzhikevichParams, NoiseParams, init_layer_state, run
from .growth import GrowthParams, Scaffold, SimConfig, capacity_bound, grow_network
from .io import write_json
from .plasticity import init_units, save_weights, self_organize
from .topology import (LayerGeometry, TopologyParams, ablate_nodes, build_geometry_from_mask,
                       build_grid_layer, build_synaptic_matrix, contiguous_block, load_mask)


def _noop(*_a, **_k):
    pass


# ---------------------------------------------------------------- builders

def topology_params(cfg: ExperimentConfig, r_i: float | None = None) -> TopologyParams:
    t = cfg.topology
    p = TopologyParams(t.r_e, t.r_i if r_i is None else float(r_i), t.l, t.m, t.decay_len)
    p.validate()
    return p


def izhikevich_params(cfg: ExperimentConfig) -> IzhikevichParams:
    d = cfg.dynamics
    return IzhikevichParams(d.a, d.b, tuple(d.c_range), tuple(d.d_range), d.v0, d.u0,
                            d.spike_threshold)


def sim_config(cfg: ExperimentConfig) -> SimConfig:
    return SimConfig(topology_params(cfg), izhikevich_params(cfg),
                     NoiseParams(cfg.dynamics.sigma2), cfg.dynamics.coupling_gain,
                     cfg.plasticity.eta_learn, cfg.plasticity.selection)


def build_layer(cfg: ExperimentConfig) -> LayerGeometry:
    t = cfg.topology
    if t.mask_file:
        return build_geometry_from_mask(load_mask(t.mask_file), t.spacing)
    return build_grid_layer(t.rows, t.cols, t.spacing, t.jitter, cfg.seed)


def growth_params(cfg: ExperimentConfig) -> GrowthParams:
    g = cfg.growth
    if g.scaffold_file:
        scaffold = Scaffold.from_file(g.scaffold_file)
    elif g.scaffold == "disk":
        r = float(g.scaffold_size[0])
        scaffold = Scaffold("disk", (r,), (r, r))
    elif g.scaffold == "rect":
        scaffold = Scaffold("rect", tuple(float(v) for v in g.scaffold_size[:2]))
    else:
        raise ValueError(f"unknown scaffold {g.scaffold!r} (rect, disk, or set scaffold_file)")
    p = GrowthParams(g.hcd_age, g.hf_max, g.r_hdiv, g.r_vdiv, g.thresh_hdiv, scaffold,
                     placement=g.placement, daughter_room=g.daughter_room)
    p.validate()
    return p


def _dynamics_kwargs(cfg: ExperimentConfig) -> dict:
    d = cfg.dynamics
    return dict(dt=d.dt, substeps=d.substeps, gain=d.coupling_gain)


# ---------------------------------------------------------------- waves

def wave_experiment(cfg: ExperimentConfig, out, steps: int | None = None,
                    sigma2: float | None = None, figures: bool = True, log=_noop) -> dict:
    """Spontaneous layer-I activity and the travelling waves in it."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    steps = cfg.dynamics.steps if steps is None else int(steps)
    sigma2 = cfg.dynamics.sigma2 if sigma2 is None else float(sigma2)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    a = cfg.analysis
    geom = build_layer(cfg)
    S = build_synaptic_matrix(geom, topology_params(cfg), cfg.topology.dense_threshold)
    state = init_layer_state(geom, izhikevich_params(cfg), cfg.seed)
    log(f"wave: {geom.n_nodes} nodes, {steps} steps, sigma2={sigma2:g}")
    trace = run(state, S, NoiseParams(sigma2), steps, **_dynamics_kwargs(cfg))
    stats, waves = detect_waves(trace, geom, cfg.topology.r_e, a.wave_k, a.wave_min_size)
    trace.save(out / "raster.ngrw")
    trace.to_events_csv(out / "spikes.csv")
    waves_to_csv(waves, out / "waves.csv")
    stats_to_csv(stats, out / "wave_stats.csv")
    n_win = max(1, steps // a.wave_window)
    per_window = [0] * n_win
    for w in waves:
        k = w.start // a.wave_window
        if k < n_win:
            per_window[k] += 1
    counts = trace.counts()
    summary = {
        "nodes": geom.n_nodes, "steps": steps, "sigma2": sigma2,
        "spikes": int(counts.sum()), "mean_active": float(counts.mean()),
        "waves": len(waves), "window": a.wave_window, "waves_per_window": per_window,
        "min_waves_per_window": int(min(per_window)),
        "mean_wave_frames": float(np.mean([w.n_frames for w in waves])) if waves else 0.0,
    }
    write_json(summary, out / "summary.json")
    if figures:
        from . import plotting
        plotting.plot_wave_snapshots(trace, geom, out / "wave_snapshots.png",
                                     steps=[w.start for w in waves[:6]] or None)
        plotting.plot_activity(trace, out / "activity.png")
    log(f"wave: {len(waves)} waves; per window {per_window}")
    return summary


# ---------------------------------------------------------------- self-organisation

def _organize(cfg: ExperimentConfig, geom: LayerGeometry, seed: int, steps: int,
              r_i: float | None = None, log=_noop):
    """Run self-organisation with coverage checkpoints; returns (units, state, S, curve)."""
    p, a = cfg.plasticity, cfg.analysis
    topo = topology_params(cfg, r_i)
    S = build_synaptic_matrix(geom, topo, cfg.topology.dense_threshold)
    units = init_units(p.units, geom.n_nodes, seed, p.init_scheme, geom=geom,
                       eta_learn=p.eta_learn, c0=p.c0, bias_floor=p.bias_floor)
    state = init_layer_state(geom, izhikevich_params(cfg), seed)
    curve = []
    done = 0
    while done < steps:
        chunk = min(a.coverage_every, steps - done)
        _continue(cfg, geom, S, units, state, chunk, seed)
        done += chunk
        cov = tiling_coverage(_pools(cfg, units, geom), geom)
        curve.append((done, cov))
        log(f"organize: seed {seed} step {done} coverage {cov:.3f}")
    return units, state, S, curve


def _continue(cfg, geom, S, units, state, steps, seed):
    p = cfg.plasticity
    self_organize(geom, S, None, NoiseParams(cfg.dynamics.sigma2), units, steps, seed,
                  state=state, selection=p.selection, window=p.window, z_min=p.z_min,
                  **_dynamics_kwargs(cfg))


def _pools(cfg, units, geom):
    a = cfg.analysis
    return extract_pools(units, geom, a.pool_frac, cfg.topology.r_e, a.max_pool_fraction)


def steps_to_target(curve, target: float) -> int | None:
    for step_, cov in curve:
        if cov >= target:
            return int(step_)
    return None


def _write_curve(curve, path) -> None:
    with open(path, "w") as fh:
        fh.write("step,coverage\n")
        for s, c in curve:
            fh.write(f"{s},{c:.6f}\n")


def read_node_ids(path) -> list[int]:
    """Node ids from a text file: integers separated by commas, spaces or newlines."""
    text = Path(path).read_text().replace(",", " ")
    ids = []
    for tok in text.split():
        if tok.startswith("#"):
            continue
        try:
            ids.append(int(tok))
        except ValueError:
            raise ValueError(f"{path}: {tok!r} is not a node id") from None
    return ids


def ablated_pool_hits(units, geom: LayerGeometry, dead, frac: float, pools) -> list[int]:
    """Units with an unflagged pool that would still include a dead node.

    Pools are extracted over alive nodes only, so this looks at the full
    weight column instead: a dead node counts when its weight is at least
    ``frac`` of the unit's largest weight onto alive nodes.
    """
    dead = np.asarray(dead, dtype=int)
    if len(dead) == 0:
        return []
    w = units.w
    top = w[geom.alive].max(0)
    return [p.unit for p in pools
            if not p.flagged and bool((w[dead, p.unit] >= frac * top[p.unit]).any())]


def organize_experiment(cfg: ExperimentConfig, out, seed: int | None = None,
                        ablate: bool = False, ablate_ids=None, figures: bool = True,
                        log=_noop) -> dict:
    """Self-organise, export pools and coverage; optionally ablate and continue."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else int(seed)
    a = cfg.analysis
    geom = build_layer(cfg)
    units, state, S, curve = _organize(cfg, geom, seed, cfg.plasticity.steps, log=log)
    pools = _pools(cfg, units, geom)
    cov = tiling_coverage(pools, geom)
    ext = pool_extents(pools)
    _write_curve(curve, out / "coverage.csv")
    pool_maps_to_csv(pools, out / "pools.csv")
    pool_summary_to_csv(pools, out / "pool_summary.csv")
    save_weights(units.W1, out / "weights.ngw1")
    summary = {
        "nodes": geom.n_nodes, "units": units.n_units, "seed": seed,
        "steps": cfg.plasticity.steps, "coverage": cov,
        "steps_to_tiling": steps_to_target(curve, a.tiling_target),
        "tiling_target": a.tiling_target,
        "flagged_pools": int(sum(p.flagged for p in pools)),
        "median_extent": float(np.median(ext)) if len(ext) else None,
    }
    if figures:
        from . import plotting
        plotting.plot_pool_map(pools, geom, out / "pools.png", f"coverage {cov:.3f}")
        plotting.plot_coverage(*zip(*curve), out / "coverage.png")
    if ablate or ablate_ids is not None or a.ablate_file:
        if ablate_ids is None and a.ablate_file:
            ablate_ids = read_node_ids(a.ablate_file)
        if ablate_ids is None:
            count = max(1, int(round(a.ablate_fraction * geom.n_alive)))
            centre = geom.positions[geom.alive].mean(0)
            ablate_ids = contiguous_block(geom, centre, count)
        dead = np.asarray(sorted(set(int(i) for i in ablate_ids)), dtype=int)
        geom2 = ablate_nodes(geom, dead)
        pre = tiling_coverage(_pools(cfg, units, geom2), geom2)
        log(f"organize: ablated {len(dead)} nodes; coverage over alive nodes {pre:.3f}")
        curve2 = []
        done = 0
        while done < a.post_ablation_steps:
            chunk = min(a.coverage_every, a.post_ablation_steps - done)
            _continue(cfg, geom2, S, units, state, chunk, seed)
            done += chunk
            curve2.append((done, tiling_coverage(_pools(cfg, units, geom2), geom2)))
        pools2 = _pools(cfg, units, geom2)
        post = tiling_coverage(pools2, geom2)
        in_pools = sorted({int(i) for p in pools2 for i in p.members} & set(dead.tolist()))
        with open(out / "ablated.csv", "w") as fh:
            fh.write("node_id\n" + "".join(f"{i}\n" for i in dead))
        _write_curve(curve2, out / "coverage_post.csv")
        pool_maps_to_csv(pools2, out / "pools_post.csv")
        pool_summary_to_csv(pools2, out / "pool_summary_post.csv")
        summary["ablation"] = {
            "ablated": int(len(dead)),
            "coverage_before": cov,
            "coverage_after_ablation": pre,
            "coverage_recovered": post,
            "recovery_ratio": post / cov if cov > 0 else None,
            "post_steps": a.post_ablation_steps,
            "ablated_in_pools": in_pools,
            "pools_weighting_ablated": ablated_pool_hits(units, geom2, dead, a.pool_frac, pools2),
        }
        if figures:
            from . import plotting
            plotting.plot_pool_map(pools2, geom2, out / "pools_post.png",
                                   f"after ablation: coverage {post:.3f}")
        log(f"organize: recovered coverage {post:.3f}")
    write_json(summary, out / "summary.json")
    return summary


def organize_seeds_experiment(cfg: ExperimentConfig, out, seeds, figures: bool = False,
                              log=_noop) -> dict:
    """Coverage and steps-to-tiling over several seeds (one sub-directory each)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in seeds:
        r = organize_experiment(cfg, out / f"seed{s}", seed=s, figures=figures, log=log)
        rows.append(r)
    with open(out / "seeds.csv", "w") as fh:
        fh.write("seed,coverage,steps_to_tiling\n")
        for r in rows:
            stt = "" if r["steps_to_tiling"] is None else r["steps_to_tiling"]
            fh.write(f"{r['seed']},{r['coverage']:.6f},{stt}\n")
    summary = {
        "seeds": list(seeds),
        "coverage": [r["coverage"] for r in rows],
        "steps_to_tiling": [r["steps_to_tiling"] for r in rows],
        "tiled": int(sum(r["steps_to_tiling"] is not None for r in rows)),
        "final_above_target": int(sum(r["coverage"] >= cfg.analysis.tiling_target for r in rows)),
    }
    write_json(summary, out / "summary.json")
    return summary


def inhibition_sweep_experiment(cfg: ExperimentConfig, out, radii=None, seeds=None,
                                figures: bool = True, log=_noop) -> dict:
    """Pool-extent distribution for each inhibition radius over a seed set."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    a = cfg.analysis
    radii = [float(r) for r in (radii if radii is not None else a.inhibition_radii or (4, 6, 8))]
    seeds = [int(s) for s in (seeds if seeds is not None else a.sweep_seeds)]
    geom = build_layer(cfg)
    rows, per_radius = [], []
    for r in radii:
        ext_all = []
        covs = []
        for s in seeds:
            units, _, _, _ = _organize(cfg, geom, s, cfg.plasticity.steps, r_i=r, log=log)
            pools = _pools(cfg, units, geom)
            covs.append(tiling_coverage(pools, geom))
            for p in pools:
                if not p.flagged:
                    rows.append((r, s, p.unit, p.extent))
                    ext_all.append(p.extent)
        e = np.asarray(ext_all)
        if len(e):
            q1, med, q3 = (float(v) for v in np.percentile(e, [25, 50, 75]))
        else:
            q1 = med = q3 = float("nan")
        per_radius.append({"r_i": r, "pools": int(len(e)), "median_extent": med,
                           "q1": q1, "q3": q3,
                           "iqr_ratio": (q3 - q1) / med if len(e) and med > 0 else None,
                           "coverage": covs})
        log(f"sweep: r_i={r:g} median extent {med:.3f}")
    with open(out / "extents.csv", "w") as fh:
        fh.write("r_i,seed,unit_id,extent\n")
        for r, s, u, e in rows:
            fh.write(f"{r:g},{s},{u},{e:.6f}\n")
    meds = [p["median_extent"] for p in per_radius]
    summary = {
        "radii": radii, "seeds": seeds, "per_radius": per_radius,
        "monotone_non_decreasing": bool(all(b >= a_ for a_, b in zip(meds, meds[1:]))),
        "max_iqr_ratio": max((p["iqr_ratio"] for p in per_radius if p["iqr_ratio"] is not None),
                             default=None),
    }
    write_json(summary, out / "summary.json")
    if figures:
        from . import plotting
        plotting.plot_extent_sweep(radii, [[e for r_, _, _, e in rows if r_ == r] for r in radii],
                                   out / "extents.png")
    return summary


# ---------------------------------------------------------------- growth

def grow_experiment(cfg: ExperimentConfig, out, seed: int | None = None,
                    max_steps: int | None = None, figures: bool = True, log=_noop) -> dict:
    """Grow a network from one cell; export lineage, populations and the result."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else int(seed)
    g = cfg.growth
    params = growth_params(cfg)
    sim = sim_config(cfg)

    def progress(sweep, cells, units):
        if sweep % 10 == 0:
            log(f"grow: sweep {sweep} cells {cells} units {units}")

    net = grow_network(params, sim, seed, max_steps=g.max_steps if max_steps is None else max_steps,
                       interleave=g.interleave, window=g.window, validate=True,
                       progress=progress)
    if g.post_steps > 0 and net.units.n_units > 0:
        S = build_synaptic_matrix(net.layer1, sim.topology, cfg.topology.dense_threshold)
        self_organize(net.layer1, S, sim.izhikevich, sim.noise, net.units, g.post_steps, seed,
                      state=net.layer_state, gain=sim.gain, selection=sim.selection)
    net.lineage_to_csv(out / "lineage.csv")
    with open(out / "population.csv", "w") as fh:
        fh.write("sweep,cells,units\n")
        for k, (c, u) in enumerate(net.history, 1):
            fh.write(f"{k},{c},{u}\n")
    net.layer1.to_csv(out / "positions.csv")
    save_weights(net.units.W1, out / "weights.ngw1")
    summary = {
        "seed": seed, "converged": net.converged, "sweeps": net.sweeps,
        "cells": int(net.layer1.n_nodes), "units": int(net.units.n_units),
        "capacity_bound": capacity_bound(params),
        "invariant_violations": len(net.invariant_violations),
        "scaffold": params.scaffold.label,
    }
    if net.units.n_units > 0:
        pools = _pools(cfg, net.units, net.layer1)
        summary["coverage"] = tiling_coverage(pools, net.layer1)
        pool_maps_to_csv(pools, out / "pools.csv")
        if figures:
            from . import plotting
            plotting.plot_pool_map(pools, net.layer1, out / "pools.png",
                                   f"grown: {net.layer1.n_nodes} cells, {net.units.n_units} units")
    if net.invariant_violations:
        (out / "violations.txt").write_text("\n".join(net.invariant_violations) + "\n")
    write_json(summary, out / "summary.json")
    if figures:
        from . import plotting
        plotting.plot_growth(net.history, out / "population.png")
    log(f"grow: converged={net.converged} after {net.sweeps} sweeps")
    return summary


# ---------------------------------------------------------------- evaluation

KIND_ALIASES = {
    "handcrafted": "hand-crafted", "hand-crafted": "hand-crafted", "hand_crafted": "hand-crafted",
    "selforganized": "self-organized", "self-organized": "self-organized",
    "self-organised": "self-organized", "self_organized": "self-organized",
    "so": "self-organized", "random": "random",
}


def canonical_kinds(kinds) -> list[str]:
    out = []
    for k in kinds:
        key = k.strip().lower()
        if key not in KIND_ALIASES:
            raise ValueError(f"unknown network kind {k!r}; "
                             "choose from self-organized, hand-crafted, random")
        if KIND_ALIASES[key] not in out:
            out.append(KIND_ALIASES[key])
    if not out:
        raise ValueError("no network kinds selected")
    return out


def eval_experiment(cfg: ExperimentConfig, out, kinds=None, figures: bool = True,
                    log=_noop) -> dict:
    """Compare readout accuracy of self-organised, hand-crafted and random first layers."""
    from .evaluation import (build_handcrafted, build_random, build_self_organized,
                             comparison_report, find_mnist, load_mnist, make_config,
                             train_and_score)

    out = Path(out)
    e = cfg.eval
    kinds = canonical_kinds(kinds if kinds is not None else e.kinds)
    d = find_mnist(e.mnist_dir)
    if d is None:
        raise FileNotFoundError(
            "MNIST IDX files not found; pass --mnist DIR or set MNIST_DIR to a directory "
            "holding train-images-idx3-ubyte, train-labels-idx1-ubyte, "
            "t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte (optionally .gz)")
    out.mkdir(parents=True, exist_ok=True)
    train, test = load_mnist(d, e.n_train, e.n_test)
    grid = tuple(train.shape)
    W_hc = build_handcrafted(grid, e.pool, e.stride)
    M, N = W_hc.shape
    sim = sim_config(cfg)
    seeds = [cfg.seed + k for k in range(e.seeds)]
    acc = {k: [] for k in kinds}
    rows = []
    for s in seeds:
        for kind in kinds:
            if kind == "hand-crafted":
                W1 = W_hc
            elif kind == "random":
                W1 = build_random(N, M, e.pool * e.pool, s)
            else:
                log(f"eval: self-organising {grid[0]}x{grid[1]} layer, seed {s}")
                W1 = build_self_organized(grid, M, e.so_steps, s, sim, cfg.plasticity.init_scheme)
            net = make_config(kind, W1, e.hidden, s, e.nonlinearity)
            tr, te = train_and_score(net, train, test, e.ridge)
            acc[kind].append(te)
            rows.append((kind, s, tr, te))
            log(f"eval: {kind} seed {s} train {tr:.4f} test {te:.4f}")
    with open(out / "accuracies.csv", "w") as fh:
        fh.write("kind,seed,train_accuracy,test_accuracy\n")
        for kind, s, tr, te in rows:
            fh.write(f"{kind},{s},{tr:.6f},{te:.6f}\n")
    rep = comparison_report(acc) if e.seeds >= 2 else None
    report = rep.to_dict() if rep is not None else {"kinds": [], "pairs": [],
                                                    "accuracies": acc}
    report.update({"n_train": len(train), "n_test": len(test), "units": M, "hidden": e.hidden,
                   "seeds": seeds})
    write_json(report, out / "report.json")
    if figures and rep is not None:
        from . import plotting
        plotting.plot_accuracy(rep, out / "accuracy.png")
    return report


# ---------------------------------------------------------------- rate model

def random_layout(n: int, box: float, seed: int, min_sep: float = 0.5) -> LayerGeometry:
    """``n`` points uniform in a ``box`` square, redrawn until no pair is closer than ``min_sep``."""
    rng = _rng.stream(seed, "layout")
    for _ in range(1000):
        pts = rng.uniform(0.0, box, size=(n, 2))
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        np.fill_diagonal(d, np.inf)
        if d.min() >= min_sep:
            return LayerGeometry(pts, scaffold_id=f"random{n}")
    raise ValueError("could not place the nodes; enlarge the box")


def fixed_points_experiment(cfg: ExperimentConfig, out, n: int | None = None,
                            layouts: int | None = None, figures: bool = True,
                            log=_noop) -> dict:
    """Brute-force vs iterative fixed points on random layouts, with stability."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    a = cfg.analysis
    n = a.fp_nodes if n is None else int(n)
    layouts = a.fp_layouts if layouts is None else int(layouts)
    topo = topology_params(cfg)
    fp_rows, st_rows, per_layout = [], [], []
    all_subset, max_res, stab_exact = True, 0.0, True
    lam = -1.0 / a.tau_d
    for k in range(layouts):
        geom = random_layout(n, a.fp_box, cfg.seed * 1000 + k)
        S = build_synaptic_matrix(geom, topo, dense_threshold=max(n, 1) + 1).weights
        brute = rate_fixed_points_bruteforce(S)
        it, stats = rate_fixed_points_iterative(S, a.fp_starts, cfg.seed + k, return_stats=True)
        bset = {p.active_set for p in brute}
        subset = all(p.active_set in bset for p in it)
        all_subset &= subset
        for method, pts in (("bruteforce", brute), ("iterative", it)):
            for p in pts:
                max_res = max(max_res, p.residual)
                fp_rows.append((k, method, p))
        for p in brute:
            rep = jacobian_stability(p, S, a.tau_d)
            if p.strict:
                ok = (rep.eigenvalues is not None and rep.multiplicity == n
                      and bool(np.all(rep.eigenvalues == lam)))
                stab_exact &= ok
            st_rows.append((k, p, rep))
        per_layout.append({"layout": k, "bruteforce": len(brute), "iterative": len(it),
                           "iterative_subset": subset, "discarded_starts": stats["discarded"]})
        log(f"fixed-points: layout {k}: {len(brute)} brute-force, {len(it)} iterative")
    with open(out / "fixed_points.csv", "w") as fh:
        fh.write("layout,method,n_active,active_set,residual,strict\n")
        for k, m, p in fp_rows:
            fh.write(f"{k},{m},{len(p.active_set)},{' '.join(map(str, p.active_set))},"
                     f"{p.residual:.3e},{int(p.strict)}\n")
    with open(out / "stability.csv", "w") as fh:
        fh.write("layout,active_set,strict,stable,eigenvalue,multiplicity\n")
        for k, p, rep in st_rows:
            ev = "" if rep.eigen_extent is None else repr(rep.eigen_extent)
            stable = "" if rep.stable is None else int(rep.stable)
            fh.write(f"{k},{' '.join(map(str, p.active_set))},{int(p.strict)},{stable},"
                     f"{ev},{rep.multiplicity}\n")
    summary = {
        "nodes": n, "layouts": layouts, "tau_d": a.tau_d, "convention": HEAVISIDE_CONVENTION,
        "iterative_subset_of_bruteforce": bool(all_subset), "max_residual": max_res,
        "stability_exact": bool(stab_exact), "per_layout": per_layout,
    }
    write_json(summary, out / "summary.json")
    return summary


def noise_experiment(cfg: ExperimentConfig, out, sigma2s=None, seeds=None,
                     steps: int | None = None, figures: bool = True, log=_noop) -> dict:
    """Bump transitions of the rate model on the reference strip for several noise levels."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    a = cfg.analysis
    sigma2s = [float(s) for s in (sigma2s if sigma2s is not None else a.rate_sigma2)]
    seeds = [int(s) for s in (seeds if seeds is not None else a.rate_seeds)]
    steps = a.rate_steps if steps is None else int(steps)
    geom = reference_line_layout()
    S = build_synaptic_matrix(geom, topology_params(cfg)).weights
    bump = robust_bump(S, seed=cfg.seed)
    if bump is None:
        raise ValueError("no single-bump fixed point on the reference layout")
    rows = []
    traces = {}
    for s2 in sigma2s:
        for sd in seeds:
            tr = simulate_rate_model(S, a.tau_d, s2, steps, sd, a.rate_dt, x0=bump.x,
                                     positions=geom.positions)
            rows.append((s2, sd, tr.transitions))
            traces[(s2, sd)] = tr
            log(f"noise: sigma2={s2:g} seed {sd}: {tr.transitions} transitions")
    with open(out / "transitions.csv", "w") as fh:
        fh.write("sigma2,seed,transitions,per_1000_steps\n")
        for s2, sd, n in rows:
            fh.write(f"{s2:g},{sd},{n},{1000 * n / steps:.6f}\n")
    by = {f"{s2:g}": [n for s2_, _, n in rows if s2_ == s2] for s2 in sigma2s}
    summary = {"steps": steps, "dt": a.rate_dt, "tau_d": a.tau_d, "seeds": seeds,
               "bump_size": len(bump.active_set), "bump_margin": float(np.abs(bump.x).min()),
               "transitions": by}
    write_json(summary, out / "summary.json")
    if figures:
        from . import plotting
        top = max(sigma2s)
        plotting.plot_rate_trace(traces[(top, seeds[0])], out / f"rate_trace_sigma{top:g}.png")
    return summary


def scaling_experiment(cfg: ExperimentConfig, out, sizes=None, step_caps=None,
                       figures: bool = True, log=_noop) -> dict:
    """Steps-to-tiling and simultaneous wave components against layer size.

    ``step_caps`` optionally gives one cap per size (default: the
    configured cap for all).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    a, p = cfg.analysis, cfg.plasticity
    sizes = [int(s) for s in (sizes if sizes is not None else a.scaling_sizes)]
    caps = list(step_caps) if step_caps is not None else [a.scaling_step_cap] * len(sizes)
    if len(caps) != len(sizes):
        raise ValueError("need one step cap per size")
    rows = []
    for n, cap in zip(sizes, caps):
        rows += scaling_benchmark(
            [n], cfg.seed, a.scaling_nodes_per_unit, a.scaling_target, int(cap),
            a.scaling_check_every, topology_params(cfg), cfg.dynamics.sigma2,
            cfg.dynamics.coupling_gain, p.eta_learn, p.selection, "spatially-biased",
            p.bias_floor, a.pool_frac, a.max_pool_fraction,
            dense_threshold=cfg.topology.dense_threshold,
            progress=lambda N, t, c: log(f"scaling: N={N} step {t} coverage {c:.3f}"))
        log(f"scaling: N={n} done in {rows[-1].wall_clock:.1f}s")
    scaling_to_csv(rows, out / "scaling.csv")
    summary = {"rows": [{"n_nodes": r.n_nodes, "n_units": r.n_units, "shape": list(r.shape),
                         "steps_to_tiling": r.steps_to_tiling, "converged": r.converged,
                         "coverage": r.coverage, "steps_per_node": r.steps_per_node,
                         "peak_components": r.peak_components,
                         "median_components": r.median_components} for r in rows]}
    write_json(summary, out / "summary.json")
    if figures:
        from . import plotting
        plotting.plot_scaling(rows, out / "scaling.png")
    return summary
