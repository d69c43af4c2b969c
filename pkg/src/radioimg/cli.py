"""Command-line front end: simulate / image-rma / image-sbl / metrics / sweep."""

import argparse
import os
import sys

import numpy as np

from . import metrics as metrics_mod
from . import rma, sbl, serialization
from .channel import VisibilityMap, assemble_channels, compute_visibility
from .config import ConfigError, parse_config, serialize_config
from .experiment import (ExperimentSpec, build_array, build_plan, build_scene,
                         read_magnitude_csv, reference_image, run, write_magnitude_csv,
                         write_pgm)
from .geometry import make_outdoor_units
from .waveform import (measure_all_pairs, round_robin_plan, simulate_cooperative,
                       single_view_plan, watts_to_dbm)


def _cell(cfg, args):
    seed = cfg.seeds[0] if args.seed is None else args.seed
    return cfg.powers[0], cfg.depths[0], seed


def _run_dir(cfg, args, solver, power, z, seed):
    root = args.out if args.out else cfg.out_dir
    run_id = f"{solver}_p{watts_to_dbm(power):g}dBm_z{z:g}_s{seed}"
    path = os.path.join(root, "runs", run_id)
    os.makedirs(path, exist_ok=True)
    return path


def _voxel_setup(cfg, scene, plan, power, seed):
    units = make_outdoor_units(scene.region, spacing=cfg.spacing)
    visibility = compute_visibility(scene, units, points="all")
    channels = {}
    start = 0
    for u in units:
        bits = visibility.bits[start:start + u.n_antennas]
        channels[u.id] = assemble_channels(scene, (u,), plan, points="all",
                                            visibility=VisibilityMap(bits))
        start += u.n_antennas
    builder = round_robin_plan if cfg.schedule_kind == "round-robin" else single_view_plan
    m_t = units[0].positions.shape[0]
    plan_tx = builder([u.id for u in units], cfg.slots, plan.n,
                      m_t, power, seed)
    return units, channels, plan_tx


def _cmd_simulate(args):
    cfg = parse_config(args.config)
    power, z, seed = _cell(cfg, args)
    plan = build_plan(cfg)
    scene = build_scene(cfg, z)
    run_dir = _run_dir(cfg, args, "sim", power, z, seed)
    serialize_config(cfg, os.path.join(run_dir, "config.snapshot"))
    path = os.path.join(run_dir, "observations.bin")
    if cfg.scene_kind == "voxel-demo":
        _, channels, plan_tx = _voxel_setup(cfg, scene, plan, power, seed)
        obs = simulate_cooperative(scene, channels, plan_tx, cfg.sigma2, seed)
        serialization.save_observations(path, obs)
    else:
        architecture = build_array(cfg)
        d_all = measure_all_pairs(scene, architecture, plan, power, cfg.sigma2, seed)
        serialization.save_arrays(path, {"d_all": d_all},
                                  meta={"seed": seed, "power": power, "z": z})
    print(path)
    return 0


def _write_metrics_csv(path, run_id, result):
    with open(path, "w", newline="") as fh:
        fh.write("run_id,metric,value\n")
        for key, value in result.items():
            v = "inf" if np.isinf(value) else f"{value:.9e}"
            fh.write(f"{run_id},{key},{v}\n")


def _cmd_image_rma(args):
    cfg = parse_config(args.config)
    power, z, seed = _cell(cfg, args)
    if cfg.scene_kind == "voxel-demo":
        raise ValueError("image-rma requires a planar scene")
    plan = build_plan(cfg)
    scene = build_scene(cfg, z)
    architecture = build_array(cfg)
    sim_dir = _run_dir(cfg, args, "sim", power, z, seed)
    obs_path = os.path.join(sim_dir, "observations.bin")
    if os.path.exists(obs_path):
        arrays, _ = serialization.load_arrays(obs_path)
        d_all = arrays["d_all"]
    else:
        d_all = measure_all_pairs(scene, architecture, plan, power, cfg.sigma2, seed)
    image = rma.rma_pipeline(d_all, architecture, plan, z)
    run_id = f"rma_p{watts_to_dbm(power):g}dBm_z{z:g}_s{seed}"
    run_dir = _run_dir(cfg, args, "rma", power, z, seed)
    stem = os.path.join(run_dir, f"image_{run_id}")
    write_magnitude_csv(stem + ".csv", image.magnitude)
    write_pgm(stem + ".pgm", image.magnitude)
    result = metrics_mod.evaluate(reference_image(scene), image.magnitude,
                                  reference_pitch=scene.cell[0],
                                  estimate_pitch=image.pitch)
    _write_metrics_csv(os.path.join(run_dir, "metrics.csv"), run_id, result)
    print(stem + ".csv")
    return 0


def _cmd_image_sbl(args):
    cfg = parse_config(args.config)
    power, z, seed = _cell(cfg, args)
    solver = args.solver if args.solver else ("sbl" if cfg.solver == "rma" else cfg.solver)
    plan = build_plan(cfg)
    scene = build_scene(cfg, z)
    if cfg.scene_kind != "voxel-demo":
        raise ValueError("image-sbl requires the voxel-demo scene")
    _, channels, plan_tx = _voxel_setup(cfg, scene, plan, power, seed)
    sim_dir = _run_dir(cfg, args, "sim", power, z, seed)
    obs_path = os.path.join(sim_dir, "observations.bin")
    if os.path.exists(obs_path):
        obs = serialization.load_observations(obs_path)
    else:
        obs = simulate_cooperative(scene, channels, plan_tx, cfg.sigma2, seed)
    problem = sbl.build_problem(scene, channels, plan_tx, obs)
    max_iters = args.max_iters if args.max_iters else cfg.max_iters
    eps = args.eps if args.eps else cfg.eps
    if solver == "sbl":
        est = sbl.sbl_em(problem, max_iters=max_iters, eps=eps)
    elif solver == "ls":
        est = sbl.ls(problem)
    elif solver == "omp":
        est = sbl.omp(problem, args.k if args.k else cfg.k_atoms)
    elif solver in ("ista", "lasso"):
        est = sbl.ista(problem, lam=args.lam if args.lam else cfg.lam,
                       iters=max_iters)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    run_id = f"{solver}_p{watts_to_dbm(power):g}dBm_z{z:g}_s{seed}"
    run_dir = _run_dir(cfg, args, solver, power, z, seed)
    out = os.path.join(run_dir, f"estimate_{run_id}.csv")
    centers = scene.cell_centers()
    with open(out, "w", newline="") as fh:
        fh.write("x,y,z,magnitude\n")
        for i in np.flatnonzero(est.support):
            c = centers[i]
            fh.write(f"{c[0]:.6g},{c[1]:.6g},{c[2]:.6g},"
                     f"{np.abs(est.rho[i, 0]):.9e}\n")
    serialization.save_arrays(os.path.join(run_dir, "estimate.bin"),
                              {"rho": est.rho}, meta={"solver": solver, "seed": seed})
    print(out)
    return 0


def _cmd_metrics(args):
    ref = read_magnitude_csv(args.reference)
    est = read_magnitude_csv(args.estimate)
    result = metrics_mod.evaluate(ref, est)
    for key in ("mse", "psnr", "ssim", "pcc"):
        value = result[key]
        print(f"{key},{'inf' if np.isinf(value) else f'{value:.9e}'}")
    return 0


def _cmd_sweep(args):
    cfg = parse_config(args.config)
    if args.out:
        cfg = type(cfg)(**{**cfg.__dict__, "out_dir": args.out})
    if args.seed is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "seeds": (args.seed,)})
    run(ExperimentSpec(cfg))
    print(os.path.join(cfg.out_dir, "metrics.csv"))
    return 0


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="YAML config path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output root directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="radioimg",
                                     description="RF imaging simulation and reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="synthesize observations")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)
    p = sub.add_parser("image-rma", help="range-migration reconstruction")
    _add_common(p)
    p.set_defaults(func=_cmd_image_rma)
    p = sub.add_parser("image-sbl", help="sparse voxel reconstruction")
    _add_common(p)
    p.add_argument("--solver", choices=("sbl", "ls", "omp", "ista", "lasso"))
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(func=_cmd_image_sbl)
    p = sub.add_parser("metrics", help="compare two magnitude CSV images")
    p.add_argument("reference")
    p.add_argument("estimate")
    p.set_defaults(func=_cmd_metrics)
    p = sub.add_parser("sweep", help="run the configured experiment sweep")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"error kind=config detail={v!r}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single CLI boundary
        print(f"error kind={type(exc).__name__} detail={str(exc)!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
