"""Experiment orchestration: sweeps over power, depth, seed, and solver, with
per-cell error capture, metric aggregation, and CSV / graymap exports."""

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import metrics, rma, sbl
from .channel import (VisibilityMap, assemble_channels, compute_visibility,
                      projected_strength_map)
from .config import Config
from .geometry import (SubcarrierPlan, build_architecture, make_hollow_rectangle,
                       make_outdoor_units, make_point_target, make_siemens_star,
                       make_voxel_demo)
from .waveform import (measure_all_pairs, pair_core, round_robin_plan,
                       simulate_cooperative, single_view_plan, watts_to_dbm)


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    config: Config
    solvers: tuple = None  # defaults to (config.solver,)

    def __post_init__(self):
        if not self.config.seeds:
            raise ExperimentError("at least one seed is required")

    @property
    def solver_list(self):
        return self.solvers if self.solvers else (self.config.solver,)


def build_scene(cfg: Config, depth: float):
    if cfg.scene_kind == "star":
        return make_siemens_star(cfg.scene_size, cfg.pixel_size, depth=depth)
    if cfg.scene_kind == "rectangle":
        return make_hollow_rectangle(cfg.scene_size, cfg.scene_size,
                                     cfg.pixel_size, depth=depth)
    if cfg.scene_kind == "point":
        return make_point_target(cfg.scene_size, cfg.pixel_size, depth=depth)
    if cfg.scene_kind == "voxel-demo":
        side = depth
        return make_voxel_demo(region=((0, 0, 0), (side, side, side)),
                               shape=cfg.voxel_grid)
    raise ExperimentError(f"unknown scene kind {cfg.scene_kind!r}")


def build_array(cfg: Config):
    kind = "full" if cfg.array_kind == "sar" else cfg.array_kind
    if kind == "full":
        g = cfg.m_l + 2 * cfg.m_w
        return build_architecture("full", full_shape=(g, g), spacing=cfg.spacing)
    return build_architecture(kind, spacing=cfg.spacing, m_l=cfg.m_l,
                              m_w=cfg.m_w, tau=cfg.tau)


def build_plan(cfg: Config) -> SubcarrierPlan:
    return SubcarrierPlan(cfg.n_subcarriers, cfg.f_c, cfg.bandwidth)


def reference_image(scene) -> np.ndarray:
    """Ground-truth magnitude in image orientation (rows = y, cols = x);
    planar scene grids are x-major, so transpose."""
    mag = np.abs(scene.reflectivity[..., 0]) * scene.occupancy
    return mag.T if scene.kind == "planar" else mag


def write_pgm(path, magnitude: np.ndarray):
    """8-bit binary portable graymap, max-normalized."""
    m = np.asarray(magnitude, dtype=float)
    peak = m.max()
    img = np.zeros(m.shape, dtype=np.uint8) if peak == 0 \
        else np.rint(255.0 * m / peak).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def write_magnitude_csv(path, magnitude: np.ndarray):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(magnitude, dtype=float):
            writer.writerow([f"{v:.9e}" for v in row])


def read_magnitude_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if np.isinf(v) else f"{v:.9e}"
    return str(v)


def _run_rma_cell(cfg, scene, architecture, plan, power, z, seed, core):
    d_all = measure_all_pairs(scene, architecture, plan, power, cfg.sigma2,
                              seed, core=core)
    image = rma.rma_pipeline(d_all, architecture, plan, z)
    ref = reference_image(scene)
    result = metrics.evaluate(ref, image.magnitude,
                              reference_pitch=scene.cell[0],
                              estimate_pitch=image.pitch)
    return result, image


def _run_sbl_cell(cfg, scene, channels, plan_tx, solver, power, seed):
    obs = simulate_cooperative(scene, channels, plan_tx, cfg.sigma2, seed)
    problem = sbl.build_problem(scene, channels, plan_tx, obs)
    if solver == "sbl":
        est = sbl.sbl_em(problem, max_iters=cfg.max_iters, eps=cfg.eps)
    elif solver == "ls":
        est = sbl.ls(problem)
    elif solver == "omp":
        est = sbl.omp(problem, cfg.k_atoms)
    elif solver in ("ista", "lasso"):
        est = sbl.ista(problem, lam=cfg.lam, iters=cfg.max_iters)
    else:
        raise ExperimentError(f"unknown solver {solver!r}")
    truth = np.zeros((np.prod(scene.shape), plan_tx.n_subcarriers), dtype=complex)
    truth[scene.occupied_flat(), :] = scene.occupied_reflectivity()
    a = np.abs(truth)
    b = np.abs(est.rho)
    a = a / a.max() if a.max() > 0 else a
    b = b / b.max() if b.max() > 0 else b
    result = {"mse": metrics.mse(a, b), "psnr": metrics.psnr(a, b),
              "psnr_refmax": metrics.psnr(a, b, use_reference_max=True),
              "ssim": metrics.ssim(a, b), "pcc": metrics.pcc(a, b)}
    return result, est


_FIELDS = ["solver", "power_dbm", "z", "seed", "mse", "psnr", "psnr_refmax",
           "ssim", "pcc", "error"]


def run(spec: ExperimentSpec) -> list:
    """Sweep (solver x power x depth x seed); failures are recorded per cell
    and the sweep continues. Returns the result rows it also writes to CSV."""
    cfg = spec.config
    os.makedirs(cfg.out_dir, exist_ok=True)
    plan = build_plan(cfg)
    rows = []
    voxel = cfg.scene_kind == "voxel-demo"
    for z in cfg.depths:
        scene = build_scene(cfg, z)
        if voxel:
            units = make_outdoor_units(scene.region, spacing=cfg.spacing)
            visibility = compute_visibility(scene, units, points="all")
            channels = {}
            start = 0
            for u in units:
                bits = visibility.bits[start:start + u.n_antennas]
                channels[u.id] = assemble_channels(
                    scene, (u,), plan, points="all", visibility=VisibilityMap(bits))
                start += u.n_antennas
            strengths = {u.id: projected_strength_map(scene, u, points="occupied")
                         for u in units}
            _write_strength_csv(os.path.join(cfg.out_dir, f"strength_z{z:g}.csv"),
                                scene, strengths)
            architecture = core = None
        else:
            architecture = build_array(cfg)
            channels = assemble_channels(scene, architecture.units, plan)
            refl = scene.occupied_reflectivity()
            if refl.shape[1] == 1 and plan.n > 1:
                refl = np.broadcast_to(refl, (refl.shape[0], plan.n))
            core = pair_core(channels, channels, refl, scene.measure)
        for solver in spec.solver_list:
            for power in cfg.powers:
                if voxel:
                    m_t = units[0].positions.shape[0]
                    builder = round_robin_plan if cfg.schedule_kind == "round-robin" \
                        else single_view_plan
                for seed in cfg.seeds:
                    row = {"solver": solver, "power_dbm": watts_to_dbm(power),
                           "z": z, "seed": seed, "error": ""}
                    try:
                        if solver == "rma":
                            if voxel:
                                raise ExperimentError("rma requires a planar scene")
                            result, image = _run_rma_cell(
                                cfg, scene, architecture, plan, power, z, seed, core)
                            mag = image.magnitude
                        else:
                            plan_tx = builder([u.id for u in units], cfg.slots,
                                              plan.n, m_t, power, seed)
                            result, est = _run_sbl_cell(
                                cfg, scene, channels, plan_tx, solver, power, seed)
                            mag = np.abs(est.rho[:, 0]).reshape(scene.shape).max(axis=2)
                        row.update(result)
                        stem = (f"image_{solver}_p{watts_to_dbm(power):g}dBm"
                                f"_z{z:g}_s{seed}")
                        write_pgm(os.path.join(cfg.out_dir, stem + ".pgm"), mag)
                        write_magnitude_csv(os.path.join(cfg.out_dir, stem + ".csv"), mag)
                    except Exception as exc:  # noqa: BLE001 - per-cell capture
                        row["error"] = f"{type(exc).__name__}: {exc}"
                    rows.append(row)
    _write_rows(os.path.join(cfg.out_dir, "metrics.csv"), rows)
    _write_summary(os.path.join(cfg.out_dir, "summary.csv"), rows)
    return rows


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_FIELDS)
        for row in rows:
            writer.writerow([_fmt(row.get(k)) for k in _FIELDS])


def _write_summary(path, rows):
    """Mean and standard deviation over seeds per (solver, power, z)."""
    groups = {}
    for row in rows:
        if row["error"]:
            continue
        groups.setdefault((row["solver"], row["power_dbm"], row["z"]), []).append(row)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "power_dbm", "z", "n_seeds",
                         "pcc_mean", "pcc_std", "ssim_mean", "ssim_std",
                         "mse_mean", "mse_std"])
        for key in sorted(groups):
            rs = groups[key]
            vals = {m: np.array([r[m] for r in rs]) for m in ("pcc", "ssim", "mse")}
            writer.writerow([_fmt(key[0]), _fmt(key[1]), _fmt(key[2]), len(rs),
                             _fmt(float(vals["pcc"].mean())), _fmt(float(vals["pcc"].std())),
                             _fmt(float(vals["ssim"].mean())), _fmt(float(vals["ssim"].std())),
                             _fmt(float(vals["mse"].mean())), _fmt(float(vals["mse"].std()))])


def _write_strength_csv(path, scene, strengths):
    """Per-RU projected channel strength per occupied cell (x, y, z, value)."""
    centers = scene.occupied_centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"] + [f"ru{uid}" for uid in sorted(strengths)])
        for i, c in enumerate(centers):
            writer.writerow([f"{c[0]:.6g}", f"{c[1]:.6g}", f"{c[2]:.6g}"]
                            + [f"{strengths[uid][i]:.9e}" for uid in sorted(strengths)])
