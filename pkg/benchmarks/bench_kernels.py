"""Benchmark the compiled kernels against the pure-numpy fallbacks.

Runs itself twice: once as-is (numba JIT) and once in a subprocess with
RADIOIMG_NO_NUMBA=1, then prints a side-by-side table.

    python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time

import numpy as np

REPEATS = 3


def make_inputs():
    rng = np.random.default_rng(0)
    inputs = {}

    # segment_blocked: 256 antennas x 500 targets against 60 boxes
    g = np.stack(np.meshgrid(np.linspace(0, 9, 10), np.linspace(0, 9, 10),
                             np.linspace(0, 9, 5), indexing="ij"), axis=-1)
    centers = g.reshape(-1, 3)
    box_idx = rng.choice(len(centers), size=60, replace=False)
    inputs["segment_blocked"] = dict(
        origins=rng.uniform(0, 10, size=(256, 3)) + np.array([0, 0, 12.0]),
        targets=centers,
        target_box=np.where(np.isin(np.arange(len(centers)), box_idx),
                            np.searchsorted(np.sort(box_idx),
                                            np.arange(len(centers))),
                            -1).astype(np.int64),
        boxes_min=centers[np.sort(box_idx)] - 0.5,
        boxes_max=centers[np.sort(box_idx)] + 0.5,
    )

    # geometry_factors: 1024 antennas x 4096 points, 6 faces
    pts = rng.uniform(0, 10, size=(4096, 3))
    faces = rng.standard_normal((4096, 6, 3))
    faces /= np.linalg.norm(faces, axis=2, keepdims=True)
    inputs["geometry_factors"] = dict(
        ant_pos=rng.uniform(0, 10, size=(1024, 3)) + np.array([0, 0, 12.0]),
        ant_norm=np.tile(np.array([0.0, 0.0, -1.0]), (1024, 1)),
        points=pts,
        face_normals=faces,
    )

    # stolt_accumulate: 48^4 spectrum
    s4 = rng.standard_normal((48, 48, 48, 48)) \
        + 1j * rng.standard_normal((48, 48, 48, 48))
    inputs["stolt_accumulate"] = dict(s4=s4)

    # monostatic_sum: 1024 grid cells x 2048 points x 4 subcarriers
    inputs["monostatic_sum"] = dict(
        weight=rng.uniform(0, 1, size=(1024, 2048)),
        rng=rng.uniform(5, 20, size=(1024, 2048)),
        refl=rng.standard_normal((2048, 4)) + 1j * rng.standard_normal((2048, 4)),
        wavenumbers=np.linspace(200.0, 210.0, 4),
    )
    return inputs


def run_suite():
    from radioimg import kernels
    funcs = {
        "segment_blocked": kernels.segment_blocked,
        "geometry_factors": kernels.geometry_factors,
        "stolt_accumulate": kernels.stolt_accumulate,
        "monostatic_sum": kernels.monostatic_sum,
    }
    inputs = make_inputs()
    results = {}
    for name, fn in funcs.items():
        kw = inputs[name]
        fn(**kw)  # warm-up (and JIT compile when numba is on)
        best = min(_timed(fn, kw) for _ in range(REPEATS))
        results[name] = best
    return {"numba": kernels.USE_NUMBA, "timings": results}


def _timed(fn, kw):
    t0 = time.perf_counter()
    fn(**kw)
    return time.perf_counter() - t0


def main():
    here = run_suite()
    env = dict(os.environ, RADIOIMG_NO_NUMBA="1")
    out = subprocess.run([sys.executable, __file__, "--inner"], env=env,
                         capture_output=True, text=True, check=True)
    other = json.loads(out.stdout.strip().splitlines()[-1])
    assert here["numba"] and not other["numba"], \
        "expected the outer run to use numba and the inner run the fallback"
    print(f"{'kernel':<20} {'numba [ms]':>12} {'numpy [ms]':>12} {'speedup':>9}")
    for name, t in here["timings"].items():
        t2 = other["timings"][name]
        print(f"{name:<20} {t * 1e3:>12.2f} {t2 * 1e3:>12.2f} {t2 / t:>8.1f}x")


if __name__ == "__main__":
    if "--inner" in sys.argv:
        print(json.dumps(run_suite()))
    else:
        main()
