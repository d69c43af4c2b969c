"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

The jitted path is the default. Set the environment variable
``RADIOIMG_NO_NUMBA=1`` before import to force the numpy fallbacks
(useful for debugging and for the benchmark in benchmarks/).
Both paths produce identical results.
"""

import os

import numpy as np

_EPS = 1e-9

USE_NUMBA = os.environ.get("RADIOIMG_NO_NUMBA", "0").lower() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if not USE_NUMBA:  # pragma: no cover - exercised via env flag in the benchmark
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# visibility: open-segment vs axis-aligned box tests
# ---------------------------------------------------------------------------

@njit(cache=True)
def _segment_blocked_jit(origins, targets, target_box, boxes_min, boxes_max, out):
    m_ant = origins.shape[0]
    n_tgt = targets.shape[0]
    n_box = boxes_min.shape[0]
    for i in range(m_ant):
        ox, oy, oz = origins[i, 0], origins[i, 1], origins[i, 2]
        for j in range(n_tgt):
            dx = targets[j, 0] - ox
            dy = targets[j, 1] - oy
            dz = targets[j, 2] - oz
            blocked = False
            for b in range(n_box):
                if b == target_box[j]:
                    continue
                t_enter = 0.0
                t_exit = 1.0
                ok = True
                for a in range(3):
                    if a == 0:
                        o, d = ox, dx
                    elif a == 1:
                        o, d = oy, dy
                    else:
                        o, d = oz, dz
                    lo = boxes_min[b, a]
                    hi = boxes_max[b, a]
                    if abs(d) < 1e-300:
                        if o <= lo or o >= hi:
                            ok = False
                            break
                    else:
                        t1 = (lo - o) / d
                        t2 = (hi - o) / d
                        if t1 > t2:
                            t1, t2 = t2, t1
                        if t1 > t_enter:
                            t_enter = t1
                        if t2 < t_exit:
                            t_exit = t2
                        if t_enter >= t_exit:
                            ok = False
                            break
                if ok and t_exit - t_enter > 1e-12 and t_exit > _EPS and t_enter < 1.0 - _EPS:
                    blocked = True
                    break
            out[i, j] = 1 if blocked else 0
    return out


def _segment_blocked_numpy(origins, targets, target_box, boxes_min, boxes_max, out):
    n_box = boxes_min.shape[0]
    box_idx = np.arange(n_box)
    for i in range(origins.shape[0]):
        o = origins[i]
        d = targets - o  # (P, 3)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (boxes_min[None, :, :] - o) / d[:, None, :]
            t2 = (boxes_max[None, :, :] - o) / d[:, None, :]
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        par = np.abs(d)[:, None, :] < 1e-300  # (P, K, 3) axis parallel to slab
        inside = (o > boxes_min[None, :, :]) & (o < boxes_max[None, :, :])
        lo = np.where(par, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(par, np.where(inside, np.inf, -np.inf), hi)
        t_enter = np.maximum(lo.max(axis=2), 0.0)
        t_exit = np.minimum(hi.min(axis=2), 1.0)
        hit = (t_exit - t_enter > 1e-12) & (t_exit > _EPS) & (t_enter < 1.0 - _EPS)
        hit[box_idx[None, :] == target_box[:, None]] = False
        out[i] = hit.any(axis=1)
    return out


def segment_blocked(origins, targets, target_box, boxes_min, boxes_max):
    """Blocked[i, j] = 1 iff the open segment origin_i -> target_j crosses
    the interior of any box other than the target's own box.

    Grazing contact with a box face does not block.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    target_box = np.ascontiguousarray(target_box, dtype=np.int64)
    out = np.zeros((origins.shape[0], targets.shape[0]), dtype=np.uint8)
    if boxes_min.shape[0] == 0:
        return out
    boxes_min = np.ascontiguousarray(boxes_min, dtype=np.float64)
    boxes_max = np.ascontiguousarray(boxes_max, dtype=np.float64)
    if USE_NUMBA:
        return _segment_blocked_jit(origins, targets, target_box, boxes_min, boxes_max, out)
    return _segment_blocked_numpy(origins, targets, target_box, boxes_min, boxes_max, out)


# ---------------------------------------------------------------------------
# geometric channel factors: range and projection cosines
# ---------------------------------------------------------------------------

@njit(cache=True)
def _geometry_factors_jit(ant_pos, ant_norm, points, face_normals, rng, cos_a, cos_p):
    m_ant = ant_pos.shape[0]
    n_pt = points.shape[0]
    n_face = face_normals.shape[1]
    for i in range(m_ant):
        for j in range(n_pt):
            dx = points[j, 0] - ant_pos[i, 0]
            dy = points[j, 1] - ant_pos[i, 1]
            dz = points[j, 2] - ant_pos[i, 2]
            r = np.sqrt(dx * dx + dy * dy + dz * dz)
            rng[i, j] = r
            ca = (dx * ant_norm[i, 0] + dy * ant_norm[i, 1] + dz * ant_norm[i, 2]) / r
            cos_a[i, j] = ca if ca > 0.0 else 0.0
            best = 0.0
            for f in range(n_face):
                cp = -(dx * face_normals[j, f, 0] + dy * face_normals[j, f, 1]
                       + dz * face_normals[j, f, 2]) / r
                if cp > best:
                    best = cp
            cos_p[i, j] = best


def _geometry_factors_numpy(ant_pos, ant_norm, points, face_normals, rng, cos_a, cos_p):
    d = points[None, :, :] - ant_pos[:, None, :]  # (M, P, 3)
    r = np.sqrt((d * d).sum(axis=2))
    rng[:] = r
    cos_a[:] = np.maximum((d * ant_norm[:, None, :]).sum(axis=2) / r, 0.0)
    # (M, P, F): projection of -d onto each face normal
    proj = -np.einsum("mpa,pfa->mpf", d, face_normals) / r[:, :, None]
    cos_p[:] = np.maximum(proj.max(axis=2), 0.0)


def geometry_factors(ant_pos, ant_norm, points, face_normals):
    """Per (antenna, point): range, clamped array-projection cosine, and the
    best (max over faces) clamped point-projection cosine."""
    ant_pos = np.ascontiguousarray(ant_pos, dtype=np.float64)
    ant_norm = np.ascontiguousarray(ant_norm, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    face_normals = np.ascontiguousarray(face_normals, dtype=np.float64)
    m, p = ant_pos.shape[0], points.shape[0]
    rng = np.empty((m, p))
    cos_a = np.empty((m, p))
    cos_p = np.empty((m, p))
    if USE_NUMBA:
        _geometry_factors_jit(ant_pos, ant_norm, points, face_normals, rng, cos_a, cos_p)
    else:
        _geometry_factors_numpy(ant_pos, ant_norm, points, face_normals, rng, cos_a, cos_p)
    return rng, cos_a, cos_p


# ---------------------------------------------------------------------------
# wavenumber fusion: accumulate 4D spectrum onto the summed 2D grid
# ---------------------------------------------------------------------------

@njit(cache=True)
def _stolt_accumulate_jit(s4, out):
    a, b, c, d = s4.shape
    for i in range(a):
        for j in range(b):
            for k in range(c):
                for l in range(d):
                    out[i + k, j + l] += s4[i, j, k, l]
    return out


def _stolt_accumulate_numpy(s4, out):
    a, b, c, d = s4.shape
    for i in range(a):
        for j in range(b):
            out[i:i + c, j:j + d] += s4[i, j]
    return out


def stolt_accumulate(s4):
    """out[a, b] = sum over i+k=a, j+l=b of s4[i, j, k, l].

    Axes of s4 are (tx_x, tx_y, rx_x, rx_y) on identical monotone k-grids,
    so index sums map to nodes of the doubled-extent grid.
    """
    a, b, c, d = s4.shape
    out = np.zeros((a + c - 1, b + d - 1), dtype=np.complex128)
    s4 = np.ascontiguousarray(s4, dtype=np.complex128)
    if USE_NUMBA:
        return _stolt_accumulate_jit(s4, out)
    return _stolt_accumulate_numpy(s4, out)


# ---------------------------------------------------------------------------
# monostatic (co-located transceiver) echo accumulation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _monostatic_sum_jit(weight, rng, refl, wavenumbers, out):
    g, p = weight.shape
    n = wavenumbers.shape[0]
    for i in range(g):
        for j in range(p):
            w = weight[i, j]
            if w == 0.0:
                continue
            r = rng[i, j]
            for m in range(n):
                ph = -2.0 * wavenumbers[m] * r
                out[i, m] += w * refl[j, m] * (np.cos(ph) + 1j * np.sin(ph))
    return out


def _monostatic_sum_numpy(weight, rng, refl, wavenumbers, out):
    g = weight.shape[0]
    chunk = max(1, 4_000_000 // max(1, rng.shape[1]))
    for lo in range(0, g, chunk):
        hi = min(g, lo + chunk)
        ph = np.exp(-2j * wavenumbers[None, None, :] * rng[lo:hi, :, None])
        out[lo:hi] = np.einsum("gp,gpn,pn->gn", weight[lo:hi], ph, refl)
    return out


def monostatic_sum(weight, rng, refl, wavenumbers):
    """Round-trip echo sum: out[g, n] = sum_p weight[g,p] * refl[p,n] * e^{-2j k_n r}."""
    weight = np.ascontiguousarray(weight, dtype=np.float64)
    rng = np.ascontiguousarray(rng, dtype=np.float64)
    refl = np.ascontiguousarray(refl, dtype=np.complex128)
    wavenumbers = np.ascontiguousarray(wavenumbers, dtype=np.float64)
    out = np.zeros((weight.shape[0], wavenumbers.shape[0]), dtype=np.complex128)
    if USE_NUMBA:
        return _monostatic_sum_jit(weight, rng, refl, wavenumbers, out)
    return _monostatic_sum_numpy(weight, rng, refl, wavenumbers, out)
