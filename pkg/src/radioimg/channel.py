"""Non-isotropic near-field line-of-sight channels with binary visibility."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import Scene

SQRT_4PI = np.sqrt(4.0 * np.pi)


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class VisibilityMap:
    """bits[m, q] = 1 iff scene point q is in line of sight of antenna m."""

    bits: np.ndarray  # (M, P) uint8


@dataclass(frozen=True)
class ChannelTensor:
    """One-way channel gains (antenna, scene point, subcarrier) plus the
    retained factorization: gain = v * pathloss * sqrt(cos_array) *
    sqrt(cos_pixel) * e^{-j k_n r}."""

    gains: np.ndarray      # (M, P, N) complex
    visibility: np.ndarray  # (M, P) uint8
    pathloss: np.ndarray   # (M, P) = 1 / (sqrt(4 pi) r)
    cos_array: np.ndarray  # (M, P) clamped array-projection cosine
    cos_pixel: np.ndarray  # (M, P) clamped best point-projection cosine
    ranges: np.ndarray     # (M, P) meters
    wavenumbers: np.ndarray  # (N,)

    @property
    def n_antennas(self):
        return self.gains.shape[0]

    @property
    def n_points(self):
        return self.gains.shape[1]

    def roundtrip_weight(self) -> np.ndarray:
        """Monostatic amplitude factor v * cos_array * cos_pixel / (4 pi r^2)."""
        return (self.visibility * self.cos_array * self.cos_pixel
                / (4.0 * np.pi * self.ranges ** 2))


def _scene_points(scene: Scene, points: str):
    if points == "occupied":
        return scene.occupied_centers(), scene.occupied_flat()
    if points == "all":
        return scene.cell_centers(), None
    raise ChannelError(f"unknown points mode {points!r}")


def compute_visibility(scene: Scene, radio_units, points="occupied") -> VisibilityMap:
    """Open-segment occlusion test of every (antenna, scene point) pair
    against the scene's occupied cells.

    A point's own cell never blocks it; contact with a cell face boundary
    counts as visible. Planar scenes take the exact fast path: zero-thickness
    pixel boxes cannot intersect any open segment.
    """
    origins = np.concatenate([u.positions for u in radio_units], axis=0)
    centers, occ_flat = _scene_points(scene, points)
    if scene.kind == "planar":
        return VisibilityMap(np.ones((origins.shape[0], centers.shape[0]), dtype=np.uint8))
    bmin, bmax = scene.occupied_boxes()
    if points == "occupied":
        target_box = np.arange(centers.shape[0], dtype=np.int64)
    else:
        # map each grid cell to its own occupied-box index (-1 if empty)
        occ_flat = scene.occupied_flat()
        target_box = np.full(centers.shape[0], -1, dtype=np.int64)
        target_box[occ_flat] = np.arange(len(occ_flat))
    blocked = kernels.segment_blocked(origins, centers, target_box, bmin, bmax)
    return VisibilityMap((1 - blocked).astype(np.uint8))


def channel_element(antenna_pos, unit_normal, point, point_normals, k_n, visible=True):
    """Single complex one-way channel coefficient."""
    antenna_pos = np.asarray(antenna_pos, dtype=float)
    point = np.asarray(point, dtype=float)
    d = point - antenna_pos
    r = np.linalg.norm(d)
    if r == 0.0:
        raise ChannelError("antenna and scene point coincide")
    if not visible:
        return 0.0 + 0.0j
    cos_a = max(0.0, float(d @ np.asarray(unit_normal, dtype=float)) / r)
    nrm = np.atleast_2d(np.asarray(point_normals, dtype=float))
    cos_p = max(0.0, float(np.max(-(nrm @ d)) / r))
    amp = np.sqrt(cos_a) * np.sqrt(cos_p) / (SQRT_4PI * r)
    return amp * np.exp(-1j * k_n * r)


def assemble_channels(scene: Scene, radio_units, plan, points="occupied",
                      visibility=None) -> ChannelTensor:
    """Channel tensor for all antennas of `radio_units` against the scene's
    point set, one gain per subcarrier (beam squint retained)."""
    origins = np.concatenate([u.positions for u in radio_units], axis=0)
    normals = np.concatenate(
        [np.repeat(u.normal[None, :], u.n_antennas, axis=0) for u in radio_units], axis=0)
    centers, _ = _scene_points(scene, points)
    if visibility is None:
        visibility = compute_visibility(scene, radio_units, points=points)
    vis = visibility.bits
    if vis.shape != (origins.shape[0], centers.shape[0]):
        raise ChannelError("visibility map does not match antenna/point counts")

    face_normals = np.broadcast_to(
        scene.normals[None, :, :], (centers.shape[0],) + scene.normals.shape)
    rng, cos_a, cos_p = kernels.geometry_factors(origins, normals, centers, face_normals)
    if np.any(rng == 0.0):
        raise ChannelError("antenna coincides with a scene point")

    pathloss = 1.0 / (SQRT_4PI * rng)
    amp = vis * pathloss * np.sqrt(cos_a) * np.sqrt(cos_p)
    k = np.asarray(plan.wavenumbers, dtype=float)
    gains = amp[:, :, None] * np.exp(-1j * k[None, None, :] * rng[:, :, None])
    return ChannelTensor(gains=gains, visibility=vis.astype(np.uint8), pathloss=pathloss,
                         cos_array=cos_a, cos_pixel=cos_p, ranges=rng, wavenumbers=k)


def projected_strength_map(scene: Scene, radio_unit, points="all") -> np.ndarray:
    """sqrt(cos_array * cos_pixel) from a unit's central antenna to every
    scene cell, shaped like the scene grid (CSV export feeds on this)."""
    centers, _ = _scene_points(scene, points)
    mid = radio_unit.positions[radio_unit.n_antennas // 2][None, :]
    nrm = radio_unit.normal[None, :]
    face_normals = np.broadcast_to(
        scene.normals[None, :, :], (centers.shape[0],) + scene.normals.shape)
    _, cos_a, cos_p = kernels.geometry_factors(mid, nrm, centers, face_normals)
    strength = np.sqrt(cos_a[0] * cos_p[0])
    shape = scene.shape if points == "all" else (len(scene.occupied_flat()),)
    return strength.reshape(shape)
