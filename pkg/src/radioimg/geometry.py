"""Array architectures, scenes, and derived imaging bounds.

Coordinate convention: imaging arrays live in the z=0 plane with their
normals along +z; grid columns run along x, rows along y. Targets sit at
z > 0 with surface normals facing the arrays. Outdoor rooftop units are
placed explicitly and may face any direction.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

C_LIGHT = 299_792_458.0


class GeometryError(ValueError):
    """Invalid or self-conflicting array/scene construction."""


class ArchitectureKind(Enum):
    FULL = "full"
    BOUNDARY = "boundary"
    DISTRIBUTED_BOUNDARY = "distributed-boundary"
    SAR_VIRTUAL = "sar-virtual"


@dataclass(frozen=True)
class RadioUnit:
    """One planar antenna panel: positions are row-major over a rows x cols grid."""

    id: int
    positions: np.ndarray  # (rows*cols, 3) meters
    normal: np.ndarray  # unit 3-vector
    rows: int
    cols: int
    spacing: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        nrm = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "normal", nrm)
        if abs(np.linalg.norm(nrm) - 1.0) > 1e-12:
            raise GeometryError(f"unit {self.id}: normal is not unit length")
        if not np.all(np.isfinite(pos)):
            raise GeometryError(f"unit {self.id}: non-finite antenna position")
        if pos.shape != (self.rows * self.cols, 3):
            raise GeometryError(f"unit {self.id}: positions do not match rows*cols")
        # planarity: offsets from the first antenna are orthogonal to the normal
        if pos.shape[0] > 1:
            off = pos - pos[0]
            if np.max(np.abs(off @ nrm)) > 1e-9 * max(1.0, np.max(np.abs(off))):
                raise GeometryError(f"unit {self.id}: antennas are not coplanar")

    @property
    def n_antennas(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ArrayArchitecture:
    kind: ArchitectureKind
    grid_shape: tuple  # (rows, cols) of the enclosing virtual full grid
    spacing: float
    units: tuple  # tuple[RadioUnit]
    virtual_index: np.ndarray  # (M, 2) int: (row, col) per antenna, concatenated

    def __post_init__(self):
        vi = np.asarray(self.virtual_index, dtype=np.int64)
        object.__setattr__(self, "virtual_index", vi)
        keys = vi[:, 0] * self.grid_shape[1] + vi[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise GeometryError("antennas claim the same virtual-grid cell")

    @property
    def positions(self) -> np.ndarray:
        return np.concatenate([u.positions for u in self.units], axis=0)

    @property
    def antenna_normals(self) -> np.ndarray:
        return np.concatenate(
            [np.repeat(u.normal[None, :], u.n_antennas, axis=0) for u in self.units], axis=0
        )

    @property
    def n_antennas(self) -> int:
        return sum(u.n_antennas for u in self.units)

    @property
    def aperture(self) -> tuple:
        """(L_x, L_y) of the enclosing grid in meters."""
        return ((self.grid_shape[1] - 1) * self.spacing, (self.grid_shape[0] - 1) * self.spacing)

    def unit_slices(self):
        """Index slice into the concatenated antenna axis for each unit."""
        out = []
        start = 0
        for u in self.units:
            out.append(slice(start, start + u.n_antennas))
            start += u.n_antennas
        return out

    def grid_xy(self):
        """Physical (x, y) of every virtual cell; columns -> x, rows -> y."""
        rows, cols = self.grid_shape
        x = (np.arange(cols) - (cols - 1) / 2.0) * self.spacing
        y = (np.arange(rows) - (rows - 1) / 2.0) * self.spacing
        return x, y


def _cell_positions(rows_idx, cols_idx, grid_shape, spacing):
    gr, gc = grid_shape
    x = (cols_idx - (gc - 1) / 2.0) * spacing
    y = (rows_idx - (gr - 1) / 2.0) * spacing
    return np.stack([x, y, np.zeros_like(x)], axis=-1)


def _make_unit(uid, row0, col0, rows, cols, grid_shape, spacing):
    rr, cc = np.meshgrid(np.arange(rows) + row0, np.arange(cols) + col0, indexing="ij")
    rr = rr.ravel()
    cc = cc.ravel()
    pos = _cell_positions(rr.astype(float), cc.astype(float), grid_shape, spacing)
    unit = RadioUnit(id=uid, positions=pos, normal=np.array([0.0, 0.0, 1.0]),
                     rows=rows, cols=cols, spacing=spacing)
    return unit, np.stack([rr, cc], axis=1)


def build_architecture(kind, full_shape=None, spacing=None, m_l=None, m_w=None, tau=None):
    """Construct one of the four array architectures on a shared virtual grid.

    Boundary kinds lay four m_l x m_w strips along the edges of an
    (m_l + 2 m_w) square grid, offset by m_w so that the corner blocks stay
    empty and no cell is claimed twice. The enclosing aperture therefore
    equals the full array built on the same grid.
    """
    if isinstance(kind, str):
        kind = ArchitectureKind(kind)
    if spacing is None or spacing <= 0:
        raise GeometryError("spacing must be positive")

    if kind in (ArchitectureKind.FULL, ArchitectureKind.SAR_VIRTUAL):
        if full_shape is None:
            raise GeometryError("full_shape required for full/sar architectures")
        rows, cols = int(full_shape[0]), int(full_shape[1])
        if rows <= 0 or cols <= 0:
            raise GeometryError("full_shape must be positive")
        unit, vi = _make_unit(0, 0, 0, rows, cols, (rows, cols), spacing)
        return ArrayArchitecture(kind, (rows, cols), spacing, (unit,), vi)

    if m_l is None or m_w is None or m_l <= 0 or m_w <= 0:
        raise GeometryError("boundary kinds need positive m_l and m_w")
    g = m_l + 2 * m_w
    if full_shape is not None and tuple(full_shape) != (g, g):
        raise GeometryError(
            f"full_shape {tuple(full_shape)} inconsistent with boundary grid {(g, g)}")
    if 2 * m_w >= g:
        raise GeometryError("strip width too large for the enclosing grid")
    grid_shape = (g, g)

    # (row0, col0, rows, cols, long-axis is 'cols' for horizontal strips)
    strips = [
        (0, m_w, m_w, m_l, True),           # bottom edge
        (g - m_w, m_w, m_w, m_l, True),     # top edge
        (m_w, 0, m_l, m_w, False),          # left edge
        (m_w, g - m_w, m_l, m_w, False),    # right edge
    ]

    units = []
    vis = []
    uid = 0
    for row0, col0, rows, cols, horizontal in strips:
        if kind is ArchitectureKind.BOUNDARY:
            segs = [(row0, col0, rows, cols)]
        else:
            if tau is None or not (0.0 < tau < 1.0):
                raise GeometryError("distributed-boundary needs tau in (0, 1)")
            removed = int(tau * m_l)
            keep = m_l - removed
            head = keep // 2
            tail = keep - head
            if head <= 0 or tail <= 0:
                raise GeometryError("tau removes the whole strip")
            if horizontal:
                segs = [(row0, col0, rows, head),
                        (row0, col0 + head + removed, rows, tail)]
            else:
                segs = [(row0, col0, head, cols),
                        (row0 + head + removed, col0, tail, cols)]
        for r0, c0, rr, cc in segs:
            unit, vi = _make_unit(uid, r0, c0, rr, cc, grid_shape, spacing)
            units.append(unit)
            vis.append(vi)
            uid += 1

    return ArrayArchitecture(kind, grid_shape, spacing, tuple(units),
                             np.concatenate(vis, axis=0))


def resolution_bound(architecture, f_c, z):
    """Cross-range resolution (dx, dy) at distance z when the same
    architecture transmits and receives."""
    if z <= 0:
        raise GeometryError("z must be positive")
    lx, ly = architecture.aperture
    if lx <= 0 or ly <= 0:
        raise GeometryError("architecture has zero aperture")
    dx = C_LIGHT * z / (f_c * (lx + lx))
    dy = C_LIGHT * z / (f_c * (ly + ly))
    return dx, dy


def aliasing_bound(aperture_l, target_aperture_d, z, lambda_min):
    """Largest antenna spacing that still satisfies the spatial Nyquist
    criterion for a target of aperture D at distance z."""
    if min(aperture_l, target_aperture_d, z, lambda_min) <= 0:
        raise GeometryError("all arguments must be positive")
    s = aperture_l + target_aperture_d
    return lambda_min * np.sqrt(s * s / 4.0 + z * z) / s


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------

_VOXEL_FACE_NORMALS = np.array([
    [1.0, 0, 0], [-1.0, 0, 0],
    [0, 1.0, 0], [0, -1.0, 0],
    [0, 0, 1.0], [0, 0, -1.0],
])


@dataclass(frozen=True)
class Scene:
    """Occupancy + complex reflectivity on a uniform cell grid.

    Planar scenes are a Dx x Dy pixel sheet at fixed depth; voxel scenes
    fill an axis-aligned box. Reflectivity carries a trailing subcarrier
    axis and is zero wherever occupancy is false.
    """

    kind: str  # "planar" | "voxel"
    region_min: np.ndarray
    region_max: np.ndarray
    shape: tuple
    cell: np.ndarray  # cell sides (3,); planar z side is 0
    occupancy: np.ndarray  # bool, shape == self.shape
    reflectivity: np.ndarray  # complex, shape + (N,)
    normals: np.ndarray = field(default_factory=lambda: _VOXEL_FACE_NORMALS.copy())

    def __post_init__(self):
        for name in ("region_min", "region_max", "cell"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        occ = np.asarray(self.occupancy, dtype=bool)
        refl = np.asarray(self.reflectivity, dtype=complex)
        if refl.shape[:-1] != occ.shape:
            raise GeometryError("reflectivity grid does not match occupancy grid")
        if np.any(np.abs(refl[~occ]) > 0):
            raise GeometryError("reflectivity must vanish on unoccupied cells")
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "reflectivity", refl)
        nrm = np.atleast_2d(np.asarray(self.normals, dtype=float))
        if np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > 1e-12:
            raise GeometryError("scene normals must be unit vectors")
        object.__setattr__(self, "normals", nrm)

    @property
    def region(self) -> tuple:
        return self.region_min, self.region_max

    @property
    def n_subcarriers(self) -> int:
        return self.reflectivity.shape[-1]

    @property
    def measure(self) -> float:
        """Discretization measure: 1 for planar pixels, voxel volume otherwise."""
        if self.kind == "planar":
            return 1.0
        return float(np.prod(self.cell))

    def cell_centers(self) -> np.ndarray:
        """Centers of every grid cell, flattened in C order, (Qtot, 3)."""
        axes = [self.region_min[a] + (np.arange(self.shape[a]) + 0.5) * self.cell[a]
                if self.cell[a] > 0 else np.array([self.region_min[a]])
                for a in range(len(self.shape))]
        if self.kind == "planar":
            x, y = axes[0], axes[1]
            xs, ys = np.meshgrid(x, y, indexing="ij")
            z = 0.5 * (self.region_min[2] + self.region_max[2])
            return np.stack([xs.ravel(), ys.ravel(), np.full(xs.size, z)], axis=1)
        xs, ys, zs = np.meshgrid(axes[0], axes[1], axes[2], indexing="ij")
        return np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)

    def occupied_flat(self) -> np.ndarray:
        return np.flatnonzero(self.occupancy.ravel())

    def occupied_centers(self) -> np.ndarray:
        return self.cell_centers()[self.occupied_flat()]

    def occupied_reflectivity(self) -> np.ndarray:
        """(P, N) reflectivity rows for the occupied cells."""
        flat = self.reflectivity.reshape(-1, self.n_subcarriers)
        return flat[self.occupied_flat()]

    def occupied_boxes(self):
        """(K, 3) min and max corners of the occupied cells."""
        centers = self.occupied_centers()
        half = self.cell / 2.0
        return centers - half, centers + half

    def with_reflectivity(self, refl) -> "Scene":
        return replace(self, reflectivity=np.asarray(refl, dtype=complex))


def _planar_scene(occupancy, pixel_size, depth, reflectivity=None):
    dx, dy = occupancy.shape
    half = np.array([dx * pixel_size / 2.0, dy * pixel_size / 2.0, 0.0])
    center = np.array([0.0, 0.0, depth])
    if reflectivity is None:
        reflectivity = occupancy.astype(complex)[..., None]
    return Scene(
        kind="planar",
        region_min=center - half,
        region_max=center + half,
        shape=(dx, dy),
        cell=np.array([pixel_size, pixel_size, 0.0]),
        occupancy=occupancy,
        reflectivity=reflectivity,
        normals=np.array([[0.0, 0.0, -1.0]]),  # facing the z=0 array plane
    )


def make_siemens_star(diameter, pixel_size, spokes=8, depth=10.0):
    """Binary Siemens star test pattern with `spokes` occupied sectors."""
    if pixel_size > diameter:
        raise GeometryError("pixel_size larger than the pattern diameter")
    if spokes < 1:
        raise GeometryError("spokes must be >= 1")
    d = int(round(diameter / pixel_size))
    c = (np.arange(d) - (d - 1) / 2.0) * pixel_size
    xs, ys = np.meshgrid(c, c, indexing="ij")
    rad = np.hypot(xs, ys)
    ang = np.mod(np.arctan2(ys, xs), 2 * np.pi)
    sector = np.floor(ang / (np.pi / spokes)).astype(int)
    occ = (rad <= diameter / 2.0) & (sector % 2 == 0)
    return _planar_scene(occ, pixel_size, depth)


def make_hollow_rectangle(width, height, pixel_size, depth=10.0, frame_fraction=0.1):
    """Rectangular frame target: occupied border, hollow interior."""
    if pixel_size > min(width, height):
        raise GeometryError("pixel_size larger than the rectangle")
    dx = int(round(width / pixel_size))
    dy = int(round(height / pixel_size))
    t = max(1, int(round(frame_fraction * min(dx, dy))))
    occ = np.zeros((dx, dy), dtype=bool)
    occ[:t, :] = occ[-t:, :] = True
    occ[:, :t] = occ[:, -t:] = True
    return _planar_scene(occ, pixel_size, depth)


def make_point_target(extent, pixel_size, depth=10.0, at=(0.0, 0.0)):
    """Single occupied pixel, nearest to `at`, inside an extent x extent sheet."""
    d = int(round(extent / pixel_size))
    occ = np.zeros((d, d), dtype=bool)
    ix = int(round(at[0] / pixel_size + (d - 1) / 2.0))
    iy = int(round(at[1] / pixel_size + (d - 1) / 2.0))
    if not (0 <= ix < d and 0 <= iy < d):
        raise GeometryError("point lies outside the sheet extent")
    occ[ix, iy] = True
    return _planar_scene(occ, pixel_size, depth)


def make_voxel_scene(region, shape, occupancy, reflectivity=None):
    region_min = np.asarray(region[0], dtype=float)
    region_max = np.asarray(region[1], dtype=float)
    shape = tuple(int(s) for s in shape)
    cell = (region_max - region_min) / np.asarray(shape, dtype=float)
    if np.any(cell <= 0):
        raise GeometryError("voxel region must have positive extent")
    occ = np.asarray(occupancy, dtype=bool)
    if occ.shape != shape:
        raise GeometryError("occupancy does not match grid shape")
    if reflectivity is None:
        reflectivity = occ.astype(complex)[..., None]
    return Scene(
        kind="voxel",
        region_min=region_min,
        region_max=region_max,
        shape=shape,
        cell=cell,
        occupancy=occ,
        reflectivity=reflectivity,
        normals=_VOXEL_FACE_NORMALS.copy(),
    )


def make_voxel_demo(region=((0, 0, 0), (10, 10, 10)), shape=(10, 10, 10)):
    """Deterministic demo environment: an L-shaped building, a detached
    column, and a low wall that occludes part of the scene."""
    qx, qy, qz = (int(s) for s in shape)
    occ = np.zeros((qx, qy, qz), dtype=bool)

    def block(x0, x1, y0, y1, z0, z1):
        occ[int(x0 * qx):max(int(x0 * qx) + 1, int(x1 * qx)),
            int(y0 * qy):max(int(y0 * qy) + 1, int(y1 * qy)),
            int(z0 * qz):max(int(z0 * qz) + 1, int(z1 * qz))] = True

    block(0.1, 0.4, 0.1, 0.4, 0.0, 0.6)   # main building
    block(0.1, 0.2, 0.4, 0.7, 0.0, 0.6)   # L extension
    block(0.6, 0.8, 0.5, 0.7, 0.0, 0.3)   # column
    block(0.3, 0.9, 0.75, 0.85, 0.0, 0.2)  # wall
    return make_voxel_scene(region, shape, occ)


def make_outdoor_units(region, panel_shape=(8, 8), spacing=None, height=10.0,
                       downtilt_deg=45.0):
    """Four rooftop panels at the x-y corners of `region`, tilted down
    toward the region center."""
    if spacing is None or spacing <= 0:
        raise GeometryError("spacing must be positive")
    region_min = np.asarray(region[0], dtype=float)
    region_max = np.asarray(region[1], dtype=float)
    cx, cy = (region_min[:2] + region_max[:2]) / 2.0
    corners = [
        (region_min[0], region_min[1]),
        (region_max[0], region_min[1]),
        (region_min[0], region_max[1]),
        (region_max[0], region_max[1]),
    ]
    tilt = np.radians(downtilt_deg)
    rows, cols = panel_shape
    units = []
    for uid, (px, py) in enumerate(corners):
        h = np.array([cx - px, cy - py])
        h /= np.linalg.norm(h)
        normal = np.array([h[0] * np.cos(tilt), h[1] * np.cos(tilt), -np.sin(tilt)])
        u = np.array([-h[1], h[0], 0.0])  # horizontal, in the panel plane
        v = np.cross(normal, u)
        center = np.array([px, py, height])
        rr = (np.arange(rows) - (rows - 1) / 2.0)[:, None] * spacing
        cc = (np.arange(cols) - (cols - 1) / 2.0)[None, :] * spacing
        pos = center[None, None, :] + rr[..., None] * v[None, None, :] + cc[..., None] * u[None, None, :]
        units.append(RadioUnit(id=uid, positions=pos.reshape(-1, 3), normal=normal,
                               rows=rows, cols=cols, spacing=spacing))
    return units


# ---------------------------------------------------------------------------
# subcarriers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubcarrierPlan:
    """OFDM frequency plan: N subcarriers centered on f_c across bandwidth B."""

    n: int
    f_c: float
    bandwidth: float

    def __post_init__(self):
        if self.n < 1:
            raise GeometryError("need at least one subcarrier")
        if self.f_c <= 0 or self.bandwidth < 0:
            raise GeometryError("f_c must be positive and bandwidth non-negative")
        f = self.frequencies
        if self.n > 1 and np.any(np.diff(f) <= 0):
            raise GeometryError("subcarrier frequencies must be strictly increasing")
        if np.any(f <= 0):
            raise GeometryError("subcarrier frequencies must stay positive")
        mid = 0.5 * (f[0] + f[-1])
        if abs(mid - self.f_c) > 1e-9 * self.f_c:
            raise GeometryError("frequency grid is not centered on f_c")

    @property
    def frequencies(self) -> np.ndarray:
        idx = np.arange(1, self.n + 1)
        return self.f_c + (self.bandwidth / self.n) * (idx - 1 - (self.n - 1) / 2.0)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.frequencies / C_LIGHT

    @property
    def lambda_min(self) -> float:
        return C_LIGHT / self.frequencies[-1]

    @property
    def center_index(self) -> int:
        return (self.n - 1) // 2
