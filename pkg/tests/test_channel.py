"""Channel synthesis: per-element oracle, visibility, and factorization."""

import numpy as np
import pytest

from radioimg.channel import (
    SQRT_4PI,
    ChannelError,
    VisibilityMap,
    assemble_channels,
    channel_element,
    compute_visibility,
    projected_strength_map,
)
from radioimg.geometry import (
    SubcarrierPlan,
    build_architecture,
    make_outdoor_units,
    make_point_target,
    make_voxel_scene,
)


@pytest.fixture(scope="module")
def planar_setup():
    scene = make_point_target(0.2, 0.1, depth=5.0, at=(0.05, -0.05))
    arch = build_architecture("full", full_shape=(3, 3), spacing=0.06)
    plan = SubcarrierPlan(n=2, f_c=1e10, bandwidth=1e9)
    return scene, arch, plan


def test_channel_element_formula():
    ant = np.array([0.0, 0.0, 0.0])
    nrm = np.array([0.0, 0.0, 1.0])
    pt = np.array([1.0, 2.0, 10.0])
    faces = np.array([[0.0, 0.0, -1.0]])
    k = 200.0
    g = channel_element(ant, nrm, pt, faces, k)
    r = np.linalg.norm(pt - ant)
    cos_a = (pt - ant)[2] / r
    cos_p = cos_a  # face normal anti-parallel to z
    want = (1.0 / (SQRT_4PI * r)) * np.sqrt(cos_a) * np.sqrt(cos_p) * np.exp(-1j * k * r)
    assert g == pytest.approx(want, rel=1e-12)


def test_channel_element_invisible_is_zero():
    g = channel_element(np.zeros(3), np.array([0.0, 0.0, 1.0]),
                        np.array([0.0, 0.0, 5.0]),
                        np.array([[0.0, 0.0, -1.0]]), 200.0, visible=False)
    assert g == 0


def test_channel_element_rejects_coincident_points():
    with pytest.raises(ChannelError):
        channel_element(np.zeros(3), np.array([0.0, 0.0, 1.0]),
                        np.zeros(3), np.array([[0.0, 0.0, -1.0]]), 200.0)


def test_assemble_matches_per_element(planar_setup):
    scene, arch, plan = planar_setup
    ch = assemble_channels(scene, arch.units, plan)
    pos = arch.positions
    nrm = arch.antenna_normals
    pts = scene.occupied_centers()
    faces = scene.normals  # (F, 3) shared by all points
    for n, k in enumerate(plan.wavenumbers):
        for m in range(pos.shape[0]):
            for p in range(pts.shape[0]):
                want = channel_element(pos[m], nrm[m], pts[p], faces, k)
                assert ch.gains[m, p, n] == pytest.approx(want, rel=1e-12)


def test_gain_magnitude_factorization(planar_setup):
    scene, arch, plan = planar_setup
    ch = assemble_channels(scene, arch.units, plan)
    mag = (ch.visibility / (SQRT_4PI * ch.ranges)
           * np.sqrt(ch.cos_array * ch.cos_pixel))
    for n in range(ch.gains.shape[2]):
        np.testing.assert_allclose(np.abs(ch.gains[:, :, n]), mag, rtol=1e-12)


def test_roundtrip_weight(planar_setup):
    scene, arch, plan = planar_setup
    ch = assemble_channels(scene, arch.units, plan)
    want = ch.visibility * ch.cos_array * ch.cos_pixel / (4 * np.pi * ch.ranges ** 2)
    np.testing.assert_allclose(ch.roundtrip_weight(), want, rtol=1e-12)


def test_planar_scene_fully_visible(planar_setup):
    scene, arch, _ = planar_setup
    vis = compute_visibility(scene, arch.units)
    assert np.all(vis.bits == 1)


def test_voxel_occlusion_blocks_shadowed_voxels():
    # two stacked occupied voxels: the top one shadows the bottom one
    # from a unit looking straight down
    occ = np.zeros((1, 1, 2), dtype=bool)
    occ[0, 0, :] = True
    scene = make_voxel_scene(((0.0, 0.0, 0.0), (1.0, 1.0, 2.0)), (1, 1, 2), occ)
    from radioimg.geometry import RadioUnit
    unit = RadioUnit(id=0, positions=np.array([[0.5, 0.5, 10.0]]),
                     normal=np.array([0.0, 0.0, -1.0]), rows=1, cols=1, spacing=0.01)
    vis = compute_visibility(scene, [unit])
    # voxel centers sorted x-major: index 0 -> z=0.5 (low), 1 -> z=1.5 (high)
    assert vis.bits[0, 1] == 1  # top voxel visible
    assert vis.bits[0, 0] == 0  # bottom voxel shadowed


def test_voxel_side_view_not_blocked():
    occ = np.zeros((2, 1, 1), dtype=bool)
    occ[:, 0, 0] = True
    scene = make_voxel_scene(((0.0, 0.0, 0.0), (2.0, 1.0, 1.0)), (2, 1, 1), occ)
    from radioimg.geometry import RadioUnit
    unit = RadioUnit(id=0, positions=np.array([[0.5, 0.5, 10.0]]),
                     normal=np.array([0.0, 0.0, -1.0]), rows=1, cols=1, spacing=0.01)
    vis = compute_visibility(scene, [unit])
    # side-by-side voxels viewed from above: both visible
    assert np.all(vis.bits == 1)


def test_assemble_rejects_mismatched_visibility(planar_setup):
    scene, arch, plan = planar_setup
    bad = VisibilityMap(bits=np.ones((2, 3), dtype=np.uint8))
    with pytest.raises(ChannelError):
        assemble_channels(scene, arch.units, plan, visibility=bad)


def test_projected_strength_map_shape():
    scene = make_voxel_scene(((0, 0, 0), (1, 1, 1)), (4, 4, 4),
                             np.ones((4, 4, 4), dtype=bool))
    units = make_outdoor_units(((0, 0, 0), (1, 1, 1)), panel_shape=(2, 2),
                               spacing=0.015, height=10.0, downtilt_deg=45.0)
    strength = projected_strength_map(scene, units[0])
    assert strength.shape == scene.shape
    assert np.all(strength >= 0)
