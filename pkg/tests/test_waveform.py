"""OFDM simulation: precoders, schedules, noise statistics, serialization."""

import numpy as np
import pytest

from radioimg.channel import assemble_channels
from radioimg.geometry import (
    SubcarrierPlan,
    build_architecture,
    make_point_target,
    make_voxel_scene,
    make_outdoor_units,
)
from radioimg.serialization import (
    load_arrays,
    load_observations,
    save_arrays,
    save_observations,
)
from radioimg.waveform import (
    WaveformError,
    dbm_to_watts,
    dft_precoder,
    extract_pair_observation,
    measure_all_pairs,
    pair_core,
    round_robin_plan,
    scene_reflectivity,
    simulate_cooperative,
    simulate_monostatic,
    simulate_orthogonal,
    single_view_plan,
    watts_to_dbm,
)


def test_dbm_roundtrip():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert watts_to_dbm(dbm_to_watts(17.3)) == pytest.approx(17.3)


def test_dft_precoder_orthogonality_and_power():
    m_t, s, n, p = 4, 8, 3, 2.0
    x = dft_precoder(m_t, s, p, n)
    assert x.shape == (m_t, s)
    gram = x @ x.conj().T
    np.testing.assert_allclose(gram, (p * s / (n * m_t)) * np.eye(m_t), atol=1e-12)
    # per-slot power budget: each column has norm^2 = P/N
    np.testing.assert_allclose(np.sum(np.abs(x) ** 2, axis=0), p / n, rtol=1e-12)


def test_dft_precoder_validation():
    with pytest.raises(WaveformError):
        dft_precoder(4, 3, 1.0, 1)  # fewer slots than streams
    with pytest.raises(WaveformError):
        dft_precoder(4, 4, 0.0, 1)
    with pytest.raises(WaveformError):
        dft_precoder(4, 4, 1.0, 0)


def test_round_robin_plan_rotates_receiver():
    plan = round_robin_plan([0, 1, 2, 3], slots=4, n_subcarriers=2,
                            m_t=4, power=1.0, seed=0)
    rx_seen = set()
    for tx_ids, rx_ids in plan.schedule:
        assert len(rx_ids) == 1
        assert set(tx_ids).isdisjoint(rx_ids)
        assert set(tx_ids) | set(rx_ids) == {0, 1, 2, 3}
        rx_seen |= set(rx_ids)
    assert rx_seen == {0, 1, 2, 3}


def test_single_view_plan_fixes_receiver():
    plan = single_view_plan([0, 1, 2, 3], slots=4, n_subcarriers=2,
                            m_t=4, power=1.0, seed=0, rx_id=2)
    for tx_ids, rx_ids in plan.schedule:
        assert rx_ids == (2,)
        assert set(tx_ids) == {0, 1, 3}


def test_transmit_plan_validation():
    from radioimg.waveform import TransmitPlan
    pilots = {0: np.zeros((2, 1, 4), dtype=complex),
              1: np.zeros((2, 1, 4), dtype=complex)}
    with pytest.raises(WaveformError):
        TransmitPlan(3, 1.0, 1, (((0,), (1,)), ((1,), (0,))), pilots)  # bad length
    with pytest.raises(WaveformError):
        TransmitPlan(2, 1.0, 1, (((0, 1), (1,)), ((1,), (0,))), pilots)  # overlap
    with pytest.raises(WaveformError):
        TransmitPlan(2, 1.0, 1, (((0,), ()), ((1,), (0,))), pilots)  # no receiver


@pytest.fixture(scope="module")
def planar_sim():
    scene = make_point_target(0.2, 0.1, depth=5.0, at=(0.0, 0.0))
    rng = np.random.default_rng(42)
    refl = np.zeros(scene.shape[:2] + (2,), dtype=complex)
    occ = scene.occupancy
    refl[occ] = rng.normal(size=(occ.sum(), 2)) + 1j * rng.normal(size=(occ.sum(), 2))
    scene = scene.with_reflectivity(refl)
    arch = build_architecture("full", full_shape=(3, 3), spacing=0.06)
    plan = SubcarrierPlan(n=2, f_c=1e10, bandwidth=1e9)
    channels = assemble_channels(scene, arch.units, plan)
    return scene, arch, plan, channels


def test_orthogonal_noiseless_matches_model(planar_sim):
    scene, arch, plan, channels = planar_sim
    ch = {0: channels}
    m = arch.n_antennas
    x = dft_precoder(m, m, 1.0, plan.n)
    obs = simulate_orthogonal(scene, ch, x, sigma2=0.0, seed=0,
                              tx_id=0, rx_ids=[0])
    refl = scene_reflectivity(scene, channels.gains.shape[1], plan.n)
    core = pair_core(channels, channels, refl, scene.measure)
    y = obs.matrix(0)  # (M_r, S, N)
    want = np.einsum("rtn,ts->rsn", core, x)
    np.testing.assert_allclose(y, want, rtol=1e-10, atol=1e-16)


def test_orthogonal_noise_statistics(planar_sim):
    scene, arch, plan, channels = planar_sim
    ch = {0: channels}
    m = arch.n_antennas
    x = dft_precoder(m, m, 1.0, plan.n)
    clean = simulate_orthogonal(scene, ch, x, 0.0, seed=1, tx_id=0,
                                rx_ids=[0]).matrix(0)
    sigma2 = 1e-6
    samples = []
    for seed in range(40):
        noisy = simulate_orthogonal(scene, ch, x, sigma2, seed=seed,
                                    tx_id=0, rx_ids=[0]).matrix(0)
        samples.append((noisy - clean).ravel())
    z = np.concatenate(samples)
    assert np.var(z) == pytest.approx(sigma2, rel=0.1)
    assert abs(np.mean(z)) < 5 * np.sqrt(sigma2 / len(z))


def test_simulation_deterministic_per_seed(planar_sim):
    scene, arch, plan, channels = planar_sim
    ch = {0: channels}
    m = arch.n_antennas
    x = dft_precoder(m, m, 1.0, plan.n)
    a = simulate_orthogonal(scene, ch, x, 1e-6, seed=7, tx_id=0, rx_ids=[0]).matrix(0)
    b = simulate_orthogonal(scene, ch, x, 1e-6, seed=7, tx_id=0, rx_ids=[0]).matrix(0)
    c = simulate_orthogonal(scene, ch, x, 1e-6, seed=8, tx_id=0, rx_ids=[0]).matrix(0)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_extract_pair_observation_inverts_precoding(planar_sim):
    scene, arch, plan, channels = planar_sim
    ch = {0: channels}
    m = arch.n_antennas
    p = 2.0
    x = dft_precoder(m, m, p, plan.n)
    obs = simulate_orthogonal(scene, ch, x, 0.0, seed=0, tx_id=0, rx_ids=[0])
    pair = extract_pair_observation(obs, x, tx_id=0, rx_id=0)
    refl = scene_reflectivity(scene, channels.gains.shape[1], plan.n)
    core = pair_core(channels, channels, refl, scene.measure)
    # D = C X X^H = (P S / (N M_t)) C with S = M_t
    np.testing.assert_allclose(pair.d, (p / plan.n) * core, rtol=1e-10, atol=1e-16)
    with pytest.raises(WaveformError):
        extract_pair_observation(obs, x[:, :3], tx_id=0, rx_id=0)


def test_measure_all_pairs_noiseless_matches_core(planar_sim):
    scene, arch, plan, channels = planar_sim
    refl = scene_reflectivity(scene, channels.gains.shape[1], plan.n)
    core = pair_core(channels, channels, refl, scene.measure)
    power = 1.0
    d = measure_all_pairs(scene, arch, plan, power=power, sigma2=0.0, seed=0,
                          core=core, channels=channels)
    m = arch.n_antennas
    assert d.shape == (m, m, plan.n)
    np.testing.assert_allclose(d, (power / plan.n) * core, rtol=1e-10, atol=1e-18)
    # recomputing the core internally gives the same answer
    d2 = measure_all_pairs(scene, arch, plan, power=power, sigma2=0.0, seed=0)
    np.testing.assert_allclose(d2, d, rtol=1e-12, atol=1e-18)


def test_scene_reflectivity_occupied_and_full_modes():
    scene = make_point_target(0.2, 0.1, depth=5.0, at=(0.0, 0.0))
    q_occ = int(scene.occupancy.sum())
    q_all = int(np.prod(scene.shape[:2]))
    r_occ = scene_reflectivity(scene, q_occ, 2)
    r_all = scene_reflectivity(scene, q_all, 2)
    assert r_occ.shape == (q_occ, 2)
    assert r_all.shape == (q_all, 2)
    assert r_occ.sum() == pytest.approx(r_all.sum())
    with pytest.raises(WaveformError):
        scene_reflectivity(scene, q_occ + 1, 2)


@pytest.fixture(scope="module")
def voxel_sim():
    occ = np.zeros((3, 3, 3), dtype=bool)
    occ[1, 1, 1] = True
    occ[0, 2, 1] = True
    scene = make_voxel_scene(((0, 0, 0), (1, 1, 1)), (3, 3, 3), occ)
    rng = np.random.default_rng(0)
    refl = np.zeros((3, 3, 3, 2), dtype=complex)
    refl[occ] = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    scene = scene.with_reflectivity(refl)
    units = make_outdoor_units(((0, 0, 0), (1, 1, 1)), panel_shape=(2, 2),
                               spacing=0.015, height=10.0, downtilt_deg=45.0)
    sub = SubcarrierPlan(n=2, f_c=1e10, bandwidth=4e6)
    channels = {u.id: assemble_channels(scene, [u], sub) for u in units}
    return scene, units, sub, channels


def test_cooperative_observations_match_model(voxel_sim):
    scene, units, sub, channels = voxel_sim
    plan = round_robin_plan([u.id for u in units], slots=4, n_subcarriers=sub.n,
                            m_t=4, power=1.0, seed=3)
    obs = simulate_cooperative(scene, channels, plan, sigma2=0.0, seed=5)
    refl = scene_reflectivity(scene, channels[0].gains.shape[1], sub.n)
    for rx, slot, y in obs.entries:
        tx_ids, rx_ids = plan.schedule[slot]
        assert rx in rx_ids
        h_r = channels[rx].gains
        want = np.zeros_like(y)
        for tx in tx_ids:
            h_t = channels[tx].gains
            x = plan.pilots[tx][slot]  # (N, M_t)
            for i in range(sub.n):
                s_q = h_t[:, :, i].conj().T @ x[i]
                want[:, i] += h_r[:, :, i] @ (scene.measure * refl[:, i] * s_q)
        np.testing.assert_allclose(y, want, rtol=1e-9, atol=1e-20)


def test_cooperative_rejects_subcarrier_mismatch(voxel_sim):
    scene, units, sub, channels = voxel_sim
    bad_plan = round_robin_plan([u.id for u in units], slots=4, n_subcarriers=3,
                                m_t=4, power=1.0, seed=3)
    with pytest.raises(WaveformError):
        simulate_cooperative(scene, channels, bad_plan, sigma2=0.0, seed=5)


def test_observation_matrix_and_vector(voxel_sim):
    scene, units, sub, channels = voxel_sim
    plan = single_view_plan([u.id for u in units], slots=4, n_subcarriers=sub.n,
                            m_t=4, power=1.0, seed=3, rx_id=0)
    obs = simulate_cooperative(scene, channels, plan, sigma2=1e-9, seed=5)
    mat = obs.matrix(0)
    assert mat.ndim == 3 and mat.shape[1] == 4 and mat.shape[2] == sub.n
    vec = obs.vector(0, 2)
    np.testing.assert_array_equal(vec, mat[:, 2, :])
    with pytest.raises(WaveformError):
        obs.matrix(999)
    with pytest.raises(WaveformError):
        obs.vector(0, 99)


def test_simulate_monostatic_matches_direct_sum(voxel_sim):
    scene, units, sub, channels = voxel_sim
    grid = build_architecture("full", full_shape=(3, 3), spacing=0.06)
    d = simulate_monostatic(scene, grid, sub, sigma2=0.0, seed=0)
    assert d.shape == (3, 3, sub.n)
    ct = assemble_channels(scene, grid.units, sub)
    refl = scene_reflectivity(scene, ct.gains.shape[1], sub.n)
    w = ct.roundtrip_weight() * scene.measure
    want = np.einsum("gp,pn,gpn->gn", w, refl,
                     np.exp(-2j * sub.wavenumbers[None, None, :]
                            * ct.ranges[:, :, None]))
    np.testing.assert_allclose(d.reshape(9, sub.n), want, rtol=1e-9, atol=1e-20)


def test_serialization_roundtrips(tmp_path, voxel_sim):
    scene, units, sub, channels = voxel_sim
    rng = np.random.default_rng(9)
    arrays = {"d": rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))}
    path = tmp_path / "arrays.bin"
    save_arrays(path, arrays, meta={"tag": "unit-test"})
    loaded, meta = load_arrays(path)
    assert meta["tag"] == "unit-test"
    np.testing.assert_allclose(loaded["d"],
                               arrays["d"].astype(np.complex64), rtol=1e-6)

    plan = round_robin_plan([u.id for u in units], slots=4, n_subcarriers=sub.n,
                            m_t=4, power=1.0, seed=3)
    obs = simulate_cooperative(scene, channels, plan, sigma2=1e-9, seed=5)
    opath = tmp_path / "obs.bin"
    save_observations(opath, obs)
    obs2 = load_observations(opath)
    assert obs2.sigma2 == obs.sigma2
    assert obs2.seed == obs.seed
    for (ru, slot, y), (ru2, slot2, y2) in zip(obs.entries, obs2.entries):
        assert (ru, slot) == (ru2, slot2)
        np.testing.assert_allclose(y2, y.astype(np.complex64), rtol=1e-5)


def test_serialization_rejects_wrong_kind(tmp_path):
    path = tmp_path / "arrays.bin"
    save_arrays(path, {"a": np.ones((2, 2), dtype=complex)})
    with pytest.raises(ValueError):
        load_observations(path)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError):
        load_arrays(bad)
