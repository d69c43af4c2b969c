"""Transmit signals, noisy echo synthesis, and antenna-pair observations."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import ChannelTensor, assemble_channels, compute_visibility
from .geometry import ArrayArchitecture, Scene, SubcarrierPlan


class WaveformError(ValueError):
    pass


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts * 1000.0)


def _complex_noise(rng, shape, sigma2):
    if sigma2 == 0.0:
        return np.zeros(shape, dtype=complex)
    s = np.sqrt(sigma2 / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


# ---------------------------------------------------------------------------
# transmit side
# ---------------------------------------------------------------------------

def dft_precoder(m_t: int, s: int, power: float, n: int) -> np.ndarray:
    """Row-orthogonal space-time pilot matrix X (m_t x s) with per-slot
    column norm^2 = power / n and X X^H = (power s / (n m_t)) I."""
    if s < m_t:
        raise WaveformError("need at least as many slots as transmit antennas")
    if power <= 0 or n < 1:
        raise WaveformError("power must be positive and n >= 1")
    mt_idx = np.arange(m_t)[:, None]
    s_idx = np.arange(s)[None, :]
    return np.sqrt(power / (n * m_t)) * np.exp(-2j * np.pi * mt_idx * s_idx / s)


@dataclass(frozen=True)
class TransmitPlan:
    """Illumination schedule: per slot a disjoint (transmitters, receivers)
    split, plus per-RU pilot vectors x[s, n, :] under the power budget."""

    slots: int
    power: float
    n_subcarriers: int
    schedule: tuple  # tuple per slot: (tx_ids tuple, rx_ids tuple)
    pilots: dict  # ru_id -> (slots, n_subcarriers, M_t) complex

    def __post_init__(self):
        if len(self.schedule) != self.slots:
            raise WaveformError("schedule length does not match slot count")
        budget = self.power / self.n_subcarriers
        for s, (tx, rx) in enumerate(self.schedule):
            if set(tx) & set(rx):
                raise WaveformError(f"slot {s}: transmitter and receiver sets overlap")
            if not rx:
                raise WaveformError(f"slot {s}: empty receiver set")
            for ru in tx:
                x = self.pilots[ru][s]
                norms = np.sum(np.abs(x) ** 2, axis=-1)
                if np.any(norms > budget * (1.0 + 1e-9)):
                    raise WaveformError(f"slot {s}: RU {ru} violates the power budget")


def _random_pilots(ru_ids, slots, n, m_t, power, rng):
    pilots = {}
    for ru in ru_ids:
        g = rng.standard_normal((slots, n, m_t)) + 1j * rng.standard_normal((slots, n, m_t))
        g *= np.sqrt(power / n) / np.linalg.norm(g, axis=-1, keepdims=True)
        pilots[ru] = g
    return pilots


def round_robin_plan(ru_ids, slots, n_subcarriers, m_t, power, seed) -> TransmitPlan:
    """RUs take turns receiving; all others transmit random pilots."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7264)))
    ru_ids = list(ru_ids)
    pilots = _random_pilots(ru_ids, slots, n_subcarriers, m_t, power, rng)
    schedule = []
    for s in range(slots):
        rx = ru_ids[s % len(ru_ids)]
        schedule.append((tuple(r for r in ru_ids if r != rx), (rx,)))
    return TransmitPlan(slots, power, n_subcarriers, tuple(schedule), pilots)


def single_view_plan(ru_ids, slots, n_subcarriers, m_t, power, seed, rx_id=None) -> TransmitPlan:
    """One RU receives in every slot; the rest transmit random pilots."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7264)))
    ru_ids = list(ru_ids)
    rx_id = ru_ids[0] if rx_id is None else rx_id
    pilots = _random_pilots(ru_ids, slots, n_subcarriers, m_t, power, rng)
    schedule = [(tuple(r for r in ru_ids if r != rx_id), (rx_id,))] * slots
    return TransmitPlan(slots, power, n_subcarriers, tuple(schedule), pilots)


# ---------------------------------------------------------------------------
# observations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservationSet:
    """Received vectors keyed by (receiving RU, slot); each entry holds the
    (M_r, N) samples of that RU across subcarriers."""

    entries: tuple  # tuple of (ru_id, slot, y (M_r, N) complex)
    sigma2: float
    seed: int

    def matrix(self, ru_id) -> np.ndarray:
        """(M_r, S, N) slot-stacked receive matrix of one RU."""
        rows = sorted((slot, y) for r, slot, y in self.entries if r == ru_id)
        if not rows:
            raise WaveformError(f"no observations for RU {ru_id}")
        return np.stack([y for _, y in rows], axis=1)

    def vector(self, ru_id, slot) -> np.ndarray:
        for r, s, y in self.entries:
            if r == ru_id and s == slot:
                return y
        raise WaveformError(f"no observation for RU {ru_id}, slot {slot}")


@dataclass(frozen=True)
class PairObservation:
    """Per antenna-pair echo matrix D (M_r, M_t, N) for one (rx, tx) RU pair."""

    d: np.ndarray
    tx_id: int
    rx_id: int


def scene_reflectivity(scene: Scene, n_points: int, n_subcarriers: int) -> np.ndarray:
    """(P, N) reflectivity rows matching a channel tensor's point set: the
    occupied cells, or the whole grid (zeros off support)."""
    occ = scene.occupied_reflectivity()
    if n_points == occ.shape[0]:
        refl = occ
    elif n_points == int(np.prod(scene.shape)):
        refl = np.zeros((n_points, scene.n_subcarriers), dtype=complex)
        refl[scene.occupied_flat()] = occ
    else:
        raise WaveformError("channel point count matches neither the occupied "
                            "cells nor the full grid")
    if refl.shape[1] == 1 and n_subcarriers > 1:
        refl = np.broadcast_to(refl, (n_points, n_subcarriers))
    elif refl.shape[1] != n_subcarriers:
        raise WaveformError("scene reflectivity subcarrier count mismatch")
    return refl


def pair_core(channels_rx: ChannelTensor, channels_tx: ChannelTensor,
              refl: np.ndarray, measure: float) -> np.ndarray:
    """Noiseless pair response C[:, :, n] = measure * H_r diag(rho_n) H_t^H."""
    n = channels_rx.gains.shape[2]
    m_r = channels_rx.gains.shape[0]
    m_t = channels_tx.gains.shape[0]
    out = np.empty((m_r, m_t, n), dtype=complex)
    for i in range(n):
        weighted = channels_rx.gains[:, :, i] * (measure * refl[:, i])[None, :]
        out[:, :, i] = weighted @ channels_tx.gains[:, :, i].conj().T
    return out


def simulate_orthogonal(scene: Scene, channels: dict, precoder: np.ndarray,
                        sigma2: float, seed: int, tx_id, rx_ids) -> ObservationSet:
    """Echoes of a single transmitting RU recorded by `rx_ids` over S slots;
    the pilot matrix is reused on every subcarrier."""
    n = channels[tx_id].gains.shape[2]
    refl = scene_reflectivity(scene, channels[tx_id].gains.shape[1], n)
    s = precoder.shape[1]
    entries = []
    ss = np.random.SeedSequence((seed, 0x6f72))
    streams = ss.spawn(len(rx_ids))
    for idx, rx in enumerate(rx_ids):
        core = pair_core(channels[rx], channels[tx_id], refl, scene.measure)
        rng = np.random.default_rng(streams[idx])
        w = _complex_noise(rng, (core.shape[0], s, n), sigma2)
        y = np.einsum("rtn,ts->rsn", core, precoder) + w
        for slot in range(s):
            entries.append((rx, slot, y[:, slot, :]))
    return ObservationSet(tuple(entries), sigma2, seed)


def simulate_cooperative(scene: Scene, channels: dict, plan: TransmitPlan,
                         sigma2: float, seed: int) -> ObservationSet:
    """Multiple RUs transmit together per the plan's schedule."""
    any_ct = next(iter(channels.values()))
    n = any_ct.gains.shape[2]
    refl = scene_reflectivity(scene, any_ct.gains.shape[1], n)
    if plan.n_subcarriers != n:
        raise WaveformError("transmit plan subcarrier count mismatch")
    entries = []
    ss = np.random.SeedSequence((seed, 0x636f))
    streams = {ru: np.random.default_rng(child)
               for ru, child in zip(sorted(channels), ss.spawn(len(channels)))}
    for slot, (tx_ids, rx_ids) in enumerate(plan.schedule):
        for rx in rx_ids:
            h_r = channels[rx].gains  # (M_r, P, N)
            y = _complex_noise(streams[rx], (h_r.shape[0], n), sigma2)
            for tx in tx_ids:
                h_t = channels[tx].gains  # (M_t, P, N)
                x = plan.pilots[tx][slot]  # (N, M_t)
                for i in range(n):
                    s_q = h_t[:, :, i].conj().T @ x[i]  # (P,)
                    y[:, i] += h_r[:, :, i] @ (scene.measure * refl[:, i] * s_q)
            entries.append((rx, slot, y))
    return ObservationSet(tuple(entries), sigma2, seed)


def simulate_monostatic(scene: Scene, virtual_grid: ArrayArchitecture,
                        plan: SubcarrierPlan, sigma2: float, seed: int) -> np.ndarray:
    """Co-located transceiver scan over the virtual grid with unit pilots:
    round-trip pathloss 1/(4 pi r^2), doubled phase, full cosine products.
    Returns (rows, cols, N)."""
    ct = assemble_channels(scene, virtual_grid.units, plan,
                           visibility=compute_visibility(scene, virtual_grid.units))
    n = len(plan.wavenumbers)
    refl = scene_reflectivity(scene, ct.gains.shape[1], n)
    weight = ct.roundtrip_weight() * scene.measure
    out = kernels.monostatic_sum(weight, ct.ranges, np.ascontiguousarray(refl),
                                 plan.wavenumbers)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6d6f)))
    out = out + _complex_noise(rng, out.shape, sigma2)
    rows, cols = virtual_grid.grid_shape
    return out.reshape(rows, cols, n)


def extract_pair_observation(observations: ObservationSet, precoder: np.ndarray,
                             tx_id, rx_id) -> PairObservation:
    """D = Y X^H per subcarrier."""
    y = observations.matrix(rx_id)  # (M_r, S, N)
    if y.shape[1] != precoder.shape[1]:
        raise WaveformError("slot count mismatch between observations and precoder")
    d = np.einsum("rsn,ts->rtn", y, precoder.conj())
    return PairObservation(d=d, tx_id=tx_id, rx_id=rx_id)


def measure_all_pairs(scene: Scene, architecture: ArrayArchitecture,
                      plan: SubcarrierPlan, power: float, sigma2: float, seed: int,
                      core: np.ndarray = None, channels: ChannelTensor = None):
    """Full antenna-pair matrix D_all (M, M, N) across the architecture.

    Each unit transmits a DFT pilot block for S = M_t slots while every unit
    (itself included) records; the pair matrices are extracted per unit pair
    and placed into the concatenated antenna ordering. `core`
    (the noiseless pair response over all antennas) may be passed in to
    amortize repeated noise realizations of the same geometry.
    """
    if core is None:
        if channels is None:
            channels = assemble_channels(scene, architecture.units, plan)
        refl = scene_reflectivity(scene, channels.gains.shape[1],
                                  channels.gains.shape[2])
        core = pair_core(channels, channels, refl, scene.measure)
    m = core.shape[0]
    n = core.shape[2]
    slices = architecture.unit_slices()
    d_all = np.zeros((m, m, n), dtype=complex)
    ss = np.random.SeedSequence((seed, 0x7061))
    streams = iter(ss.spawn(len(slices) * len(slices)))
    for ti, tsl in enumerate(slices):
        m_t = tsl.stop - tsl.start
        x = dft_precoder(m_t, m_t, power, n)
        scale = power * m_t / (n * m_t)  # P S / (N M_t) with S = M_t
        for ri, rsl in enumerate(slices):
            rng = np.random.default_rng(next(streams))
            block = scale * core[rsl, tsl, :]
            if sigma2 > 0.0:
                w = _complex_noise(rng, (rsl.stop - rsl.start, m_t, n), sigma2)
                block = block + np.einsum("rsn,ts->rtn", w, x.conj())
            d_all[rsl, tsl, :] = block
    return d_all
