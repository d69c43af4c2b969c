"""Range-migration reconstruction: spectral oracles and end-to-end focusing."""

import numpy as np
import pytest
import scipy.fft

from radioimg import rma
from radioimg.geometry import (
    SubcarrierPlan,
    build_architecture,
    make_point_target,
)
from radioimg.waveform import measure_all_pairs, simulate_monostatic


@pytest.fixture(scope="module")
def small_full():
    return build_architecture("full", full_shape=(4, 4), spacing=0.06)


def _random_pairs(arch, n=1, seed=0):
    rng = np.random.default_rng(seed)
    m = arch.n_antennas
    return rng.normal(size=(m, m, n)) + 1j * rng.normal(size=(m, m, n))


# ---------------------------------------------------------------------------
# fuse
# ---------------------------------------------------------------------------

def test_fuse_scatter_and_fill_fraction(small_full):
    pairs = _random_pairs(small_full)
    fused = rma.fuse(pairs, small_full)
    assert fused.data.shape == (4, 4, 4, 4, 1)
    assert fused.fill_fraction == pytest.approx(1.0)
    # every pair value lands exactly once
    assert np.count_nonzero(fused.data) == 16 * 16


def test_fuse_boundary_fill_fraction():
    arch = build_architecture("boundary", spacing=0.06, m_l=4, m_w=1)
    pairs = _random_pairs(arch)
    fused = rma.fuse(pairs, arch)
    g = 6
    n_b = 4 * 4 * 1
    assert fused.fill_fraction == pytest.approx((n_b / g ** 2) ** 2)
    # corners stay zero
    assert np.all(fused.data[0, 0] == 0)
    assert np.all(fused.mask_tx == fused.mask_rx)


def test_fuse_validation(small_full):
    rect = build_architecture("full", full_shape=(2, 3), spacing=0.06)
    with pytest.raises(rma.RmaError):
        rma.fuse(_random_pairs(rect), rect)
    with pytest.raises(rma.RmaError):
        rma.fuse(_random_pairs(small_full)[:8], small_full)


# ---------------------------------------------------------------------------
# forward spectrum against a naive 4D DFT
# ---------------------------------------------------------------------------

def test_forward_spectrum_matches_naive_dft(small_full):
    fused = rma.fuse(_random_pairs(small_full, seed=3), small_full)
    spec = rma.forward_spectrum(fused, n=0, pad=False)
    g, d = 4, fused.spacing
    c = (g - 1) / 2.0
    k = spec.k
    pos = (np.arange(g) - c) * d
    ph = np.exp(-1j * np.outer(k, pos))  # (K, g)
    want = np.einsum("au,bv,cw,dx,uvwx->abcd", ph, ph, ph, ph,
                     fused.data[..., 0])
    np.testing.assert_allclose(spec.s4, want, rtol=1e-10, atol=1e-10)


def test_forward_spectrum_linearity(small_full):
    a = rma.fuse(_random_pairs(small_full, seed=1), small_full)
    b = rma.fuse(_random_pairs(small_full, seed=2), small_full)
    both = rma.FusedDataMatrix(a.data + b.data, a.mask_tx, a.mask_rx, a.spacing)
    sa = rma.forward_spectrum(a).s4
    sb = rma.forward_spectrum(b).s4
    sab = rma.forward_spectrum(both).s4
    np.testing.assert_allclose(sab, sa + sb, rtol=1e-10, atol=1e-10)


# ---------------------------------------------------------------------------
# stationary-phase filter
# ---------------------------------------------------------------------------

def test_msp_filter_center_sample_and_evanescent(small_full):
    fused = rma.fuse(_random_pairs(small_full, seed=4), small_full)
    spec = rma.forward_spectrum(fused, pad=False)
    k_n, z, cos_c = 210.0, 10.0, 0.9
    filt = rma.msp_filter(spec, k_n, z, cos_c)
    k = spec.k
    i0 = int(np.argmin(np.abs(k)))
    assert k[i0] == pytest.approx(0.0, abs=1e-12)
    # on-axis (k_t = k_r = 0): kz = k_n on both legs
    want = spec.s4[i0, i0, i0, i0] * (
        -k_n * np.exp(1j * k_n * z) / (np.pi * np.sqrt(cos_c))
    ) * k_n * np.exp(1j * k_n * z)
    assert filt.s4[i0, i0, i0, i0] == pytest.approx(want, rel=1e-12)
    # evanescent samples vanish
    kt2 = k[:, None] ** 2 + k[None, :] ** 2
    ev = kt2 >= k_n ** 2
    if ev.any():
        assert np.all(filt.s4[ev] == 0)
        assert np.all(~filt.prop_mask[ev])


def test_msp_filter_validation(small_full):
    spec = rma.forward_spectrum(rma.fuse(_random_pairs(small_full), small_full))
    with pytest.raises(rma.RmaError):
        rma.msp_filter(spec, 210.0, 0.0, 1.0)
    with pytest.raises(rma.RmaError):
        rma.msp_filter(spec, -1.0, 10.0, 1.0)
    with pytest.raises(rma.RmaError):
        rma.msp_filter(spec, 210.0, 10.0, 0.0)


# ---------------------------------------------------------------------------
# Stolt fusion
# ---------------------------------------------------------------------------

def test_stolt_fuse_axis_and_counts(small_full):
    fused = rma.fuse(_random_pairs(small_full, seed=5), small_full)
    spec = rma.forward_spectrum(fused, pad=False)
    out = rma.stolt_fuse(spec)
    g = spec.s4.shape[0]
    assert out.s2.shape == (2 * g - 1, 2 * g - 1)
    assert out.k0 == pytest.approx(2 * spec.k[0])
    assert out.dk == pytest.approx(spec.k[1] - spec.k[0])
    # without a propagating mask the counts are the full convolution counts
    assert out.counts[0, 0] == 1
    assert out.counts[g - 1, g - 1] == g * g
    # total spectral mass is conserved
    assert out.s2.sum() == pytest.approx(spec.s4.sum(), rel=1e-10)


def test_stolt_fuse_counts_respect_propagating_mask(small_full):
    fused = rma.fuse(_random_pairs(small_full, seed=6), small_full)
    spec = rma.forward_spectrum(fused, pad=False)
    filt = rma.msp_filter(spec, 60.0, 10.0, 1.0)  # small k_n: some evanescent
    out = rma.stolt_fuse(filt)
    m = filt.prop_mask.astype(float)
    want = np.rint(scipy.signal.fftconvolve(m, m, mode="full")).astype(int)
    np.testing.assert_array_equal(out.counts, want)
    assert (want < out.s2.shape[0]).any()


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------

def test_invert_matches_direct_sum():
    rng = np.random.default_rng(8)
    size = 7
    s2 = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    k0, dk = 300.0, 5.0
    fused = rma.FusedSpectrum2D(s2, np.ones((size, size), dtype=np.int64), k0, dk)
    img = rma.invert(fused, z=10.0)
    k = k0 + dk * np.arange(size)
    x = img.coords
    ph = np.exp(1j * np.outer(x, k))  # (K, size)
    want = ph @ s2 @ ph.T
    np.testing.assert_allclose(img.pixels, want, rtol=1e-10, atol=1e-10)
    assert img.pitch == pytest.approx(2 * np.pi / (size * dk))


def test_invert_oversample_interpolates():
    rng = np.random.default_rng(9)
    size = 6
    s2 = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    fused = rma.FusedSpectrum2D(s2, np.ones((size, size), dtype=np.int64),
                                200.0, 4.0)
    base = rma.invert(fused, z=5.0)
    fine = rma.invert(fused, z=5.0, oversample=3)
    assert fine.pixels.shape == (18, 18)
    assert fine.pitch == pytest.approx(base.pitch / 3)
    # the oversampled field agrees with the direct sum at its own coordinates
    k = 200.0 + 4.0 * np.arange(size)
    ph = np.exp(1j * np.outer(fine.coords, k))
    want = ph @ s2 @ ph.T
    np.testing.assert_allclose(fine.pixels, want, rtol=1e-9, atol=1e-9)
    with pytest.raises(rma.RmaError):
        rma.invert(fused, z=5.0, oversample=0)


def test_center_cosines_broadside_is_unity(small_full):
    assert rma.center_cosines(small_full, 10.0) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# end-to-end focusing
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def focus_setup():
    arch = build_architecture("full", full_shape=(12, 12), spacing=0.06)
    plan = SubcarrierPlan(n=1, f_c=1e10, bandwidth=0.0)
    return arch, plan


def _peak_xy(img):
    r, c = np.unravel_index(np.argmax(img.magnitude), img.pixels.shape)
    return img.coords[c], img.coords[r]  # cols -> x, rows -> y


def test_rma_focuses_point_target(focus_setup):
    arch, plan = focus_setup
    scene = make_point_target(0.6, 0.02, depth=2.0, at=(0.1, -0.08))
    true_x, true_y, _ = scene.occupied_centers()[0]
    d = measure_all_pairs(scene, arch, plan, power=1.0, sigma2=0.0, seed=0)
    img = rma.rma_pipeline(d, arch, plan, z=2.0)
    x, y = _peak_xy(img)
    assert abs(x - true_x) <= img.pitch
    assert abs(y - true_y) <= img.pitch


def test_rma_pipeline_is_linear(focus_setup):
    arch, plan = focus_setup
    a = _random_pairs(arch, seed=10)
    b = _random_pairs(arch, seed=11)
    ia = rma.rma_pipeline(a, arch, plan, z=2.0).pixels
    ib = rma.rma_pipeline(b, arch, plan, z=2.0).pixels
    iab = rma.rma_pipeline(a + b, arch, plan, z=2.0).pixels
    np.testing.assert_allclose(iab, ia + ib, rtol=1e-9, atol=1e-9)


def test_rma_average_path(focus_setup):
    arch, _ = focus_setup
    plan = SubcarrierPlan(n=3, f_c=1e10, bandwidth=2e9)
    scene = make_point_target(0.6, 0.02, depth=2.0, at=(0.0, 0.0))
    d = measure_all_pairs(scene, arch, plan, power=1.0, sigma2=0.0, seed=0)
    img = rma.rma_pipeline(d, arch, plan, z=2.0, average=True)
    assert np.all(img.pixels.imag == 0)
    x, y = _peak_xy(img)
    assert abs(x) <= img.pitch and abs(y) <= img.pitch


def test_sar_focuses_point_target():
    grid = build_architecture("full", full_shape=(16, 16), spacing=0.06)
    plan = SubcarrierPlan(n=1, f_c=1e10, bandwidth=0.0)
    scene = make_point_target(0.6, 0.02, depth=2.0, at=(-0.12, 0.06))
    true_x, true_y, _ = scene.occupied_centers()[0]
    d = simulate_monostatic(scene, grid, plan, sigma2=0.0, seed=0)
    img = rma.sar_pipeline(d, grid.spacing, plan, z=2.0)
    x, y = _peak_xy(img)
    assert abs(x - true_x) <= img.pitch
    assert abs(y - true_y) <= img.pitch


def test_sar_pipeline_validation():
    plan = SubcarrierPlan(n=1, f_c=1e10, bandwidth=0.0)
    d = np.zeros((4, 4, 1), dtype=complex)
    with pytest.raises(rma.RmaError):
        rma.sar_pipeline(d, 0.06, plan, z=0.0)
    with pytest.raises(rma.RmaError):
        rma.sar_pipeline(np.zeros((4, 5, 1), dtype=complex), 0.06, plan, z=1.0)
    with pytest.raises(rma.RmaError):
        rma.sar_pipeline(d, 0.06, plan, z=1.0, cos_center=0.0)
