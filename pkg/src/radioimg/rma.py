"""Range-migration imaging: fuse pair observations onto a virtual full grid,
filter in the wavenumber domain, Stolt-fuse transmit/receive wavenumbers, and
invert to a reflectivity image. Includes the monostatic (SAR) special case."""

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.signal

from . import kernels
from .geometry import ArrayArchitecture, SubcarrierPlan


class RmaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# centered FFT helpers: grids are indexed 0..G-1 but physically centered, so
# spectra carry explicit phase ramps instead of relying on fftshift parity.
# ---------------------------------------------------------------------------

def _centered_fft(data, axes, spacing, size):
    """DFT with spatial origin at the grid center of each transformed axis:
    S[k] = sum_m s[m] e^{-j k (m - c) d}, returned with monotone k axes."""
    out = scipy.fft.fftn(data, s=[size] * len(axes), axes=axes)
    k = 2.0 * np.pi * scipy.fft.fftfreq(size, d=spacing)
    for ax in axes:
        c = (data.shape[ax] - 1) / 2.0
        ramp = np.exp(1j * k * c * spacing)
        shape = [1] * out.ndim
        shape[ax] = size
        out *= ramp.reshape(shape)
    out = scipy.fft.fftshift(out, axes=axes)
    return out, np.fft.fftshift(k)


def _centered_ifft2(s2, k0, dk):
    """rho[p] = sum_q S[q] e^{+j k[q] x[p]} with x centered on the grid and
    pixel pitch dx = 2 pi / (K dk)."""
    size = s2.shape[0]
    dx = 2.0 * np.pi / (size * dk)
    c = (size - 1) / 2.0
    q = np.arange(size)
    w = np.exp(-2j * np.pi * q * c / size)
    x = (q - c) * dx
    ramp = np.exp(1j * k0 * x)
    img = size ** 2 * scipy.fft.ifft2(s2 * w[:, None] * w[None, :])
    img *= ramp[:, None] * ramp[None, :]
    return img, dx, x


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FusedDataMatrix:
    """Pair observations on the dense virtual full grid; unmeasured cells are
    exactly zero. data[t_row, t_col, r_row, r_col, n]."""

    data: np.ndarray
    mask_tx: np.ndarray  # (g, g) bool, measured transmit cells
    mask_rx: np.ndarray
    spacing: float

    @property
    def fill_fraction(self) -> float:
        return float(self.mask_tx.mean() * self.mask_rx.mean())


@dataclass(frozen=True)
class WavenumberSpectrum:
    """4D spectrum over (k_y^t, k_x^t, k_y^r, k_x^r) for one subcarrier,
    with shared monotone wavenumber axis k."""

    s4: np.ndarray
    k: np.ndarray
    spacing: float
    prop_mask: np.ndarray = None  # (G, G) propagating support, set by the filter


@dataclass(frozen=True)
class FusedSpectrum2D:
    s2: np.ndarray
    counts: np.ndarray
    k0: float
    dk: float

    @property
    def k(self) -> np.ndarray:
        return self.k0 + self.dk * np.arange(self.s2.shape[0])

    def mean_normalized(self) -> np.ndarray:
        return np.where(self.counts > 0, self.s2 / np.maximum(self.counts, 1), 0.0)


@dataclass(frozen=True)
class ReconstructedImage:
    pixels: np.ndarray  # complex (K, K), rows = y, cols = x
    pitch: float
    coords: np.ndarray  # (K,) centered physical axis, shared by x and y
    depth: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.pixels)


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def fuse(pair_matrix: np.ndarray, architecture: ArrayArchitecture) -> FusedDataMatrix:
    """Scatter the (M, M, N) all-pairs matrix onto the virtual full grid."""
    g_r, g_c = architecture.grid_shape
    if g_r != g_c:
        raise RmaError("virtual grid must be square")
    m = architecture.n_antennas
    if pair_matrix.shape[:2] != (m, m):
        raise RmaError("pair matrix does not match the antenna count")
    n = pair_matrix.shape[2]
    vi = architecture.virtual_index
    data = np.zeros((g_r, g_c, g_r, g_c, n), dtype=pair_matrix.dtype)
    rows, cols = vi[:, 0], vi[:, 1]
    for t in range(m):
        data[rows[t], cols[t], rows, cols, :] = pair_matrix[:, t, :]
    mask = np.zeros((g_r, g_c), dtype=bool)
    mask[rows, cols] = True
    return FusedDataMatrix(data, mask, mask.copy(), architecture.spacing)


def forward_spectrum(fused: FusedDataMatrix, n: int = 0,
                     pad: bool = True) -> WavenumberSpectrum:
    """4D spatial DFT of one subcarrier slice, as two cascaded 2D FFTs."""
    s4 = fused.data[..., n]
    g = s4.shape[0]
    size = scipy.fft.next_fast_len(g) if pad else g
    spec, k = _centered_fft(s4, axes=(0, 1), spacing=fused.spacing, size=size)
    spec, _ = _centered_fft(spec, axes=(2, 3), spacing=fused.spacing, size=size)
    return WavenumberSpectrum(spec, k, fused.spacing)


def msp_filter(spectrum: WavenumberSpectrum, k_n: float, z: float,
               cos_center: float) -> WavenumberSpectrum:
    """Stationary-phase inverse filter: multiply propagating samples by
    k_z^t k_z^r / (-pi sqrt(cos_center)) e^{+j (k_z^t + k_z^r) z}; zero the
    evanescent ones."""
    if z <= 0 or k_n <= 0:
        raise RmaError("depth and wavenumber must be positive")
    if cos_center <= 0:
        raise RmaError("scene center lies behind the array plane")
    k = spectrum.k
    kt2 = k[:, None] ** 2 + k[None, :] ** 2
    prop = kt2 < k_n ** 2
    kz = np.sqrt(np.where(prop, k_n ** 2 - kt2, 0.0))
    f_plane = np.where(prop, kz * np.exp(1j * kz * z), 0.0)
    scale = -1.0 / (np.pi * np.sqrt(cos_center))
    s4 = spectrum.s4 * (scale * f_plane)[:, :, None, None]
    s4 *= f_plane[None, None, :, :]
    return WavenumberSpectrum(s4, k, spectrum.spacing, prop_mask=prop)


def stolt_fuse(spectrum: WavenumberSpectrum) -> FusedSpectrum2D:
    """Accumulate S(k^t, k^r) onto the 2D grid k = k^t + k^r (same pitch)."""
    s4 = np.ascontiguousarray(spectrum.s4)
    s2 = kernels.stolt_accumulate(s4)
    if spectrum.prop_mask is not None:
        m = spectrum.prop_mask.astype(float)
        counts = np.rint(scipy.signal.fftconvolve(m, m, mode="full")).astype(np.int64)
    else:
        counts = np.rint(scipy.signal.fftconvolve(
            np.ones(s4.shape[:2]), np.ones(s4.shape[2:]), mode="full")).astype(np.int64)
    dk = spectrum.k[1] - spectrum.k[0]
    return FusedSpectrum2D(s2, counts, k0=2.0 * spectrum.k[0], dk=dk)


def invert(fused_2d: FusedSpectrum2D, z: float,
           oversample: int = 1) -> ReconstructedImage:
    """2D inverse FFT of the fused spectrum; pitch = 2 pi / grid extent.

    oversample > 1 zero-pads the spectrum before inversion (exact sinc
    interpolation of the bandlimited field). The raw pitch is Nyquist for the
    complex field but not for its magnitude, whose bandwidth is doubled by the
    modulus; oversample=2 or more removes the magnitude scalloping."""
    if oversample < 1:
        raise RmaError("oversample must be a positive integer")
    s2 = fused_2d.s2
    if oversample > 1:
        size = s2.shape[0] * oversample
        padded = np.zeros((size, size), dtype=s2.dtype)
        padded[:s2.shape[0], :s2.shape[1]] = s2
        s2 = padded
    img, dx, x = _centered_ifft2(s2, fused_2d.k0, fused_2d.dk)
    if not np.all(np.isfinite(img)):
        raise RmaError("non-finite values in reconstructed image")
    return ReconstructedImage(img, dx, x, z)


def center_cosines(architecture: ArrayArchitecture, z: float) -> float:
    """cos(theta^c) cos(phi^c) between the array center and the scene center,
    both projections collapsing to z/r for broadside planar geometry."""
    center = architecture.positions.mean(axis=0)
    r = np.sqrt(center[0] ** 2 + center[1] ** 2 + (z - center[2]) ** 2)
    c = (z - center[2]) / r
    return float(c * c)


def rma_pipeline(pair_matrix: np.ndarray, architecture: ArrayArchitecture,
                 plan: SubcarrierPlan, z: float, n: int = None,
                 pad: bool = True, average: bool = False,
                 oversample: int = 2) -> ReconstructedImage:
    """fuse -> forward_spectrum -> msp_filter -> stolt_fuse -> invert.

    Defaults to the center subcarrier; with average=True the magnitudes of all
    per-subcarrier images are averaged incoherently. oversample controls the
    sinc interpolation of the final complex image (see invert).
    """
    cos_c = center_cosines(architecture, z)
    idx = [plan.center_index] if n is None else [n]
    if average:
        idx = list(range(plan.n))
    acc = None
    out = None
    for i in idx:
        fused = fuse(pair_matrix[:, :, i:i + 1], architecture)
        spec = forward_spectrum(fused, n=0, pad=pad)
        filt = msp_filter(spec, plan.wavenumbers[i], z, cos_c)
        del spec
        out = invert(stolt_fuse(filt), z, oversample=oversample)
        acc = out.magnitude if acc is None else acc + out.magnitude
    if average and len(idx) > 1:
        return ReconstructedImage(acc / len(idx) + 0j, out.pitch, out.coords, z)
    return out


def sar_pipeline(monostatic_grid: np.ndarray, spacing: float,
                 plan: SubcarrierPlan, z: float, cos_center: float = None,
                 n: int = None, pad: bool = True) -> ReconstructedImage:
    """Monostatic inverse based on the plane-wave expansion of the spherical
    wave: rho = FT2^-1{ 2 pi k_z e^{+j k_z z} / (-j) FT2{ 4 pi s / cos_c } }
    with k_z = sqrt(4 k_n^2 - k_x^2 - k_y^2), evanescent samples zeroed."""
    if z <= 0:
        raise RmaError("depth must be positive")
    i = plan.center_index if n is None else n
    k_n = plan.wavenumbers[i]
    s = monostatic_grid[..., i]
    g = s.shape[0]
    if s.shape[0] != s.shape[1]:
        raise RmaError("monostatic grid must be square")
    if cos_center is None:
        cos_center = 1.0
    if cos_center <= 0:
        raise RmaError("scene center lies behind the array plane")
    size = scipy.fft.next_fast_len(g) if pad else g
    spec, k = _centered_fft(4.0 * np.pi * s / cos_center, axes=(0, 1),
                            spacing=spacing, size=size)
    kt2 = k[:, None] ** 2 + k[None, :] ** 2
    prop = kt2 < 4.0 * k_n ** 2
    kz = np.sqrt(np.where(prop, 4.0 * k_n ** 2 - kt2, 0.0))
    spec = np.where(prop, spec * 2.0 * np.pi * kz * np.exp(1j * kz * z) / (-1j), 0.0)
    img, dx, x = _centered_ifft2(spec, k[0], k[1] - k[0])
    if not np.all(np.isfinite(img)):
        raise RmaError("non-finite values in reconstructed image")
    return ReconstructedImage(img, dx, x, z)
