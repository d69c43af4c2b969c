"""Image-quality evaluation: alignment pre-operations and MSE / PSNR / SSIM /
PCC as printed formulas (global statistics, magnitude domain where noted)."""

from dataclasses import dataclass

import numpy as np
import scipy.ndimage
import scipy.signal


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class AlignedPair:
    reference: np.ndarray
    estimate: np.ndarray
    shift: tuple
    scale: float


def _unit_max(img):
    m = np.abs(img).max()
    return img / m if m > 0 else img, m


def align(reference: np.ndarray, estimate: np.ndarray,
          reference_pitch: float = 1.0, estimate_pitch: float = None) -> AlignedPair:
    """Resample the estimate (bilinear) to the reference pitch, shift it by the
    integer-pixel magnitude cross-correlation peak, and normalize both to unit
    maximum magnitude. An all-zero estimate is passed through with shift 0."""
    reference = np.asarray(reference)
    estimate = np.asarray(estimate)
    if reference.size == 0 or estimate.size == 0:
        raise MetricsError("images must be nonempty")
    if estimate_pitch is not None and estimate_pitch != reference_pitch:
        zoom = estimate_pitch / reference_pitch
        re = scipy.ndimage.zoom(np.real(estimate), zoom, order=1)
        im = scipy.ndimage.zoom(np.imag(estimate), zoom, order=1)
        estimate = re + 1j * im if np.iscomplexobj(estimate) else re
    # center-crop or zero-pad to the reference shape
    out = np.zeros(reference.shape, dtype=estimate.dtype)
    r0 = [(e - r) // 2 for e, r in zip(estimate.shape, reference.shape)]
    src = tuple(slice(max(o, 0), max(o, 0) + min(e, r))
                for o, e, r in zip(r0, estimate.shape, reference.shape))
    dst = tuple(slice(max(-o, 0), max(-o, 0) + min(e, r))
                for o, e, r in zip(r0, estimate.shape, reference.shape))
    out[dst] = estimate[src]
    estimate = out
    if np.abs(estimate).max() == 0:
        ref_n, _ = _unit_max(reference)
        return AlignedPair(ref_n, estimate, (0, 0), 1.0)
    corr = scipy.signal.fftconvolve(np.abs(reference),
                                    np.abs(estimate)[::-1, ::-1], mode="same")
    peak = np.unravel_index(np.argmax(corr), corr.shape)
    # displacement of the estimate relative to the reference; the correction
    # applied below is its negative
    shift = tuple(int(s // 2 - p) for p, s in zip(peak, reference.shape))
    shifted = np.zeros_like(estimate)
    sl_src = tuple(slice(max(d, 0), estimate.shape[a] - max(-d, 0))
                   for a, d in enumerate(shift))
    sl_dst = tuple(slice(max(-d, 0), estimate.shape[a] - max(d, 0))
                   for a, d in enumerate(shift))
    shifted[sl_dst] = estimate[sl_src]
    ref_n, _ = _unit_max(reference)
    est_n, scale = _unit_max(shifted)
    return AlignedPair(ref_n, est_n, shift, scale)


def _check(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise MetricsError("images must share a shape; align them first")
    return a, b


def mse(a, b) -> float:
    """(1 / D_x D_y) sum |a - b|^2."""
    a, b = _check(a, b)
    return float(np.mean(np.abs(a - b) ** 2))


PSNR_INF = np.inf


def psnr(a, b, use_reference_max: bool = False) -> float:
    """10 log10(max|b|^2 / MSE); the peak is taken over the estimate b as
    printed (set use_reference_max for the conventional variant)."""
    a, b = _check(a, b)
    err = mse(a, b)
    if err == 0.0:
        return PSNR_INF
    peak = np.abs(a).max() if use_reference_max else np.abs(b).max()
    return float(10.0 * np.log10(peak ** 2 / err))


def ssim(a, b, dynamic_range: float = 1.0) -> float:
    """Global two-factor SSIM on magnitudes with eps1 = (0.01 R)^2,
    eps2 = (0.03 R)^2."""
    a, b = _check(a, b)
    x, y = np.abs(a), np.abs(b)
    e1 = (0.01 * dynamic_range) ** 2
    e2 = (0.03 * dynamic_range) ** 2
    mx, my = x.mean(), y.mean()
    vx, vy = x.var(), y.var()
    cov = np.mean((x - mx) * (y - my))
    return float((2 * mx * my + e1) * (2 * cov + e2)
                 / ((mx ** 2 + my ** 2 + e1) * (vx + vy + e2)))


def pcc(a, b) -> float:
    """|sum (a - mean a) conj(b - mean b)| / (||a - mean a|| ||b - mean b||),
    in [0, 1] by the modulus in the numerator."""
    a, b = _check(a, b)
    da = a - a.mean()
    db = b - b.mean()
    denom = np.linalg.norm(da) * np.linalg.norm(db)
    if denom == 0:
        return 1.0 if mse(a, b) == 0.0 else 0.0
    return float(np.abs(np.vdot(db, da)) / denom)


def evaluate(reference, estimate, reference_pitch: float = 1.0,
             estimate_pitch: float = None) -> dict:
    """Align and compute all four metrics plus the reference-max PSNR."""
    pair = align(reference, estimate, reference_pitch, estimate_pitch)
    a, b = pair.reference, pair.estimate
    return {
        "mse": mse(a, b),
        "psnr": psnr(a, b),
        "psnr_refmax": psnr(a, b, use_reference_max=True),
        "ssim": ssim(a, b),
        "pcc": pcc(a, b),
    }
