"""PSNR and SSIM against a clear-sky ground truth."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .raster import as_raster, brightness

PSNR_CAP = 99.0
SSIM_TAPS = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass
class QualityReport:
    psnr: float
    ssim: float
    per_band_psnr: list

    def to_dict(self):
        return asdict(self)


def _check_pair(a, b):
    a = as_raster(a)
    b = as_raster(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _psnr_from_mse(mse):
    if mse <= 0:
        return PSNR_CAP
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP))


def psnr(a, b):
    """PSNR in dB for data range 1, capped at 99 dB (identical images)."""
    a, b = _check_pair(a, b)
    return _psnr_from_mse(float(np.mean((a - b) ** 2)))


def per_band_psnr(a, b):
    a, b = _check_pair(a, b)
    mse = np.mean((a - b) ** 2, axis=(0, 1))
    return [_psnr_from_mse(float(m)) for m in mse]


def gaussian_window(taps=SSIM_TAPS, sigma=SSIM_SIGMA):
    x = np.arange(taps) - (taps - 1) / 2
    w = np.exp(-x ** 2 / (2 * sigma ** 2))
    return w / w.sum()


def ssim(a, b):
    """Single-scale SSIM of the brightness channels, mean over the valid interior."""
    a, b = _check_pair(a, b)
    x = brightness(a)
    y = brightness(b)
    if min(x.shape) < SSIM_TAPS:
        raise ValueError(f"image {x.shape} is smaller than the {SSIM_TAPS}-tap SSIM window")

    w = gaussian_window()
    half = SSIM_TAPS // 2

    def filt(f):
        f = ndimage.correlate1d(f, w, axis=0, mode="nearest")
        f = ndimage.correlate1d(f, w, axis=1, mode="nearest")
        return f[half:-half, half:-half]

    mx, my = filt(x), filt(y)
    vx = filt(x * x) - mx * mx
    vy = filt(y * y) - my * my
    cxy = filt(x * y) - mx * my
    num = (2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(np.mean(num / den))


def evaluate(result, truth):
    """PSNR, SSIM and per-band PSNR of ``result`` against ``truth``."""
    return QualityReport(psnr=psnr(result, truth), ssim=ssim(result, truth),
                         per_band_psnr=per_band_psnr(result, truth))
