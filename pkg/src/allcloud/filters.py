"""Edge-preserving and frequency-splitting filters.

All filters replicate edge pixels rather than zero-padding, so constants are
preserved exactly up to rounding and dark frames never leak into statistics.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import as_field, as_raster, brightness, check_same_grid

WEIGHT_FLOOR = 1e-3
SOBEL_GAIN = 8.0


@dataclass(frozen=True)
class FilterParams:
    """Radii and regularizers for the filter family.

    Attributes:
        base_radius: window radius of the self-guided base-layer filter
        base_eps: base-layer regularizer, in reflectance squared
        lp_sigma: Gaussian scale of the low-pass split, in pixels
        refine_radius: window radius of the transmission refinement
        refine_eps: refinement regularizer
        base_guide: ``"self"`` filters each band by itself; ``"joint"`` guides
            both the cloudy image and the prior by the cloudy brightness
    """

    base_radius: int = 8
    base_eps: float = 1e-3
    lp_sigma: float = 4.0
    refine_radius: int = 8
    refine_eps: float = 1e-3
    base_guide: str = "self"

    def __post_init__(self):
        if self.base_radius < 1 or self.refine_radius < 1:
            raise ValueError("filter radii must be >= 1")
        if self.base_eps <= 0 or self.refine_eps <= 0:
            raise ValueError("filter regularizers must be > 0")
        if self.lp_sigma <= 0:
            raise ValueError("lp_sigma must be > 0")
        if self.base_guide not in ("self", "joint"):
            raise ValueError(f"base_guide must be 'self' or 'joint', got {self.base_guide!r}")


def box_mean(field, radius):
    """Mean over a ``(2r+1)``-square window with replicated edges."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    return ndimage.uniform_filter(np.asarray(field, dtype=np.float64),
                                  size=2 * int(radius) + 1, mode="nearest")


def guided_filter(input, guide, radius, eps):
    """Guided filter (local linear model ``q = a * guide + b``)."""
    p = as_field(input)
    g = as_field(guide)
    check_same_grid(p, g)

    mean_g = box_mean(g, radius)
    mean_p = box_mean(p, radius)
    cov_gp = box_mean(g * p, radius) - mean_g * mean_p
    var_g = box_mean(g * g, radius) - mean_g * mean_g

    a = cov_gp / (var_g + eps)
    b = mean_p - a * mean_g
    return box_mean(a, radius) * g + box_mean(b, radius)


def weighted_guided_filter(input, guide, weights, radius, eps, w_floor=WEIGHT_FLOOR):
    """Guided filter whose window statistics are weighted per pixel.

    Each pixel contributes to the window means, variance and covariance in
    proportion to its weight. Windows whose total weight falls below
    ``w_floor`` use unweighted statistics instead. The per-window coefficients
    are then averaged uniformly, as in the plain filter, so constant weights
    reproduce :func:`guided_filter`.
    """
    p = as_field(input)
    g = as_field(guide)
    w = as_field(weights)
    check_same_grid(p, g, w)
    if w.min() < 0 or w.max() > 1:
        raise ValueError("weights must lie in [0, 1]")

    n = (2 * int(radius) + 1) ** 2
    w_mean = box_mean(w, radius)
    starved = w_mean * n < w_floor
    denom = np.where(starved, 1.0, w_mean)

    def wmean(x):
        weighted = box_mean(w * x, radius) / denom
        if starved.any():
            weighted = np.where(starved, box_mean(x, radius), weighted)
        return weighted

    mean_g = wmean(g)
    mean_p = wmean(p)
    cov_gp = wmean(g * p) - mean_g * mean_p
    var_g = wmean(g * g) - mean_g * mean_g

    a = cov_gp / (var_g + eps)
    b = mean_p - a * mean_g
    return box_mean(a, radius) * g + box_mean(b, radius)


def base_layer(img, params, guide=None):
    """Edge-preserving base layer, filtered band by band.

    Without ``guide`` each band guides itself; with a scalar ``guide`` field
    every band is filtered jointly against it.
    """
    img = as_raster(img)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        band = img[:, :, c]
        out[:, :, c] = guided_filter(band, band if guide is None else guide,
                                     params.base_radius, params.base_eps)
    return out


def lowpass(img, sigma):
    """Per-band Gaussian blur truncated at 3 sigma, replicated edges."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    img = as_raster(img)
    return ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0), mode="nearest", truncate=3.0)


def laplacian(field):
    """4-neighbour discrete Laplacian with replicated edges."""
    f = np.pad(as_field(field), 1, mode="edge")
    return (f[:-2, 1:-1] + f[2:, 1:-1] + f[1:-1, :-2] + f[1:-1, 2:]
            - 4.0 * f[1:-1, 1:-1])


def highfreq_intensity(img):
    """Absolute Laplacian of the brightness channel."""
    return np.abs(laplacian(brightness(img)))


def gradient_magnitude(field):
    """Sobel gradient magnitude, normalized so a unit-slope ramp gives 1.

    The raw Sobel response to a ramp of slope ``s`` is ``8 s``; dividing by
    ``SOBEL_GAIN`` makes the result read in field units per pixel.
    """
    f = as_field(field)
    gx = ndimage.sobel(f, axis=1, mode="nearest")
    gy = ndimage.sobel(f, axis=0, mode="nearest")
    return np.hypot(gx, gy) / SOBEL_GAIN
