"""Image containers and per-pixel statistics.

Rasters are plain ``numpy`` arrays of shape ``(H, W, C)`` holding reflectance
in ``[0, 1]``; scalar fields are ``(H, W)`` arrays. The helpers here validate
those conventions at module boundaries so the numerical code can stay bare.
"""

import numpy as np

SATURATION_GUARD = 1e-6


def as_raster(data, nonfinite="raise"):
    """Return ``data`` as a float64 ``(H, W, C)`` array.

    A 2-D input is promoted to a single-band raster. ``nonfinite`` selects the
    policy for NaN/Inf values: ``"raise"`` rejects them, ``"clamp"`` maps NaN
    and -Inf to 0 and +Inf to 1.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"raster must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"raster dimensions must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        if nonfinite == "clamp":
            arr = np.nan_to_num(arr, nan=0.0, posinf=1.0, neginf=0.0)
        elif nonfinite == "raise":
            raise ValueError("raster contains NaN or Inf values")
        else:
            raise ValueError(f"unknown nonfinite policy {nonfinite!r}")
    return arr


def as_field(data):
    """Return ``data`` as a finite float64 ``(H, W)`` array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"scalar field must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("scalar field is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scalar field contains NaN or Inf values")
    return arr


def as_light(values, bands=None):
    """Per-band atmospheric light vector; a scalar is broadcast to ``bands``."""
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if arr.ndim != 1:
        raise ValueError("atmospheric light must be a 1-D vector")
    if bands is not None:
        if arr.size == 1 and bands > 1:
            arr = np.full(bands, arr[0])
        elif arr.size != bands:
            raise ValueError(f"atmospheric light has {arr.size} bands, raster has {bands}")
    return arr


def check_same_grid(*arrays):
    """Raise ``ValueError`` unless all arrays share height and width."""
    shapes = {a.shape[:2] for a in arrays}
    if len(shapes) > 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


def brightness(img):
    """Per-pixel maximum over bands (the HSV value channel)."""
    return as_raster(img).max(axis=2)


def saturation(img):
    """Per-pixel ``(max - min) / max`` over bands, 0 for near-black pixels."""
    img = as_raster(img)
    vmax = img.max(axis=2)
    vmin = img.min(axis=2)
    out = np.zeros_like(vmax)
    ok = vmax >= SATURATION_GUARD
    out[ok] = (vmax[ok] - vmin[ok]) / vmax[ok]
    return out


def percentile(field, p):
    """Nearest-rank percentile with lower interpolation.

    Returns the sorted value at index ``floor(p * (N - 1))``; ``p = 0`` is the
    minimum and ``p = 1`` the maximum.
    """
    values = np.asarray(field, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("percentile of an empty field")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    # guard against 0.85 * 20 = 16.999... style rounding
    k = int(np.floor(p * (values.size - 1) + 1e-9))
    return float(np.partition(values, k)[k])
