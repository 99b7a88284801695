"""Raster and field I/O.

PNG (8- or 16-bit) is for quick looks; TIFF (integer or 32-bit float, any
band count) keeps radiometric precision. Every written image gets a JSON
sidecar (``<name>.json``) recording the scale that maps stored values to
reflectance, and readers honour such a sidecar when present.
"""

import json
from pathlib import Path

import cv2
import numpy as np
import tifffile

from .raster import as_field

PNG_SUFFIXES = {".png"}
TIFF_SUFFIXES = {".tif", ".tiff"}


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def _default_scale(dtype):
    if np.issubdtype(dtype, np.integer):
        return 1.0 / np.iinfo(dtype).max
    return 1.0


def _read_pixels(path):
    suffix = path.suffix.lower()
    if suffix in PNG_SUFFIXES:
        data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if data is None:
            raise ValueError(f"cannot decode image {path}")
        if data.ndim == 3:
            # OpenCV stores colour as BGR(A)
            order = [2, 1, 0] + list(range(3, data.shape[2]))
            data = data[:, :, order]
        return data
    if suffix in TIFF_SUFFIXES:
        data = tifffile.imread(str(path))
        if data.ndim == 3 and data.shape[0] < data.shape[2] and data.shape[0] <= 16:
            data = np.moveaxis(data, 0, -1)
        return data
    raise ValueError(f"unsupported image format {path.suffix!r} ({path})")


def decode_image(data):
    """Decode PNG/TIFF bytes into a ``(H, W, C)`` reflectance raster."""
    buf = np.frombuffer(data, dtype=np.uint8)
    img = cv2.imdecode(buf, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ValueError("payload is not a decodable image")
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
    elif img.shape[2] >= 3:
        img = img[:, :, [2, 1, 0] + list(range(3, img.shape[2]))]
    scale = _default_scale(img.dtype)
    return np.clip(img.astype(np.float64) * scale, 0.0, 1.0)


def encode_png(img, bit_depth=8):
    """PNG bytes for a 1- or 3-band raster."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 3:
        if img.shape[2] != 3:
            raise ValueError(f"PNG encoding needs 1 or 3 bands, got {img.shape[2]}")
        img = img[:, :, ::-1]
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    peak = np.iinfo(dtype).max
    quant = np.round(np.clip(img, 0.0, 1.0) * peak).astype(dtype)
    ok, buf = cv2.imencode(".png", quant)
    if not ok:
        raise ValueError("PNG encoding failed")
    return buf.tobytes()


def read_raster(path, scale=None):
    """Read an image as a float64 ``(H, W, C)`` raster in ``[0, 1]``.

    The scale factor comes from ``scale`` if given, else from a sidecar JSON,
    else from the storage type (``1/255``, ``1/65535``, or 1 for floats).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image: {path}")
    data = _read_pixels(path)
    if scale is None:
        side = sidecar_path(path)
        if side.exists():
            scale = float(json.loads(side.read_text())["scale"])
        else:
            scale = _default_scale(data.dtype)
    img = data.astype(np.float64) * scale
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
    img = np.nan_to_num(img, nan=0.0, posinf=1.0, neginf=0.0)
    return np.clip(img, 0.0, 1.0)


def write_raster(path, img, dtype="float32"):
    """Write a raster; ``dtype`` is ``float32`` (TIFF only), ``uint16`` or ``uint8``."""
    path = Path(path)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
    suffix = path.suffix.lower()
    if dtype == "float32":
        if suffix not in TIFF_SUFFIXES:
            raise ValueError("float32 output requires a .tif/.tiff path")
        stored, scale = img.astype(np.float32), 1.0
    elif dtype in ("uint8", "uint16"):
        peak = np.iinfo(dtype).max
        stored = np.round(np.clip(img, 0.0, 1.0) * peak).astype(dtype)
        scale = 1.0 / peak
    else:
        raise ValueError(f"unsupported dtype {dtype!r}")

    if suffix in TIFF_SUFFIXES:
        tifffile.imwrite(str(path), stored[:, :, 0] if stored.shape[2] == 1 else stored,
                         photometric="minisblack", planarconfig="contig")
    elif suffix in PNG_SUFFIXES:
        if stored.shape[2] not in (1, 3, 4):
            raise ValueError(f"PNG holds 1, 3 or 4 bands, got {stored.shape[2]}")
        out = stored[:, :, 0] if stored.shape[2] == 1 else stored[:, :, [2, 1, 0, 3][:stored.shape[2]]]
        if not cv2.imwrite(str(path), out):
            raise OSError(f"failed to write {path}")
    else:
        raise ValueError(f"unsupported image format {path.suffix!r} ({path})")
    sidecar_path(path).write_text(json.dumps({"scale": scale, "dtype": dtype}, indent=2) + "\n")


def write_field(path, field):
    """Scalar field as single-band float32 TIFF."""
    write_raster(path, as_field(field), dtype="float32")


def read_field(path):
    img = read_raster(path, scale=1.0)
    if img.shape[2] != 1:
        raise ValueError(f"{path} holds {img.shape[2]} bands, expected a scalar field")
    return img[:, :, 0]


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
