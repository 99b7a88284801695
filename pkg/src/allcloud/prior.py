"""Where the cloud-free candidate comes from.

The candidate is produced by an external image-editing model. It either
already sits on disk, or is requested from an HTTP endpoint with a single
multipart POST carrying the cloudy image and a text prompt; the response body
is the edited image.
"""

import logging
import os
from dataclasses import dataclass

import cv2
import numpy as np
import requests

from .io import decode_image, encode_png, read_raster
from .raster import as_raster

logger = logging.getLogger(__name__)

DEFAULT_PROMPT = "remove cloud"
TOKEN_ENV = "ALLCLOUD_PRIOR_TOKEN"


class PriorError(RuntimeError):
    """The candidate could not be obtained or does not fit the scene."""


@dataclass(frozen=True)
class PriorSpec:
    mode: str
    path: str | None = None
    endpoint: str | None = None
    prompt: str = DEFAULT_PROMPT
    timeout: float = 300.0
    bit_depth: int = 8

    def __post_init__(self):
        if self.mode == "file":
            if not self.path or self.endpoint:
                raise ValueError("file mode needs a path and no endpoint")
        elif self.mode == "remote":
            if not self.endpoint or self.path:
                raise ValueError("remote mode needs an endpoint and no path")
        else:
            raise ValueError(f"mode must be 'file' or 'remote', got {self.mode!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.bit_depth not in (8, 16):
            raise ValueError("bit_depth must be 8 or 16")


def _resize_bilinear(img, height, width):
    out = cv2.resize(img.astype(np.float32), (width, height), interpolation=cv2.INTER_LINEAR)
    if out.ndim == 2:
        out = out[:, :, np.newaxis]
    return out.astype(np.float64)


def _fetch_remote(spec, cloudy):
    bands = cloudy.shape[2]
    if bands not in (1, 3):
        raise PriorError(f"remote candidates need a 1- or 3-band image, got {bands}; use file mode")
    headers = {}
    token = os.environ.get(TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    payload = encode_png(cloudy, spec.bit_depth)
    try:
        resp = requests.post(spec.endpoint,
                             files={"image": ("cloudy.png", payload, "image/png")},
                             data={"prompt": spec.prompt},
                             headers=headers, timeout=spec.timeout)
    except requests.RequestException as exc:
        raise PriorError(f"request to {spec.endpoint} failed: {exc}") from exc
    if not 200 <= resp.status_code < 300:
        raise PriorError(f"{spec.endpoint} returned HTTP {resp.status_code}: {resp.text[:200]!r}")
    try:
        img = decode_image(resp.content)
    except ValueError as exc:
        raise PriorError(f"undecodable response from {spec.endpoint}: {exc}") from exc

    if img.shape[2] == bands + 1 == 4:
        img = img[:, :, :3]
    if img.shape[2] == 3 and bands == 1:
        img = img.max(axis=2, keepdims=True)
    if img.shape[:2] != cloudy.shape[:2]:
        logger.info("resampling candidate from %s to %s", img.shape[:2], cloudy.shape[:2])
        img = _resize_bilinear(img, *cloudy.shape[:2])
    return img


def acquire_prior(spec, cloudy):
    """Return the candidate raster, aligned to ``cloudy``'s grid, in ``[0, 1]``."""
    cloudy = as_raster(cloudy)
    if spec.mode == "file":
        img = read_raster(spec.path)
    else:
        img = _fetch_remote(spec, cloudy)
    if img.shape != cloudy.shape:
        raise PriorError(f"candidate shape {img.shape} does not match cloudy image {cloudy.shape}")
    return np.clip(img, 0.0, 1.0)
