"""Forward cloud imaging model and a seeded synthetic scene generator.

The generator produces scenes with known surface, transmission and
atmospheric light, so every estimation stage can be checked against truth.
Randomness comes from ``numpy.random.Generator(PCG64(seed))``; all other
steps are deterministic array operations, so a seed fixes a scene exactly.
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .raster import as_field, as_light, as_raster, check_same_grid

THICK_T = 0.02
THIN_T = (0.3, 0.9)


def forward_degrade(surface, t, light):
    """Cloudy observation ``surface * t + light * (1 - t)``, per band."""
    surface = as_raster(surface)
    t = as_field(t)
    check_same_grid(surface, t)
    if t.min() < 0 or t.max() > 1:
        raise ValueError("transmission must lie in [0, 1]")
    light = as_light(light, surface.shape[2])
    tt = t[:, :, np.newaxis]
    return surface * tt + light * (1.0 - tt)


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for :func:`generate_scene`.

    ``thick_core_fraction`` of the pixels get ``t < 0.02`` and
    ``thin_fraction`` get ``0.3 < t < 0.9``. A quarter of the remainder forms
    the transition ``0.02 <= t <= 0.3`` and the rest is clear sky
    (``t >= 0.9``).
    """

    seed: int = 0
    size: int = 256
    bands: int = 3
    thick_core_fraction: float = 0.1
    thin_fraction: float = 0.4
    hallucination_amplitude: float = 0.05
    hallucination_hf_gain: float = 0.15
    ref_gain: float = 1.15
    ref_offset: float = 0.03
    airlight: float = 0.9

    def __post_init__(self):
        for name in ("thick_core_fraction", "thin_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.thick_core_fraction + self.thin_fraction > 1.0:
            raise ValueError("thick_core_fraction + thin_fraction must be <= 1")
        if self.size < 32:
            raise ValueError(f"size must be >= 32, got {self.size}")
        if self.bands < 1:
            raise ValueError("bands must be >= 1")
        if self.hallucination_amplitude < 0 or self.hallucination_hf_gain < 0:
            raise ValueError("hallucination parameters must be >= 0")
        if not 0.0 < self.airlight <= 1.0:
            raise ValueError("airlight must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass
class SceneTruth:
    surface: np.ndarray
    transmission: np.ndarray
    light: np.ndarray
    cloudy: np.ndarray
    prior: np.ndarray
    reference: np.ndarray
    config: SynthConfig


def _smooth_noise(rng, shape, sigma):
    """Zero-mean, unit-std Gaussian-filtered white noise."""
    n = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return (n - n.mean()) / n.std()


def _surface(rng, size, bands):
    shared = (0.55 * _smooth_noise(rng, (size, size), size / 10)
              + 0.30 * _smooth_noise(rng, (size, size), 4.0)
              + 0.15 * _smooth_noise(rng, (size, size), 1.0))
    means = rng.uniform(0.15, 0.35, bands)
    spreads = rng.uniform(0.06, 0.10, bands)
    out = np.empty((size, size, bands))
    for c in range(bands):
        own = _smooth_noise(rng, (size, size), 6.0)
        out[:, :, c] = means[c] + spreads[c] * (shared + 0.4 * own)
    return np.clip(out, 0.02, 0.7)


def _cloud_density(rng, size):
    """Smoothed sum of Gaussian blobs, higher means thicker cloud."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    density = np.zeros((size, size))
    for _ in range(int(rng.integers(4, 8))):
        cy, cx = rng.uniform(0, size, 2)
        sigma = rng.uniform(size / 14, size / 6)
        amp = rng.uniform(0.6, 1.0)
        density += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
    density += 0.08 * _smooth_noise(rng, (size, size), size / 16)
    return ndimage.gaussian_filter(density, 2.0, mode="nearest")


def _transmission(density, cfg):
    """Monotone map from density to t that hits the configured fractions.

    Optical depth is piecewise linear in density between quantile knots and
    ``t = exp(-depth)``, so transmission decays exponentially into the cores.
    """
    thick = cfg.thick_core_fraction
    thin = cfg.thin_fraction
    transition = 0.25 * (1.0 - thick - thin)
    clear = 1.0 - thick - thin - transition

    def depth(t):
        return -np.log(t)

    # (fraction of pixels at or below the knot, optical depth at the knot)
    knots = [
        (0.0, 0.0),
        (clear / 2, depth(0.99)),
        (clear, depth(0.9)),
        (clear + thin, depth(0.3)),
        (clear + thin + transition, depth(0.0199) if thick > 0 else depth(0.025)),
        (1.0, 8.0),
    ]
    dens_sorted = np.sort(density.ravel())
    n = dens_sorted.size
    xs, ys = [], []
    for frac, tau in knots:
        x = dens_sorted[min(int(round(frac * n)), n - 1)]
        if xs and x <= xs[-1]:
            continue
        xs.append(x)
        ys.append(tau)
    return np.exp(-np.interp(density, xs, ys))


def generate_scene(cfg=None):
    """Build a synthetic cloudy scene with its ground truth.

    The prior emulates an image-editing model: the true surface plus a
    low-frequency colour cast everywhere and spurious fine texture that
    concentrates where the cloud is thick (``t < 0.3``). The reference is an
    exact affine transform of the surface.
    """
    cfg = cfg or SynthConfig()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    size, bands = cfg.size, cfg.bands

    surface = _surface(rng, size, bands)
    t = _transmission(_cloud_density(rng, size), cfg)
    light = as_light(cfg.airlight, bands)
    cloudy = forward_degrade(surface, t, light)

    cast = np.stack([_smooth_noise(rng, (size, size), size / 6) for _ in range(bands)], axis=2)
    cast *= cfg.hallucination_amplitude / np.abs(cast).max()
    hf_shared = _smooth_noise(rng, (size, size), 0.8)
    hf = np.stack([hf_shared + 0.5 * _smooth_noise(rng, (size, size), 0.8)
                   for _ in range(bands)], axis=2)
    hf_mask = np.clip((0.3 - t) / 0.3, 0.0, 1.0)[:, :, np.newaxis]
    prior = np.clip(surface + cast + cfg.hallucination_hf_gain * hf_mask * hf / 1.5, 0.0, 1.0)

    reference = np.clip(cfg.ref_gain * surface + cfg.ref_offset, 0.0, 1.0)
    return SceneTruth(surface=surface, transmission=t, light=light, cloudy=cloudy,
                      prior=prior, reference=reference, config=cfg)
