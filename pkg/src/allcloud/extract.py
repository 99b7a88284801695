"""Turn a cloud-free candidate into scattering parameters.

Given the cloudy observation and an image-editing model's candidate, this
module estimates the global atmospheric light, a per-pixel transmission and
a confidence field that is low wherever the candidate disagrees with the
observation, either radiometrically or by inventing fine texture.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .filters import (FilterParams, base_layer, gradient_magnitude, highfreq_intensity,
                      weighted_guided_filter)
from .raster import (as_field, as_light, as_raster, brightness, check_same_grid, percentile,
                     saturation)

logger = logging.getLogger(__name__)

FALLBACK_FRACTION = 0.001


@dataclass(frozen=True)
class SigmoidGate:
    """Logistic gate ``1 / (1 + exp(-slope * (z - center)))``."""

    center: float
    slope: float

    def __post_init__(self):
        if self.slope <= 0:
            raise ValueError("gate slope must be > 0")

    def __call__(self, z):
        return expit(self.slope * (np.asarray(z, dtype=np.float64) - self.center))


@dataclass(frozen=True)
class ExtractionConfig:
    kappa_percentile: float = 0.85
    gate_v: SigmoidGate = field(default_factory=lambda: SigmoidGate(0.65, 12.0))
    gate_s: SigmoidGate = field(default_factory=lambda: SigmoidGate(0.75, 12.0))
    gate_g: SigmoidGate = field(default_factory=lambda: SigmoidGate(-0.05, 60.0))
    eps_t: float = 1e-6
    lambda_percentile: float = 0.75
    lambda_floor: float = 1e-4
    t_clamp: tuple = (0.0, 1.0)

    def __post_init__(self):
        for name in ("kappa_percentile", "lambda_percentile"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.eps_t <= 0:
            raise ValueError("eps_t must be > 0")
        if self.lambda_floor <= 0:
            raise ValueError("lambda_floor must be > 0")
        lo, hi = self.t_clamp
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"t_clamp must be a sub-interval of [0, 1], got {self.t_clamp}")


@dataclass
class ScatterEstimate:
    """Everything :func:`extract` learns about the scene.

    ``transmission`` is the refined field; ``raw_transmission`` is the
    pixel-wise estimate before confidence-weighted refinement.
    """

    light: np.ndarray
    transmission: np.ndarray
    confidence: np.ndarray
    omega_mask: np.ndarray
    residual: np.ndarray
    raw_transmission: np.ndarray
    probability: np.ndarray
    cloudy_base: np.ndarray
    prior_base: np.ndarray
    lambda_phy: float
    lambda_hall: float
    airlight_fallback: bool = False


def cloud_probability(cloudy, cfg=None):
    """Bright, achromatic and flat pixels score close to 1."""
    cfg = cfg or ExtractionConfig()
    cloudy = as_raster(cloudy)
    v = brightness(cloudy)
    s = saturation(cloudy)
    g = gradient_magnitude(v)
    return cfg.gate_v(v) * cfg.gate_s(1.0 - s) * cfg.gate_g(-g)


def estimate_atmospheric_light(cloudy, prob, cfg=None):
    """Per-band median of the cloudy image over its most cloud-like pixels.

    Returns ``(light, mask, fallback)``. The mask holds pixels whose
    probability strictly exceeds the ``kappa_percentile`` of the map. If
    that set is empty (a flat probability map) the brightest 0.1% of pixels
    are used instead and ``fallback`` is True.
    """
    cfg = cfg or ExtractionConfig()
    cloudy = as_raster(cloudy)
    prob = as_field(prob)
    check_same_grid(cloudy, prob)

    kappa = percentile(prob, cfg.kappa_percentile)
    mask = prob > kappa
    fallback = not mask.any()
    if fallback:
        v = brightness(cloudy).ravel()
        k = max(1, int(round(FALLBACK_FRACTION * v.size)))
        # stable sort keeps the choice deterministic under ties
        top = np.argsort(-v, kind="stable")[:k]
        mask = np.zeros(v.size, dtype=bool)
        mask[top] = True
        mask = mask.reshape(prob.shape)
        logger.warning("cloud probability map is flat; airlight taken from the %d brightest pixels", k)
    light = np.median(cloudy[mask], axis=0)
    return light, mask, fallback


def estimate_transmission(cloudy_base, prior_base, light, cfg=None):
    """Project the observed veil offset onto the candidate's offset from airlight."""
    cfg = cfg or ExtractionConfig()
    cloudy_base = as_raster(cloudy_base)
    prior_base = as_raster(prior_base)
    check_same_grid(cloudy_base, prior_base)
    light = as_light(light, cloudy_base.shape[2])

    d_obs = cloudy_base - light
    d_prior = prior_base - light
    t = np.sum(d_obs * d_prior, axis=2) / (np.sum(d_prior * d_prior, axis=2) + cfg.eps_t)
    return np.clip(t, *cfg.t_clamp)


def physical_residual(cloudy_base, prior_base, t, light):
    """Norm over bands of the observation minus its model re-synthesis."""
    cloudy_base = as_raster(cloudy_base)
    prior_base = as_raster(prior_base)
    t = as_field(t)
    check_same_grid(cloudy_base, prior_base, t)
    light = as_light(light, cloudy_base.shape[2])
    tt = t[:, :, np.newaxis]
    resynth = tt * prior_base + (1.0 - tt) * light
    return np.sqrt(np.sum((cloudy_base - resynth) ** 2, axis=2))


def hallucination_confidence(r, h_prior, h_cloudy, cfg=None, return_lambdas=False):
    """Trust in the candidate, in ``(0, 1]``.

    Penalizes the physical residual and any fine texture the candidate has
    in excess of the observation. Both penalties are normalized by their own
    ``lambda_percentile`` value, floored at ``lambda_floor``.
    """
    cfg = cfg or ExtractionConfig()
    r = as_field(r)
    h_prior = as_field(h_prior)
    h_cloudy = as_field(h_cloudy)
    check_same_grid(r, h_prior, h_cloudy)

    excess = np.maximum(0.0, h_prior - h_cloudy)
    lam_phy = max(percentile(r, cfg.lambda_percentile), cfg.lambda_floor)
    lam_hall = max(percentile(excess, cfg.lambda_percentile), cfg.lambda_floor)
    u = np.exp(-r / lam_phy) * np.exp(-excess / lam_hall)
    if return_lambdas:
        return u, lam_phy, lam_hall
    return u


def refine_transmission(t, guide, confidence, params=None, t_clamp=(0.0, 1.0)):
    """Confidence-weighted guided filtering of ``t``, re-clamped."""
    params = params or FilterParams()
    refined = weighted_guided_filter(t, guide, confidence, params.refine_radius, params.refine_eps)
    return np.clip(refined, *t_clamp)


def extract(cloudy, prior, fcfg=None, ecfg=None, base_filter=True):
    """Run the full parameter-extraction chain.

    ``base_filter=False`` skips base-layer decomposition and feeds the raw
    images to the transmission and residual estimates; it exists for oracle
    tests on model-exact inputs.
    """
    fcfg = fcfg or FilterParams()
    ecfg = ecfg or ExtractionConfig()
    cloudy = as_raster(cloudy)
    prior = as_raster(prior)
    if cloudy.shape != prior.shape:
        raise ValueError(f"cloudy {cloudy.shape} and prior {prior.shape} differ in shape")

    v_cloudy = brightness(cloudy)
    if base_filter:
        guide = v_cloudy if fcfg.base_guide == "joint" else None
        cloudy_b = base_layer(cloudy, fcfg, guide)
        prior_b = base_layer(prior, fcfg, guide)
    else:
        cloudy_b, prior_b = cloudy, prior

    prob = cloud_probability(cloudy, ecfg)
    light, mask, fallback = estimate_atmospheric_light(cloudy, prob, ecfg)
    t_raw = estimate_transmission(cloudy_b, prior_b, light, ecfg)
    r = physical_residual(cloudy_b, prior_b, t_raw, light)
    u, lam_phy, lam_hall = hallucination_confidence(
        r, highfreq_intensity(prior), highfreq_intensity(cloudy), ecfg, return_lambdas=True)
    t = refine_transmission(t_raw, v_cloudy, u, fcfg, ecfg.t_clamp)

    return ScatterEstimate(light=light, transmission=t, confidence=u, omega_mask=mask,
                           residual=r, raw_transmission=t_raw, probability=prob,
                           cloudy_base=cloudy_b, prior_base=prior_b, lambda_phy=lam_phy,
                           lambda_hall=lam_hall, airlight_fallback=fallback)
