"""Physical inversion, cognitive adjustment and soft-gated temporal fusion."""

import logging
from dataclasses import dataclass

import numpy as np

from .extract import ExtractionConfig, ScatterEstimate, extract
from .filters import FilterParams, lowpass
from .raster import as_field, as_light, as_raster, check_same_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RestoreConfig:
    """Restoration gains.

    Attributes:
        t0: transmission floor used when inverting the imaging model
        alpha: gain of the low-frequency pull toward the candidate
        beta: gain of the observed high-frequency detail re-injection
        gamma: extinction sensitivity of the visibility weight
        align_omega_threshold: visibility above which pixels drive the
            reference alignment fit
        align_min_pixels: minimum fit support before falling back to identity
    """

    t0: float = 0.1
    alpha: float = 0.6
    beta: float = 1.0
    gamma: float = 4.0
    align_omega_threshold: float = 0.9
    align_min_pixels: int = 500

    def __post_init__(self):
        if not 0.0 < self.t0 < 1.0:
            raise ValueError("t0 must lie in (0, 1)")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not 0.0 < self.align_omega_threshold < 1.0:
            raise ValueError("align_omega_threshold must lie in (0, 1)")
        if self.align_min_pixels < 2:
            raise ValueError("align_min_pixels must be >= 2")


@dataclass
class AlignParams:
    gain: np.ndarray
    offset: np.ndarray
    support: int
    fallback: bool


@dataclass
class RestorationBundle:
    """All intermediate and final products of :func:`run_pipeline`.

    ``mode`` is ``"fused"`` when a temporal reference was used and
    ``"reference-free"`` otherwise, in which case ``final`` is ``j_cog`` and
    ``ref_aligned``/``align_params`` are None.
    """

    prior: np.ndarray
    estimate: ScatterEstimate
    j_phy: np.ndarray
    j_cog: np.ndarray
    omega: np.ndarray
    ref_aligned: np.ndarray | None
    final: np.ndarray
    align_params: AlignParams | None
    mode: str


def invert_scattering(cloudy, t, light, cfg=None):
    """Invert the imaging model with the transmission floored at ``t0``."""
    cfg = cfg or RestoreConfig()
    cloudy = as_raster(cloudy)
    t = as_field(t)
    check_same_grid(cloudy, t)
    light = as_light(light, cloudy.shape[2])
    tt = np.maximum(t, cfg.t0)[:, :, np.newaxis]
    return np.clip((cloudy - light) / tt + light, 0.0, 1.0)


def cognitive_adjust(j_phy, prior, cloudy, t, confidence, fcfg=None, cfg=None):
    """Pull the low frequencies toward the candidate, re-inject observed detail.

    The candidate only contributes below the low-pass cut-off, scaled by its
    confidence; above it, the observation's own detail is added back in
    proportion to transmission.
    """
    fcfg = fcfg or FilterParams()
    cfg = cfg or RestoreConfig()
    j_phy = as_raster(j_phy)
    prior = as_raster(prior)
    cloudy = as_raster(cloudy)
    t = as_field(t)
    u = as_field(confidence)
    check_same_grid(j_phy, prior, cloudy, t, u)

    sigma = fcfg.lp_sigma
    cognitive = (lowpass(prior, sigma) - lowpass(j_phy, sigma)) * u[:, :, np.newaxis]
    detail = (cloudy - lowpass(cloudy, sigma)) * t[:, :, np.newaxis]
    return np.clip(j_phy + cfg.alpha * cognitive + cfg.beta * detail, 0.0, 1.0)


def visibility_weight(t, cfg=None):
    """``exp(-gamma * (1 - t))``: 1 in clear sky, ``exp(-gamma)`` under full cover."""
    cfg = cfg or RestoreConfig()
    return np.exp(-cfg.gamma * (1.0 - as_field(t)))


def align_reference(reference, j_cog, omega, cfg=None):
    """Per-band least-squares gain and offset mapping the reference onto ``j_cog``.

    Only pixels with visibility above ``align_omega_threshold`` enter the fit.
    With fewer than ``align_min_pixels`` of them the identity mapping is used
    and ``AlignParams.fallback`` is set.
    """
    cfg = cfg or RestoreConfig()
    reference = as_raster(reference)
    j_cog = as_raster(j_cog)
    omega = as_field(omega)
    check_same_grid(reference, j_cog, omega)
    if reference.shape != j_cog.shape:
        raise ValueError(f"reference {reference.shape} and scene {j_cog.shape} differ in shape")

    bands = reference.shape[2]
    select = omega > cfg.align_omega_threshold
    support = int(select.sum())
    if support < cfg.align_min_pixels:
        logger.warning("only %d high-visibility pixels (need %d); reference left unaligned",
                       support, cfg.align_min_pixels)
        params = AlignParams(np.ones(bands), np.zeros(bands), support, True)
        return reference.copy(), params

    gain = np.empty(bands)
    offset = np.empty(bands)
    for c in range(bands):
        x = reference[:, :, c][select]
        y = j_cog[:, :, c][select]
        design = np.column_stack([x, np.ones_like(x)])
        (gain[c], offset[c]), *_ = np.linalg.lstsq(design, y, rcond=None)
    aligned = np.clip(reference * gain + offset, 0.0, 1.0)
    return aligned, AlignParams(gain, offset, support, False)


def fuse(j_cog, ref_aligned, omega):
    """Visibility-weighted blend of the restored scene and the reference."""
    j_cog = as_raster(j_cog)
    ref_aligned = as_raster(ref_aligned)
    omega = as_field(omega)
    check_same_grid(j_cog, ref_aligned, omega)
    w = omega[:, :, np.newaxis]
    return w * j_cog + (1.0 - w) * ref_aligned


def restore(cloudy, prior, reference, estimate, fcfg=None, rcfg=None):
    """Restoration stages given already extracted scattering parameters.

    ``estimate`` needs ``light``, ``transmission`` and ``confidence``
    attributes; a :class:`ScatterEstimate` or anything reloaded from dumps.
    """
    fcfg = fcfg or FilterParams()
    rcfg = rcfg or RestoreConfig()
    cloudy = as_raster(cloudy)
    prior = as_raster(prior)
    t = estimate.transmission

    j_phy = invert_scattering(cloudy, t, estimate.light, rcfg)
    j_cog = cognitive_adjust(j_phy, prior, cloudy, t, estimate.confidence, fcfg, rcfg)
    omega = visibility_weight(t, rcfg)
    if reference is None:
        return RestorationBundle(prior=prior, estimate=estimate, j_phy=j_phy, j_cog=j_cog,
                                 omega=omega, ref_aligned=None, final=j_cog,
                                 align_params=None, mode="reference-free")
    reference = as_raster(reference)
    if reference.shape != cloudy.shape:
        raise ValueError(f"reference {reference.shape} and cloudy {cloudy.shape} differ in shape")
    ref_aligned, params = align_reference(reference, j_cog, omega, rcfg)
    final = fuse(j_cog, ref_aligned, omega)
    return RestorationBundle(prior=prior, estimate=estimate, j_phy=j_phy, j_cog=j_cog,
                             omega=omega, ref_aligned=ref_aligned, final=final,
                             align_params=params, mode="fused")


def run_pipeline(cloudy, prior, reference=None, fcfg=None, ecfg=None, rcfg=None):
    """Extract parameters from the candidate and restore the scene.

    Pass ``reference=None`` for reference-free mode: fusion is skipped and the
    cognitively adjusted image is returned as final.
    """
    fcfg = fcfg or FilterParams()
    ecfg = ecfg or ExtractionConfig()
    rcfg = rcfg or RestoreConfig()
    cloudy = as_raster(cloudy)
    prior = as_raster(prior)
    if prior.shape != cloudy.shape:
        raise ValueError(f"prior {prior.shape} and cloudy {cloudy.shape} differ in shape")
    estimate = extract(cloudy, prior, fcfg, ecfg)
    return restore(cloudy, prior, reference, estimate, fcfg, rcfg)
