"""Cloud removal guided by an image-editing model's candidate and a physical scattering model."""

__version__ = "0.1.0"

from .extract import ExtractionConfig, ScatterEstimate, SigmoidGate, extract
from .filters import FilterParams
from .metrics import QualityReport, evaluate, psnr, ssim
from .restore import RestorationBundle, RestoreConfig, run_pipeline
from .scattering import SceneTruth, SynthConfig, forward_degrade, generate_scene

__all__ = [
    "ExtractionConfig", "FilterParams", "QualityReport", "RestorationBundle", "RestoreConfig",
    "ScatterEstimate", "SceneTruth", "SigmoidGate", "SynthConfig", "evaluate", "extract",
    "forward_degrade", "generate_scene", "psnr", "run_pipeline", "ssim",
]
