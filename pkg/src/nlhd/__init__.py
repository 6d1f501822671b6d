"""Pixel-level non-local Haar decomposition for low-light image enhancement."""
from ._accel import backend_name, set_threads
from .config import PipelineConfig, load_config
from .decompose import DecompositionResult, decompose, decompose_pass
from .image import load_image, save_image
from .metrics import delta_e, loe, psnr, ssim
from .pipeline import enhance_pipeline, run_batch

__version__ = "0.1.0"

__all__ = [
    "DecompositionResult",
    "PipelineConfig",
    "backend_name",
    "decompose",
    "decompose_pass",
    "delta_e",
    "enhance_pipeline",
    "load_config",
    "load_image",
    "loe",
    "psnr",
    "run_batch",
    "save_image",
    "set_threads",
    "ssim",
]
