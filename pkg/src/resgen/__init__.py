"""Synthetic 3-D resistivity voxel models for electromagnetic deep learning."""
__version__ = "0.1.0"

from .core import (AnomalyDescriptor, AnomalyKind, GridSpec, ModelCategory, ModelRecord,
                   VoxelGrid, clamp_resistivity, voxel_center)
from .errors import (ConfigError, FormatError, OutputError, ResgenError, SamplingError,
                     ValidationError)
from .pipeline import GenerationConfig, derive_model_seed, generate_batch, generate_model
from .special import VonKarmanParams, bessel_k, von_karman_cov

__all__ = [
    "AnomalyDescriptor", "AnomalyKind", "ConfigError", "FormatError", "GenerationConfig",
    "GridSpec", "ModelCategory", "ModelRecord", "OutputError", "ResgenError", "SamplingError",
    "ValidationError", "VonKarmanParams", "VoxelGrid", "bessel_k", "clamp_resistivity",
    "derive_model_seed", "generate_batch", "generate_model", "von_karman_cov", "voxel_center",
]
