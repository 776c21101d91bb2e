"""Anti-aliased light field reconstruction by shearing, downscaling and prefiltering."""
from .kernels import BACKEND
from .lightfield import DisparityRange, Epi, LightField4D, Provenance

__version__ = "0.1.0"

__all__ = ["BACKEND", "DisparityRange", "Epi", "LightField4D", "Provenance", "__version__"]
