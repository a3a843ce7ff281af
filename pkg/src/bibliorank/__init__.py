"""Field-normalized bibliometric indicators, institution rankings, and
robustness analyses of subset-based research assessment."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
