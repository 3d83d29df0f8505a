"""Random walks on the hierarchical group: exact kernels, potentials, simulation."""
from ._core import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
