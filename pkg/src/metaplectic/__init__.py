"""Integral representations of metaplectic and generalized metaplectic operators."""

__version__ = "0.1.0"

from .errors import MetaplecticError  # noqa: E402
from .grid import GridSignal, GridSpec  # noqa: E402
from .symplectic import BlockSymplectic, Subspace, from_matrix, make_symplectic  # noqa: E402

__all__ = ["BlockSymplectic", "GridSignal", "GridSpec", "MetaplecticError", "Subspace",
           "from_matrix", "make_symplectic", "__version__"]
