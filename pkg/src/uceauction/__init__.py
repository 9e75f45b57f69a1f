"""Iterative single-price-path Vickrey auctions over universal competitive
equilibrium prices: auction engines, exact LP machinery, and oracles."""

from .model import (
    Bundle,
    Instance,
    InstanceValidationError,
    MultiUnitValuation,
    ProductMixValuation,
    load_instance,
)
from .auction import run_linear_auction, run_parallel_auction, run_uce_auction

__version__ = "0.1.0"

__all__ = [
    "Bundle",
    "Instance",
    "InstanceValidationError",
    "MultiUnitValuation",
    "ProductMixValuation",
    "load_instance",
    "run_linear_auction",
    "run_parallel_auction",
    "run_uce_auction",
    "__version__",
]
