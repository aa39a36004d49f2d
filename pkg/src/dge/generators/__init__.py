from .categorical import CategoricalProduct
from .kde import KernelDensity, silverman_bandwidths
from .mixture import GaussianMixture
from .model import (
    FitDiagnostics,
    GeneratorModel,
    GeneratorSpec,
    dumps,
    fit,
    loads,
    log_density,
    sample,
)

__all__ = [
    "CategoricalProduct",
    "FitDiagnostics",
    "GaussianMixture",
    "GeneratorModel",
    "GeneratorSpec",
    "KernelDensity",
    "dumps",
    "fit",
    "loads",
    "log_density",
    "sample",
    "silverman_bandwidths",
]
