"""Copula-based competing-risks models with proportional hazards."""
from .copulas import CopulaSpec, Family
from .data import Dataset, read_dataset, write_dataset
from .hazards import MarginalHazardSpec
from .sampler import DgpConfig, sample_dataset
from .structural import ReducedFormParams, StructuralParams

__version__ = "0.1.0"
