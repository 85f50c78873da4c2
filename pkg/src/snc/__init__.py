"""Sparse network coding: codec, analytical model, tuning and simulation."""

from .codec import Mode, SncParams
from .gf import FieldSpec, field

__all__ = ["FieldSpec", "Mode", "SncParams", "field"]
__version__ = "0.1.0"
