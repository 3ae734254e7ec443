"""Towers over aperiodic subshifts, widim covers and tower-assembled embeddings."""

from .systems import (
    SystemDescriptor,
    admissible_words,
    apply_shift,
    certify_aperiodic,
    fibonacci,
    full_shift,
    golden_rotation,
    product,
    rotation,
    sample_points,
    sft,
    substitution,
)
from .towers import Tower, build_tower, tower_coords

__version__ = "0.1.0"
