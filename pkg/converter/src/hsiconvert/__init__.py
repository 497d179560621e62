"""MAT-file hyperspectral dataset converter."""

from .convert import (
    SALINAS_WATER_BANDS,
    ConversionSpec,
    ShapeMismatch,
    UnreadableInput,
    convert,
)

__version__ = "0.1.0"

__all__ = [
    "SALINAS_WATER_BANDS",
    "ConversionSpec",
    "ShapeMismatch",
    "UnreadableInput",
    "convert",
]
