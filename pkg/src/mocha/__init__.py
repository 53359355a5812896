"""Forward-only stereo matching with white-box motif correlation graphs."""
from .core import (
    ConfigError,
    DegenerateGroupError,
    DimensionError,
    DisparityMap,
    FormatError,
    MochaError,
    NumericError,
    SeededGenerator,
    StructureError,
    hadamard,
    seeded_normal,
)
from .pipeline import Pipeline, PipelineConfig, PipelineResult, run_pipeline

__version__ = "0.1.0"
