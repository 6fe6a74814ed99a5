"""Exact and multi-resolution dynamic mode decomposition of snapshot data."""
from .dmd import DmdResult, SnapshotMatrix, background_foreground_split, fit, reconstruct
from .errors import (
    FormatError,
    InvalidInputError,
    MrdmdError,
    NodeLookupError,
    NumericalError,
    ParameterError,
    RankDeficiencyError,
    WindowTooSmallError,
)
from .multires import MrdmdConfig, MrdmdNode, MrdmdTree, decompose, evaluate, mode_at, spectrum_map

__version__ = "0.1.0"

__all__ = [
    "DmdResult",
    "SnapshotMatrix",
    "background_foreground_split",
    "fit",
    "reconstruct",
    "MrdmdConfig",
    "MrdmdNode",
    "MrdmdTree",
    "decompose",
    "evaluate",
    "mode_at",
    "spectrum_map",
    "MrdmdError",
    "InvalidInputError",
    "ParameterError",
    "WindowTooSmallError",
    "NumericalError",
    "RankDeficiencyError",
    "NodeLookupError",
    "FormatError",
]
