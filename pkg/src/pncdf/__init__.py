"""Classic netCDF files with a parallel, collective access API."""
from .access import AccessRequest, Extent, MemoryLayout, flatten_file, flatten_memory, merge_extents
from .codec import FILL_VALUES, MemoryType, decode_values, encode_values
from .dataset import DATA, DEFINE, GLOBAL, UNLIMITED, Dataset, create, open
from .engine import Group, HintSet, IoPlan, spawn
from .errors import *  # noqa: F401,F403
from .format import (
    Attribute,
    Dimension,
    ExternalType,
    Schema,
    Variable,
    compute_layout,
    decode_header,
    encode_header,
)

__version__ = "0.1.0"

__all__ = [
    "AccessRequest", "Extent", "MemoryLayout", "flatten_file", "flatten_memory",
    "merge_extents", "FILL_VALUES", "MemoryType", "decode_values", "encode_values",
    "DATA", "DEFINE", "GLOBAL", "UNLIMITED", "Dataset", "create", "open",
    "Group", "HintSet", "IoPlan", "spawn", "Attribute", "Dimension", "ExternalType",
    "Schema", "Variable", "compute_layout", "decode_header", "encode_header",
]
