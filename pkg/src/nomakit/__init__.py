"""Link-level simulation and achievable-rate tools for NOMA and RSMA."""

from .constellation import (Constellation, PowerSplit, SuperConstellation, distinct_count,
                            make_standard, min_distance, rotate, superimpose)

__all__ = [
    "Constellation",
    "PowerSplit",
    "SuperConstellation",
    "distinct_count",
    "make_standard",
    "min_distance",
    "rotate",
    "superimpose",
]

__version__ = "0.1.0"
