"""Merging-behavior analysis toolkit anchored to lanelet2 HD maps.

Parses lanelet2 maps and drone trajectory recordings, segments on-ramp
merges into key positions, classifies the eight neighbor scenarios,
computes microscopic and macroscopic traffic indicators, and compares
scenario populations statistically.  Every batch run emits a manifest
sufficient to reproduce its outputs byte for byte.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    IntegrityError,
    MapParseError,
    MergelabError,
    SchemaError,
)

__all__ = [
    "__version__",
    "MergelabError",
    "ConfigError",
    "SchemaError",
    "IntegrityError",
    "DomainError",
    "MapParseError",
]
