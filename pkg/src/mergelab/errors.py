"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, the data errors
(SchemaError, IntegrityError, DomainError, MapParseError) -> 3, anything
else -> 4.
"""


class MergelabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MergelabError):
    """Invalid run configuration or layout file."""


class SchemaError(MergelabError):
    """An input table is missing a mandatory column."""


class IntegrityError(MergelabError):
    """Input data violates a structural invariant (gaps, dangling ids)."""


class DomainError(MergelabError):
    """An argument lies outside an operation's defined domain."""


class MapParseError(MergelabError):
    """A map file could not be parsed."""
