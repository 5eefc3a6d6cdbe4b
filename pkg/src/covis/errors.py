"""Error types shared across the package.

The CLI maps these onto distinct exit codes, so library code should prefer
DomainError over bare ValueError for contract violations (bad arguments,
mismatched frame counts, empty retrieval pools, ...) and ConfigError for
anything wrong with a configuration file or override.
"""


class DomainError(ValueError):
    """An operation was called outside its domain (precondition violated)."""


class ConfigError(ValueError):
    """A configuration file, key, or override value is invalid."""
