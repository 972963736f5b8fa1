"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-status contract:
0 success, 1 usage error, 2 data/format error, 3 numerical failure.
"""


class EdgeSRError(Exception):
    """Base class for all package errors."""


class DimensionError(EdgeSRError):
    """Tensor/image axes do not line up for the requested operation."""


class DomainError(EdgeSRError):
    """A value is outside the documented domain (e.g. BCE target not in [0,1])."""


class UsageError(EdgeSRError):
    """Bad invocation: unknown flags, inconsistent flag/checkpoint combinations."""


class DataError(EdgeSRError):
    """Missing or mismatched data files."""


class FormatError(EdgeSRError):
    """A serialized artifact (checkpoint, config, manifest) failed to parse."""


class NumericalError(EdgeSRError):
    """NaN/Inf detected where the contract demands finite values."""
