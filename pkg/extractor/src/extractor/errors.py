"""Error taxonomy. DataError maps to exit code 2 in the CLI."""


class ExtractorError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ExtractorError):
    """Invalid input: bad images, mismatched prompts, malformed job."""


class UnknownBackboneError(DataError):
    """Requested backbone id is not in the registry."""


class BackboneUnavailableError(ExtractorError):
    """Backbone is registered but its pretrained weights are not installed."""
