"""Exception types shared across the package."""
from __future__ import annotations


class RegkgError(Exception):
    """Base class for all regkg errors."""


class MalformedRecordError(RegkgError):
    def __init__(self, index: int, field: str, detail: str = ""):
        self.index = index
        self.field = field
        msg = f"malformed record {index}: field '{field}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DuplicateCitationError(RegkgError):
    def __init__(self, citation: str, first_index: int, second_index: int):
        self.citation = citation
        self.occurrences = (first_index, second_index)
        super().__init__(
            f"duplicate citation '{citation}' at records {first_index} and {second_index}"
        )


class EmptyEntityError(RegkgError):
    pass


class UnknownSectionError(RegkgError):
    pass


class UnknownSeedError(RegkgError):
    pass


class ConfigError(RegkgError):
    pass


class CorruptStoreError(RegkgError):
    pass


class StoreVersionError(RegkgError):
    """Store files were written by an incompatible format version."""


class UnembeddableTextError(RegkgError):
    pass


class BackendMismatchError(RegkgError):
    """Query and index were embedded by different backends."""


class TransportError(RegkgError):
    """External service call failed after retries."""


class IndexNotBuiltError(RegkgError):
    pass


class IndexBuildError(RegkgError):
    """Index build aborted; failing triplet keys are listed in the message."""


class GenerationError(RegkgError):
    """A generation client returned output the caller could not use."""

