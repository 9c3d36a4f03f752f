"""Exception types shared across the package."""


class FeedtrapError(Exception):
    """Base class for all feedtrap errors."""


class InputError(FeedtrapError):
    """Bad user-supplied input (files, meshes, records, catalogs)."""


class MeshError(InputError):
    """Malformed mesh data or unusable geometry."""


class RecordError(InputError):
    """Malformed classification records."""


class CatalogError(InputError):
    """Malformed or invalid trap catalog."""


class SearchCapExceeded(FeedtrapError):
    """Design search space exceeds the configured candidate cap."""

    def __init__(self, message: str, size: int):
        super().__init__(message)
        self.size = size
