"""Exception hierarchy shared across the pipeline."""


class SupcomError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(SupcomError):
    """Bad or inconsistent configuration / unknown config keys."""


class RepoError(SupcomError):
    """Repository unreadable or git plumbing failed. Fatal for mining."""


class IssueValidationError(SupcomError):
    """Issue source is missing required fields (at minimum the key)."""


class IssueNotFoundError(SupcomError):
    """Tracker reports the issue key does not exist."""


class TransientServiceError(SupcomError):
    """Retryable transport/5xx/429 failure from an external service."""

    def __init__(self, message: str, retries_exhausted: bool = False):
        super().__init__(message)
        self.retries_exhausted = retries_exhausted


class ProviderError(SupcomError):
    """Non-retryable provider failure (bad response, missing mock fixture)."""


class EmbeddingError(SupcomError):
    """Invalid embedding input or incompatible vectors."""


class ReportError(SupcomError):
    """Evaluation report cannot be computed or written."""
