"""scoring-service: HTTP endpoints for sentence embeddings and code-comment
alignment scores."""

__version__ = "0.1.0"

from .app import create_app  # noqa: F401
from .backends import HashingBackend, SbertBackend  # noqa: F401
