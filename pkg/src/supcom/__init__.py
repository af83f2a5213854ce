"""supcom: mine method-comment-issue triples from git history and generate
issue-verified supplementary code comments."""

__version__ = "0.1.0"

from .records import CommentBlock, CommentSentence, CommitInfo, MethodRecord  # noqa: F401
from .issues import IssueLink, IssueReport, IssueSentence  # noqa: F401
from .generation import GeneratedComment, InfoType, RetrievedEvidence  # noqa: F401
