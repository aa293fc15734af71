"""Exception types shared across the service."""


class TandemError(Exception):
    """Base class for all service errors."""


class PreconditionError(TandemError):
    """An operation was invoked in a state that violates its contract."""


class ModelError(TandemError):
    """The model backend failed after exhausting retries (or on a 4xx)."""


class KernelStartError(TandemError):
    """The execution kernel could not be spawned or failed its handshake."""


class KernelProtocolError(TandemError):
    """The kernel wire protocol was violated; the kernel was restarted."""


class IngestError(TandemError):
    """A dataset could not be parsed (unreadable, oversized, ragged rows)."""


class ProfileError(TandemError):
    """A table cannot be profiled (e.g. zero columns)."""


class EmbedError(TandemError):
    """The embedding backend failed; no partial match is returned."""


class DimensionError(TandemError):
    """Vector or sequence lengths do not agree."""


class DegenerateVectorError(TandemError):
    """Cosine similarity was asked about an all-zero vector."""


class DomainError(TandemError):
    """Numeric inputs outside the operation's domain (e.g. zero divisor)."""


class NotFoundError(TandemError):
    """Unknown session, entry, or artifact id."""


class ConflictError(TandemError):
    """A uniqueness or serialization constraint was violated."""


class EmptyHistoryError(TandemError):
    """Report generation needs at least one completed turn."""


class ReportError(TandemError):
    """Report generation failed at the model backend."""
