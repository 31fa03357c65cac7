"""Exception types shared across the package.

Every failure mode a caller is expected to handle has its own class so
tests and the CLI can branch on type rather than message text.
"""


class ZerebroError(Exception):
    """Base class for all package errors."""


# --- embedding / text ------------------------------------------------------

class EmptyTextError(ZerebroError):
    """Text was empty or whitespace-only where content is required."""


class BadConfigError(ZerebroError):
    """A configuration object violates its invariants."""


class DimensionMismatchError(ZerebroError):
    """Vectors (or a vector and a store) disagree on dimensionality."""


# --- diversity metrics -----------------------------------------------------

class EmptyHistogramError(ZerebroError):
    """Histogram has no mass."""


class NoNgramsError(ZerebroError):
    """Every sequence in the corpus is shorter than the n-gram size."""


class TooFewVectorsError(ZerebroError):
    """Dispersion needs at least two vectors."""


class EmptySamplesError(ZerebroError):
    """Tail mass needs at least one sample."""


# --- persistence -----------------------------------------------------------

class IoFailureError(ZerebroError):
    """Underlying file read/write failed."""


class CorruptSnapshotError(ZerebroError):
    """Snapshot failed its checksum or structural validation."""


class CorruptLogError(ZerebroError):
    """Event log offsets are not dense, or a line failed to parse."""


# --- collapse lab ----------------------------------------------------------

class DegenerateFitError(ZerebroError):
    """All samples identical: the Gaussian refit has zero variance."""


# --- agent loop ------------------------------------------------------------

class NoGeneratorError(ZerebroError):
    """Planning was requested without a configured text generator."""


# --- platform connectors ---------------------------------------------------

class TooLongError(ZerebroError):
    """Content exceeds the connector's length limit."""


class ConnectorDownError(ZerebroError):
    """The connector is in an injected outage."""


class UnknownPostError(ZerebroError):
    """No post with that id exists on the connector."""


# --- simulated chain -------------------------------------------------------

class InsufficientFundsError(ZerebroError):
    """Wallet balance cannot cover the requested amount."""


class DuplicateArtError(ZerebroError):
    """Art with this content hash has already been minted."""


class SymbolTakenError(ZerebroError):
    """A token with this symbol is already deployed."""


class BadSymbolError(ZerebroError):
    """Token symbol is not 1-10 uppercase ASCII letters."""


class NotOwnerError(ZerebroError):
    """Seller does not own the asset being sold."""
