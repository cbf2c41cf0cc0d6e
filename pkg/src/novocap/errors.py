"""Exception types shared across the package.

Domain errors (bad input files, malformed worlds, incompatible checkpoints)
derive from NovocapError so the CLI can map them to exit code 1. Programmer
errors keep their builtin types: IndexError for out-of-range token ids,
KeyError for unknown tokens, ValueError for bad arguments.
"""


class NovocapError(Exception):
    """Base class for recoverable domain errors."""


class DimensionError(NovocapError):
    """Tensor shapes incompatible with the requested operation."""


class EmbeddingFormatError(NovocapError):
    """Malformed embedding file; message carries the offending line number."""


class MissingEmbeddingError(NovocapError):
    """A vocabulary token has no row in the embedding file."""


class WorldSpecError(NovocapError):
    """Synthetic world parameters violate a generation precondition."""


class SplitError(NovocapError):
    """Held-out split cannot be built (e.g. too few test images)."""


class ConfigError(NovocapError):
    """Bad key or value in a run-configuration file."""


class CheckpointError(NovocapError):
    """Checkpoint missing, corrupt, or incompatible with the vocabulary."""


class DataFileError(NovocapError):
    """Malformed dataset file; message carries path and line number."""
