"""Exception hierarchy shared across the package.

Everything raised on purpose derives from ConvcommError so the CLI can
map domain failures to exit code 1 and leave genuine bugs loud.
"""


class ConvcommError(Exception):
    """Base class for all domain errors."""


class ConfigurationError(ConvcommError):
    """Invalid configuration value or incompatible tensor shapes."""


class CorpusError(ConvcommError):
    """Transcript / community / word-vector data violates the schema."""


class SamplingError(ConvcommError):
    """No eligible pair or triplet can be drawn from the corpus."""


class TrainingError(ConvcommError):
    """Training cannot start or produced a non-finite loss."""


class ClusteringError(ConvcommError):
    """Fuzzy c-means preconditions violated or objective diverged."""


class EvaluationError(ConvcommError):
    """Metric computation is undefined for the given inputs."""
