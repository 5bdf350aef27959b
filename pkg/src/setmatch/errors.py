"""Exception hierarchy for the setmatch engine."""


class SetMatchError(Exception):
    """Base class for all setmatch errors."""


# --- embedding / archive ---

class ZeroVector(SetMatchError):
    """Vector cannot be normalized (all-zero or non-finite entries)."""


class DimMismatch(SetMatchError):
    """Vectors of incompatible dimension were combined."""


class IoFailure(SetMatchError):
    """Underlying byte sink/stream failed."""


class BadMagic(SetMatchError):
    """Archive does not start with the expected magic bytes."""


class UnsupportedVersion(SetMatchError):
    """Archive version or dtype tag is not supported."""


class TruncatedPayload(SetMatchError):
    """Archive ended before the declared payload was read."""


class NormViolation(SetMatchError):
    """Stored vector is not unit-norm within tolerance (strict mode)."""


class NormViolationWarning(UserWarning):
    """Stored vector is not unit-norm within tolerance (default mode)."""


# --- optimal transport ---

class NonFiniteCost(SetMatchError):
    """Cost matrix contains NaN or Inf entries."""


class Degenerate(SetMatchError):
    """Transport problem has an empty side (M=0 or N=0)."""


class TooLarge(SetMatchError):
    """Exact solver invoked beyond its M*N <= 64 test-oracle bound."""


class NonUniformMarginals(SetMatchError):
    """Exact solver supports only uniform (1/M, 1/N) marginals."""


# --- classifiers / cache ---

class EmptyClassList(SetMatchError):
    """No candidate classes were supplied."""


class EmptyDescriptorSet(SetMatchError):
    """A class has no descriptor embeddings."""


class EmptyInput(SetMatchError):
    """Operation requires a non-empty feature or prompt set."""


class MissingPromptSet(SetMatchError):
    """A training label has no descriptor-only prompt set."""


class KeyMismatch(SetMatchError):
    """Class keys of caches and descriptor sets disagree."""


# --- diagnostics ---

class EmptySuite(SetMatchError):
    """Prompt suite or test set is empty."""


class NoHybrids(SetMatchError):
    """Suite has no hybrid prompts."""


class MissingCrossHybrids(SetMatchError):
    """A class lacks the cross hybrids needed for similarity deltas."""
