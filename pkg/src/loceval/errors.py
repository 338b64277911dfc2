"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: scorepack format errors and OSError are
I/O failures (exit 1), score-map / annotation / value errors are validation
failures (exit 2), anything else is internal (exit 3).
"""


class LocevalError(Exception):
    """Base class for all toolkit errors."""


# --- score maps ---------------------------------------------------------


class ScoreMapError(LocevalError):
    """Score-map data violates an invariant (shape, finiteness, range)."""


class NegativeValues(ScoreMapError):
    """Max-normalization applied to a map containing negative values."""


class InvalidSigma(LocevalError):
    """Gaussian sigma must be strictly positive."""


# --- metrics ------------------------------------------------------------


class EmptyGroundTruth(LocevalError):
    """An evaluated image has no ground-truth boxes."""


class NoForegroundPixels(LocevalError):
    """No foreground pixels in the pooled evaluation stream."""


class NoPixels(LocevalError):
    """Every pixel in the pooled evaluation stream is ignored."""


class EmptyCategorySet(LocevalError):
    """A mean over categories was requested with zero categories."""


# --- scorepack I/O ------------------------------------------------------


class PackError(LocevalError):
    """Base class for scorepack read/write failures."""


class BadMagic(PackError):
    """File does not start with the scorepack magic bytes."""


class UnsupportedVersion(PackError):
    """Scorepack format version not understood by this reader."""


class TruncatedRecord(PackError):
    """Scorepack ends mid-record or disagrees with its record count."""


class DuplicateId(PackError):
    """The same image id appears more than once in a scorepack."""


# --- annotations and manifests -----------------------------------------


class AnnotationError(LocevalError):
    """Base class for manifest / annotation problems."""


class MalformedLine(AnnotationError):
    """A manifest or box-file line does not parse."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class OutOfBounds(AnnotationError):
    """A box lies outside its image extent."""


class UnknownImage(AnnotationError):
    """An image id is not present in the governing manifest."""


class MissingMask(AnnotationError):
    """No mask file found for a manifest image."""


class DimensionMismatch(AnnotationError):
    """A mask's dimensions disagree with the manifest."""


class InvalidMaskValue(AnnotationError):
    """A mask pixel holds a value other than 0, 255, or 128."""


# --- search harness -----------------------------------------------------


class SearchError(LocevalError):
    """Base class for hyperparameter-search failures."""


class InvalidSpace(SearchError):
    """A search-space definition is malformed."""


class CyclicDependency(InvalidSpace):
    """Conditional dimensions form a dependency cycle."""


class TrainerSpawnFailure(SearchError):
    """The trainer command could not be started at all."""


class MissingScorepack(SearchError):
    """A converged trial produced no scorepack."""


class AllTrialsNonConvergent(SearchError):
    """No trial is eligible for selection."""


class LengthMismatch(SearchError):
    """Rank-correlation inputs differ in length or are too short."""


class DegenerateAllTies(SearchError):
    """Rank correlation undefined: one input is entirely tied."""
