"""Exception hierarchy.

The four umbrella classes map onto CLI exit codes: ConfigError -> 2,
DataError -> 3, TrainError -> 4, MissingArtifact -> 5. Leaf classes are
what library code raises; callers may catch either level.
"""

from __future__ import annotations


class DepkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DepkitError):
    """Invalid configuration, spec, or invocation."""


class DataError(DepkitError):
    """Invalid or inconsistent input data."""


class TrainError(DepkitError):
    """Model fitting failed."""


class MissingArtifact(DepkitError):
    """A previously produced artifact (run, matrix, model) is absent."""


# --- corpus ---------------------------------------------------------------

class MalformedRow(DataError):
    """Dataset row violates the file format or post invariants."""


class UnknownLabel(DataError):
    """Label not present in the dataset's schema."""


class EmptyDataset(DataError):
    """Dataset contains no items."""


class SchemaMismatch(DataError):
    """Two label schemas that must agree do not."""


# --- metrics --------------------------------------------------------------

class LengthMismatch(DataError):
    """Paired label vectors differ in length."""


class LabelOutOfRange(DataError):
    """A label index falls outside the class count."""


class EmptyInput(DataError):
    """An operation received an empty input it cannot handle."""


class EmptyMatrix(DataError):
    """Confusion matrix with zero total count."""


class EmptyList(DataError):
    """Aggregation over an empty run list."""


# --- encoder classifier ----------------------------------------------------

class EmptyText(DataError):
    """Text is empty after whitespace trimming."""


class InvalidHyperParams(ConfigError):
    """Hyper-parameter values violate their invariants."""


class DivergedLoss(TrainError):
    """Training produced a non-finite loss."""


class EncoderUnavailable(TrainError):
    """The requested pretrained encoder checkpoint cannot be loaded."""


# --- ensemble ---------------------------------------------------------------

class ShapeMismatch(DataError):
    """Member probability matrices disagree in shape or class count."""


class IdOrderMismatch(DataError):
    """Member probability matrices disagree in post id order."""


class DegeneratePrior(DataError):
    """Class prior contains a zero weight."""


class MissingGeneralChoice(ConfigError):
    """Ensemble combo contains a G slot but no general model was given."""


# --- experiment -------------------------------------------------------------

class EmptySpace(ConfigError):
    """Hyper-parameter search space has an empty axis."""


class DatasetNotFound(DataError):
    """Named dataset or split is not present in the data store."""


class MissingMemberRun(MissingArtifact):
    """An ensemble member's probability matrix is not in the run store."""
