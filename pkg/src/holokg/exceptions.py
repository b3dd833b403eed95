"""Error types raised across the package."""


class HolokgError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(HolokgError):
    """Vector or matrix operands have incompatible lengths/shapes."""


class NonFiniteInput(HolokgError):
    """An input or update contains NaN or Inf."""


class ShapeMismatch(HolokgError):
    """Parameter block shapes disagree with the model specification."""


class IndexOutOfRange(HolokgError):
    """An entity or relation id is outside the vocabulary bounds."""


class MalformedLine(HolokgError):
    """A triple file line does not contain exactly three TAB-separated fields."""

    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        msg = f"line {line_no}: expected 3 TAB-separated fields"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptySplit(HolokgError):
    """An operation requires a non-empty triple split."""


class ExhaustedRetries(HolokgError):
    """Negative sampling could not find a non-colliding corruption."""


class ConstraintUnsatisfiable(HolokgError):
    """No country partition satisfying the neighbor constraint was found."""


class EmptyTable(HolokgError):
    """A clean-up lookup was attempted against an empty item table."""


class ObjectMismatch(HolokgError):
    """A relational-storage triple does not have the requested object."""


class NoPositives(HolokgError):
    """Average precision is undefined without at least one positive label."""


class UnknownEntity(HolokgError):
    """An entity name does not resolve in the vocabulary."""


class UnknownRelation(HolokgError):
    """A relation name does not resolve in the vocabulary."""


class CheckpointError(HolokgError):
    """A checkpoint file is missing, corrupt, or incompatible."""


class VocabularyMismatch(CheckpointError):
    """Checkpoint vocabulary hashes disagree with the loaded data."""
