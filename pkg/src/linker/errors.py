"""Exception hierarchy.

Two branches matter for the CLI exit-code contract: ``DataError`` covers
anything wrong with user-supplied inputs (exit code 3), ``InternalError``
covers broken invariants that indicate a bug in this package (exit code 4).
"""


class LinkerError(Exception):
    pass


class DataError(LinkerError):
    """Bad input data (file contents, SMILES, sequences, manifests)."""


class InternalError(LinkerError):
    """A documented invariant did not hold; this is a bug, not a data issue."""


# --- molgraph ---------------------------------------------------------------

class SmilesSyntaxError(DataError):
    """Malformed SMILES: unbalanced parentheses, dangling ring digit, ..."""


class UnsupportedFeature(DataError):
    """Valid SMILES outside the supported subset (stereo, isotopes, '.')."""


class DisconnectedGraph(DataError):
    pass


# --- fgparser ---------------------------------------------------------------

class CoverageViolation(InternalError):
    """An atom ended up in no group after interpolation."""


class EmptyGroup(InternalError):
    """A group column of the atom-group matrix is all zero."""


# --- tensorcore -------------------------------------------------------------

class ShapeMismatch(InternalError):
    pass


class NoTape(InternalError):
    """backward() called on a tensor no recorded op produced."""


# --- protein_embed ----------------------------------------------------------

class FormatError(DataError):
    pass


class SequenceMismatch(DataError):
    """Embedding file was produced from a different sequence."""


class AlphabetError(DataError):
    pass


# --- labels -----------------------------------------------------------------

class IndexOutOfRange(DataError):
    pass


class CatalogueMismatch(DataError):
    """Label file was built against a different functional-group catalogue."""


class InvalidSigma(DataError):
    pass


# --- losses -----------------------------------------------------------------

class LengthMismatch(InternalError):
    pass


class BatchTooSmall(DataError):
    pass


class NotNormalized(InternalError):
    pass


# --- metrics ----------------------------------------------------------------

class NoPositives(DataError):
    pass


class DegenerateLabels(DataError):
    """ROC needs at least one positive and one negative."""


class NoPredictions(DataError):
    """Weighted precision is undefined when nothing was predicted positive."""


# --- training / cli ---------------------------------------------------------

class CheckpointMismatch(DataError):
    pass


class ManifestError(DataError):
    pass
