"""Exception types shared across the package.

Every error raised by the public API derives from SeqdxError so callers
can catch validation failures without also swallowing programming bugs.
"""


class SeqdxError(Exception):
    """Base class for all seqdx errors."""


# --- world ---------------------------------------------------------------

class InvalidDistribution(SeqdxError):
    """A probability row does not sum to 1 (within 1e-9) or leaves [0, 1]."""


class EmptyWorld(SeqdxError):
    """World config has fewer than 2 diseases or no actions."""


class DuplicateAction(SeqdxError):
    """Action already revealed for this state."""


class UnavailableAction(SeqdxError):
    """Action is not available for this case."""


class BadRatios(SeqdxError):
    """Split ratios are negative or do not sum to 1."""


# --- diagnoser -----------------------------------------------------------

class EmptyTrainingSet(SeqdxError):
    """fit_full_info called with no cases."""


class UnknownSymbol(SeqdxError):
    """Observation or action absent from the model's alphabets."""


# --- trajectory ----------------------------------------------------------

class InfeasibleAction(SeqdxError):
    """Action is done or unavailable for the case under evaluation."""


class NoFeasibleAction(SeqdxError):
    """No action remains to score or select."""


class EmptyPrefixSet(SeqdxError):
    """No trajectory in the support extends the given prefix."""


# --- planner -------------------------------------------------------------

class SupportMismatch(SeqdxError):
    """Target and policy distributions cover different action sets."""


class DivergedLoss(SeqdxError):
    """Training loss became non-finite."""


# --- episode / eval ------------------------------------------------------

class InvalidPolicy(SeqdxError):
    """PolicySpec is malformed for its kind."""


class EmptyRecords(SeqdxError):
    """Metrics requested over an empty record list."""


# --- persistence / cli ---------------------------------------------------

class ParseError(SeqdxError):
    """File is not valid JSON / JSON-lines; message carries the line number."""


class SchemaError(SeqdxError):
    """File parsed but violates the documented schema."""


class ShapeMismatch(SeqdxError):
    """Checkpoint shape does not match the active world."""


class HashMismatch(SeqdxError):
    """Embedded config hash disagrees with the active one, or was tampered."""


class UnknownCommand(SeqdxError):
    """CLI invoked with an unrecognized subcommand."""


class ConfigConflict(SeqdxError):
    """A CLI flag contradicts the value in the supplied config file."""
