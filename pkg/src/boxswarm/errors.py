"""Exception types raised across the package."""


class BoxSwarmError(Exception):
    """Base class for all package errors."""


class DegenerateInput(BoxSwarmError, ValueError):
    pass


class InvalidMatrix(BoxSwarmError, ValueError):
    pass


class TooLarge(BoxSwarmError, ValueError):
    pass


class CountMismatch(BoxSwarmError, ValueError):
    pass


class Malformed(BoxSwarmError, ValueError):
    """A wire message is truncated, mis-sized, or of an unknown kind."""


class OutOfRange(BoxSwarmError, ValueError):
    pass


class TooMany(BoxSwarmError, ValueError):
    pass


class NonFiniteLoss(BoxSwarmError, ArithmeticError):
    def __init__(self, batch_index, epoch=None):
        self.batch_index = batch_index
        self.epoch = epoch
        where = f"batch {batch_index}" if epoch is None else f"epoch {epoch}, batch {batch_index}"
        super().__init__(f"non-finite loss at {where}")


class EmptyBuffer(BoxSwarmError, ValueError):
    pass


class RegistrationPairError(BoxSwarmError):
    """Pairwise registration failed between two ring neighbours."""

    def __init__(self, pair, cause):
        self.pair = pair
        self.cause = cause
        super().__init__(f"registration failed for views {pair[0]} -> {pair[1]}: {cause}")


class MissionError(BoxSwarmError):
    """Mission aborted; ``phase`` names the pipeline stage that failed."""

    phase = "mission"

    def __str__(self):
        return f"[{self.phase}] {super().__str__()}"


class ScoutTimeout(MissionError):
    phase = "scout"


class RegistrationFailed(MissionError):
    phase = "registration"


class AssignmentFailed(MissionError):
    phase = "assignment"


class ConfigError(BoxSwarmError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
