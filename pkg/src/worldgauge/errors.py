"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: InputError and other domain
failures exit 1, usage problems exit 2, bridge failures exit 3.
"""


class WorldGaugeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(WorldGaugeError):
    """A caller-supplied value violates a documented precondition."""


class BridgeError(WorldGaugeError):
    """Base class for failures while talking to an external model process."""


class TransportError(BridgeError):
    """The connection to the external process timed out or dropped."""


class ProtocolError(BridgeError):
    """The external process sent a malformed or out-of-contract message."""


class PartialResultError(BridgeError):
    """A bridge failure aborted a metric run partway through.

    ``completed`` holds the per-unit results finished before the failure and
    ``failed_at`` the unit index that died, so no truncation is silent.
    """

    def __init__(self, message: str, completed: list, failed_at: int):
        super().__init__(message)
        self.completed = completed
        self.failed_at = failed_at
