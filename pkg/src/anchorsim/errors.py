"""Exception hierarchy shared across the package."""


class AnchorSimError(Exception):
    """Base class for all package-specific errors."""


class InputError(AnchorSimError):
    """Malformed or out-of-range caller input."""


class CoverageGapError(AnchorSimError):
    """No satellite above the minimum elevation for a ground point."""


class RuleTableError(AnchorSimError):
    """Packet classification failed; no rule matched the destination."""


class IncompleteMeasurementError(AnchorSimError):
    """A path update was requested without a full measurement set."""


class EstablishmentTimeoutError(AnchorSimError):
    """A signaling leg was unresponsive during session establishment."""


class TeidMismatchError(AnchorSimError):
    """Tunnel endpoint verification failed after establishment."""


class InstanceTooLargeError(AnchorSimError):
    """Exhaustive search refused; the instance exceeds the guard."""


class ScenarioError(AnchorSimError):
    """Scenario file failed to load or validate.

    The message starts with the offending field path, e.g.
    ``users[3].waypoints: expected at least one waypoint``.
    """
