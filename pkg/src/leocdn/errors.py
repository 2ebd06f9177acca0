"""Exception hierarchy shared across the simulator.

The CLI maps these onto process exit codes: configuration problems exit
with 1, input/output problems with 2, and simulation-time failures with 3.
"""


class LeoCdnError(Exception):
    """Base class for all simulator errors."""


class ConfigError(LeoCdnError):
    """Invalid configuration value, unknown key, or inconsistent preset."""


class InputError(LeoCdnError):
    """Unreadable or malformed input data (location CSV, trace files)."""


class ParseError(InputError):
    """Malformed record in an input file; carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class SimulationError(LeoCdnError):
    """Failure raised while a simulation is running."""


class CoverageGapError(SimulationError):
    """No satellite above the minimum elevation for a ground station."""

    def __init__(self, station_id: int, city_name: str, time_s: float):
        self.station_id = station_id
        self.city_name = city_name
        self.time_s = time_s
        super().__init__(
            f"no visible satellite for station {station_id} ({city_name}) "
            f"at t={time_s:.0f}s"
        )


class RoutingError(SimulationError):
    """Routing failed, e.g. the ISL graph was unexpectedly disconnected."""
