"""Exception types shared across the package."""


class CfmpcError(Exception):
    """Base class for all package-specific errors."""


class SingularAttitude(CfmpcError):
    """Pitch is within the configured guard band of the gimbal-lock attitude."""


class GridTooLarge(CfmpcError):
    """Requested voxel grid exceeds the configured voxel-count budget."""


class NonmonotoneTimestamp(CfmpcError):
    """Observation timestamp precedes the track's last update."""


class CommandOutOfRange(CfmpcError):
    """Commanded twist exceeds the configured limits."""


class IntegrationDiverged(CfmpcError):
    """State norm exceeded its bound during numerical integration."""


class RiccatiDiverged(CfmpcError):
    """Backward Riccati sweep produced a non-finite or unbounded value function."""


class RankDeficientConstraint(CfmpcError):
    """Equality-constraint Jacobian w.r.t. the input lost row rank."""

    def __init__(self, message: str, time: float | None = None, leg: int | None = None):
        super().__init__(message)
        self.time = time
        self.leg = leg


class ConfigError(CfmpcError):
    """Invalid configuration file or scenario definition."""


class PortInUse(CfmpcError):
    """Requested teleop port is already bound."""


class ScenarioAborted(CfmpcError):
    """Closed-loop run aborted (solver divergence); carries diagnostics."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t
