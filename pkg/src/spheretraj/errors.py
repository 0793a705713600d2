"""Exception types shared across the package."""


class AntipodalPointsError(ValueError):
    """Two sphere points are (numerically) antipodal; the requested map is undefined."""


class AntipodalOrIdenticalError(AntipodalPointsError):
    """Points coincide or are antipodal, so no unique great circle exists."""


class AntipodalStartPointsError(AntipodalPointsError):
    """Trajectory start points are antipodal; bundle geodesics are not defined."""


class MixedBasePointsError(ValueError):
    """Tangent vectors passed to one operation do not share a base point."""


class FrameDegenerateError(ValueError):
    """Could not build an orthonormal frame from the seed vectors."""


class DegenerateTrajectoryError(ValueError):
    """Consecutive trajectory samples are antipodal."""


class GridMismatchError(ValueError):
    """Sampled curves that must share a grid have different lengths."""


class SingularSystemError(ValueError):
    """The linear system for the baseline generator is rank-deficient."""


class EmptyDatasetError(ValueError):
    """An operation requiring at least one item received none."""


class DegenerateMeanError(ValueError):
    """An extrinsic average collapsed to (numerically) zero and cannot be normalized."""


class MalformedHeaderError(ValueError):
    """A storm header line does not match the expected layout."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedDataLineError(ValueError):
    """A storm data line does not match the expected layout."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnsupportedCombinationError(ValueError):
    """The requested (data, format) export pairing is not supported."""
