"""Exception types raised by geoflow.

Every error carries an optional ``step`` attribute that the trajectory
drivers fill in with the index of the time step that failed.
"""


class GeoflowError(Exception):
    step = None

    def at_step(self, step):
        self.step = step
        return self


class ZeroEdge(GeoflowError):
    pass


class DegenerateFace(GeoflowError):
    pass


class DimensionMismatch(GeoflowError, ValueError):
    pass


class SingularSystem(GeoflowError):
    pass


class SingularNormalEquations(GeoflowError):
    pass


class InvalidNormal(GeoflowError, ValueError):
    pass


class TrimFailure(GeoflowError):
    pass


class NonSimplePolygon(GeoflowError, ValueError):
    pass


class NonPositiveError(GeoflowError, ValueError):
    pass


class ClassificationFailure(GeoflowError):
    pass


class NotWatertight(GeoflowError, ValueError):
    pass


class UnknownShape(GeoflowError, KeyError):
    pass


class NotConverged(GeoflowError):
    pass


class ConfigError(GeoflowError, ValueError):
    pass
