"""Exception hierarchy shared by all toolkit modules."""


class ToolkitError(Exception):
    """Base class for model errors raised by the toolkit."""


class DomainError(ToolkitError, ValueError):
    """An argument lies outside the domain of a physical formula."""


class InvalidDistribution(ToolkitError, ValueError):
    pass


class GeometryError(ToolkitError, ValueError):
    """The NV centre sits on or outside the inner boundary of an integration region."""


class FlatTrace(ToolkitError):
    pass


class NoConvergence(ToolkitError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonMonotoneCalibration(ToolkitError):
    pass


class OutOfRange(ToolkitError):
    pass


class ConfigError(ToolkitError, ValueError):
    pass
