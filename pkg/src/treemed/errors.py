"""Exception hierarchy shared by every layer of the mediator."""


class MediatorError(Exception):
    """Base class for all errors raised by this package."""


class QuerySyntaxError(MediatorError):
    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")


class UnknownVariable(QuerySyntaxError):
    pass


class DuplicateVariable(QuerySyntaxError):
    pass


class UnsupportedFeature(MediatorError):
    """The query is well formed but uses a construct outside the supported subset."""


class PlanError(MediatorError):
    """An operator or plan failed validation before execution."""


class StreamError(MediatorError):
    """A malformed or failed event stream."""


class CatalogError(MediatorError):
    pass


class CapabilityError(MediatorError):
    """An adapter was sent a query its capability category does not allow."""


class WireError(MediatorError):
    pass
