from ..errors import FairstreamError


class QcError(FairstreamError):
    pass


class ConfigSyntaxError(QcError):
    def __init__(self, line, column, expected):
        self.line = line
        self.column = column
        self.expected = expected
        super().__init__(f"line {line}, column {column}: expected {expected}")


class UnknownFunction(QcError):
    def __init__(self, line, name):
        self.line = line
        self.name = name
        super().__init__(f"line {line}: unknown function {name!r}")


class BadArgument(QcError):
    def __init__(self, function, kwarg, message, line=None):
        self.function = function
        self.kwarg = kwarg
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{function}({kwarg}): {message}")


class ExprSyntaxError(QcError):
    pass


class UnknownVariable(QcError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown variable {name!r}")


class UnknownScheme(QcError):
    def __init__(self, scheme):
        self.scheme = scheme
        super().__init__(f"unknown flag scheme {scheme!r}")


class UndecodableLabel(QcError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"label {label!r} is not part of the scheme")
