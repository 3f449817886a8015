"""Exception hierarchy.

CLI exit codes are attached to the classes so that ``cli.run`` can map
any library failure onto the documented code without a lookup table.
"""

from __future__ import annotations


class CtpError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class ExprError(CtpError, ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownFunctionError(ExprSyntaxError):
    pass


class UnboundVariableError(ExprError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")

    def __str__(self) -> str:
        return self.args[0]


class SceneError(CtpError, ValueError):
    """Invalid scene description (schema, field set, unsupported combination)."""


class AreaMapError(SceneError):
    """An area map failed its unit-determinant check at construction."""

    def __init__(self, message: str, worst_point=None, worst_det=None):
        self.worst_point = worst_point
        self.worst_det = worst_det
        super().__init__(message)


class OutOfDomainError(CtpError, ValueError):
    pass


class NumericalError(CtpError, ArithmeticError):
    exit_code = 3


class DomainError(NumericalError):
    """A function was evaluated outside its domain (sqrt of a negative, ...)."""

    def __init__(self, message: str, subexpr: str = ""):
        self.subexpr = subexpr
        super().__init__(message)


class NewtonError(NumericalError):
    pass


class HodographError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass


class ExportError(CtpError, OSError):
    pass
