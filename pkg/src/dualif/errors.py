"""Exception hierarchy shared by every dualif module."""


class DualIFError(Exception):
    """Base class for all library errors."""


class ExprError(DualIFError, ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"{message} (at position {position})")


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, position: int = -1):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r}")


class DomainError(ExprError, ArithmeticError):
    pass


class UnknownModel(DualIFError, LookupError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown model {name!r}")


class ValidationError(DualIFError, ValueError):
    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(v.message for v in report.violations))


class QuadratureFailure(DualIFError, ArithmeticError):
    pass


class DivergentError(DualIFError, ArithmeticError):
    """The phase integral towards an infinite threshold/reset does not converge."""

    def __init__(self, sides):
        self.sides = tuple(sides)
        super().__init__(", ".join(f"{s} side divergent" for s in self.sides))


class ConvergenceFailure(DualIFError, ArithmeticError):
    pass


class RangeError(DualIFError, ValueError):
    pass


class InvalidWrap(DualIFError, ValueError):
    pass


class InvalidModel(DualIFError, ValueError):
    pass


class DivergenceGuard(DualIFError, ArithmeticError):
    pass


class NegativeInput(DualIFError, ValueError):
    pass


class InvalidExponent(DualIFError, ValueError):
    pass
