"""Exception hierarchy shared by all conekit modules."""


class ConekitError(Exception):
    pass


class ExprSyntaxError(ConekitError):
    """Parse failure. Carries the byte offset plus 1-based line and column."""

    def __init__(self, message, source="", offset=0):
        self.offset = offset
        head = source[:offset]
        self.line = head.count("\n") + 1
        self.column = offset - (head.rfind("\n") + 1) + 1
        self.bare_message = message
        super().__init__(f"{self.line}:{self.column}: {message} (offset {offset})")


class EvalError(ConekitError):
    """Domain error while evaluating an expression (sqrt of a negative, ...)."""

    def __init__(self, message, subexpr=""):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{subexpr}'" if subexpr else message)


class QuadratureError(ConekitError):
    pass


class AssumptionError(ConekitError):
    """A single standing assumption is violated."""

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__(f"violates '{assumption}': {message}")


class ProblemError(ConekitError):
    """Schema error or a list of assumption violations found while loading a problem."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("\n".join(str(v) for v in self.violations))


class ConstantsError(ConekitError):
    def __init__(self, constant, message):
        self.constant = constant
        super().__init__(f"{constant}: {message}")


class MatrixError(ConekitError):
    pass


class LadderError(ConekitError):
    pass


class DivergenceError(ConekitError):
    def __init__(self, message, iterations=0, norm=float("inf")):
        self.iterations = iterations
        self.norm = norm
        super().__init__(message)
