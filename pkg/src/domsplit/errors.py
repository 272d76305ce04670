"""Exception hierarchy shared by all modules."""


class DomsplitError(Exception):
    """Base class; the CLI maps every subclass to exit status 1."""

    module = None  # subclasses may pin it; otherwise taken from where the error was raised

    def qualified(self) -> str:
        mod = self.module
        if mod is None:
            mod = "domsplit"
            tb = self.__traceback__
            while tb is not None:
                name = tb.tb_frame.f_globals.get("__name__", "")
                if name.startswith("domsplit."):
                    mod = name.rsplit(".", 1)[1]
                tb = tb.tb_next
        return f"{mod}: {self}"


class DomainError(DomsplitError, ValueError):
    """Input outside the operation's domain (bad index, foreign point, ...)."""


class ResourceLimitError(DomsplitError):
    """Requested work exceeds a configured cutoff."""


class NumericOverflowError(DomsplitError, ArithmeticError):
    pass


class SingularityError(DomsplitError, ArithmeticError):
    pass


class InjectivityError(DomsplitError, ArithmeticError):
    pass


class IllConditionedSubspaceError(DomsplitError, ArithmeticError):
    pass


class EigenSolverError(DomsplitError, ArithmeticError):
    def __init__(self, message: str, word=None):
        super().__init__(message)
        self.word = word


class DiagnosticsConflictError(DomsplitError):
    pass


class InternalInvariantError(DomsplitError, AssertionError):
    pass


class ConfigError(DomsplitError):
    """Schema or semantic validation failure; ``path`` names the offending key."""

    module = "config"

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
