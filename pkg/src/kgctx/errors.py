"""Exception hierarchy shared across the package."""


class KGError(Exception):
    """Base class for all package errors."""


class ParseError(KGError, ValueError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class VocabularyError(KGError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class StateError(KGError, RuntimeError):
    pass


class ContractError(KGError, ValueError):
    """An operation was called with inputs that violate its preconditions."""


class CompatibilityError(KGError, ValueError):
    """Checkpoint or vocabulary mismatch between components."""


class GenerationError(KGError, ValueError):
    pass
