"""Exception hierarchy. The CLI maps each class to an exit code."""


class HybridGuardError(Exception):
    exit_code = 1
    kind = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        return {"error": self.kind, "message": self.message, "details": self.details}


class ConfigError(HybridGuardError, ValueError):
    exit_code = 2
    kind = "config"


class DataError(HybridGuardError, ValueError):
    exit_code = 3
    kind = "data"


class NumericError(HybridGuardError, ArithmeticError):
    exit_code = 4
    kind = "numeric"
