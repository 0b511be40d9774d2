"""Exception hierarchy. The CLI maps each family onto an exit code."""


class PhrecError(Exception):
    exit_code = 1


class ConfigError(PhrecError, ValueError):
    exit_code = 1


class DataIntegrityError(PhrecError, ValueError):
    exit_code = 2


class NumericalError(PhrecError, ArithmeticError):
    exit_code = 3
