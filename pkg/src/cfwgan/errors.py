"""Exception types, each mapped to a CLI exit code."""


class ConfigError(ValueError):
    exit_code = 1


class DataError(ValueError):
    exit_code = 2


class NumericalAbort(RuntimeError):
    exit_code = 3
