"""Exception hierarchy shared across the package."""


class TeDecompError(Exception):
    """Base class for all package errors."""


class InputError(TeDecompError, ValueError):
    """Invalid arguments or data supplied by the caller."""


class SimulationError(TeDecompError, RuntimeError):
    """The simulated dynamics produced a non-finite value."""

    def __init__(self, channel, step, value):
        self.channel = channel
        self.step = step
        self.value = value
        super().__init__(
            f"non-finite value {value!r} in channel {channel!r} at step {step}"
        )


class PolicyError(InputError):
    """A subset-search policy cannot be executed as configured."""


class ComparisonError(TeDecompError, ValueError):
    """Two results computed under different settings were compared."""


class ParseError(InputError):
    """Malformed CSV or configuration text."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
