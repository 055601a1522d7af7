from typing import Optional


class LabError(Exception):
    """
    Base class for every error raised by the lab. Carries the CLI exit code:
    2 for input the lab cannot serve, 1 only for failed checks.
    """

    exit_code = 2


class ParseError(LabError):
    """Malformed dyadic, rect, level file or prefix"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(self._render())

    def _render(self) -> str:
        position = []
        if self.line is not None:
            position.append(f"line {self.line}")
        if self.column is not None:
            position.append(f"column {self.column}")
        if position:
            return f"{self.message} ({', '.join(position)})"
        return self.message


class ConfigError(LabError):
    """Lab configuration could not be loaded or failed validation"""


class PartitionError(LabError):
    """Interval reaches past the last supplied breakpoint"""


class GeneratorError(LabError):
    """Base for alpha-sequence generator failures"""


class GeneratorExhausted(GeneratorError):
    """Generator has no term at the requested index"""


class MonotonicityViolation(GeneratorError):
    """Generator produced a term that breaks strict increase or leaves (0, 1)"""


class ZeroMarginal(LabError):
    """Conditional ratio requested at a prefix of marginal mass zero"""


class PrecisionUnreachable(LabError):
    """Prefix source ran out before the requested certification width was met"""


class OracleExhausted(PrecisionUnreachable):
    """Decoder could not pin the normalized ratios within its round budget"""


class CheckFailure(LabError):
    """A verification, decoding or self-test check failed"""

    exit_code = 1
