"""Exception types shared across the toolkit."""


class LevelTraceError(Exception):
    """Base class for every error raised by this package."""


# --- grid / text format ---------------------------------------------------


class UnknownGlyph(LevelTraceError):
    def __init__(self, glyph: str, line: int, col: int):
        super().__init__(f"unknown glyph {glyph!r} at line {line}, column {col}")
        self.glyph = glyph
        self.line = line
        self.col = col


class RaggedLines(LevelTraceError):
    def __init__(self, line: int):
        super().__init__(f"line {line} has a different length than line 1")
        self.line = line


class GridTooSmall(LevelTraceError):
    pass


class DimensionMismatch(LevelTraceError):
    pass


class StaleChange(LevelTraceError):
    def __init__(self, x: int, y: int):
        super().__init__(f"change at ({x}, {y}) does not match the current cell")
        self.x = x
        self.y = y


class OutOfRange(LevelTraceError):
    pass


# --- session log ----------------------------------------------------------


class SchemaViolation(LevelTraceError):
    def __init__(self, line: int, reason: str = ""):
        msg = f"bad session record at line {line}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.line = line
        self.reason = reason


class IoFailure(LevelTraceError):
    pass


class NoAgentTurns(LevelTraceError):
    pass


class BadParams(LevelTraceError):
    pass


# --- network / training ---------------------------------------------------


class ShapeMismatch(LevelTraceError):
    pass


class VersionMismatch(LevelTraceError):
    pass


class NumericFailure(LevelTraceError):
    pass


class ConfigError(LevelTraceError):
    pass


# --- attribution ----------------------------------------------------------


class IndexOutOfRange(LevelTraceError):
    pass


class EmptyLedger(LevelTraceError):
    pass


class FingerprintMismatch(LevelTraceError):
    pass


# --- metric / evaluation --------------------------------------------------


class EmptyAction(LevelTraceError):
    pass


class NotEnoughTrainingLevels(LevelTraceError):
    pass


class NoEligibleInstances(LevelTraceError):
    pass


class NoExamplesFound(LevelTraceError):
    pass


class InconsistentExample(LevelTraceError):
    pass
