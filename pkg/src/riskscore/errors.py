"""Exception hierarchy shared across the package."""


class RiskScoreError(Exception):
    """Base class for every error raised by this package."""


class DatasetParseError(RiskScoreError, ValueError):
    def __init__(self, lineno, line, reason):
        self.lineno = lineno
        self.line = line
        self.reason = reason
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class ConsistencyError(RiskScoreError, ValueError):
    """Input data contradicts itself (e.g. one person in two rooms at once)."""


class UnknownPersonError(RiskScoreError, KeyError):
    pass


class EpochRangeError(RiskScoreError, IndexError):
    pass


class InvalidSpecError(RiskScoreError, ValueError):
    pass


class StateError(RiskScoreError, KeyError):
    """A person present in the graph has no risk or compartment state."""


class UnboundedDecayError(RiskScoreError, ValueError):
    pass


class ParameterError(RiskScoreError, ValueError):
    pass


class UndefinedRegionError(RiskScoreError, ValueError):
    pass


class ShapeError(RiskScoreError, ValueError):
    pass


class ConfigError(RiskScoreError, ValueError):
    pass


class CodecError(RiskScoreError, ValueError):
    """Base class for payload errors; ``kind`` is a short machine-readable class."""

    kind = "codec"


class PayloadLengthError(CodecError):
    kind = "length"


class ForeignBeaconError(CodecError):
    """Payload does not carry our service UUID. Receivers skip these silently."""

    kind = "foreign-beacon"


class PayloadCorruptError(CodecError):
    kind = "corrupt"


class EncodeRangeError(CodecError):
    kind = "range"
