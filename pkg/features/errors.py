# features/errors.py

"""Errors shared by every feature.

Each error carries a machine-parsable ``code`` and the process ``exit_status``
the command line reports for it.
"""


class ToolkitError(Exception):
    code = "INTERNAL"
    exit_status = 1


# --- Capture files and frames ---

class PcapFormatError(ToolkitError):
    exit_status = 5


class BadMagic(PcapFormatError):
    code = "BAD_MAGIC"


class TruncatedRecord(PcapFormatError):
    code = "TRUNCATED_RECORD"


class UnsupportedLinkType(PcapFormatError):
    code = "UNSUPPORTED_LINK_TYPE"


class TruncatedHeader(PcapFormatError):
    code = "TRUNCATED_HEADER"


class InvalidRecord(PcapFormatError):
    code = "INVALID_RECORD"


class FieldOverflow(PcapFormatError):
    code = "FIELD_OVERFLOW"


class PcapIoError(ToolkitError):
    code = "IO_ERROR"
    exit_status = 6


# --- Statistics ---

class StatsError(ToolkitError):
    exit_status = 9


class EmptyCapture(StatsError):
    code = "EMPTY_CAPTURE"


class UnknownHost(StatsError):
    code = "UNKNOWN_HOST"


class UnknownField(StatsError):
    code = "UNKNOWN_FIELD"


class EmptyInput(StatsError):
    code = "EMPTY_INPUT"


# --- Parameters and configuration ---

class ParameterError(ToolkitError):
    exit_status = 4


class UnknownParameter(ParameterError):
    code = "UNKNOWN_PARAMETER"


class InvalidValue(ParameterError):
    code = "INVALID_VALUE"


class InvalidConfig(ParameterError):
    code = "INVALID_CONFIG"


class UnknownAttack(ToolkitError):
    code = "UNKNOWN_ATTACK"
    exit_status = 3


# --- Templates ---

class TemplateError(ToolkitError):
    exit_status = 7


class AmbiguousTemplate(TemplateError):
    code = "AMBIGUOUS_TEMPLATE"


class NoTcp(TemplateError):
    code = "NO_TCP"


class LengthMismatch(TemplateError):
    code = "LENGTH_MISMATCH"


# --- Botnet specifications ---

class BotnetSpecError(ToolkitError):
    exit_status = 8


class CsvParse(BotnetSpecError):
    code = "CSV_PARSE"

    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class UnboundBot(BotnetSpecError):
    code = "UNBOUND_BOT"


class InsufficientHosts(BotnetSpecError):
    code = "INSUFFICIENT_HOSTS"


# --- Attack generation ---

class GenerationError(ToolkitError):
    exit_status = 9


class EmptyBackground(GenerationError):
    code = "EMPTY_BACKGROUND"


class EmptyDistribution(GenerationError):
    code = "EMPTY_DISTRIBUTION"


class NoOpenPorts(GenerationError):
    code = "NO_OPEN_PORTS"


class PayloadTooLarge(GenerationError):
    code = "PAYLOAD_TOO_LARGE"
