class ClientError(Exception):
    """Base class for everything this client raises on purpose."""


class PackWriteError(ClientError, ValueError):
    """Refused to write a scorepack record (bad id, shape, or values)."""


class ReportParseError(ClientError, ValueError):
    """A report file did not match the expected layout or version."""


class BinaryNotFound(ClientError):
    """The evaluator CLI could not be located on PATH or via configuration."""


class EvaluationFailed(ClientError):
    """The evaluator CLI exited nonzero.

    Carries the exit code and whatever the process wrote to its output
    streams so callers can log or surface the underlying cause.
    """

    def __init__(self, exit_code: int, diagnostics: str):
        self.exit_code = exit_code
        self.diagnostics = diagnostics
        detail = f": {diagnostics}" if diagnostics else ""
        super().__init__(f"evaluator exited with status {exit_code}{detail}")
