"""Exception hierarchy. Every error carries the name of the module that raised it."""


class AuditError(Exception):
    module = "annotaudit"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class CorpusError(AuditError):
    module = "corpus"


class TextprocError(AuditError):
    module = "textproc"


class ClassifierError(AuditError):
    module = "classifiers"


class EnsembleError(AuditError):
    module = "ensemble"


class SearchError(AuditError):
    module = "search"


class PairingError(AuditError):
    module = "audit"


class ReportError(AuditError):
    module = "report"


class SynthError(AuditError):
    module = "synth"


class ConfigError(AuditError):
    module = "cli"
