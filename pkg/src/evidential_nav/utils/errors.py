"""Exception hierarchy shared by every evidential_nav module."""


class EvidentialNavError(Exception):
    """Base class for all errors raised by evidential_nav."""


class DomainError(EvidentialNavError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(EvidentialNavError):
    """The experiment configuration is missing a key or holds an invalid value."""


class FormatError(EvidentialNavError):
    """A persisted grid, dataset or checkpoint file is malformed."""


class MissingArtifactError(EvidentialNavError):
    """A pipeline stage input does not exist yet."""

    def __init__(self, path, stage: str):
        self.path = path
        self.stage = stage
        super().__init__(
            f"Required input not found at {path}. "
            f"Run `evidential-nav {stage}` first to produce it."
        )


class TrainingDivergedError(EvidentialNavError):
    """Training produced a non-finite loss or activation."""

    def __init__(self, message: str, epoch: int, batch: int, diagnostics: dict | None = None):
        self.epoch = epoch
        self.batch = batch
        self.diagnostics = diagnostics or {}
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"{message} (epoch {epoch}, batch {batch}){': ' + details if details else ''}")
