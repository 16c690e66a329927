class GlyphError(Exception):
    """Base class of all recognition pipeline errors.

    Parameters
    ----------
    message : str
        Human readable description.
    where : str, optional
        Sample id, file or feature family the error refers to.
    """

    def __init__(self, message: str = "Recognition error", where: str | None = None):
        self.message = message
        self.where = where
        super().__init__(self.message)

    @property
    def name(self) -> str:
        """Name printed by the command line diagnostics."""
        return type(self).__name__

    def __str__(self):
        """Return the error message."""
        return f"{self.message} (at {self.where})" if self.where else self.message


class NoForeground(GlyphError):
    """The image holds no ink after binarization."""


class DimensionMismatch(GlyphError):
    """A vector or matrix has the wrong length for its consumer."""


class NonFiniteLoss(GlyphError):
    """Training diverged to a NaN or infinite error."""


class NonPositiveAccuracy(GlyphError):
    """A fusion weight was requested for an accuracy that is not positive."""


class BadK(GlyphError):
    """A top-k request outside ``1 <= k <= m``."""


class EmptyDataset(GlyphError):
    """No labeled images were found."""


class UnreadableImage(GlyphError):
    """An image file could not be decoded."""


class TooFewSamples(GlyphError):
    """A class has too few samples for the requested split."""


class EmptyTrainingSet(GlyphError):
    """A model or normalizer was fitted on no data."""


class ModelFormatError(GlyphError):
    """A model file or ensemble manifest is missing or malformed."""


class ConfigurationError(GlyphError):
    """A settings key or the settings file itself is invalid.

    ``where`` names the offending setting, or the file when the whole
    document is rejected.
    """

    def __init__(self, message: str = "Configuration error", where: str | None = None):
        super().__init__(message, where)

    def __str__(self):
        return f"{self.message} in setting '{self.where}'" if self.where else self.message


class MultiConfigurationError(GlyphError):
    """Several settings failed validation at once."""

    def __init__(self, errors: list[ConfigurationError]):
        self.errors = errors
        super().__init__(f"{len(errors)} invalid settings")

    def __str__(self):
        return "\n".join(str(e) for e in self.errors)
