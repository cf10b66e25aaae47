"""Exception hierarchy shared by all syllascore modules."""


class SyllascoreError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SyllascoreError):
    """A manifest or report file could not be parsed."""


class ValidationError(SyllascoreError):
    """Input data violates a structural invariant (the message names the record)."""


class EmptyCohort(SyllascoreError):
    """A cohort selector matched no patient."""


class DegenerateInput(SyllascoreError):
    """The data cannot support the requested computation (e.g. single-class corpus)."""


class TooShort(SyllascoreError):
    """A signal is shorter than one analysis frame."""


class ShapeMismatch(SyllascoreError):
    """An array does not have the shape the model expects."""


class AudioFormatError(SyllascoreError):
    """An audio file is not 16-bit PCM mono WAV at the declared rate."""


class EmptySession(SyllascoreError):
    """A session to be scored contributed no fragments."""


class EmptySplit(SyllascoreError):
    """The requested evaluation split contains no fragments."""


class VersionMismatch(SyllascoreError):
    """A model file was written by an incompatible format version."""


class CorruptFile(SyllascoreError):
    """A model file failed structural or checksum validation."""
