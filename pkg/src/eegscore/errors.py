"""Exception hierarchy shared by every stage of the pipeline."""


class EegScoreError(Exception):
    """Base class for all pipeline errors."""


# ingest
class MalformedPacket(EegScoreError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnsupportedArgType(EegScoreError, TypeError):
    pass


class AddressMismatch(EegScoreError, ValueError):
    pass


class ArityMismatch(EegScoreError, ValueError):
    pass


class FormatError(EegScoreError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantViolation(EegScoreError, ValueError):
    pass


# dsp
class InvalidFrequency(EegScoreError, ValueError):
    pass


class InvalidBand(EegScoreError, ValueError):
    pass


class TooShort(EegScoreError, ValueError):
    pass


class SongTooShort(EegScoreError):
    """Reported (not raised) when a song cannot hold a single window."""

    def __init__(self, song_id, duration, required):
        super().__init__(
            f"song {song_id!r} lasts {duration:.3f} s, needs {required:.3f} s")
        self.song_id = song_id
        self.duration = duration
        self.required = required


# descriptors
class InsufficientValidSamples(EegScoreError, ValueError):
    pass


class DegenerateTotal(EegScoreError, ValueError):
    pass


class TooFewCycles(EegScoreError, ValueError):
    pass


class IncompleteVector(EegScoreError, ValueError):
    pass


# stats
class TooFewSamples(EegScoreError, ValueError):
    pass


class NonFinite(EegScoreError, ValueError):
    pass


class SchemaMismatch(EegScoreError, ValueError):
    pass


# elm
class DimensionMismatch(EegScoreError, ValueError):
    pass


class LengthMismatch(EegScoreError, ValueError):
    pass


class EmptyInput(EegScoreError, ValueError):
    pass


# cli / pipeline
class MissingFeature(EegScoreError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ModelMismatch(EegScoreError, ValueError):
    pass


class TooFewSongs(EegScoreError, ValueError):
    pass
