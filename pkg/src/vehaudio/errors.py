"""Exception types raised across the pipeline."""


class VehAudioError(Exception):
    """Base class for every error the library raises on bad input."""


class AudioReadError(VehAudioError):
    """File missing, truncated, or not a RIFF/WAVE container."""


class UnsupportedEncodingError(VehAudioError):
    """WAV file uses a sample format or channel layout we do not read."""


class EmptyAudioError(VehAudioError):
    """Audio file or signal contains no samples."""


class ManifestError(VehAudioError):
    """Manifest entries are malformed or mutually inconsistent."""


class FeatureError(VehAudioError):
    """Invalid coefficient count, range, or degenerate feature row."""


class GraphError(VehAudioError):
    """Similarity graph cannot be built (zero bandwidth, isolated vertex)."""


class EigenError(VehAudioError):
    """Eigensolver did not reach the requested residual."""


class ClassifyError(VehAudioError):
    """Invalid clustering or classification request."""
