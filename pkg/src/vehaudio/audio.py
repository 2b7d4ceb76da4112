"""
Audio ingestion: WAV loading, DC removal, cropping, compositing, windowing.

Samples are held as float64 in nominal range [-1, 1].  Integer PCM is mapped
with the asymmetric full-scale convention (16-bit divides by 32768, 32-bit by
2**31), and multi-channel files are averaged after that scaling.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import (
    AudioReadError,
    EmptyAudioError,
    ManifestError,
    UnsupportedEncodingError,
    VehAudioError,
)

DEFAULT_SAMPLE_RATE = 48000
DEFAULT_WINDOW_FRAMES = 6000  # 1/8 s at 48 kHz

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioSignal:
    """Uniformly sampled mono signal."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if samples.size == 0:
            raise EmptyAudioError("audio signal has no samples")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class WindowedSignal:
    windows: np.ndarray  # n x w
    window_len_frames: int
    source_rate_hz: int
    window_times_s: np.ndarray
    hop_frames: int | None = None

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    def flatten(self) -> np.ndarray:
        """Concatenate rows back into a 1-D sample stream."""
        return self.windows.reshape(-1)


# --------------------------------------------------------------------------- #
# WAV I/O
# --------------------------------------------------------------------------- #
def _wav_format(path: Path) -> tuple[int, int, int]:
    """Return (format_tag, channels, bits_per_sample) from the fmt chunk."""
    try:
        with open(path, "rb") as fh:
            header = fh.read(12)
            if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
                raise AudioReadError(f"{path}: not a RIFF/WAVE file")
            while True:
                chunk = fh.read(8)
                if len(chunk) < 8:
                    raise AudioReadError(f"{path}: no fmt chunk")
                cid, size = chunk[:4], struct.unpack("<I", chunk[4:])[0]
                if cid == b"fmt ":
                    body = fh.read(size)
                    if len(body) < 16:
                        raise AudioReadError(f"{path}: truncated fmt chunk")
                    tag, channels, _, _, _, bits = struct.unpack("<HHIIHH", body[:16])
                    if tag == _FORMAT_EXTENSIBLE and len(body) >= 26:
                        tag = struct.unpack("<H", body[24:26])[0]
                    return tag, channels, bits
                fh.seek(size + (size & 1), 1)
    except OSError as exc:
        raise AudioReadError(f"{path}: {exc.strerror or exc}") from exc


def load_audio(path: str | Path, channel_policy: str | int = "average") -> AudioSignal:
    """
    Read a PCM WAV file into a mono :class:`AudioSignal`.

    Parameters
    ----------
    path : str or Path
        16- or 32-bit integer PCM, or 32/64-bit float WAV with 1 or 2 channels.
    channel_policy : {"average"} or int
        ``"average"`` mixes channels sample-wise; an integer selects that
        channel index.

    Raises
    ------
    AudioReadError
        File missing or not parseable as WAV.
    UnsupportedEncodingError
        Sample format, bit depth, or channel count outside the list above.
    EmptyAudioError
        Zero-length data chunk.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioReadError(f"{path}: no such file")
    tag, channels, bits = _wav_format(path)
    if tag == _FORMAT_PCM and bits in (16, 32):
        scale = float(2 ** (bits - 1))
    elif tag == _FORMAT_FLOAT and bits in (32, 64):
        scale = 1.0
    else:
        raise UnsupportedEncodingError(f"{path}: format tag {tag:#06x} with {bits}-bit samples")
    if channels not in (1, 2):
        raise UnsupportedEncodingError(f"{path}: {channels} channels (expected 1 or 2)")

    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise AudioReadError(f"{path}: {exc}") from exc
    if data.size == 0:
        raise EmptyAudioError(f"{path}: zero-length audio")

    data = data.astype(np.float64) / scale
    if data.ndim == 2:
        if channel_policy == "average":
            data = data.mean(axis=1)
        elif isinstance(channel_policy, int) and 0 <= channel_policy < data.shape[1]:
            data = data[:, channel_policy]
        else:
            raise ValueError(f"invalid channel policy {channel_policy!r}")
    return AudioSignal(data, rate)


def write_wav(path: str | Path, signal: AudioSignal, encoding: str = "pcm16") -> Path:
    """
    Write a mono WAV.  ``encoding`` is ``"pcm16"`` (clipped to full scale),
    ``"float32"`` or ``"float64"``.
    """
    path = Path(path)
    x = signal.samples
    if encoding == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    elif encoding == "float32":
        data = x.astype(np.float32)
    elif encoding == "float64":
        data = x.astype(np.float64)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, signal.sample_rate_hz, data)
    return path


# --------------------------------------------------------------------------- #
# Signal operations
# --------------------------------------------------------------------------- #
def remove_dc(signal: AudioSignal) -> AudioSignal:
    return AudioSignal(signal.samples - signal.samples.mean(), signal.sample_rate_hz)


def _frame_index(t_s: float, rate: int) -> int:
    # guard so that e.g. 4.3 s * 48000 (= 206399.99999999997) lands on 206400
    return math.floor(t_s * rate + 1e-6)


def crop(signal: AudioSignal, start_s: float, end_s: float) -> AudioSignal:
    """Samples in ``[floor(start_s*rate), floor(end_s*rate))``."""
    if not (0.0 <= start_s < end_s):
        raise ValueError(f"invalid crop bounds [{start_s}, {end_s})")
    if end_s > signal.duration_s + 1e-9:
        raise ValueError(
            f"crop end {end_s} s exceeds signal duration {signal.duration_s} s"
        )
    rate = signal.sample_rate_hz
    i0 = _frame_index(start_s, rate)
    i1 = min(_frame_index(end_s, rate), len(signal))
    if i1 <= i0:
        raise ValueError(f"crop [{start_s}, {end_s}) selects no samples")
    return AudioSignal(signal.samples[i0:i1], rate)


def window(
    signal: AudioSignal,
    window_len_frames: int = DEFAULT_WINDOW_FRAMES,
    hop_frames: int | None = None,
    taper: str = "box",
) -> WindowedSignal:
    """
    Split a signal into fixed-length analysis windows.

    Box windows with no overlap are the default; ``hop_frames`` smaller than
    the window length gives overlap and ``taper="hamming"`` applies a Hamming
    weight to every row.  A trailing partial window is discarded.
    """
    w = int(window_len_frames)
    if w < 2:
        raise ValueError(f"window length must be >= 2 frames, got {w}")
    hop = w if hop_frames is None else int(hop_frames)
    if hop < 1:
        raise ValueError("hop must be >= 1 frame")
    x = signal.samples
    if x.size < w:
        raise ValueError(f"window of {w} frames is longer than the signal ({x.size} frames)")
    n = 1 + (x.size - w) // hop
    if hop == w:
        rows = x[: n * w].reshape(n, w).copy()
    else:
        rows = np.lib.stride_tricks.sliding_window_view(x, w)[::hop][:n].copy()
    if taper == "hamming":
        rows *= np.hamming(w)
    elif taper != "box":
        raise ValueError(f"unknown taper {taper!r}")
    times = np.arange(n) * hop / signal.sample_rate_hz
    return WindowedSignal(rows, w, signal.sample_rate_hz, times, None if hop == w else hop)


# --------------------------------------------------------------------------- #
# Manifest / compositing
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class ManifestEntry:
    source_path: Path
    label: str | None
    crop_start_s: float
    crop_end_s: float
    role: str = "test"

    def __post_init__(self):
        if not self.crop_start_s < self.crop_end_s:
            raise ManifestError(
                f"{self.source_path}: crop start {self.crop_start_s} >= end {self.crop_end_s}"
            )
        if self.role not in ("train", "test"):
            raise ManifestError(f"{self.source_path}: role must be train or test, got {self.role!r}")

    def to_json(self, relative_to: Path | None = None) -> dict:
        src = self.source_path
        if relative_to is not None:
            try:
                src = src.resolve().relative_to(relative_to)
            except ValueError:
                pass
        return {
            "source": src.as_posix(),
            "label": self.label,
            "start_s": self.crop_start_s,
            "end_s": self.crop_end_s,
            "role": self.role,
        }


@dataclass(frozen=True)
class SegmentManifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ManifestError("manifest has no entries")

    def classes(self) -> tuple[str, ...]:
        """Class identifiers in order of first appearance."""
        seen: dict[str, None] = {}
        for e in self.entries:
            if e.label is not None:
                seen.setdefault(e.label, None)
        return tuple(seen)

    def check_training_coverage(self) -> None:
        trained = {e.label for e in self.entries if e.role == "train" and e.label is not None}
        missing = [c for c in self.classes() if c not in trained]
        if missing:
            raise ManifestError(f"no training entry for classes {missing}")

    @classmethod
    def load(cls, path: str | Path) -> "SegmentManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ManifestError(f"{path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, list):
            raise ManifestError(f"{path}: manifest must be a JSON array")
        entries = []
        for k, item in enumerate(raw):
            try:
                src = Path(item["source"])
                entries.append(
                    ManifestEntry(
                        source_path=src if src.is_absolute() else path.parent / src,
                        label=None if item.get("label") is None else str(item["label"]),
                        crop_start_s=float(item["start_s"]),
                        crop_end_s=float(item["end_s"]),
                        role=item.get("role", "test"),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}: entry {k} malformed ({exc})") from exc
        return cls(tuple(entries))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = [e.to_json(path.parent.resolve()) for e in self.entries]
        path.write_text(json.dumps(data, indent=2) + "\n")
        return path


@dataclass(frozen=True)
class Composite:
    """Concatenated crops with per-sample label codes and train flags."""

    signal: AudioSignal
    label_codes: np.ndarray  # int, -1 = unlabeled
    classes: tuple[str, ...]
    train_mask: np.ndarray
    boundaries: tuple[tuple[int, int], ...] = field(default=())

    def window_labels(
        self, window_len_frames: int, hop_frames: int | None = None
    ) -> tuple[list[str | None], np.ndarray]:
        """
        Per-window labels and train flags by majority vote over the samples
        each window covers (ties go to the lower class code).
        """
        w = int(window_len_frames)
        hop = w if hop_frames is None else int(hop_frames)
        n = 1 + (self.label_codes.size - w) // hop
        labels: list[str | None] = []
        train = np.zeros(n, dtype=bool)
        for i in range(n):
            codes = self.label_codes[i * hop : i * hop + w]
            best = int(np.argmax(np.bincount(codes + 1))) - 1
            labels.append(None if best < 0 else self.classes[best])
            train[i] = 2 * int(self.train_mask[i * hop : i * hop + w].sum()) > w
        return labels, train


def composite(manifest: SegmentManifest, channel_policy: str | int = "average") -> Composite:
    """Load and crop every manifest entry, concatenating in manifest order."""
    classes = manifest.classes()
    code_of = {c: k for k, c in enumerate(classes)}
    pieces, codes, train, bounds = [], [], [], []
    rate = None
    offset = 0
    for entry in manifest.entries:
        try:
            sig = load_audio(entry.source_path, channel_policy)
        except VehAudioError as exc:
            raise ManifestError(f"failed to load {entry.source_path}: {exc}") from exc
        if rate is None:
            rate = sig.sample_rate_hz
        elif sig.sample_rate_hz != rate:
            raise ManifestError(
                f"{entry.source_path}: sample rate {sig.sample_rate_hz} differs from {rate}"
            )
        try:
            seg = crop(sig, entry.crop_start_s, entry.crop_end_s)
        except ValueError as exc:
            raise ManifestError(f"{entry.source_path}: {exc}") from exc
        k = len(seg)
        pieces.append(seg.samples)
        codes.append(np.full(k, -1 if entry.label is None else code_of[entry.label], dtype=np.int64))
        train.append(np.full(k, entry.role == "train"))
        bounds.append((offset, offset + k))
        offset += k
    return Composite(
        signal=AudioSignal(np.concatenate(pieces), rate),
        label_codes=np.concatenate(codes),
        classes=classes,
        train_mask=np.concatenate(train),
        boundaries=tuple(bounds),
    )

