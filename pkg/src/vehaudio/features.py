"""
Per-window Fourier features, band-limited reconstructions and the smoothing /
normalization helpers used for spectrum comparison plots.

Transform convention: unnormalized forward DFT, inverse scaled by 1/w.  For a
window of w frames only the first floor(w/2) coefficients are "usable"; the
rest mirror them (the Nyquist bin of an even window is left out of that count).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .audio import AudioSignal, WindowedSignal, window
from .errors import FeatureError

DEFAULT_COEFFS = 1500

SVFM_MAGIC = b"SVFM"
SVFM_VERSION = 1
_SVFM_HEADER = struct.Struct("<4sBII")


@dataclass(frozen=True)
class FeatureMatrix:
    """n windows x m Fourier magnitudes, with window start times."""

    X: np.ndarray
    window_times_s: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise FeatureError("feature matrix must be two-dimensional")
        times = np.asarray(self.window_times_s, dtype=np.float64)
        if times.shape != (X.shape[0],):
            raise FeatureError(f"{times.size} window times for {X.shape[0]} rows")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "window_times_s", times)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def degenerate_rows(self) -> np.ndarray:
        """Indices of rows with no strictly positive entry."""
        return np.flatnonzero(~(self.X > 0).any(axis=1))

    # -- serialization ---------------------------------------------------- #
    def save_csv(self, path: str | Path) -> Path:
        path = Path(path)
        header = ",".join(["time_s"] + [f"c{j}" for j in range(self.m)])
        data = np.column_stack([self.window_times_s, self.X])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
        return path

    @classmethod
    def load_csv(cls, path: str | Path) -> "FeatureMatrix":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:], data[:, 0])

    def save_binary(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(_SVFM_HEADER.pack(SVFM_MAGIC, SVFM_VERSION, self.n, self.m))
            fh.write(np.ascontiguousarray(self.X, dtype="<f8").tobytes())
        return path

    @classmethod
    def load_binary(cls, path: str | Path, window_times_s: np.ndarray | None = None) -> "FeatureMatrix":
        """Read an SVFM file.  The format carries no times; rows default to their index."""
        raw = Path(path).read_bytes()
        if len(raw) < _SVFM_HEADER.size:
            raise FeatureError(f"{path}: truncated SVFM header")
        magic, version, n, m = _SVFM_HEADER.unpack_from(raw)
        if magic != SVFM_MAGIC:
            raise FeatureError(f"{path}: bad magic {magic!r}")
        if version != SVFM_VERSION:
            raise FeatureError(f"{path}: unsupported SVFM version {version}")
        body = raw[_SVFM_HEADER.size :]
        if len(body) != 8 * n * m:
            raise FeatureError(f"{path}: expected {8 * n * m} payload bytes, found {len(body)}")
        X = np.frombuffer(body, dtype="<f8").reshape(n, m).astype(np.float64)
        times = np.arange(n, dtype=np.float64) if window_times_s is None else window_times_s
        return cls(X, times)


def usable_coefficients(window_len_frames: int) -> int:
    return int(window_len_frames) // 2


def fourier_coefficients(windowed: WindowedSignal) -> np.ndarray:
    """Full complex DFT of every window, shape (n, w)."""
    return np.fft.fft(windowed.windows, axis=1)


def stft(windowed: WindowedSignal, m: int = DEFAULT_COEFFS) -> FeatureMatrix:
    """
    Magnitudes of the first ``m`` DFT coefficients of each window.

    Coefficient 0 (DC) is included.  ``m`` may not exceed floor(w/2).
    """
    w = windowed.window_len_frames
    if not 1 <= m <= usable_coefficients(w):
        raise FeatureError(f"m={m} outside [1, {usable_coefficients(w)}] for {w}-frame windows")
    spec = np.fft.rfft(windowed.windows, axis=1)[:, :m]
    return FeatureMatrix(np.abs(spec), windowed.window_times_s.copy())


def _band_mask(w: int, keep_ranges: Sequence[tuple[int, int]]) -> np.ndarray:
    """
    Boolean mask over the w full-spectrum bins.

    Ranges are half-open ``[lo, hi)`` over coefficient indices in
    ``[0, floor(w/2)]``; ``hi == floor(w/2)`` runs through the top bin so that
    a range ending there also covers the Nyquist coefficient.
    """
    half = w // 2
    mask = np.zeros(w, dtype=bool)
    for lo, hi in keep_ranges:
        lo, hi = int(lo), int(hi)
        if not 0 <= lo < hi <= half:
            raise FeatureError(f"coefficient range [{lo}, {hi}) outside [0, {half}]")
        if hi == half:
            hi = half + 1
        k = np.arange(lo, hi)
        mask[k] = True
        mask[(w - k) % w] = True
    return mask


def band_reconstruct(
    source: AudioSignal | WindowedSignal | np.ndarray,
    keep_ranges: Iterable[tuple[int, int]],
    window_len_frames: int | None = None,
    sample_rate_hz: int | None = None,
    imag_tol: float = 1e-9,
) -> AudioSignal:
    """
    Reconstruct audio keeping only selected coefficient ranges.

    Each window is transformed, coefficients outside ``keep_ranges`` (and their
    conjugate partners) are zeroed, and the inverse transform is taken.  The
    windows are re-concatenated, so only full windows appear in the output.

    ``source`` may be an AudioSignal (needs ``window_len_frames``), a
    WindowedSignal, or an (n, w) array of full complex coefficients (needs
    ``sample_rate_hz``).
    """
    keep_ranges = list(keep_ranges)
    if isinstance(source, AudioSignal):
        if window_len_frames is None:
            raise FeatureError("window_len_frames is required to reconstruct a raw signal")
        source = window(source, window_len_frames)
    if isinstance(source, WindowedSignal):
        if source.hop_frames is not None:
            raise FeatureError("band reconstruction needs non-overlapping windows")
        coeffs = fourier_coefficients(source)
        rate = source.source_rate_hz
    else:
        coeffs = np.asarray(source)
        if not np.iscomplexobj(coeffs) or coeffs.ndim != 2:
            raise FeatureError("complex coefficients of shape (n, w) are required")
        if sample_rate_hz is None:
            raise FeatureError("sample_rate_hz is required with raw coefficients")
        rate = sample_rate_hz

    w = coeffs.shape[1]
    kept = np.where(_band_mask(w, keep_ranges), coeffs, 0)
    recon = np.fft.ifft(kept, axis=1)
    residue = float(np.max(np.abs(recon.imag))) if recon.size else 0.0
    if residue >= imag_tol:
        raise FeatureError(f"reconstruction has imaginary residue {residue:.3g}")
    return AudioSignal(recon.real.reshape(-1), rate)


def band_energies(
    signal: AudioSignal,
    bands: Sequence[tuple[int, int]],
    window_len_frames: int,
) -> np.ndarray:
    """Sum of squared reconstructed samples per window and band, shape (n, len(bands))."""
    cols = []
    for band in bands:
        rec = band_reconstruct(signal, [band], window_len_frames)
        cols.append((rec.samples.reshape(-1, window_len_frames) ** 2).sum(axis=1))
    return np.column_stack(cols)


def moving_mean(v: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; edge points average over the truncated window."""
    v = np.asarray(v, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise ValueError(f"moving-mean window must be a positive odd count, got {window}")
    if window > v.size:
        raise ValueError(f"window {window} longer than vector ({v.size})")
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(v.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, v.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def normalize_sum(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    total = v.sum()
    if not total > 0:
        raise ValueError("cannot normalize a vector whose sum is not positive")
    return v / total


def magnitude_fraction(X: np.ndarray, m: int) -> np.ndarray:
    """Per-row share of the summed magnitudes carried by the first ``m`` columns."""
    X = np.asarray(X, dtype=np.float64)
    return X[:, :m].sum(axis=1) / X.sum(axis=1)
