"""
Synthetic vehicle pass-by audio with ground-truth labels.

A vehicle is a harmonic series on a fundamental plus an optional low-passed
broadband rumble.  A passage drives it past the microphone on a straight line
at constant speed: amplitude follows inverse distance, and with Doppler on
each harmonic's instantaneous frequency is scaled by c / (c + dr/dt).
Background noise is added at a given SNR measured over the second around
closest approach, and the result is peak-normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .audio import DEFAULT_SAMPLE_RATE, AudioSignal, ManifestEntry, SegmentManifest, write_wav

SPEED_OF_SOUND = 343.0
PEAK_LEVEL = 0.9
WIND_CUTOFF_HZ = 1040.0  # 130 coefficients of a 6000-frame window at 48 kHz


@dataclass(frozen=True)
class VehicleSpec:
    label: str
    fundamental_hz: float
    harmonic_amps: tuple[float, ...]
    broadband_level: float = 0.0
    broadband_cutoff_hz: float = 1500.0

    def __post_init__(self):
        object.__setattr__(self, "harmonic_amps", tuple(float(a) for a in self.harmonic_amps))
        if not self.fundamental_hz > 0:
            raise ValueError(f"{self.label}: fundamental must be positive")
        if not any(a > 0 for a in self.harmonic_amps):
            raise ValueError(f"{self.label}: needs at least one positive harmonic amplitude")
        if self.broadband_level < 0:
            raise ValueError(f"{self.label}: broadband level must be >= 0")

    def harmonic_freqs(self, rpm_factor: float = 1.0) -> np.ndarray:
        return self.fundamental_hz * rpm_factor * np.arange(1, len(self.harmonic_amps) + 1)


@dataclass(frozen=True)
class PassageSpec:
    vehicle: VehicleSpec
    duration_s: float = 6.0
    closest_approach_s: float = 3.0
    speed_mps: float = 6.7  # ~15 mph
    background_snr_db: float = 20.0
    doppler: bool = True
    seed: int = 0
    offset_m: float = 5.0
    rpm_factor: float = 1.0
    noise_color: str = "white"

    def __post_init__(self):
        if not 0 < self.closest_approach_s < self.duration_s:
            raise ValueError("closest approach must fall strictly inside the passage")
        if self.speed_mps < 0:
            raise ValueError("speed must be >= 0")
        if not self.offset_m > 0:
            raise ValueError("perpendicular offset must be positive")
        if not self.rpm_factor > 0:
            raise ValueError("rpm factor must be positive")
        if self.noise_color not in ("white", "wind"):
            raise ValueError(f"unknown noise color {self.noise_color!r}")


def doppler_factor(t: np.ndarray, spec: PassageSpec) -> np.ndarray:
    """Observed / emitted frequency ratio over time (ones with Doppler off)."""
    if not spec.doppler or spec.speed_mps == 0:
        return np.ones_like(t)
    tau = t - spec.closest_approach_s
    r = np.hypot(spec.speed_mps * tau, spec.offset_m)
    range_rate = spec.speed_mps**2 * tau / r  # < 0 approaching
    return SPEED_OF_SOUND / (SPEED_OF_SOUND + range_rate)


def _lowpass_noise(rng: np.random.Generator, n: int, cutoff_hz: float, rate: int) -> np.ndarray:
    sos = sps.butter(4, min(cutoff_hz, 0.45 * rate), fs=rate, output="sos")
    x = sps.sosfilt(sos, rng.standard_normal(n))
    return x / np.sqrt(np.mean(x**2))


def synth_passage(spec: PassageSpec, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> tuple[AudioSignal, np.ndarray]:
    """
    Render one pass-by.  Returns the signal and a per-sample label track.

    Deterministic in ``spec.seed``.
    """
    rate = int(sample_rate_hz)
    n = int(round(spec.duration_s * rate))
    t = np.arange(n) / rate
    rng = np.random.default_rng(spec.seed)
    veh = spec.vehicle

    factor = doppler_factor(t, spec)
    base_phase = 2 * np.pi * veh.fundamental_hz * spec.rpm_factor * np.cumsum(factor) / rate
    start_phases = rng.uniform(0, 2 * np.pi, len(veh.harmonic_amps))
    harm = np.zeros(n)
    nyquist = rate / 2
    for k, (amp, ph0) in enumerate(zip(veh.harmonic_amps, start_phases), start=1):
        if amp == 0 or k * veh.fundamental_hz * spec.rpm_factor >= nyquist:
            continue
        harm += amp * np.sin(k * base_phase + ph0)

    if veh.broadband_level > 0:
        harm_rms = math.sqrt(0.5 * sum(a * a for a in veh.harmonic_amps))
        harm += veh.broadband_level * harm_rms * _lowpass_noise(rng, n, veh.broadband_cutoff_hz, rate)

    tau = t - spec.closest_approach_s
    envelope = spec.offset_m / np.hypot(spec.speed_mps * tau, spec.offset_m)
    x = envelope * harm

    if np.isfinite(spec.background_snr_db):
        near = np.abs(tau) <= 0.5
        p_signal = float(np.mean(x[near] ** 2)) if near.any() else float(np.mean(x**2))
        sigma = math.sqrt(p_signal / 10 ** (spec.background_snr_db / 10))
        if spec.noise_color == "wind":
            noise = _lowpass_noise(rng, n, WIND_CUTOFF_HZ, rate)
        else:
            noise = rng.standard_normal(n)
        x = x + sigma * noise

    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (PEAK_LEVEL / peak)
    labels = np.full(n, veh.label)
    return AudioSignal(x, rate), labels


def crop_bounds(spec: PassageSpec, crop_s: float) -> tuple[float, float]:
    """Crop of ``crop_s`` seconds centered on closest approach, kept inside the passage."""
    crop_s = min(crop_s, spec.duration_s)
    start = min(max(spec.closest_approach_s - crop_s / 2, 0.0), spec.duration_s - crop_s)
    return start, start + crop_s


def synth_dataset(
    specs: Sequence[PassageSpec],
    crop_s: float,
    out_dir: str | Path,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE,
    train_per_class: int = 1,
) -> SegmentManifest:
    """
    Render every passage to a 16-bit WAV under ``out_dir`` and write
    ``manifest.json`` cropping each one around closest approach.  The first
    ``train_per_class`` passages of every vehicle get role ``train``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seen: dict[str, int] = {}
    entries = []
    for idx, spec in enumerate(specs):
        label = spec.vehicle.label
        sig, _ = synth_passage(spec, sample_rate_hz)
        wav = write_wav(out_dir / f"passage_{idx:03d}_{label}.wav", sig)
        start, end = crop_bounds(spec, crop_s)
        role = "train" if seen.get(label, 0) < train_per_class else "test"
        seen[label] = seen.get(label, 0) + 1
        entries.append(ManifestEntry(wav, label, start, end, role))
    manifest = SegmentManifest(tuple(entries))
    manifest.save(out_dir / "manifest.json")
    return manifest


# --------------------------------------------------------------------------- #
# Scenarios
# --------------------------------------------------------------------------- #
DEFAULT_VEHICLES = (
    VehicleSpec(
        "white_truck", 29.0,
        (1.0, 0.85, 0.7, 0.9, 0.5, 0.6, 0.35, 0.3, 0.4, 0.2, 0.15, 0.2, 0.1, 0.08),
        broadband_level=2.4, broadband_cutoff_hz=900.0,
    ),
    VehicleSpec(
        "black_truck", 43.0,
        (0.6, 1.0, 0.3, 0.8, 0.2, 0.55, 0.15, 0.4, 0.1, 0.25, 0.08, 0.15),
        broadband_level=3.2, broadband_cutoff_hz=1400.0,
    ),
    VehicleSpec(
        "jeep", 71.0,
        (1.0, 0.5, 0.75, 0.3, 0.45, 0.2, 0.3, 0.12, 0.18, 0.1),
        broadband_level=2.0, broadband_cutoff_hz=2500.0,
    ),
)


@dataclass
class Scenario:
    """Recipe for a labeled multi-passage dataset."""

    vehicles: tuple[VehicleSpec, ...] = DEFAULT_VEHICLES
    passages_per_vehicle: int = 4
    duration_s: float = 6.0
    crop_s: float = 2.0
    speed_mps: float = 6.7
    speed_jitter: float = 0.1
    rpm_jitter: float = 0.01
    approach_jitter_s: float = 0.5
    background_snr_db: float = 20.0
    doppler: bool = True
    noise_color: str = "white"
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        vehicles = data.pop("vehicles", None)
        known = {f for f in cls.__dataclass_fields__ if f != "vehicles"}
        kwargs = {k: data.pop(k) for k in list(data) if k in known}
        if data:
            raise ValueError(f"unknown scenario keys {sorted(data)}")
        if vehicles is not None:
            kwargs["vehicles"] = tuple(
                VehicleSpec(
                    label=str(v["label"]),
                    fundamental_hz=float(v["fundamental_hz"]),
                    harmonic_amps=tuple(v["harmonic_amps"]),
                    broadband_level=float(v.get("broadband_level", 0.0)),
                    broadband_cutoff_hz=float(v.get("broadband_cutoff_hz", 1500.0)),
                )
                for v in vehicles
            )
        return cls(**kwargs)

    def passages(self) -> list[PassageSpec]:
        """
        Vehicle-major list of passages.  Speed, engine rpm and the time of
        closest approach vary per passage; approach times are snapped to
        1/8 s so that crops start on whole frames.
        """
        rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), 0x5EED]))
        out = []
        for v_idx, vehicle in enumerate(self.vehicles):
            for p in range(self.passages_per_vehicle):
                jitter = rng.uniform(-self.approach_jitter_s, self.approach_jitter_s)
                tc = round((self.duration_s / 2 + jitter) * 8) / 8
                out.append(
                    PassageSpec(
                        vehicle=vehicle,
                        duration_s=self.duration_s,
                        closest_approach_s=tc,
                        speed_mps=self.speed_mps * (1 + rng.uniform(-self.speed_jitter, self.speed_jitter)),
                        background_snr_db=self.background_snr_db,
                        doppler=self.doppler,
                        seed=int(rng.integers(0, 2**31 - 1)),
                        rpm_factor=1 + rng.uniform(-self.rpm_jitter, self.rpm_jitter),
                        noise_color=self.noise_color,
                    )
                )
        return out

    def render(self, out_dir: str | Path) -> SegmentManifest:
        return synth_dataset(self.passages(), self.crop_s, out_dir, self.sample_rate_hz)

