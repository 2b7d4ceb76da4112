"""Pipeline parameters, loadable from JSON and overridable per flag."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import VehAudioError


@dataclass
class PipelineConfig:
    window_len_frames: int = 6000
    hop_frames: int | None = None
    taper: str = "box"
    m: int = 1500
    n_neighbors: int = 15
    k_eigs: int = 5
    auto_k: bool = False
    drop_trivial: bool = False
    normalize_rows: bool = False
    n_report_eigs: int = 20
    eigengap_k_max: int = 10
    kmeans_k: int = 3
    kmeans_restarts: int = 1000
    kmeans_max_iters: int = 300
    knn_k: int = 15
    seed: int = 0
    threads: int = 1
    out_dir: str = "out"

    def validate(self) -> "PipelineConfig":
        counts = (
            "window_len_frames", "m", "n_neighbors", "k_eigs", "n_report_eigs",
            "kmeans_k", "kmeans_restarts", "kmeans_max_iters", "knn_k", "threads",
        )
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise VehAudioError(f"config: {name} must be positive")
        if self.hop_frames is not None and self.hop_frames < 1:
            raise VehAudioError("config: hop_frames must be positive")
        if self.m > self.window_len_frames // 2:
            raise VehAudioError(
                f"config: m={self.m} exceeds half the window length ({self.window_len_frames // 2})"
            )
        if self.taper not in ("box", "hamming"):
            raise VehAudioError(f"config: unknown taper {self.taper!r}")
        if self.eigengap_k_max < 2:
            raise VehAudioError("config: eigengap_k_max must be >= 2")
        return self

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise VehAudioError(f"{path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise VehAudioError(f"{path}: invalid JSON ({exc})") from exc
        return cls().update(data)

    def update(self, overrides: dict) -> "PipelineConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise VehAudioError(f"config: unknown keys {sorted(unknown)}")
        for key, value in overrides.items():
            setattr(self, key, value)
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"
