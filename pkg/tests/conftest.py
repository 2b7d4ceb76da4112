import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def write_raw_wav(tmp_path):
    """Write an array straight to WAV with scipy, bypassing the package."""

    def _write(name, data, rate=48000):
        path = tmp_path / name
        wavfile.write(path, rate, data)
        return path

    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
