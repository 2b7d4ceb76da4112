import json

import numpy as np
import pytest
from scipy.signal import argrelmax

from vehaudio import audio, features, graph, synth
from vehaudio.synth import PassageSpec, Scenario, VehicleSpec

RATE = 48000
W = 6000
QUIET = float("inf")


def closest_spectrum(spec, n_coeffs=W // 2):
    sig, _ = synth.synth_passage(spec, RATE)
    win = audio.window(sig, W)
    i = int(spec.closest_approach_s * RATE) // W
    return np.abs(features.fourier_coefficients(win)[i, :n_coeffs])


def peak_bin(sig, start_s):
    seg = audio.crop(sig, start_s, start_s + W / RATE)
    return int(np.argmax(np.abs(np.fft.rfft(seg.samples))))


def bare(vehicle):
    return VehicleSpec(vehicle.label, vehicle.fundamental_hz, vehicle.harmonic_amps)


def test_single_tone_peak_at_nearest_bin():
    tone = VehicleSpec("tone", 437.0, (1.0,))
    X = closest_spectrum(PassageSpec(tone, background_snr_db=QUIET, doppler=False))
    assert int(np.argmax(X)) == round(437.0 * W / RATE)


def test_doppler_shift_direction():
    tone = VehicleSpec("tone", 1000.0, (1.0,))
    spec = PassageSpec(tone, speed_mps=30.0, background_snr_db=QUIET, doppler=True)
    sig, _ = synth.synth_passage(spec, RATE)
    f0_bin = round(1000.0 * W / RATE)
    approach = peak_bin(sig, spec.closest_approach_s - 1.0)
    departure = peak_bin(sig, spec.closest_approach_s + 1.0)
    assert approach >= f0_bin >= departure
    # the shift is large enough at 30 m/s to move several bins either way
    assert approach > f0_bin + 5 and departure < f0_bin - 5


def test_doppler_factor_limits():
    spec = PassageSpec(VehicleSpec("v", 50.0, (1.0,)), speed_mps=20.0)
    f = synth.doppler_factor(np.array([0.0, spec.closest_approach_s, 6.0]), spec)
    assert f[0] > 1 > f[2]
    assert f[1] == pytest.approx(1.0)
    off = PassageSpec(spec.vehicle, doppler=False)
    np.testing.assert_array_equal(synth.doppler_factor(np.arange(3.0), off), np.ones(3))


def test_same_seed_bit_identical():
    spec = PassageSpec(synth.DEFAULT_VEHICLES[0], seed=42)
    a, la = synth.synth_passage(spec, RATE)
    b, lb = synth.synth_passage(spec, RATE)
    assert np.array_equal(a.samples, b.samples)
    assert (la == lb).all() and la[0] == "white_truck" and la.size == a.samples.size


@pytest.mark.parametrize("vehicle", synth.DEFAULT_VEHICLES, ids=lambda v: v.label)
@pytest.mark.parametrize("color", ["white", "wind"])
def test_amplitude_bounds(vehicle, color):
    sig, _ = synth.synth_passage(PassageSpec(vehicle, seed=7, noise_color=color), RATE)
    assert np.max(np.abs(sig.samples)) == pytest.approx(synth.PEAK_LEVEL)
    assert np.all(np.abs(sig.samples) <= 1.0)


def test_snr_is_respected():
    tone = VehicleSpec("tone", 200.0, (1.0,))
    clean = PassageSpec(tone, background_snr_db=QUIET, seed=1)
    noisy = PassageSpec(tone, background_snr_db=10.0, seed=1)
    a = synth.synth_passage(clean, RATE)[0].samples
    b = synth.synth_passage(noisy, RATE)[0].samples
    # both are peak-normalized; rescale the clean one to the noisy signal's level
    near = slice(int(2.5 * RATE), int(3.5 * RATE))
    scale = np.dot(a[near], b[near]) / np.dot(a[near], a[near])
    resid = b[near] - scale * a[near]
    snr = 10 * np.log10(np.mean((scale * a[near]) ** 2) / np.mean(resid**2))
    assert snr == pytest.approx(10.0, abs=0.5)


@pytest.mark.parametrize("vehicle", synth.DEFAULT_VEHICLES, ids=lambda v: v.label)
def test_dominant_magnitudes_at_harmonic_bins(vehicle):
    X = closest_spectrum(PassageSpec(bare(vehicle), background_snr_db=QUIET, doppler=False, seed=3))
    H = len(vehicle.harmonic_amps)
    peaks = argrelmax(X)[0]
    top = peaks[np.argsort(X[peaks])[::-1][:H]]
    harmonic_bins = vehicle.harmonic_freqs() * W / RATE
    for b in top:
        assert np.min(np.abs(harmonic_bins - b)) <= 1.0


def test_disjoint_harmonics_are_far_apart():
    amps = (1.0, 0.8, 0.6, 0.4, 0.2)
    a = VehicleSpec("a", 100.0, amps)
    b = VehicleSpec("b", 330.0, amps)
    assert not set(np.round(a.harmonic_freqs())) & set(np.round(b.harmonic_freqs()))
    feats = np.vstack([
        closest_spectrum(PassageSpec(v, background_snr_db=QUIET, doppler=False), 1500)
        for v in (a, b)
    ])
    assert graph.cosine_distances(feats)[0, 1] >= 0.5


@pytest.mark.parametrize("vehicle", synth.DEFAULT_VEHICLES, ids=lambda v: v.label)
def test_low_coefficients_carry_most_magnitude(vehicle):
    spec = PassageSpec(vehicle, background_snr_db=QUIET, seed=1)
    sig, _ = synth.synth_passage(spec, RATE)
    win = audio.window(audio.remove_dc(audio.crop(sig, 2.5, 3.5)), W)
    X = features.stft(win, W // 2).X
    assert features.magnitude_fraction(X, 1500).min() >= 0.90


@pytest.mark.parametrize(
    "kwargs",
    [
        {"closest_approach_s": 0.0},
        {"closest_approach_s": 6.0},
        {"speed_mps": -1.0},
        {"offset_m": 0.0},
        {"rpm_factor": 0.0},
        {"noise_color": "pink"},
    ],
)
def test_invalid_passage(kwargs):
    with pytest.raises(ValueError):
        PassageSpec(synth.DEFAULT_VEHICLES[0], **kwargs)


@pytest.mark.parametrize(
    "args",
    [("v", 0.0, (1.0,)), ("v", 50.0, (0.0, 0.0)), ("v", 50.0, ())],
)
def test_invalid_vehicle(args):
    with pytest.raises(ValueError):
        VehicleSpec(*args)


def test_crop_bounds():
    spec = PassageSpec(synth.DEFAULT_VEHICLES[0], closest_approach_s=0.5)
    assert synth.crop_bounds(spec, 2.0) == (0.0, 2.0)
    assert synth.crop_bounds(PassageSpec(spec.vehicle), 2.0) == (2.0, 4.0)
    assert synth.crop_bounds(spec, 6.0) == (0.0, 6.0)


def test_dataset_three_by_four(tmp_path):
    scen = Scenario(seed=11, duration_s=3.0)
    manifest = scen.render(tmp_path)
    assert len(manifest.entries) == 12
    assert manifest.classes() == ("white_truck", "black_truck", "jeep")
    assert sum(e.role == "train" for e in manifest.entries) == 3
    for e in manifest.entries:
        assert e.crop_end_s - e.crop_start_s == pytest.approx(2.0)
    loaded = audio.SegmentManifest.load(tmp_path / "manifest.json")
    assert [e.label for e in loaded.entries] == [e.label for e in manifest.entries]
    comp = audio.composite(loaded)
    assert comp.signal.samples.size == 12 * 2 * RATE


def test_crop_equal_to_duration_keeps_full_passages(tmp_path):
    specs = [PassageSpec(v, duration_s=1.0, closest_approach_s=0.5, seed=i)
             for i, v in enumerate(synth.DEFAULT_VEHICLES)]
    manifest = synth.synth_dataset(specs, 1.0, tmp_path)
    for e, spec in zip(manifest.entries, specs):
        assert (e.crop_start_s, e.crop_end_s) == (0.0, 1.0)
        full = audio.load_audio(e.source_path)
        assert audio.crop(full, e.crop_start_s, e.crop_end_s).samples.size == full.samples.size


def test_distinct_seeds_distinct_streams():
    passages = Scenario(seed=5, duration_s=2.0).passages()
    assert len({p.seed for p in passages}) == len(passages)
    streams = [synth.synth_passage(p, RATE)[0].samples for p in passages]
    for i in range(len(streams)):
        for j in range(i + 1, len(streams)):
            assert not np.array_equal(streams[i], streams[j])


def test_scenario_passages_deterministic():
    a = Scenario(seed=3).passages()
    b = Scenario(seed=3).passages()
    c = Scenario(seed=4).passages()
    assert a == b and a != c
    for p in a:
        assert (p.closest_approach_s * 8).is_integer()
        assert 2.5 <= p.closest_approach_s <= 3.5


def test_scenario_from_dict():
    data = json.loads(json.dumps({
        "seed": 2,
        "passages_per_vehicle": 2,
        "vehicles": [
            {"label": "a", "fundamental_hz": 40, "harmonic_amps": [1, 0.5]},
            {"label": "b", "fundamental_hz": 90, "harmonic_amps": [1], "broadband_level": 0.5},
        ],
    }))
    scen = Scenario.from_dict(data)
    assert [v.label for v in scen.vehicles] == ["a", "b"]
    assert scen.vehicles[1].broadband_level == 0.5
    assert len(scen.passages()) == 4
    with pytest.raises(ValueError):
        Scenario.from_dict({"bogus": 1})
