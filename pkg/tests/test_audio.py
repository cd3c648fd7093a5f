import math
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenebench.audio import (
    AudioAsset,
    AudioFormatError,
    Waveform,
    apply_gain,
    load_wav,
    mix_into,
    onset_to_index,
    rms,
    write_wav,
)

SR = 44100


def test_waveform_duration_exact():
    w = Waveform(np.zeros(88200), SR)
    assert w.duration == 2.0
    assert len(w) == 88200


def test_waveform_rejects_bad_rate():
    with pytest.raises(AudioFormatError):
        Waveform(np.zeros(3), 0)


def test_waveform_is_immutable():
    w = Waveform(np.zeros(4), SR)
    with pytest.raises(ValueError):
        w.samples[0] = 1.0


def test_asset_label_checked():
    w = Waveform(np.zeros(4), SR)
    AudioAsset("a", "event", w, "door knock")
    with pytest.raises(AudioFormatError):
        AudioAsset("a", "event", w, "printer")
    with pytest.raises(AudioFormatError):
        AudioAsset("b", "background", w, "cough")


def test_load_silence(tmp_path):
    path = tmp_path / "silence.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SR)
        w.writeframes(b"\x00\x00" * SR)
    out = load_wav(path)
    assert out.sample_rate == SR
    assert len(out) == SR
    assert not out.samples.any()


def test_roundtrip_quantized_is_exact(tmp_path, rng):
    ints = rng.integers(-32768, 32768, size=5000)
    w = Waveform(ints / 32768.0, SR)
    assert write_wav(w, tmp_path / "q.wav") == 0
    assert load_wav(tmp_path / "q.wav") == w


def test_constant_within_one_step(tmp_path):
    write_wav(Waveform(np.full(100, 0.5), SR), tmp_path / "c.wav")
    back = load_wav(tmp_path / "c.wav").samples
    assert np.all(np.abs(back - 0.5) <= 1 / 32768)


def test_roundtrip_error_bound(tmp_path, rng):
    x = rng.uniform(-1, 1, size=10000)
    write_wav(Waveform(x, SR), tmp_path / "r.wav")
    back = load_wav(tmp_path / "r.wav").samples
    assert np.max(np.abs(back - x)) <= 1 / 32768


def test_clipping_reported(tmp_path):
    x = np.array([0.0, 1.5, -2.0, 0.25])
    assert write_wav(Waveform(x, SR), tmp_path / "clip.wav") == 2
    back = load_wav(tmp_path / "clip.wav").samples
    assert back[1] == pytest.approx(1.0, abs=1 / 32768)
    assert back[2] == -1.0
    assert back[3] == 0.25


def test_empty_file(tmp_path):
    write_wav(Waveform(np.zeros(0), SR), tmp_path / "e.wav")
    back = load_wav(tmp_path / "e.wav")
    assert len(back) == 0 and back.sample_rate == SR


def test_write_rejects_nonfinite(tmp_path):
    with pytest.raises(AudioFormatError):
        write_wav(Waveform(np.array([0.0, np.nan]), SR), tmp_path / "n.wav")


def test_stereo_rejected(tmp_path):
    path = tmp_path / "st.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(SR)
        w.writeframes(b"\x00\x00" * 20)
    with pytest.raises(AudioFormatError, match="unsupported channel count"):
        load_wav(path)


def test_missing_and_malformed(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_wav(tmp_path / "nope.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF\x00\x00garbage")
    with pytest.raises(AudioFormatError):
        load_wav(bad)


def test_rms_cases():
    assert rms(Waveform(np.zeros(10), SR)) == 0.0
    assert rms(Waveform(np.zeros(0), SR)) == 0.0
    assert rms(Waveform(np.full(10, 0.5), SR)) == pytest.approx(0.5)
    n = 441 * 100  # 100 periods of 441 samples
    sine = np.sin(2 * np.pi * np.arange(n) / 441)
    assert abs(rms(Waveform(sine, SR)) - 1 / math.sqrt(2)) < 1e-6


def test_gain_identity_and_zero(rng):
    w = Waveform(rng.normal(size=100), SR)
    assert apply_gain(w, 1.0) == w
    assert not apply_gain(w, 0.0).samples.any()


@given(st.one_of(st.just(0.0), st.floats(1e-6, 100)), st.integers(0, 2**32 - 1))
def test_rms_scales_with_gain(g, seed):
    x = Waveform(np.random.default_rng(seed).normal(size=64), SR)
    assert rms(apply_gain(x, g)) == pytest.approx(g * rms(x), rel=1e-9, abs=1e-300)


def test_mix_cases():
    base = Waveform(np.arange(10.0), SR)
    assert mix_into(base, Waveform(np.zeros(3), SR), 0.0) == base
    x = Waveform(np.array([1.0, 2.0, 3.0]), SR)
    out = mix_into(Waveform.zeros(6, SR), x, 0.0)
    np.testing.assert_array_equal(out.samples, [1, 2, 3, 0, 0, 0])
    imp = Waveform(np.array([1.0]), SR)
    two = mix_into(mix_into(Waveform.zeros(5, SR), imp, 2 / SR), imp, 2 / SR)
    assert two.samples[2] == 2.0 and two.samples.sum() == 2.0


def test_mix_errors():
    base = Waveform.zeros(10, SR)
    with pytest.raises(AudioFormatError):
        mix_into(base, Waveform.zeros(2, 22050), 0.0)
    with pytest.raises(ValueError):
        mix_into(base, Waveform.zeros(5, SR), 6 / SR)


@settings(max_examples=50)
@given(st.floats(0, 4), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_mix_is_linear(g, start, seed):
    r = np.random.default_rng(seed)
    b = Waveform(r.normal(size=64), SR)
    x = Waveform(r.normal(size=16), SR)
    t = start / SR
    lhs = mix_into(b, apply_gain(x, g), t).samples
    rhs = b.samples + g * mix_into(Waveform.zeros(64, SR), x, t).samples
    np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_onset_index_rounding():
    assert onset_to_index(0.5 / SR, SR) == 1
    assert onset_to_index(1.4 / SR, SR) == 1
    assert onset_to_index(120.0, SR) == 120 * SR
    # no drift across the whole scene
    assert all(onset_to_index(k / SR, SR) == k for k in range(0, 120 * SR, 9973))
