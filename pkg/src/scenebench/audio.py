"""Mono waveform container, 16-bit PCM WAV I/O and basic signal primitives."""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scenebench.vocab import CLASS_LABELS

PCM_SCALE = 32768.0


class AudioFormatError(ValueError):
    """Raised for WAV files or waveforms the toolkit does not accept."""


@dataclass(frozen=True, eq=False)
class Waveform:
    """Immutable mono signal.

    ``samples`` is stored as a read-only float64 array; amplitudes are
    nominally in [-1, 1].
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise AudioFormatError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @classmethod
    def zeros(cls, n: int, sample_rate: int) -> "Waveform":
        return cls(np.zeros(n), sample_rate)


@dataclass(frozen=True)
class AudioAsset:
    asset_id: str
    kind: str
    waveform: Waveform = field(repr=False)
    class_label: str | None = None

    def __post_init__(self):
        if self.kind == "event":
            if self.class_label not in CLASS_LABELS:
                raise AudioFormatError(f"unknown event class {self.class_label!r} for asset {self.asset_id}")
        elif self.kind == "background":
            if self.class_label is not None:
                raise AudioFormatError("background assets carry no class label")
        else:
            raise AudioFormatError(f"asset kind must be 'event' or 'background', got {self.kind!r}")


def load_wav(path) -> Waveform:
    """Read a single-channel linear-PCM WAV file.

    Samples are decoded to floats by dividing by the full-scale integer
    (32768 for 16-bit). Multi-channel files are rejected rather than
    downmixed.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"malformed WAV header in {path}: {exc}") from exc
    if channels != 1:
        raise AudioFormatError(f"unsupported channel count {channels} in {path}")
    return Waveform(_decode_pcm(raw, width), rate)


def _decode_pcm(raw: bytes, width: int) -> np.ndarray:
    if width == 1:
        return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if width == 2:
        return np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    if width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        return v.astype(np.float64) / float(1 << 23)
    if width == 4:
        return np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
    raise AudioFormatError(f"unsupported sample width {width} bytes")


def quantize(samples) -> tuple[np.ndarray, int]:
    """Map float samples to int16 with hard clipping.

    Returns the integer array and the number of input samples that lay
    outside [-1, 1].
    """
    x = np.asarray(samples, dtype=np.float64)
    clipped = int(np.count_nonzero((x > 1.0) | (x < -1.0)))
    q = np.clip(np.rint(x * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1)
    return q.astype("<i2"), clipped


def write_wav(waveform: Waveform, path) -> int:
    """Write ``waveform`` as 16-bit mono PCM and return the clip count."""
    if not np.all(np.isfinite(waveform.samples)):
        raise AudioFormatError("cannot write non-finite samples")
    pcm, clipped = quantize(waveform.samples)
    path = Path(path)
    try:
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(waveform.sample_rate)
            w.writeframes(pcm.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return clipped


def rms(waveform: Waveform) -> float:
    x = waveform.samples
    if x.size == 0:
        return 0.0
    return math.sqrt(float(np.dot(x, x)) / x.size)


def apply_gain(waveform: Waveform, gain: float) -> Waveform:
    if not math.isfinite(gain):
        raise ValueError(f"gain must be finite, got {gain}")
    return Waveform(waveform.samples * gain, waveform.sample_rate)


def onset_to_index(onset: float, sample_rate: int) -> int:
    """Round half away from zero; onsets are non-negative so this is floor(x + 0.5)."""
    return int(math.floor(onset * sample_rate + 0.5))


def mix_into(base: Waveform, overlay: Waveform, onset: float) -> Waveform:
    """Add ``overlay`` to ``base`` starting at ``onset`` seconds."""
    if base.sample_rate != overlay.sample_rate:
        raise AudioFormatError(
            f"sample-rate mismatch: base {base.sample_rate} Hz, overlay {overlay.sample_rate} Hz"
        )
    if onset < 0:
        raise ValueError(f"onset must be non-negative, got {onset}")
    start = onset_to_index(onset, base.sample_rate)
    return mix_at_index(base, overlay, start)


def mix_at_index(base: Waveform, overlay: Waveform, start: int) -> Waveform:
    stop = start + len(overlay)
    if start < 0 or stop > len(base):
        raise ValueError(
            f"overlay [{start}, {stop}) extends past base end ({len(base)} samples)"
        )
    out = base.samples.copy()
    out[start:stop] += overlay.samples
    return Waveform(out, base.sample_rate)
