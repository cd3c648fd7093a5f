"""Toy asset pool so the pipeline can run without recorded office sounds."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from scenebench.audio import Waveform, write_wav
from scenebench.vocab import CLASS_LABELS, SAMPLE_RATE, SCENE_DURATION


def _event_signal(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    env = np.sin(np.pi * np.arange(n) / n) ** 0.5
    f0 = rng.uniform(200.0, 3000.0)
    tone = np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
    noise = rng.standard_normal(n)
    mix = rng.uniform(0.0, 1.0)
    x = env * (mix * tone + (1 - mix) * noise)
    return 0.3 * x / np.max(np.abs(x))


def _background_signal(rng: np.random.Generator, n: int) -> np.ndarray:
    # one-pole low-passed noise
    a = 0.95
    out = lfilter([1 - a], [1, -a], rng.standard_normal(n))
    return 0.05 * out / np.std(out)


def make_asset_pool(root, per_class: int = 5, n_backgrounds: int = 3, seed: int = 0,
                    min_dur: float = 0.6, max_dur: float = 2.0,
                    background_seconds: float = SCENE_DURATION + 1.0, sample_rate: int = SAMPLE_RATE) -> Path:
    """Write a synthetic pool in the ``events/<class>/`` + ``background/`` layout."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    for label in CLASS_LABELS:
        d = root / "events" / label.replace(" ", "_")
        d.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            n = int(rng.uniform(min_dur, max_dur) * sample_rate)
            write_wav(Waveform(_event_signal(rng, n, sample_rate), sample_rate), d / f"{i:03d}.wav")
    bg = root / "background"
    bg.mkdir(parents=True, exist_ok=True)
    n_bg = int(background_seconds * sample_rate)
    for i in range(n_backgrounds):
        write_wav(Waveform(_background_signal(rng, n_bg), sample_rate), bg / f"bg{i + 1}.wav")
    return root
