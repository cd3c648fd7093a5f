"""Experimental grid planning and scene rendering.

A scene is a 120 s background with ``nec`` events of each of the 11
classes mixed on top. Every event is scaled individually so that its RMS
sits ``ebr_db`` above the RMS of the (normalized) background.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from scenebench.annotations import AnnotationTrack, EventAnnotation, write_annotations
from scenebench.audio import (
    AudioAsset,
    AudioFormatError,
    Waveform,
    apply_gain,
    load_wav,
    onset_to_index,
    rms,
    write_wav,
)
from scenebench.vocab import (
    CLASS_LABELS,
    EBR_LEVELS_DB,
    NEC_LEVELS,
    REPLICATIONS,
    SAMPLE_RATE,
    SCENE_DURATION,
)

log = logging.getLogger(__name__)

BACKGROUND_RMS = 0.1
SPLITS = ("dev", "test")


class PlanningError(ValueError):
    """Asset pool or placement constraints cannot be satisfied."""


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    split: str
    polyphonic: bool
    ebr_db: int
    nec: int
    replication: int
    seed: int
    draw_seed: int
    background_slot: int
    duration: float = SCENE_DURATION

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.ebr_db not in EBR_LEVELS_DB:
            raise ValueError(f"ebr_db must be one of {EBR_LEVELS_DB}, got {self.ebr_db}")
        if self.nec not in NEC_LEVELS[self.polyphonic]:
            kind = "polyphonic" if self.polyphonic else "monophonic"
            raise ValueError(f"nec={self.nec} not allowed for {kind} scenes")
        if not 1 <= self.replication <= REPLICATIONS[self.split]:
            raise ValueError(f"replication {self.replication} out of range for split {self.split}")

    @property
    def coordinates(self) -> dict:
        return {
            "split": self.split,
            "polyphonic": self.polyphonic,
            "ebr_db": self.ebr_db,
            "nec": self.nec,
            "replication": self.replication,
        }


@dataclass(frozen=True)
class DatasetPlan:
    split: str
    master_seed: int
    specs: tuple[SceneSpec, ...]

    def to_json(self) -> str:
        payload = {
            "split": self.split,
            "master_seed": self.master_seed,
            "specs": [spec.__dict__ for spec in self.specs],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass(frozen=True)
class EventPlacement:
    """One scheduled event, positioned on the sample grid."""

    class_label: str
    asset_id: str
    onset_sample: int
    length: int
    sample_rate: int
    gain: float = 1.0

    @property
    def onset(self) -> float:
        return self.onset_sample / self.sample_rate

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate

    @property
    def offset(self) -> float:
        return (self.onset_sample + self.length) / self.sample_rate


@dataclass(frozen=True, eq=False)
class SceneInstance:
    spec: SceneSpec
    audio: Waveform
    ground_truth: AnnotationTrack
    placements: tuple[EventPlacement, ...]
    realized_ebr_per_event: tuple[float, ...]


@dataclass
class AssetPool:
    """Event assets grouped by class plus an ordered list of backgrounds."""

    events: dict[str, list[AudioAsset]] = field(default_factory=dict)
    backgrounds: list[AudioAsset] = field(default_factory=list)

    def __post_init__(self):
        self._by_id = {a.asset_id: a for group in self.events.values() for a in group}
        self._by_id.update({a.asset_id: a for a in self.backgrounds})

    def get(self, asset_id: str) -> AudioAsset:
        return self._by_id[asset_id]

    def background_for(self, slot: int) -> AudioAsset:
        if not self.backgrounds:
            raise PlanningError("asset pool has no background samples")
        return self.backgrounds[slot % len(self.backgrounds)]

    def validate(self, min_per_class: int = 1) -> None:
        for label in CLASS_LABELS:
            have = len(self.events.get(label, ()))
            if have < min_per_class:
                raise PlanningError(f"pool underfilled for class {label!r}: {have} < {min_per_class}")
        if not self.backgrounds:
            raise PlanningError("asset pool has no background samples")

    @classmethod
    def from_directory(cls, root, sample_rate: int = SAMPLE_RATE) -> "AssetPool":
        """Load ``events/<class_label>/*.wav`` and ``background/*.wav``.

        Class directories may use spaces or underscores ("door knock" or
        "door_knock"). Files are taken in sorted filename order.
        """
        root = Path(root)
        if not root.is_dir():
            raise FileNotFoundError(f"asset directory not found: {root}")
        events: dict[str, list[AudioAsset]] = {}
        ev_root = root / "events"
        if ev_root.is_dir():
            for class_dir in sorted(p for p in ev_root.iterdir() if p.is_dir()):
                label = class_dir.name.replace("_", " ")
                if label not in CLASS_LABELS:
                    raise PlanningError(f"unknown event class directory {class_dir.name!r}")
                for wav in sorted(class_dir.glob("*.wav")):
                    w = _load_checked(wav, sample_rate)
                    asset_id = wav.relative_to(root).as_posix()
                    events.setdefault(label, []).append(AudioAsset(asset_id, "event", w, label))
        backgrounds = [
            AudioAsset(wav.relative_to(root).as_posix(), "background", _load_checked(wav, sample_rate))
            for wav in sorted((root / "background").glob("*.wav"))
        ]
        return cls(events, backgrounds)


def _load_checked(path: Path, sample_rate: int) -> Waveform:
    w = load_wav(path)
    if w.sample_rate != sample_rate:
        raise AudioFormatError(f"{path}: sample rate {w.sample_rate} Hz, expected {sample_rate} Hz")
    return w


def derive_seed(master_seed: int, *coords) -> int:
    """Stable 64-bit seed from the master seed and scene coordinates."""
    key = "|".join(str(c) for c in (master_seed, *coords)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def scene_name(split: str, polyphonic: bool, ebr_db: int, nec: int, replication: int) -> str:
    return f"{split}_{'poly' if polyphonic else 'mono'}_nec{nec}_ebr{ebr_db:+d}_r{replication}"


def plan_dataset(split: str, master_seed: int) -> DatasetPlan:
    """Enumerate the polyphony x EBR x nec grid (x replications for test)."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    specs = []
    for polyphonic in (False, True):
        for nec_idx, nec in enumerate(NEC_LEVELS[polyphonic]):
            for ebr_idx, ebr in enumerate(EBR_LEVELS_DB):
                for rep in range(1, REPLICATIONS[split] + 1):
                    specs.append(SceneSpec(
                        scene_id=scene_name(split, polyphonic, ebr, nec, rep),
                        split=split,
                        polyphonic=polyphonic,
                        ebr_db=ebr,
                        nec=nec,
                        replication=rep,
                        seed=derive_seed(master_seed, split, int(polyphonic), ebr_idx, nec_idx, rep),
                        # the draw ignores EBR: the three EBR levels of a cell share assets and onsets
                        draw_seed=derive_seed(master_seed, "draw", split, int(polyphonic), nec_idx, rep),
                        background_slot=rep - 1,
                    ))
    return DatasetPlan(split, master_seed, tuple(specs))


def draw_events(spec: SceneSpec, pool: AssetPool, rng: np.random.Generator,
                sample_rate: int = SAMPLE_RATE) -> list[EventPlacement]:
    """Sample ``nec`` assets per class and a uniform onset for each.

    Onsets are drawn on [0, duration - event duration] and snapped to the
    sample grid. Monophonic scenes are then de-overlapped as a whole,
    polyphonic scenes class by class. Returned placements carry unit gain;
    the EBR gain is set at render time.
    """
    n_scene = onset_to_index(spec.duration, sample_rate)
    placements = []
    for label in CLASS_LABELS:
        candidates = pool.events.get(label, [])
        if len(candidates) < spec.nec:
            raise PlanningError(
                f"pool underfilled for class {label!r}: need {spec.nec}, have {len(candidates)}"
            )
        chosen = rng.choice(len(candidates), size=spec.nec, replace=False)
        for idx in chosen:
            asset = candidates[int(idx)]
            length = len(asset.waveform)
            if length >= n_scene:
                raise PlanningError(f"event asset {asset.asset_id} is not shorter than the scene")
            max_onset = (n_scene - length) / sample_rate
            start = min(onset_to_index(rng.uniform(0.0, max_onset), sample_rate), n_scene - length)
            placements.append(EventPlacement(label, asset.asset_id, start, length, sample_rate))
    if not spec.polyphonic:
        return enforce_monophony(placements, spec.duration)
    # polyphony is between classes: events of one class never overlap each other
    out = []
    for label in CLASS_LABELS:
        out.extend(enforce_monophony([p for p in placements if p.class_label == label], spec.duration))
    return out


def enforce_monophony(placements: list[EventPlacement], duration: float) -> list[EventPlacement]:
    """Move onsets so that no two events overlap, keeping their order.

    Events are sorted by sampled onset, then each one overlapping its
    predecessor is pushed right to the predecessor's offset. If that pushes
    the tail past the scene end, a backward pass pulls events left against
    the scene end so the packing still fits.
    """
    if not placements:
        return []
    sr = placements[0].sample_rate
    if any(p.sample_rate != sr for p in placements):
        raise PlanningError("placements mix sample rates")
    n_scene = onset_to_index(duration, sr)
    total = sum(p.length for p in placements)
    if total > n_scene:
        raise PlanningError(
            f"infeasible monophonic packing: {total / sr:.3f} s of events in a {duration:.3f} s scene"
        )
    order = sorted(range(len(placements)), key=lambda i: (placements[i].onset_sample, i))
    starts = [placements[i].onset_sample for i in order]
    lengths = [placements[i].length for i in order]
    for j in range(1, len(starts)):
        prev_end = starts[j - 1] + lengths[j - 1]
        if starts[j] < prev_end:
            starts[j] = prev_end
    limit = n_scene
    for j in range(len(starts) - 1, -1, -1):
        if starts[j] + lengths[j] > limit:
            starts[j] = limit - lengths[j]
        limit = starts[j]
    if starts[0] < 0:
        raise PlanningError("infeasible monophonic packing")
    moved = list(placements)
    for i, s in zip(order, starts):
        if s != moved[i].onset_sample:
            moved[i] = replace(moved[i], onset_sample=s)
    return moved


def event_gain(event_rms: float, background_rms: float, ebr_db: float) -> float:
    if not event_rms > 0:
        raise PlanningError(f"event RMS must be positive (silent asset?), got {event_rms}")
    if not background_rms > 0:
        raise PlanningError(f"background RMS must be positive, got {background_rms}")
    return (background_rms / event_rms) * 10.0 ** (ebr_db / 20.0)


def _prepare_background(asset: AudioAsset, n_scene: int) -> Waveform:
    w = asset.waveform
    if len(w) < n_scene:
        raise PlanningError(f"background {asset.asset_id} shorter than the scene ({w.duration:.3f} s)")
    seg = Waveform(w.samples[:n_scene], w.sample_rate)
    level = rms(seg)
    if level <= 0:
        raise PlanningError(f"background {asset.asset_id} is silent")
    return apply_gain(seg, BACKGROUND_RMS / level)


def render_scene(spec: SceneSpec, pool: AssetPool, sample_rate: int = SAMPLE_RATE) -> SceneInstance:
    n_scene = onset_to_index(spec.duration, sample_rate)
    background = _prepare_background(pool.background_for(spec.background_slot), n_scene)
    bg_rms = rms(background)
    rng = np.random.default_rng(spec.draw_seed)
    drawn = draw_events(spec, pool, rng, sample_rate)

    mix = background.samples.copy()
    placements, realized, events = [], [], []
    for p in sorted(drawn, key=lambda p: (p.onset_sample, p.class_label, p.asset_id)):
        wave = pool.get(p.asset_id).waveform
        gain = event_gain(rms(wave), bg_rms, spec.ebr_db)
        scaled = wave.samples * gain
        mix[p.onset_sample:p.onset_sample + p.length] += scaled
        realized.append(20.0 * math.log10(math.sqrt(float(np.dot(scaled, scaled)) / scaled.size) / bg_rms))
        placements.append(replace(p, gain=gain))
        events.append(EventAnnotation(p.onset, p.offset, p.class_label))

    return SceneInstance(
        spec=spec,
        audio=Waveform(mix, sample_rate),
        ground_truth=AnnotationTrack(spec.scene_id, tuple(events)),
        placements=tuple(placements),
        realized_ebr_per_event=tuple(realized),
    )


@dataclass(frozen=True)
class GenerationSummary:
    manifest_path: Path
    records: tuple[dict, ...]
    total_seconds: float
    clip_counts: dict[str, int]

    @property
    def n_scenes(self) -> int:
        return len(self.records)

    @property
    def total_minutes(self) -> float:
        return self.total_seconds / 60.0


def generate_dataset(plan: DatasetPlan, pool: AssetPool, out, jobs: int = 1) -> GenerationSummary:
    """Render every scene of ``plan`` into ``out``.

    Layout: ``audio/<scene_id>.wav``, ``annotations/<scene_id>.txt`` and
    ``manifest.json``. Manifest paths are relative to ``out`` and the record
    order follows the plan regardless of ``jobs``.
    """
    out = Path(out)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(parents=True, exist_ok=True)
    pool.validate(min_per_class=max(s.nec for s in plan.specs))

    def work(spec: SceneSpec):
        scene = render_scene(spec, pool)
        wav_rel = f"audio/{spec.scene_id}.wav"
        gt_rel = f"annotations/{spec.scene_id}.txt"
        clipped = write_wav(scene.audio, out / wav_rel)
        write_annotations(scene.ground_truth, out / gt_rel)
        if clipped:
            log.info("%s: %d samples clipped", spec.scene_id, clipped)
        record = {
            "scene_id": spec.scene_id,
            **spec.coordinates,
            "seed": spec.seed,
            "background_id": pool.background_for(spec.background_slot).asset_id,
            "wav_path": wav_rel,
            "gt_path": gt_rel,
        }
        return record, clipped, len(scene.audio) / scene.audio.sample_rate

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, plan.specs))
    else:
        results = [work(spec) for spec in plan.specs]

    records = tuple(r for r, _, _ in results)
    manifest_path = out / "manifest.json"
    write_manifest(records, manifest_path)
    return GenerationSummary(
        manifest_path=manifest_path,
        records=records,
        total_seconds=sum(d for _, _, d in results),
        clip_counts={r["scene_id"]: c for r, c, _ in results},
    )


def write_manifest(records, path) -> None:
    Path(path).write_text(json.dumps(list(records), indent=2) + "\n", encoding="utf-8")


def read_manifest(path) -> list[dict]:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(records, list):
        raise ValueError(f"{path}: manifest must be a JSON list")
    required = {"scene_id", "split", "polyphonic", "ebr_db", "nec", "replication", "seed",
                "background_id", "wav_path", "gt_path"}
    for rec in records:
        missing = required - set(rec)
        if missing:
            raise ValueError(f"{path}: record {rec.get('scene_id')!r} missing {sorted(missing)}")
    return records
