"""Class-wise event-based F-measure.

A detection counts as correct when its onset lies within ``onset_tolerance``
seconds (inclusive) of a not-yet-matched reference onset of the same class.
Matching is one-to-one and of maximum cardinality. Offsets are ignored.
"""

from __future__ import annotations

import csv
import logging
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from scenebench.annotations import (
    AnnotationFormatError,
    AnnotationTrack,
    EventAnnotation,
    parse_annotations,
)
from scenebench.vocab import CLASS_LABELS, SCENE_DURATION

log = logging.getLogger(__name__)

POLICIES = ("exclude_class", "score_zero")
BRUTEFORCE_LIMIT = 12


@dataclass(frozen=True)
class MetricConfig:
    onset_tolerance: float = 0.200
    zero_reference_policy: str = "exclude_class"

    def __post_init__(self):
        if not self.onset_tolerance > 0:
            raise ValueError(f"onset_tolerance must be positive, got {self.onset_tolerance}")
        if self.zero_reference_policy not in POLICIES:
            raise ValueError(f"zero_reference_policy must be one of {POLICIES}")


@dataclass(frozen=True)
class ClassCounts:
    label: str
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def n_ref(self) -> int:
        return self.tp + self.fn

    @property
    def n_est(self) -> int:
        return self.tp + self.fp


@dataclass(frozen=True)
class ClassScore:
    counts: ClassCounts
    precision: float
    recall: float
    f: float

    @property
    def label(self) -> str:
        return self.counts.label


@dataclass(frozen=True)
class SceneScore:
    scene_id: str
    per_class: tuple[ClassScore, ...]
    f_cweb: float
    included: tuple[str, ...] = field(default=())

    def class_f(self) -> dict[str, float]:
        return {c.label: c.f for c in self.per_class}


def _onsets(events) -> list[float]:
    return [ev.onset if isinstance(ev, EventAnnotation) else float(ev) for ev in events]


def match_events(refs, dets, tol: float = 0.200) -> list[tuple[int, int]]:
    """Maximum one-to-one onset matching for a single class.

    ``refs`` and ``dets`` are events (or bare onsets). Returns
    ``(ref_index, det_index)`` pairs into the inputs as given. Detections
    are visited in onset order and each takes the earliest unmatched
    reference within ``tol``; for equal-width windows on a line this greedy
    choice is optimal.
    """
    r_on = _onsets(refs)
    d_on = _onsets(dets)
    r_order = sorted(range(len(r_on)), key=lambda i: r_on[i])
    d_order = sorted(range(len(d_on)), key=lambda i: d_on[i])
    pairs = []
    ptr = 0
    for dj in d_order:
        d = d_on[dj]
        # references too early for this detection are too early for all later ones
        while ptr < len(r_order) and r_on[r_order[ptr]] < d and not _within(r_on[r_order[ptr]], d, tol):
            ptr += 1
        if ptr < len(r_order) and _within(r_on[r_order[ptr]], d, tol):
            pairs.append((r_order[ptr], dj))
            ptr += 1
    return pairs


def _within(a: float, b: float, tol: float) -> bool:
    # small slack so values written with 6 decimals at exactly tol still match
    return abs(a - b) <= tol + 1e-9


def match_events_bruteforce(refs, dets, tol: float = 0.200) -> list[tuple[int, int]]:
    """Exhaustive maximum matching; a test oracle for :func:`match_events`."""
    r_on = _onsets(refs)
    d_on = _onsets(dets)
    if len(r_on) > BRUTEFORCE_LIMIT or len(d_on) > BRUTEFORCE_LIMIT:
        raise ValueError(f"exhaustive matching limited to {BRUTEFORCE_LIMIT} events per side")
    eligible = [[j for j, d in enumerate(d_on) if _within(r, d, tol)] for r in r_on]

    @lru_cache(maxsize=None)
    def best(i: int, used: int) -> tuple[tuple[int, int], ...]:
        if i == len(r_on):
            return ()
        top = best(i + 1, used)
        for j in eligible[i]:
            if not used & (1 << j):
                cand = ((i, j),) + best(i + 1, used | (1 << j))
                if len(cand) > len(top):
                    top = cand
        return top

    return list(best(0, 0))


def prf(counts: ClassCounts) -> tuple[float, float, float]:
    """Precision, recall and F with every 0/0 quotient taken as 0."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def count_class(label: str, refs, dets, tol: float) -> ClassCounts:
    tp = len(match_events(refs, dets, tol))
    return ClassCounts(label, tp=tp, fp=len(dets) - tp, fn=len(refs) - tp)


def score_scene(ref: AnnotationTrack, est: AnnotationTrack, cfg: MetricConfig = MetricConfig()) -> SceneScore:
    if ref.scene_id != est.scene_id:
        raise ValueError(f"scene_id mismatch: {ref.scene_id!r} vs {est.scene_id!r}")
    return _score(ref.scene_id, ref.by_class(), est.by_class(), cfg)


def _score(scene_id, ref_by, est_by, cfg: MetricConfig) -> SceneScore:
    labels = sorted(set(ref_by) | set(est_by), key=_label_order)
    per_class = []
    for label in labels:
        counts = count_class(label, ref_by.get(label, []), est_by.get(label, []), cfg.onset_tolerance)
        per_class.append(ClassScore(counts, *prf(counts)))
    if cfg.zero_reference_policy == "exclude_class":
        included = [c for c in per_class if c.counts.n_ref > 0]
    else:
        included = per_class
    f_cweb = sum(c.f for c in included) / len(included) if included else 0.0
    return SceneScore(scene_id, tuple(per_class), f_cweb, tuple(c.label for c in included))


def _label_order(label: str):
    try:
        return (0, CLASS_LABELS.index(label), label)
    except ValueError:
        return (1, 0, label)


def score_concatenated(pairs: Sequence[tuple[AnnotationTrack, AnnotationTrack]], cfg: MetricConfig = MetricConfig(),
                       scene_duration: float = SCENE_DURATION) -> SceneScore:
    """Single score over all scenes laid end to end in time."""
    ref_by: dict[str, list[EventAnnotation]] = {}
    est_by: dict[str, list[EventAnnotation]] = {}
    for k, (ref, est) in enumerate(pairs):
        shift = k * scene_duration
        for track, acc in ((ref, ref_by), (est, est_by)):
            for ev in track.events:
                acc.setdefault(ev.label, []).append(EventAnnotation(ev.onset + shift, ev.offset + shift, ev.label))
    return _score("<concatenated>", ref_by, est_by, cfg)


RESULT_FIELDS = ("scene_id", "system", "polyphonic", "ebr_db", "nec", "replication", "f_cweb")


def class_column(label: str) -> str:
    return "f_" + label.replace(" ", "_")


def evaluate_corpus(manifest: list[dict], manifest_dir, est_dirs: Sequence, cfg: MetricConfig = MetricConfig(),
                    concat: bool = False) -> list[dict]:
    """Score every system on every manifest scene.

    Each entry of ``est_dirs`` is a directory holding ``<scene_id>.txt``;
    the directory name is the system name. Missing or unreadable estimate
    files are scored as empty tracks with a warning. Rows are ordered by
    (system, scene_id).
    """
    manifest_dir = Path(manifest_dir)
    ids = [rec["scene_id"] for rec in manifest]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate scene ids in manifest")
    systems = {}
    for d in est_dirs:
        d = Path(d)
        if d.name in systems:
            raise ValueError(f"duplicate system name {d.name!r}")
        systems[d.name] = d

    refs = {rec["scene_id"]: parse_annotations(manifest_dir / rec["gt_path"], rec["scene_id"]) for rec in manifest}
    ordered = sorted(manifest, key=lambda rec: rec["scene_id"])
    rows = []
    for system in sorted(systems):
        pairs = []
        for rec in ordered:
            sid = rec["scene_id"]
            est = _load_estimate(systems[system] / f"{sid}.txt", sid, system)
            score = score_scene(refs[sid], est, cfg)
            pairs.append((refs[sid], est))
            row = {
                "scene_id": sid,
                "system": system,
                "polyphonic": bool(rec["polyphonic"]),
                "ebr_db": int(rec["ebr_db"]),
                "nec": int(rec["nec"]),
                "replication": int(rec["replication"]),
                "f_cweb": score.f_cweb,
            }
            class_f = score.class_f()
            for label in CLASS_LABELS:
                row[class_column(label)] = class_f.get(label, 0.0)
            rows.append(row)
        if concat:
            f_concat = score_concatenated(pairs, cfg).f_cweb
            for row in rows[-len(ordered):]:
                row["f_cweb_concat"] = f_concat
    return rows


def _load_estimate(path: Path, scene_id: str, system: str) -> AnnotationTrack:
    if not path.is_file():
        log.warning("system %s: no estimate for scene %s, scoring as empty", system, scene_id)
        return AnnotationTrack(scene_id)
    try:
        return parse_annotations(path, scene_id, vocabulary=None)
    except (AnnotationFormatError, OSError, UnicodeDecodeError) as exc:
        log.warning("system %s: unreadable estimate %s (%s), scoring as empty", system, path, exc)
        return AnnotationTrack(scene_id)


def result_fields(rows: list[dict]) -> list[str]:
    fields = list(RESULT_FIELDS)
    if rows and class_column(CLASS_LABELS[0]) in rows[0]:
        fields += [class_column(label) for label in CLASS_LABELS]
    if rows and "f_cweb_concat" in rows[0]:
        fields.append("f_cweb_concat")
    return fields


def write_results(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_rows(rows, fh)


def _write_rows(rows, fh=sys.stdout):
    writer = csv.DictWriter(fh, fieldnames=result_fields(rows), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.10f}" if isinstance(v, float) else v) for k, v in row.items()})


def read_results(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: results CSV missing columns {sorted(missing)}")
        rows = []
        for raw in reader:
            row = dict(raw)
            row["polyphonic"] = raw["polyphonic"] in ("True", "true", "1")
            for key in ("ebr_db", "nec", "replication"):
                row[key] = int(raw[key])
            for key, val in raw.items():
                if key.startswith("f_"):
                    row[key] = float(val)
            rows.append(row)
    return rows
