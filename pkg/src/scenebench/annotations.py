"""Event annotation tracks and their TAB-separated text format.

One event per line::

    onset<TAB>offset<TAB>label

with times in seconds. Tracks written by this module use six decimals and
are sorted by (onset, label).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from scenebench.vocab import CLASS_LABELS


class AnnotationFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class EventAnnotation:
    onset: float
    offset: float
    label: str

    def __post_init__(self):
        if self.onset < 0:
            raise AnnotationFormatError(f"negative onset {self.onset}")
        if self.offset <= self.onset:
            raise AnnotationFormatError(
                f"offset precedes onset ({self.onset} -> {self.offset}, {self.label!r})"
            )


def _sort_key(ev: EventAnnotation):
    return (ev.onset, ev.label, ev.offset)


@dataclass(frozen=True)
class AnnotationTrack:
    scene_id: str
    events: tuple[EventAnnotation, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=_sort_key)))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def labels(self) -> set[str]:
        return {ev.label for ev in self.events}

    def by_class(self) -> dict[str, list[EventAnnotation]]:
        out: dict[str, list[EventAnnotation]] = {}
        for ev in self.events:
            out.setdefault(ev.label, []).append(ev)
        return out


def parse_annotations(path, scene_id: str | None = None, vocabulary: Iterable[str] | None = CLASS_LABELS) -> AnnotationTrack:
    """Parse a TAB-separated annotation file.

    ``scene_id`` defaults to the file stem. Labels outside ``vocabulary``
    raise :class:`AnnotationFormatError`; pass ``vocabulary=None`` to accept
    any label.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_annotation_text(text, scene_id or path.stem, vocabulary, source=str(path))


def parse_annotation_text(text: str, scene_id: str, vocabulary: Iterable[str] | None = CLASS_LABELS,
                          source: str = "<string>") -> AnnotationTrack:
    vocab = None if vocabulary is None else set(vocabulary)
    events = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) != 3:
            raise AnnotationFormatError(f"{source}:{lineno}: expected 3 TAB-separated fields, got {len(parts)}")
        try:
            onset, offset = float(parts[0]), float(parts[1])
        except ValueError:
            raise AnnotationFormatError(f"{source}:{lineno}: non-numeric time in {line!r}") from None
        label = parts[2].strip()
        if vocab is not None and label not in vocab:
            raise AnnotationFormatError(f"{source}:{lineno}: unknown label {label!r}")
        try:
            events.append(EventAnnotation(onset, offset, label))
        except AnnotationFormatError as exc:
            raise AnnotationFormatError(f"{source}:{lineno}: {exc}") from None
    return AnnotationTrack(scene_id, tuple(events))


def format_annotations(track: AnnotationTrack) -> str:
    return "".join(f"{ev.onset:.6f}\t{ev.offset:.6f}\t{ev.label}\n" for ev in track.events)


def write_annotations(track: AnnotationTrack, path) -> None:
    Path(path).write_text(format_annotations(track), encoding="utf-8")
