import pytest

from scenebench.annotations import (
    AnnotationFormatError,
    AnnotationTrack,
    EventAnnotation,
    format_annotations,
    parse_annotation_text,
    parse_annotations,
    write_annotations,
)


def test_parse_single_line(tmp_path):
    p = tmp_path / "scene.txt"
    p.write_text("1.000000\t2.500000\tspeech\n")
    track = parse_annotations(p)
    assert track.scene_id == "scene"
    assert track.events == (EventAnnotation(1.0, 2.5, "speech"),)


def test_parse_empty(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    assert len(parse_annotations(p)) == 0


def test_offset_precedes_onset():
    with pytest.raises(AnnotationFormatError, match="offset precedes onset"):
        parse_annotation_text("2.0\t1.0\tcough\n", "s")


@pytest.mark.parametrize("line", ["1.0\t2.0", "1.0 2.0 cough", "a\t2.0\tcough", "1.0\t2.0\tcough\textra"])
def test_malformed_lines(line):
    with pytest.raises(AnnotationFormatError):
        parse_annotation_text(line + "\n", "s")


def test_unknown_label_policy():
    with pytest.raises(AnnotationFormatError, match="unknown label"):
        parse_annotation_text("1\t2\tprinter\n", "s")
    track = parse_annotation_text("1\t2\tprinter\n", "s", vocabulary=None)
    assert track.events[0].label == "printer"


def test_sorted_by_onset_then_label():
    text = "5\t6\tkeys\n1\t2\tspeech\n1\t3\tcough\n"
    track = parse_annotation_text(text, "s")
    assert [(e.onset, e.label) for e in track] == [(1.0, "cough"), (1.0, "speech"), (5.0, "keys")]


def test_write_roundtrip(tmp_path):
    track = AnnotationTrack("x", (EventAnnotation(0.25, 1.125, "door knock"), EventAnnotation(3.0, 4.0, "laugh")))
    write_annotations(track, tmp_path / "x.txt")
    assert (tmp_path / "x.txt").read_text() == "0.250000\t1.125000\tdoor knock\n3.000000\t4.000000\tlaugh\n"
    assert parse_annotations(tmp_path / "x.txt") == track
    assert format_annotations(AnnotationTrack("e")) == ""
