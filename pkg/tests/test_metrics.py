import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exhaustive_max
from scenebench.annotations import AnnotationTrack, EventAnnotation
from scenebench.metrics import (
    ClassCounts,
    MetricConfig,
    match_events,
    match_events_bruteforce,
    prf,
    score_concatenated,
    score_scene,
)

onset_lists = st.lists(st.floats(0, 10, allow_nan=False), max_size=6)


def track(sid, *events):
    return AnnotationTrack(sid, tuple(EventAnnotation(on, on + dur, lab) for on, dur, lab in events))


def test_match_example():
    pairs = match_events([1.0, 5.0], [1.15, 5.30], 0.2)
    assert pairs == [(0, 0)]


def test_match_inclusive_boundary():
    assert len(match_events([1.0], [1.2], 0.2)) == 1
    assert len(match_events([5.0], [5.2], 0.2)) == 1
    assert len(match_events([5.0], [4.8], 0.2)) == 1
    assert len(match_events([5.0], [5.2000011], 0.2)) == 0


def test_match_empty():
    assert match_events([1.0, 2.0], [], 0.2) == []
    c = ClassCounts("x", tp=0, fp=0, fn=2)
    assert prf(c) == (0.0, 0.0, 0.0)


def test_match_greedy_needs_earliest_reference():
    # a detection grabbing the closest reference would strand the next detection
    assert len(match_events([1.0, 1.3], [1.15, 1.45], 0.2)) == 2


def test_bruteforce_cases():
    assert match_events_bruteforce([1.0, 2.0], [5.0, 6.0], 0.2) == []
    assert len(match_events_bruteforce([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 0.2)) == 3
    with pytest.raises(ValueError):
        match_events_bruteforce(list(range(13)), [0.0], 0.2)


@settings(max_examples=300)
@given(onset_lists, onset_lists, st.sampled_from([0.05, 0.2, 0.5, 1.0]))
def test_greedy_matches_oracles(refs, dets, tol):
    greedy = match_events(refs, dets, tol)
    assert len({r for r, _ in greedy}) == len(greedy) == len({d for _, d in greedy})
    assert all(abs(refs[r] - dets[d]) <= tol + 1e-9 for r, d in greedy)
    bf = match_events_bruteforce(refs, dets, tol)
    assert len(greedy) == len(bf) == exhaustive_max(refs, dets, tol)


@settings(max_examples=200)
@given(onset_lists, onset_lists)
def test_matching_symmetric(refs, dets):
    assert len(match_events(refs, dets, 0.2)) == len(match_events(dets, refs, 0.2))


@settings(max_examples=200)
@given(onset_lists, onset_lists, st.floats(0, 10))
def test_adding_detection_monotone(refs, dets, extra):
    before = len(match_events(refs, dets, 0.2))
    after = len(match_events(refs, dets + [extra], 0.2))
    assert after >= before
    # fp = |dets| - tp never grows when a detection is removed
    if dets:
        fp_full = len(dets) - before
        fp_less = len(dets) - 1 - len(match_events(refs, dets[:-1], 0.2))
        assert fp_less <= fp_full


@settings(max_examples=200)
@given(onset_lists, onset_lists, st.floats(0.01, 1), st.floats(0.01, 1))
def test_tolerance_monotone(refs, dets, a, b):
    lo, hi = sorted((a, b))
    assert len(match_events(refs, dets, lo)) <= len(match_events(refs, dets, hi))


def test_prf_examples():
    assert prf(ClassCounts("a", 1, 1, 1)) == (0.5, 0.5, 0.5)
    assert prf(ClassCounts("a", 4, 0, 0)) == (1.0, 1.0, 1.0)
    assert prf(ClassCounts("a", 0, 0, 0)) == (0.0, 0.0, 0.0)
    p, r, f = prf(ClassCounts("a", 2, 2, 0))
    assert (p, r) == (0.5, 1.0) and f == pytest.approx(2 / 3)


def test_score_perfect_and_empty():
    ref = track("s", (1.0, 1.0, "cough"), (3.0, 0.5, "speech"), (7.0, 1.0, "cough"))
    assert score_scene(ref, ref).f_cweb == 1.0
    assert score_scene(ref, AnnotationTrack("s")).f_cweb == 0.0


def test_score_half():
    ref = track("s", (1.0, 1.0, "cough"), (3.0, 0.5, "speech"))
    est = track("s", (1.1, 1.0, "cough"))
    sc = score_scene(ref, est)
    assert sc.f_cweb == 0.5
    assert sc.class_f() == {"speech": 0.0, "cough": 1.0}


def test_score_label_must_match():
    ref = track("s", (1.0, 1.0, "cough"))
    est = track("s", (1.0, 1.0, "laugh"))
    sc = score_scene(ref, est)
    assert sc.f_cweb == 0.0
    assert sc.included == ("cough",)
    assert set(score_scene(ref, est, MetricConfig(zero_reference_policy="score_zero")).included) == {"cough", "laugh"}


def test_score_scene_id_mismatch():
    with pytest.raises(ValueError, match="scene_id"):
        score_scene(AnnotationTrack("a"), AnnotationTrack("b"))


def test_metric_config_validation():
    with pytest.raises(ValueError):
        MetricConfig(onset_tolerance=0)
    with pytest.raises(ValueError):
        MetricConfig(zero_reference_policy="other")


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_offsets_do_not_matter(seed):
    r = np.random.default_rng(seed)
    labels = ["cough", "keys", "phone"]
    ref = [(float(r.uniform(0, 20)), float(r.uniform(0.1, 2)), labels[r.integers(3)]) for _ in range(8)]
    est = [(on + float(r.normal(0, 0.2)), dur, lab) for on, dur, lab in ref if r.random() < 0.8]
    est = [(max(on, 0.0), dur, lab) for on, dur, lab in est]
    a = score_scene(track("s", *ref), track("s", *est))
    ref2 = [(on, dur * float(r.uniform(0.1, 5)), lab) for on, dur, lab in ref]
    est2 = [(on, float(r.uniform(0.01, 9)), lab) for on, _, lab in est]
    b = score_scene(track("s", *ref2), track("s", *est2))
    assert a == b
    assert 0.0 <= a.f_cweb <= 1.0


def test_concatenated_mode():
    r1 = track("a", (1.0, 1.0, "cough"))
    r2 = track("b", (1.0, 1.0, "cough"), (5.0, 1.0, "keys"))
    e1 = track("a", (1.0, 1.0, "cough"))
    e2 = track("b", (9.0, 1.0, "keys"))
    sc = score_concatenated([(r1, e1), (r2, e2)])
    # cough: tp 1, fn 1 -> F 2/3; keys: fp 1, fn 1 -> F 0
    assert sc.f_cweb == pytest.approx(1 / 3)
    # a detection must not match a reference in the next scene once shifted
    sc2 = score_concatenated([(track("a", (119.9, 0.05, "cough")), AnnotationTrack("a")),
                              (AnnotationTrack("b"), track("b", (0.0, 0.5, "cough")))])
    assert sc2.f_cweb == pytest.approx(1.0)
