import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icuvis.deteval import (
    EvalSample,
    LeakageError,
    UndefinedMetricError,
    average_precision,
    check_folds,
    ciou,
    evaluate_folds,
    folds_from_assignment,
    grouped_kfold,
    iou,
    match_all,
    match_detections,
    operating_point,
    read_folds_csv,
    samples_from_streams,
)
from icuvis.domain import BoundingBox, Detection, DetectionFrame, PostureClass as P

from conftest import ts

B = BoundingBox
LY = P.LYING_IN_BED


def d(box, conf=1.0, posture=LY):
    return Detection(B(*box), posture, conf)


def ap_oracle(samples, posture, thr=0.5):
    """Threshold-by-threshold recomputation: re-match at every cutoff."""
    n_gt = sum(1 for s in samples for g in s.ground_truth if g.posture is posture)
    confs = sorted({p.confidence for s in samples for p in s.predictions if p.posture is posture}, reverse=True)
    curve = []
    for c in confs:
        kept = [EvalSample(s.frame_id, s.ground_truth, tuple(p for p in s.predictions if p.confidence >= c)) for s in samples]
        ms = match_all(kept, posture, thr)
        tp = sum(len(m.tp) for m in ms)
        fp = sum(len(m.fp) for m in ms)
        curve.append((tp / n_gt, tp / (tp + fp)))
    ap, prev = 0.0, 0.0
    for i, (r, _) in enumerate(curve):
        ap += (r - prev) * max(p for _, p in curve[i:])
        prev = r
    return ap


box_st = st.tuples(st.integers(0, 500), st.integers(0, 400), st.integers(5, 140), st.integers(5, 170)).map(
    lambda t: (float(t[0]), float(t[1]), float(t[0] + t[2]), float(t[1] + t[3]))
)


@st.composite
def samples_st(draw):
    out = []
    for i in range(draw(st.integers(1, 5))):
        gt = tuple(d(b) for b in draw(st.lists(box_st, max_size=3)))
        preds = []
        for g in gt:
            if draw(st.booleans()):
                x0, y0, x1, y1 = (g.bbox.x_min, g.bbox.y_min, g.bbox.x_max, g.bbox.y_max)
                dx = draw(st.integers(0, 6))
                preds.append(d((x0 + dx, y0, x1 + dx, y1), draw(st.sampled_from([0.3, 0.5, 0.7, 0.9]))))
        for b in draw(st.lists(box_st, max_size=2)):
            preds.append(d(b, draw(st.sampled_from([0.3, 0.5, 0.7, 0.9]))))
        out.append(EvalSample(i, gt, tuple(preds)))
    return out


def test_iou_fixture():
    assert iou(B(0, 0, 2, 2), B(1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-15)
    assert iou(B(0, 0, 1, 1), B(2, 2, 3, 3)) == 0.0
    assert iou(B(0, 0, 1, 1), B(1, 0, 2, 1)) == 0.0


@given(box_st, box_st)
def test_iou_properties(a, b):
    A, Bb = B(*a), B(*b)
    v = iou(A, Bb)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(iou(Bb, A))
    assert iou(A, A) == 1.0
    assert ciou(A, Bb) <= v + 1e-12
    assert ciou(A, A) == pytest.approx(1.0)


def test_ciou_disjoint_negative():
    assert ciou(B(0, 0, 10, 10), B(100, 100, 110, 110)) < 0


def test_perfect_predictions():
    rng = random.Random(1)
    frames = []
    for i in range(20):
        gt = tuple(d((x, 10.0, x + 50.0, 90.0), posture=rng.choice([LY, P.STANDING])) for x in (10.0, 200.0))
        preds = tuple(Detection(g.bbox, g.posture, rng.choice([0.6, 0.8, 0.99])) for g in gt)
        frames.append(EvalSample(i, gt, preds))
    rep = evaluate_folds([frames[:10], frames[10:]])
    for row in rep.rows:
        assert rep.mean[row] == {"ap": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0}
        assert rep.std[row] == {"ap": 0.0, "precision": 0.0, "recall": 0.0, "f1": 0.0}


def test_ap_fixture_two_gt_tp_fp():
    s = EvalSample(0, (d((0, 0, 10, 10)), d((50, 50, 60, 60))), (d((0, 0, 10, 10), 0.9), d((200, 200, 210, 210), 0.8)))
    ms = match_all([s], LY)
    assert average_precision(ms) == 0.5
    p, r, f1 = operating_point(ms)
    assert (p, r) == (1.0, 0.5)
    assert f1 == pytest.approx(2 / 3, abs=1e-15)


def test_duplicate_prediction_is_fp():
    s = EvalSample(0, (d((0, 0, 10, 10)),), (d((0, 0, 10, 10), 0.9), d((0, 0, 10, 10), 0.8)))
    m = match_detections(s, LY)
    assert m.tp == (0.9,) and m.fp == (0.8,) and m.fn == 0


def test_iou_threshold_inclusive():
    # IoU exactly 0.5: 10x10 vs 10x20 containing it
    s = EvalSample(0, (d((0, 0, 10, 20)),), (d((0, 0, 10, 10), 0.9),))
    assert match_detections(s, LY).tp == (0.9,)
    assert match_detections(s, LY, 0.51).fp == (0.9,)


def test_class_mismatch_is_not_a_match():
    s = EvalSample(0, (d((0, 0, 10, 10), posture=P.STANDING),), (d((0, 0, 10, 10), 0.9, LY),))
    assert match_detections(s, LY).fp == (0.9,)
    assert match_detections(s, P.STANDING).fn == 1


def test_no_predictions_and_no_gt():
    s = EvalSample(0, (d((0, 0, 10, 10)),), ())
    assert operating_point(match_all([s], LY)) == (0.0, 0.0, 0.0)
    assert average_precision(match_all([s], LY)) == 0.0
    with pytest.raises(UndefinedMetricError):
        average_precision(match_all([EvalSample(0)], LY))


@settings(max_examples=150)
@given(samples_st())
def test_ap_matches_recomputation_oracle(samples):
    ms = match_all(samples, LY)
    if sum(m.n_gt for m in ms) == 0:
        return
    assert average_precision(ms) == pytest.approx(ap_oracle(samples, LY), abs=1e-12)


@given(samples_st(), st.randoms(use_true_random=False))
def test_ap_frame_order_invariant(samples, rnd):
    ms = match_all(samples, LY)
    if sum(m.n_gt for m in ms) == 0:
        return
    shuffled = samples[:]
    rnd.shuffle(shuffled)
    ms2 = match_all(shuffled, LY)
    assert average_precision(ms) == average_precision(ms2)
    assert operating_point(ms) == operating_point(ms2)


def test_fold_with_no_gt_is_excluded():
    good = [EvalSample(0, (d((0, 0, 10, 10)),), (d((0, 0, 10, 10), 0.9),))]
    rep = evaluate_folds([good, [EvalSample(1)], good])
    assert len(rep.per_fold) == 2
    assert any("fold 1 has no ground truth" in n for n in rep.notes)


def test_std_is_population():
    f1 = [EvalSample(0, (d((0, 0, 10, 10)),), (d((0, 0, 10, 10), 0.9),))]
    f2 = [EvalSample(0, (d((0, 0, 10, 10)), d((50, 50, 60, 60))), (d((0, 0, 10, 10), 0.9),))]
    rep = evaluate_folds([f1, f2], classes=(LY,))
    assert rep.mean["lying_in_bed"]["recall"] == 0.75
    assert rep.std["lying_in_bed"]["recall"] == 0.25
    assert "0.75 (0.25)" in rep.render_text()


def test_grouped_kfold_sizes_and_seed():
    ids = [f"P{i:03d}" for i in range(23)]
    folds = grouped_kfold(ids, 5, seed=3)
    assert sorted(len(f.test) for f in folds) == [4, 4, 5, 5, 5]
    assert grouped_kfold(reversed(ids), 5, seed=3) == folds
    assert grouped_kfold(ids, 5, seed=4) != folds
    with pytest.raises(ValueError):
        grouped_kfold(ids[:3], 5)


def test_no_leakage_on_1000_random_patient_sets():
    rng = random.Random(77)
    for trial in range(1000):
        ids = {f"X{rng.randrange(10_000)}" for _ in range(rng.randint(5, 60))}
        k = rng.randint(2, min(10, len(ids)))
        folds = grouped_kfold(ids, k, seed=trial)
        check_folds(folds)
        tests = [p for f in folds for p in f.test]
        assert len(tests) == len(set(tests)) == len(ids)
        assert all(not (f.test & f.train) and (f.test | f.train) == ids for f in folds)


def test_folds_csv_and_leakage_detection():
    assign = read_folds_csv("fold,patient_id\n0,P1\n0,P2\n1,P3\n")
    folds = folds_from_assignment(assign)
    assert [sorted(f.test) for f in folds] == [["P1", "P2"], ["P3"]]
    with pytest.raises(LeakageError, match="P2"):
        read_folds_csv("0,P1\n0,P2\n1,P2\n")


def test_samples_from_streams_uses_gt_frames_only():
    g = {"P1": (DetectionFrame("P1", ts(9), (d((0, 0, 10, 10)),)),)}
    p = {"P1": (DetectionFrame("P1", ts(9), (d((0, 0, 10, 10), 0.7),)), DetectionFrame("P1", ts(9, 0, 1), (d((0, 0, 5, 5), 0.9),)))}
    s = samples_from_streams(g, p)
    assert len(s["P1"]) == 1 and s["P1"][0].predictions[0].confidence == 0.7
