import itertools

import numpy as np
import pytest

from bgattack import (DataError, EvalConfig, GtBox, attack_success_rate,
                      average_precision, detection_rate, iou,
                      map_over_classes, match_detections, nms, pr_curve)
from bgattack.detector import Detection, DetectionSet
from bgattack.scene import Scene


def det(score, box, cls=0, n_cls=2, cell=0):
    probs = np.zeros(n_cls)
    probs[cls] = 1.0
    return Detection(box=tuple(float(v) for v in box), objectness=score,
                     class_probs=probs, cell_id=cell)


def gt(box, cls=0):
    return GtBox(x1=box[0], y1=box[1], x2=box[2], y2=box[3], class_id=cls)


def scene_with_gt(boxes):
    return Scene(image=np.zeros((64, 64, 3)),
                 object_mask=np.zeros((64, 64, 1)), ground_truth=boxes)


def test_iou_examples():
    assert iou((0, 0, 4, 4), (0, 0, 4, 4)) == 1.0
    assert iou((0, 0, 2, 2), (5, 5, 8, 8)) == 0.0
    assert iou((0, 0, 2, 2), (1, 0, 3, 2)) == pytest.approx(1 / 3, abs=1e-12)
    assert iou((0, 0, 2, 2), (2, 0, 4, 2)) == 0.0  # touching edges
    assert iou(gt((0, 0, 2, 2)), (1, 0, 3, 2)) == pytest.approx(1 / 3)


def test_nms_single_above_threshold():
    ds = DetectionSet([det(0.9, (0, 0, 8, 8))], (64, 64, 3))
    out = nms(ds, EvalConfig())
    assert len(out.detections) == 1
    assert out.detections[0].objectness == 0.9


def test_nms_suppresses_duplicates():
    ds = DetectionSet([det(0.8, (0, 0, 8, 8), cell=1),
                       det(0.9, (0, 0, 8, 8), cell=0)], (64, 64, 3))
    out = nms(ds, EvalConfig())
    assert [d.objectness for d in out.detections] == [0.9]


def test_nms_threshold_empties():
    ds = DetectionSet([det(0.24, (0, 0, 8, 8)), det(0.1, (8, 8, 16, 16))],
                      (64, 64, 3))
    assert nms(ds, EvalConfig()).detections == []


def test_nms_class_aware_and_subset_property():
    rng = np.random.default_rng(0)
    dets = []
    for k in range(40):
        x = float(rng.uniform(0, 48))
        y = float(rng.uniform(0, 48))
        dets.append(det(float(rng.uniform(0.3, 1.0)),
                        (x, y, x + rng.uniform(4, 16), y + rng.uniform(4, 16)),
                        cls=int(rng.integers(0, 3)), n_cls=3, cell=k))
    ds = DetectionSet(dets, (64, 64, 3))
    cfg = EvalConfig()
    out = nms(ds, cfg)
    ids = {d.cell_id for d in out.detections}
    assert ids <= {d.cell_id for d in dets}
    # no surviving same-class pair overlaps above the suppression threshold
    for a, b in itertools.combinations(out.detections, 2):
        if int(np.argmax(a.class_probs)) == int(np.argmax(b.class_probs)):
            assert iou(a.box, b.box) <= cfg.nms_iou


def test_average_precision_examples():
    assert average_precision([True], 1) == 1.0
    assert average_precision([True, False], 1) == 1.0
    assert average_precision([False, True], 1) == pytest.approx(0.5)
    assert average_precision([], 3) == 0.0
    assert average_precision([False, False], 0) == 0.0


def test_pr_curve_counts():
    c = pr_curve([True, False, True], 4)
    assert c.tp == 2 and c.fp == 1 and c.fn == 2
    assert c.recall == [0.25, 0.25, 0.5]
    assert c.precision == [1.0, 0.5, 2 / 3]
    assert all(a <= b for a, b in zip(c.recall, c.recall[1:]))


def test_map_over_classes():
    assert map_over_classes([1.0]) == 1.0
    assert map_over_classes([1.0, 0.0]) == 0.5
    assert map_over_classes([0.689, 0.261]) == pytest.approx(0.475)
    with pytest.raises(DataError):
        map_over_classes([])


def test_detection_rate_fractions():
    cfg = EvalConfig()
    scn1 = scene_with_gt([gt((0, 0, 8, 8))])
    scn2 = scene_with_gt([gt((16, 16, 24, 24))])
    scn3 = scene_with_gt([gt((32, 32, 40, 40))])
    hit = lambda s: DetectionSet([det(0.9, (s.ground_truth[0].x1,
                                            s.ground_truth[0].y1,
                                            s.ground_truth[0].x2,
                                            s.ground_truth[0].y2))],
                                 (64, 64, 3))
    miss = DetectionSet([], (64, 64, 3))
    evals = [(scn1, hit(scn1)), (scn2, hit(scn2)), (scn3, miss)]
    assert detection_rate(evals, cfg.iou_threshold) == pytest.approx(2 / 3)
    evals_all = [(s, hit(s)) for s in (scn1, scn2, scn3)]
    assert detection_rate(evals_all, cfg.iou_threshold) == 1.0
    with pytest.raises(DataError):
        detection_rate([(scene_with_gt([]), miss)], 0.5)


def test_attack_success_rate_values():
    assert attack_success_rate(1.0, 0.25) == pytest.approx(0.75)
    assert attack_success_rate(0.6, 0.6) == 0.0
    assert attack_success_rate(0.689, 0.261) == pytest.approx(0.621, abs=5e-4)
    with pytest.raises(DataError):
        attack_success_rate(0.0, 0.1)


def test_asr_antitone_in_attack_performance():
    values = [attack_success_rate(0.8, a) for a in (0.0, 0.2, 0.4, 0.6, 0.8)]
    assert all(a > b for a, b in zip(values, values[1:]))


def brute_force_flags(detections, gts, thr):
    """Reference matcher: explicit nested loops over the ranked list."""
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i].objectness,
                                  detections[i].cell_id))
    taken = set()
    flags = []
    for i in order:
        d = detections[i]
        candidates = []
        for k, g in enumerate(gts):
            if k in taken or g.class_id != int(np.argmax(d.class_probs)):
                continue
            v = iou(d.box, g)
            if v >= thr:
                candidates.append((v, -k))
        if candidates:
            v, negk = max(candidates)
            taken.add(-negk)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def brute_force_ap(flags, num_gt):
    """Literal evaluation of the precision/recall Riemann sum."""
    if num_gt == 0:
        return 0.0
    ap, tp = 0.0, 0
    prev_r = 0.0
    for k, f in enumerate(flags, start=1):
        if f:
            tp += 1
        r, p = tp / num_gt, tp / k
        ap += p * (r - prev_r)
        prev_r = r
    return ap


def random_case(rng):
    n_det = int(rng.integers(0, 6))
    n_gt = int(rng.integers(1, 4))
    gts, dets = [], []
    for _ in range(n_gt):
        x, y = int(rng.integers(0, 40)), int(rng.integers(0, 40))
        w, h = int(rng.integers(6, 18)), int(rng.integers(6, 18))
        gts.append(gt((x, y, x + w, y + h), cls=int(rng.integers(0, 2))))
    for k in range(n_det):
        base = gts[int(rng.integers(0, n_gt))]
        dx, dy = rng.uniform(-6, 6), rng.uniform(-6, 6)
        dets.append(det(float(rng.uniform(0.05, 1.0)),
                        (base.x1 + dx, base.y1 + dy, base.x2 + dx, base.y2 + dy),
                        cls=int(rng.integers(0, 2)), cell=k))
    return dets, gts


def test_ap_matches_brute_force_and_input_permutation_invariant():
    rng = np.random.default_rng(42)
    for _ in range(100):
        dets, gts = random_case(rng)
        ref = brute_force_ap(brute_force_flags(dets, gts, 0.5), len(gts))
        for perm in itertools.permutations(range(len(dets))):
            shuffled = [dets[i] for i in perm]
            flags = match_detections(shuffled, gts, 0.5)
            assert abs(average_precision(flags, len(gts)) - ref) <= 1e-12


def test_recall_matches_brute_force():
    rng = np.random.default_rng(43)
    for _ in range(200):
        dets, gts = random_case(rng)
        flags = match_detections(dets, gts, 0.5)
        ref = brute_force_flags(dets, gts, 0.5)
        assert sum(flags) == sum(ref)


def test_ap_invariant_to_monotone_score_rescaling():
    rng = np.random.default_rng(44)
    dets, gts = random_case(rng)
    while not dets:
        dets, gts = random_case(rng)
    flags = match_detections(dets, gts, 0.5)
    base = average_precision(flags, len(gts))
    squashed = [det(d.objectness ** 3, d.box,
                    cls=int(np.argmax(d.class_probs)), cell=d.cell_id)
                for d in dets]
    assert average_precision(match_detections(squashed, gts, 0.5),
                             len(gts)) == pytest.approx(base, abs=1e-12)
