"""Tests of the evaluation strategies."""

import numpy as np
import pytest
from conftest import (
    dataset,
    ground_truth,
    identity_frame,
    make_lane,
    prediction,
    verdict_frame,
)

from stalemap.errors import ConfigError, EmptyClass, NoDetections
from stalemap.frames import ChangeLabel, ChangeType, Frame
from stalemap.map_model import ElementClass, LocalMap
from stalemap.metrics import (
    STRATEGIES,
    EvalConfig,
    average_precision,
    changed_element_ap,
    compose_updated_map,
    evaluate_all,
    localization_accuracy,
    macc_consistent,
    mf_change_accuracy,
    sf_change_accuracy,
    sf_frame_verdict,
    updated_map_ap,
)

CROSSINGS = (ElementClass.PEDESTRIAN_CROSSING,)


def ap_oracle(flags, n_gt):
    """Return interpolated AP summed over every true positive rank."""
    hits = 0
    precisions = []
    for rank, flag in enumerate(flags, 1):
        hits += flag
        precisions.append(hits / rank)
    total = 0.0
    for rank, flag in enumerate(flags):
        if flag:
            total += max(precisions[rank:]) / n_gt
    return total


def frame_of(frame_id, gt_items, pred_items, stale=()):
    return Frame(
        LocalMap(frame_id, tuple(stale)),
        ground_truth(frame_id, *gt_items),
        prediction(frame_id, *pred_items),
    )


def test_config_validation():
    with pytest.raises(ConfigError, match="ascending"):
        EvalConfig(epsilons=(0.4, 0.2))
    with pytest.raises(ConfigError):
        EvalConfig(thetas=(0.0, 0.5))
    with pytest.raises(ConfigError):
        EvalConfig(lane_thresholds=())
    with pytest.raises(ConfigError):
        EvalConfig(lane_change_thresholds="road")
    cfg = EvalConfig(lane_change_thresholds="crossing")
    assert cfg.thresholds(ElementClass.LANE, changes=True) == (0.5, 1.0, 1.5)
    assert cfg.thresholds(ElementClass.LANE) == (1.0, 2.0, 3.0)


def test_frame_verdict_score_gate(lane):
    pred = prediction("f", (lane, 0.35, 1.0, 0.0))
    assert sf_frame_verdict(pred, 0.3) == 1
    assert sf_frame_verdict(pred, 0.4) == 0
    assert sf_frame_verdict(pred, 0.3, ChangeType.INSERTION) == 1
    assert sf_frame_verdict(pred, 0.3, ChangeType.DELETION) == 0


def test_flag_cut(lane):
    assert sf_frame_verdict(prediction("f", (lane, 1.0, 0.5, 0.0)), 0.2)
    assert not sf_frame_verdict(prediction("f", (lane, 1.0, 0.49, 0.0)), 0.2)


PRINTED_ACCURACIES = [
    (0.52, 0.87, 0.70),
    (0.43, 0.93, 0.68),
    (0.37, 0.97, 0.67),
    (0.94, 0.00, 0.47),
    (0.94, 0.25, 0.60),
    (0.94, 0.75, 0.84),
    (0.87, 0.86, 0.86),
    (0.79, 0.93, 0.86),
    (0.68, 0.97, 0.83),
    (0.12, 0.99, 0.56),
    (0.11, 0.99, 0.55),
    (0.11, 0.99, 0.55),
    (0.93, 0.05, 0.49),
    (0.93, 0.18, 0.56),
    (0.93, 0.45, 0.69),
    (0.47, 0.83, 0.65),
    (0.42, 0.83, 0.63),
    (0.42, 0.83, 0.63),
]


@pytest.mark.parametrize(
    ("acc_pos", "acc_neg", "printed"),
    PRINTED_ACCURACIES,
)
def test_printed_macc_fixtures(acc_pos, acc_neg, printed):
    assert macc_consistent(acc_pos, acc_neg, printed)
    assert not macc_consistent(acc_pos, acc_neg, printed + 0.02)


def test_always_change_predictor():
    ds = dataset(
        [verdict_frame("a", changed=True, flagged=True)],
        [verdict_frame("b", changed=False, flagged=True)],
    )
    result = sf_change_accuracy(ds, 0.3)
    assert (result.acc_pos, result.acc_neg, result.macc) == (1.0, 0.0, 0.5)
    assert (result.positives, result.negatives) == (1, 1)


def test_all_change_dataset(perfect_dataset):
    ds = dataset([perfect_dataset.sequences[0].frames[0]])
    with pytest.raises(EmptyClass):
        sf_change_accuracy(ds, 0.3)
    result = sf_change_accuracy(ds, 0.3, allow_undefined=True)
    assert result.acc_pos == 1.0
    assert result.acc_neg is None
    assert result.macc is None
    assert "no-change" in result.undefined


def test_multi_frame_or_rule():
    ds = dataset(
        [
            verdict_frame("a0", changed=True, flagged=False),
            verdict_frame("a1", changed=False, flagged=True),
        ],
        [verdict_frame("b0", changed=False, flagged=False)],
    )
    multi = mf_change_accuracy(ds, 0.3)
    assert (multi.acc_pos, multi.acc_neg) == (1.0, 1.0)
    single = sf_change_accuracy(ds, 0.3)
    assert (single.acc_pos, single.acc_neg) == (0.0, 0.5)


def test_type_aware_direction(lane, crossing):
    frame = frame_of(
        "f",
        [lane, (crossing, ChangeLabel.INSERTED)],
        [lane, (crossing, 1.0, 0.0, 1.0)],
    )
    other = verdict_frame("g", changed=False, flagged=False)
    ds = dataset([frame, other])
    assert sf_change_accuracy(ds, 0.3).acc_pos == 1.0
    assert sf_change_accuracy(ds, 0.3, ChangeType.INSERTION).acc_pos == 0.0
    deletion = sf_change_accuracy(
        ds,
        0.3,
        ChangeType.DELETION,
        allow_undefined=True,
    )
    assert deletion.acc_pos is None
    assert deletion.acc_neg == 0.5


def test_localization_iou_threshold(crossing):
    # shifting a 3 m wide crossing by 9/7 m leaves IoU 0.4
    moved = crossing.translated(9 / 7, 0)
    ds = dataset(
        [
            frame_of(
                "f",
                [(crossing, ChangeLabel.INSERTED)],
                [(moved, 0.9, 1.0, 0.0)],
            ),
        ],
    )
    assert localization_accuracy(ds, 0.3, 0.3) == 1.0
    assert localization_accuracy(ds, 0.3, 0.5) == 0.0
    with pytest.raises(NoDetections):
        localization_accuracy(ds, 0.3, 0.3, ChangeType.DELETION)


def test_localization_no_detections(crossing):
    ds = dataset(
        [frame_of("f", [(crossing, ChangeLabel.INSERTED)], [crossing])],
    )
    with pytest.raises(NoDetections):
        localization_accuracy(ds, 0.3, 0.5)
    assert localization_accuracy(ds, 0.3, 0.5, allow_undefined=True) is None


def test_localization_class_gate(crossing):
    cover = make_lane("cover", x0=-1.5, x1=1.5, y=0, width=7.0)
    ds = dataset(
        [
            frame_of(
                "f",
                [(crossing, ChangeLabel.INSERTED)],
                [(cover, 0.9, 1.0, 0.0)],
            ),
        ],
    )
    assert localization_accuracy(ds, 0.3, 0.5, class_gated=True) == 0.0
    assert localization_accuracy(ds, 0.3, 0.5, class_gated=False) == 1.0


def test_changed_frames_only(crossing):
    unchanged = frame_of("g", [crossing], [(crossing, 0.9, 1.0, 0.0)])
    changed = frame_of(
        "f",
        [(crossing, ChangeLabel.INSERTED)],
        [(crossing, 0.9, 1.0, 0.0)],
    )
    ds = dataset([changed, unchanged])
    assert localization_accuracy(ds, 0.3, 0.5) == 0.5
    assert (
        localization_accuracy(ds, 0.3, 0.5, changed_frames_only=True) == 1.0
    )


def test_average_precision_rank_swap():
    assert average_precision([True, False], 1) == 1.0
    assert average_precision([False, True], 1) == 0.5
    assert average_precision([], 3) == 0.0


def test_average_precision_oracle():
    rng = np.random.default_rng(21)
    for _ in range(300):
        flags = list(rng.random(int(rng.integers(1, 11))) < 0.5)
        n_gt = sum(flags) + int(rng.integers(0 if any(flags) else 1, 3))
        assert average_precision(flags, n_gt) == pytest.approx(
            ap_oracle(flags, n_gt),
        )


def test_changed_element_ap_rank_swap(crossing):
    far = crossing.translated(30, 0)

    def ap(true_score, false_score):
        ds = dataset(
            [
                frame_of(
                    "f",
                    [(crossing, ChangeLabel.INSERTED)],
                    [
                        (crossing, true_score, 1.0, 0.0),
                        (far, false_score, 1.0, 0.0),
                    ],
                ),
            ],
        )
        return changed_element_ap(ds, classes=CROSSINGS)[CROSSINGS[0]]

    assert ap(0.9, 0.5) == 1.0
    assert ap(0.5, 0.9) == 0.5


def test_changed_element_ap_ignores_unflagged(crossing):
    ds = dataset(
        [
            frame_of(
                "f",
                [(crossing, ChangeLabel.DELETED)],
                [(crossing, 0.9, 0.0, 1.0), (crossing.translated(30, 0),)],
            ),
        ],
    )
    aps = changed_element_ap(ds, ChangeType.DELETION, classes=CROSSINGS)
    assert aps[CROSSINGS[0]] == 1.0
    assert changed_element_ap(
        ds,
        ChangeType.INSERTION,
        classes=CROSSINGS,
        allow_undefined=True,
    ) == {CROSSINGS[0]: None}


def test_updated_map_far_offset(lane, crossing):
    ds = dataset(
        [
            frame_of(
                "f",
                [lane, crossing],
                [lane.translated(0, 10), crossing.translated(10, 0)],
            ),
        ],
    )
    aps = updated_map_ap(ds)
    assert aps == {
        ElementClass.LANE: 0.0,
        ElementClass.PEDESTRIAN_CROSSING: 0.0,
    }


def test_compose_updated_map(lane, crossing):
    pred = prediction(
        "f",
        (lane.translated(0, 0.5), 0.8),
        (crossing.translated(0.2, 0), 0.7, 1.0, 0.0),
    )
    stale = LocalMap("f", (lane, crossing))
    composed = compose_updated_map(pred, stale)
    assert composed.elements[0].segment == lane
    assert composed.elements[0].score == 0.8
    assert composed.elements[1] == pred.elements[1]

    far = prediction("f", (lane.translated(0, 5), 0.8))
    assert compose_updated_map(far, stale) == far


def test_evaluate_all_perfect(perfect_dataset):
    report = evaluate_all(perfect_dataset, workers=2)
    assert [it.key for it in report.blocks] == [it[0] for it in STRATEGIES]
    for block in report.blocks:
        assert block.error is None
        assert block.rows
        for row in block.rows:
            for key, value in row.values.items():
                if value is None:
                    assert row.undefined[key]
                else:
                    assert value == 1.0
            if "macc" in row.values:
                assert macc_consistent(
                    row.values["acc_pos"],
                    row.values["acc_neg"],
                    row.values["macc"],
                    places=9,
                )

    changed_ap = report.block("g").rows
    assert {row.parameter: row.values["ap"] for row in changed_ap} == {
        "lane": None,
        "pedestrian_crossing": 1.0,
    }
    assert report.totals["sequences"] == 3
    assert report.totals["frames"] == 5
    assert report.totals["change_frames"] == 2
    assert report.totals["change_sequences"] == 2
    assert report.totals["head_conflicts"] == 0
    assert len(report.frames) == 5
    assert report.frames[0].truth == {
        "all": True,
        "insertion": True,
        "deletion": False,
    }


def test_evaluate_all_rows(perfect_dataset):
    cfg = EvalConfig(epsilons=(0.2, 0.5), thetas=(0.5,))
    report = evaluate_all(perfect_dataset, cfg, workers=1)
    assert len(report.block("a").rows) == 2
    assert len(report.block("c").rows) == 4
    assert len(report.block("e").rows) == 1
    assert len(report.block("f").rows) == 2
    assert len(report.block("i").rows) == 4
    assert report.config["epsilons"] == [0.2, 0.5]


def test_evaluate_all_single_sequence(lane):
    ds = dataset([identity_frame("x", [lane])])
    report = evaluate_all(ds, workers=1)
    (row, *_) = report.block("a").rows
    assert row.values["acc_pos"] is None
    assert row.values["acc_neg"] == 1.0
    assert report.block("e").rows[0].values["acc_loca"] is None


def test_changed_ap_falls_with_clutter(crossing):
    def ap(clutter):
        pred_items = [(crossing, 0.5, 1.0, 0.0)]
        pred_items.extend(
            (crossing.translated(20.0 + 10 * k, 0), 0.9, 1.0, 0.0)
            for k in range(clutter)
        )
        ds = dataset(
            [frame_of("f", [(crossing, ChangeLabel.INSERTED)], pred_items)],
        )
        return changed_element_ap(ds, classes=CROSSINGS)[CROSSINGS[0]]

    aps = [ap(it) for it in range(5)]
    assert aps == pytest.approx([1 / (it + 1) for it in range(5)])
    assert aps == sorted(aps, reverse=True)


def test_changed_ap_falls_with_offset(crossing):
    def ap(offset):
        ds = dataset(
            [
                frame_of(
                    "f",
                    [(crossing, ChangeLabel.INSERTED)],
                    [(crossing.translated(offset, 0), 0.9, 1.0, 0.0)],
                ),
            ],
        )
        return changed_element_ap(ds, classes=CROSSINGS)[CROSSINGS[0]]

    # boundary chamfer equals the shift across the 3 m crossing
    aps = [ap(it) for it in (0.0, 0.3, 0.7, 1.2, 1.45)]
    assert aps == pytest.approx([1.0, 1.0, 2 / 3, 1 / 3, 1 / 3])
    assert aps == sorted(aps, reverse=True)


def test_perfect_ap_is_exact():
    assert average_precision([True] * 7, 7) == 1.0
    assert average_precision([True] * 3, 3) == 1.0
    assert average_precision([True, True, False], 3) == 2 / 3
