"""Change detection evaluation strategies (a) to (i).

(a)-(d)
    Single frame and multi frame change detection accuracy, type agnostic
    and type aware, swept over the element score threshold epsilon.
(e)-(f)
    Localization accuracy of predicted changed elements by rasterized IoU,
    swept over the IoU threshold theta.
(g)-(h)
    Average precision of changed elements per element class.
(i)
    Average precision of the updated map, change labels ignored.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from logging import getLogger
from math import fsum, isfinite

import numpy as np

from stalemap.config import config_to_dict, thread_count
from stalemap.errors import (
    ConfigError,
    DegenerateElement,
    EmptyClass,
    NoDetections,
    NoGroundTruth,
    StalemapError,
)
from stalemap.frames import ChangeType, FramePrediction
from stalemap.geometry import element_iou
from stalemap.matching import build_cost_matrix, hungarian_assign
from stalemap.map_model import ElementClass

SCHEMA_VERSION = "1"
THRESHOLD_SETS = ("lane", "crossing")

log = getLogger(__name__)


def _ascending(name, values, low=None, high=None):
    if not values:
        msg = f"{name} must not be empty"
        raise ConfigError(msg)
    if any(not isfinite(it) for it in values):
        msg = f"{name} must be finite"
        raise ConfigError(msg)
    if any(b <= a for a, b in zip(values, values[1:])):
        msg = f"{name} must be ascending, got {list(values)}"
        raise ConfigError(msg)
    if low is not None and values[0] <= low:
        msg = f"{name} must be greater than {low}"
        raise ConfigError(msg)
    if high is not None and values[-1] >= high:
        msg = f"{name} must be less than {high}"
        raise ConfigError(msg)


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation grid and matching thresholds in meters."""

    epsilons: tuple[float, ...] = (0.2, 0.3, 0.4)
    thetas: tuple[float, ...] = (0.3, 0.5, 0.8)
    localization_epsilon: float = 0.3
    lane_thresholds: tuple[float, ...] = (1.0, 2.0, 3.0)
    crossing_thresholds: tuple[float, ...] = (0.5, 1.0, 1.5)
    iou_resolution: float = 0.1
    lane_change_thresholds: str = "lane"
    class_gated_localization: bool = True

    def __post_init__(self):
        for name in (
            "epsilons",
            "thetas",
            "lane_thresholds",
            "crossing_thresholds",
        ):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        _ascending("epsilons", self.epsilons, 0.0, 1.0)
        _ascending("thetas", self.thetas, 0.0, 1.0)
        _ascending("lane_thresholds", self.lane_thresholds, 0.0)
        _ascending("crossing_thresholds", self.crossing_thresholds, 0.0)
        if not 0.0 < self.localization_epsilon < 1.0:
            msg = "localization_epsilon must be in (0, 1)"
            raise ConfigError(msg)
        if not (isfinite(self.iou_resolution) and self.iou_resolution > 0):
            msg = "iou_resolution must be positive"
            raise ConfigError(msg)
        if self.lane_change_thresholds not in THRESHOLD_SETS:
            msg = (
                f"lane_change_thresholds must be one of {THRESHOLD_SETS}, "
                f"got `{self.lane_change_thresholds}'"
            )
            raise ConfigError(msg)

    def thresholds(self, element_class, *, changes=False):
        """Return matching thresholds of element class.

        For changed lanes ``lane_change_thresholds`` may pick the crossing
        set.
        """
        if element_class is ElementClass.PEDESTRIAN_CROSSING:
            return self.crossing_thresholds
        if changes and self.lane_change_thresholds == "crossing":
            return self.crossing_thresholds
        return self.lane_thresholds

    def largest_threshold(self, element_class) -> float:
        """Return widest matching threshold of element class."""
        return self.thresholds(element_class)[-1]


@dataclass(frozen=True)
class ChangeAccuracy:
    """Accuracy on change and on no-change population.

    Undefined accuracies are None with the reason in ``undefined``.
    """

    acc_pos: float | None
    acc_neg: float | None
    positives: int = 0
    negatives: int = 0
    undefined: str | None = None

    @property
    def macc(self) -> float | None:
        """Return mean of both accuracies, None if one is undefined."""
        if self.acc_pos is None or self.acc_neg is None:
            return None
        return (self.acc_pos + self.acc_neg) / 2


def macc_consistent(acc_pos, acc_neg, macc, places=2) -> bool:
    """Return True if printed mAcc agrees with rounded accuracies.

    The mean of the printed values may sit on a rounding edge, so half a
    unit of the last place is tolerated.
    """
    return abs((acc_pos + acc_neg) / 2 - macc) <= 0.5 * 10**-places + 1e-12


class FrameEvaluation:
    """Per frame cache of costs, assignments and IoU values."""

    def __init__(self, frame, cfg: EvalConfig, sequence_id=""):
        self.frame = frame
        self.cfg = cfg
        self.sequence_id = sequence_id
        self._ious = {}

    @cached_property
    def cost_matrix(self) -> np.ndarray:
        """Return prediction to ground truth costs."""
        return build_cost_matrix(
            self.frame.prediction,
            self.frame.ground_truth,
        )

    @cached_property
    def costs(self) -> list[list[float]]:
        """Return cost matrix as nested lists, fast to index."""
        return self.cost_matrix.tolist()

    @cached_property
    def assignment(self):
        """Return Hungarian attribution of predictions to ground truth."""
        return hungarian_assign(self.cost_matrix)

    @cached_property
    def composed(self) -> FramePrediction:
        """Return prediction with stale geometry passed through."""
        return compose_updated_map(
            self.frame.prediction,
            self.frame.stale,
            self.cfg,
        )

    @cached_property
    def composed_costs(self) -> list[list[float]]:
        """Return costs of the pass-through map to ground truth."""
        return build_cost_matrix(
            self.composed,
            self.frame.ground_truth,
        ).tolist()

    @property
    def head_conflicts(self) -> int:
        """Return count of elements with both heads firing."""
        return sum(1 for it in self.frame.prediction.elements if it.conflict)

    def iou(self, pred, gt) -> float | None:
        """Return IoU of prediction and ground truth element.

        None when one of them has no area.
        """
        key = (pred, gt)
        if key in self._ious:
            return self._ious[key]
        pred_segment = self.frame.prediction.elements[pred].segment
        gt_segment = self.frame.ground_truth.elements[gt].segment
        try:
            value = element_iou(
                pred_segment,
                gt_segment,
                self.cfg.iou_resolution,
            )
        except DegenerateElement as err:
            log.warning("%s: %s, not localized", self.frame.frame_id, err)
            value = None
        self._ious[key] = value
        return value

    def warm(self):
        """Compute everything the report needs."""
        _ = self.costs, self.assignment, self.composed_costs
        return self


class EvaluationCache:
    """Frame evaluations of a dataset in dataset order."""

    def __init__(self, dataset, cfg: EvalConfig | None = None):
        self.dataset = dataset
        self.cfg = cfg or EvalConfig()
        self.frames = []
        self.sequences = []
        for sequence in dataset.sequences:
            start = len(self.frames)
            self.frames.extend(
                FrameEvaluation(it, self.cfg, sequence.sequence_id)
                for it in sequence.frames
            )
            self.sequences.append(self.frames[start:])

    def warm(self, workers=None):
        """Compute per frame costs and assignments in a thread pool."""
        workers = workers or thread_count()
        log.info(
            "matching %d frames with %d workers",
            len(self.frames),
            workers,
        )
        with ThreadPoolExecutor(max_workers=workers) as executor:
            list(executor.map(FrameEvaluation.warm, self.frames))
        return self


def _cache(dataset, cfg, cache):
    if cache is not None:
        return cache
    return EvaluationCache(dataset, cfg)


def sf_frame_verdict(prediction, epsilon, change_type=None) -> int:
    """Return 1 if an element signals a change with score >= epsilon."""
    return int(
        any(
            it.flagged(change_type) and it.score >= epsilon
            for it in prediction.elements
        ),
    )


def _accuracy(outcomes, what, allow_undefined):
    """Return ChangeAccuracy of (truth, verdict) pairs."""
    positives = [verdict for truth, verdict in outcomes if truth]
    negatives = [verdict for truth, verdict in outcomes if not truth]
    acc_pos = sum(positives) / len(positives) if positives else None
    acc_neg = negatives.count(0) / len(negatives) if negatives else None

    reason = None
    if acc_pos is None or acc_neg is None:
        empty = "change" if acc_pos is None else "no-change"
        if acc_pos is None and acc_neg is None:
            empty = "change and no-change"
        reason = f"no {empty} {what}"
        if not allow_undefined:
            raise EmptyClass(reason)
    return ChangeAccuracy(
        acc_pos,
        acc_neg,
        len(positives),
        len(negatives),
        reason,
    )


def sf_change_accuracy(
    ds,
    epsilon,
    change_type=None,
    *,
    allow_undefined=False,
) -> ChangeAccuracy:
    """Return single frame change accuracy, type aware with change_type."""
    outcomes = [
        (
            frame.has_change(change_type),
            sf_frame_verdict(frame.prediction, epsilon, change_type),
        )
        for frame in ds.frames()
    ]
    return _accuracy(outcomes, "frames", allow_undefined)


def mf_frame_verdicts(sequence, epsilon, change_type=None) -> list[int]:
    """Return single frame verdicts of a sequence."""
    return [
        sf_frame_verdict(it.prediction, epsilon, change_type)
        for it in sequence.frames
    ]


def mf_change_accuracy(
    ds,
    epsilon,
    change_type=None,
    *,
    allow_undefined=False,
) -> ChangeAccuracy:
    """Return multi frame change accuracy.

    A sequence signals a change when any of its frames does, without any
    temporal fusion.
    """
    outcomes = [
        (
            sequence.has_change(change_type),
            max(mf_frame_verdicts(sequence, epsilon, change_type), default=0),
        )
        for sequence in ds.sequences
    ]
    return _accuracy(outcomes, "sequences", allow_undefined)


def _localized(frame_eval, pred, targets, theta, class_gated):
    segment = frame_eval.frame.prediction.elements[pred].segment
    for gt, element in targets:
        if class_gated and (
            element.segment.element_class is not segment.element_class
        ):
            continue
        value = frame_eval.iou(pred, gt)
        if value is not None and value >= theta:
            return True
    return False


def localization_counts(
    cache,
    epsilon,
    theta,
    change_type=None,
    *,
    changed_frames_only=False,
    class_gated=True,
):
    """Return (localized, detections) counts."""
    localized = detections = 0
    for frame_eval in cache.frames:
        frame = frame_eval.frame
        if changed_frames_only and not frame.has_change(change_type):
            continue
        targets = [
            (j, it)
            for j, it in enumerate(frame.ground_truth.elements)
            if it.matches(change_type)
        ]
        for pred, _ in frame.prediction.detections(epsilon, change_type):
            detections += 1
            if _localized(frame_eval, pred, targets, theta, class_gated):
                localized += 1
    return localized, detections


def localization_accuracy(
    ds,
    epsilon,
    theta,
    change_type=None,
    *,
    changed_frames_only=False,
    class_gated=True,
    cfg=None,
    cache=None,
    allow_undefined=False,
) -> float | None:
    """Return share of predicted changed elements localized by IoU >= theta.

    Type aware with change_type: insertion flags localize against inserted
    ground truth only, deletion flags against deleted.
    """
    cache = _cache(ds, cfg, cache)
    localized, detections = localization_counts(
        cache,
        epsilon,
        theta,
        change_type,
        changed_frames_only=changed_frames_only,
        class_gated=class_gated,
    )
    if not detections:
        if allow_undefined:
            return None
        msg = f"no detection with score >= {epsilon}"
        raise NoDetections(msg)
    return localized / detections


def average_precision(true_positives, n_gt) -> float:
    """Return all point interpolated AP of score ranked TP flags.

    The area under the interpolated precision envelope is the sum of the
    envelope at every true positive rank over the ground truth count.
    """
    if n_gt <= 0:
        msg = "no ground truth element"
        raise NoGroundTruth(msg)
    hits = np.asarray(true_positives, dtype=bool)
    if not hits.any():
        return 0.0
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return min(1.0, fsum(envelope[hits]) / n_gt)


@dataclass
class _Population:
    """Score ranked detections against per frame ground truth targets."""

    detections: list = field(default_factory=list)
    targets: dict = field(default_factory=dict)
    costs: dict = field(default_factory=dict)

    @property
    def n_gt(self):
        """Return target count."""
        return sum(len(it) for it in self.targets.values())

    def ranked(self):
        """Return detections by descending score, then dataset order."""
        return sorted(self.detections)

    def true_positives(self, threshold) -> list[bool]:
        """Greedy nearest unconsumed target within threshold."""
        consumed = {key: set() for key in self.targets}
        flags = []
        for _, key, pred in self.ranked():
            row = self.costs[key][pred]
            best, best_cost = None, None
            for gt in self.targets[key]:
                cost = row[gt]
                if gt in consumed[key] or cost > threshold:
                    continue
                if best is None or cost < best_cost:
                    best, best_cost = gt, cost
            if best is not None:
                consumed[key].add(best)
            flags.append(best is not None)
        return flags

    def ap(self, thresholds) -> float:
        """Return AP averaged over matching thresholds."""
        n_gt = self.n_gt
        return float(
            np.mean(
                [
                    average_precision(self.true_positives(it), n_gt)
                    for it in thresholds
                ],
            ),
        )


def _population(cache, element_class, pred_filter, gt_filter, composed):
    population = _Population()
    for key, frame_eval in enumerate(cache.frames):
        if composed:
            prediction, costs = frame_eval.composed, frame_eval.composed_costs
        else:
            prediction, costs = frame_eval.frame.prediction, frame_eval.costs
        targets = [
            j
            for j, it in enumerate(frame_eval.frame.ground_truth.elements)
            if it.segment.element_class is element_class and gt_filter(it)
        ]
        population.targets[key] = targets
        population.costs[key] = costs
        population.detections.extend(
            (-it.score, key, i)
            for i, it in enumerate(prediction.elements)
            if it.segment.element_class is element_class and pred_filter(it)
        )
    return population


def _class_aps(population_of, classes, thresholds_of, allow_undefined, what):
    result = {}
    for element_class in classes:
        population = population_of(element_class)
        if not population.n_gt:
            if not allow_undefined:
                msg = f"no {what}{element_class.value} in ground truth"
                raise NoGroundTruth(msg)
            result[element_class] = None
            continue
        result[element_class] = population.ap(thresholds_of(element_class))
    return result


def changed_element_ap(
    ds,
    change_type=None,
    *,
    classes=tuple(ElementClass),
    cfg=None,
    cache=None,
    allow_undefined=False,
) -> dict:
    """Return AP of predicted changed elements per element class.

    Only elements flagged as changed (per change_type) are ranked and only
    ground truth changes of that kind are targets.
    """
    cache = _cache(ds, cfg, cache)
    return _class_aps(
        lambda cls: _population(
            cache,
            cls,
            lambda it: it.flagged(change_type),
            lambda it: it.matches(change_type),
            composed=False,
        ),
        classes,
        lambda cls: cache.cfg.thresholds(cls, changes=True),
        allow_undefined,
        "changed ",
    )


def updated_map_ap(
    ds,
    *,
    classes=tuple(ElementClass),
    pass_through=False,
    cfg=None,
    cache=None,
    allow_undefined=False,
) -> dict:
    """Return AP of all predicted against all ground truth elements.

    With ``pass_through`` the prediction composed with the stale prior is
    evaluated, see compose_updated_map.
    """
    cache = _cache(ds, cfg, cache)
    return _class_aps(
        lambda cls: _population(
            cache,
            cls,
            lambda _: True,
            lambda _: True,
            composed=pass_through,
        ),
        classes,
        cache.cfg.thresholds,
        allow_undefined,
        "",
    )


def compose_updated_map(prediction, stale, cfg=None) -> FramePrediction:
    """Return prediction with unchanged elements taken from the stale map.

    Every prediction without a change flag is replaced by the stale element
    Hungarian matched to it within the widest threshold of its class.
    Flagged predictions are kept as they are.
    """
    cfg = cfg or EvalConfig()
    costs = build_cost_matrix(prediction, stale)
    assignment = hungarian_assign(costs)
    elements = list(prediction.elements)
    for match in assignment.matches:
        element = elements[match.pred]
        if element.flagged():
            continue
        limit = cfg.largest_threshold(element.segment.element_class)
        if match.cost <= limit:
            elements[match.pred] = replace(
                element,
                segment=stale.elements[match.gt],
            )
    return replace(prediction, elements=tuple(elements))


@dataclass(frozen=True)
class ResultRow:
    """One result line of a strategy block."""

    change_class: str
    parameter_name: str
    parameter: float | str
    values: dict
    undefined: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StrategyBlock:
    """Results of one evaluation strategy."""

    key: str
    title: str
    modality: str
    matcher: str
    rows: tuple[ResultRow, ...] = ()
    error: str | None = None


@dataclass(frozen=True)
class FrameAudit:
    """Per frame verdicts and attribution for audits."""

    sequence_id: str
    frame_id: str
    truth: dict
    verdicts: dict
    head_conflicts: int
    matched: int
    unmatched_preds: int
    unmatched_gts: int
    mean_cost: float | None


@dataclass(frozen=True)
class EvalReport:
    """Results of all strategies with config echo and audit trail."""

    config: dict
    blocks: tuple[StrategyBlock, ...]
    frames: tuple[FrameAudit, ...]
    totals: dict
    schema_version: str = SCHEMA_VERSION

    def block(self, key) -> StrategyBlock | None:
        """Return strategy block by key."""
        for it in self.blocks:
            if it.key == key:
                return it
        return None


LOCALIZATION_MODES = (("acc_loca", False), ("acc_loca_c", True))

CHANGE_CLASSES = (
    (None, "all"),
    (ChangeType.INSERTION, "insertion"),
    (ChangeType.DELETION, "deletion"),
)


def _accuracy_row(change_class, epsilon, accuracy):
    values = {
        "acc_pos": accuracy.acc_pos,
        "acc_neg": accuracy.acc_neg,
        "macc": accuracy.macc,
    }
    undefined = {
        key: accuracy.undefined for key, value in values.items()
        if value is None
    }
    return ResultRow(change_class, "epsilon", epsilon, values, undefined)


def _accuracy_rows(ds, cfg, function, type_aware):
    change_classes = CHANGE_CLASSES[1:] if type_aware else CHANGE_CLASSES[:1]
    return tuple(
        _accuracy_row(
            name,
            epsilon,
            function(ds, epsilon, change_type, allow_undefined=True),
        )
        for change_type, name in change_classes
        for epsilon in cfg.epsilons
    )


def _localization_rows(ds, cfg, cache, type_aware):
    change_classes = CHANGE_CLASSES[1:] if type_aware else CHANGE_CLASSES[:1]
    rows = []
    for change_type, name in change_classes:
        for theta in cfg.thetas:
            values, undefined = {}, {}
            for key, changed_only in LOCALIZATION_MODES:
                values[key] = localization_accuracy(
                    ds,
                    cfg.localization_epsilon,
                    theta,
                    change_type,
                    changed_frames_only=changed_only,
                    class_gated=cfg.class_gated_localization,
                    cache=cache,
                    allow_undefined=True,
                )
                if values[key] is None:
                    undefined[key] = (
                        "no detection with score >= "
                        f"{cfg.localization_epsilon}"
                    )
            rows.append(ResultRow(name, "theta", theta, values, undefined))
    return tuple(rows)


def _ap_rows(change_class, aps):
    rows = []
    for element_class, value in aps.items():
        undefined = {}
        if value is None:
            undefined["ap"] = f"no {element_class.value} in ground truth"
        rows.append(
            ResultRow(
                change_class,
                "object_type",
                element_class.value,
                {"ap": value},
                undefined,
            ),
        )
    return rows


def _changed_ap_rows(ds, cache, type_aware):
    change_classes = CHANGE_CLASSES[1:] if type_aware else CHANGE_CLASSES[:1]
    rows = []
    for change_type, name in change_classes:
        aps = changed_element_ap(
            ds,
            change_type,
            cache=cache,
            allow_undefined=True,
        )
        rows.extend(_ap_rows(name, aps))
    return tuple(rows)


def _updated_map_rows(ds, cache):
    rows = []
    for name, pass_through in (("prediction", False), ("pass-through", True)):
        aps = updated_map_ap(
            ds,
            pass_through=pass_through,
            cache=cache,
            allow_undefined=True,
        )
        rows.extend(_ap_rows(name, aps))
    return tuple(rows)


STRATEGIES = (
    ("a", "Type agnostic change detection", "SF", "verdict"),
    ("b", "Type agnostic change detection", "MF", "verdict"),
    ("c", "Type aware change detection", "SF", "verdict"),
    ("d", "Type aware change detection", "MF", "verdict"),
    ("e", "Type agnostic change localization", "SF", "iou"),
    ("f", "Type aware change localization", "SF", "iou"),
    ("g", "Type agnostic changed element AP", "SF", "ranked-greedy"),
    ("h", "Type aware changed element AP", "SF", "ranked-greedy"),
    ("i", "Updated map AP", "SF", "ranked-greedy"),
)


def _strategy_rows(key, ds, cfg, cache):
    if key in "ab":
        function = sf_change_accuracy if key == "a" else mf_change_accuracy
        return _accuracy_rows(ds, cfg, function, type_aware=False)
    if key in "cd":
        function = sf_change_accuracy if key == "c" else mf_change_accuracy
        return _accuracy_rows(ds, cfg, function, type_aware=True)
    if key in "ef":
        return _localization_rows(ds, cfg, cache, type_aware=key == "f")
    if key in "gh":
        return _changed_ap_rows(ds, cache, type_aware=key == "h")
    return _updated_map_rows(ds, cache)


def _frame_audit(frame_eval, cfg):
    frame = frame_eval.frame
    verdicts = {
        str(epsilon): {
            name: sf_frame_verdict(frame.prediction, epsilon, change_type)
            for change_type, name in CHANGE_CLASSES
        }
        for epsilon in cfg.epsilons
    }
    assignment = frame_eval.assignment
    return FrameAudit(
        sequence_id=frame_eval.sequence_id,
        frame_id=frame.frame_id,
        truth={
            name: frame.has_change(change_type)
            for change_type, name in CHANGE_CLASSES
        },
        verdicts=verdicts,
        head_conflicts=frame_eval.head_conflicts,
        matched=len(assignment.matches),
        unmatched_preds=len(assignment.unmatched_preds),
        unmatched_gts=len(assignment.unmatched_gts),
        mean_cost=assignment.mean_cost,
    )


def evaluate_all(ds, cfg=None, *, workers=None) -> EvalReport:
    """Run every strategy over the full parameter grid.

    A failing strategy is reported with its error, the others still run.
    """
    cfg = cfg or EvalConfig()
    cache = EvaluationCache(ds, cfg).warm(workers)

    blocks = []
    for key, title, modality, matcher in STRATEGIES:
        log.info("strategy (%s) %s", key, title)
        try:
            rows = _strategy_rows(key, ds, cfg, cache)
            blocks.append(StrategyBlock(key, title, modality, matcher, rows))
        except (StalemapError, ValueError) as err:
            log.error("strategy (%s) failed: %s", key, err)  # noqa: TRY400
            blocks.append(
                StrategyBlock(key, title, modality, matcher, error=str(err)),
            )

    frames = tuple(_frame_audit(it, cfg) for it in cache.frames)
    totals = {
        "sequences": ds.s,
        "frames": ds.frame_count,
        "change_frames": sum(1 for it in frames if it.truth["all"]),
        "change_sequences": sum(1 for it in ds.sequences if it.has_change()),
        "head_conflicts": sum(it.head_conflicts for it in frames),
        "matched": sum(it.matched for it in frames),
        "unmatched_preds": sum(it.unmatched_preds for it in frames),
        "unmatched_gts": sum(it.unmatched_gts for it in frames),
    }
    return EvalReport(
        config=config_to_dict(cfg),
        blocks=tuple(blocks),
        frames=frames,
        totals=totals,
    )

