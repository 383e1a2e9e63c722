"""JSON exchange format of maps, ground truth and prediction frames.

Map document::

    {"frame_id": str, "fov": [xmin, ymin, xmax, ymax],
     "elements": [{"id": str, "class": "lane"|"pedestrian_crossing",
                   "centerline": [[x, y], ...], "left_boundary": [...],
                   "right_boundary": [...], "left_type": 0|1|2,
                   "right_type": 0|1|2, "successors": [str]}]}

Ground truth elements add ``"label"``, prediction elements add ``"score"``,
``"ins_prob"`` and ``"del_prob"``.
"""

from __future__ import annotations

from functools import wraps
from json import JSONDecodeError, dumps, loads
from logging import getLogger
from math import isfinite

from stalemap.errors import ParseError, SchemaError, ZeroLengthPolyline
from stalemap.frames import (
    ChangeLabel,
    FrameGroundTruth,
    FramePrediction,
    LabeledElement,
    PredictedElement,
)
from stalemap.map_model import (
    POINT_COUNT,
    BoundaryType,
    ElementClass,
    Fov,
    LaneSegment,
    LocalMap,
    Polyline,
    resample_polyline,
)

POLYLINES = ("centerline", "left_boundary", "right_boundary")

log = getLogger(__name__)


def decode_json(data, source=None):
    """Parse bytes or text, raise ParseError with position on failure."""
    try:
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return loads(data)
    except UnicodeDecodeError as err:
        msg = f"not UTF-8 at byte {err.start}"
        raise ParseError(msg, source=source) from err
    except JSONDecodeError as err:
        raise ParseError(
            err.msg,
            line=err.lineno,
            column=err.colno,
            source=source,
        ) from err


def encode_json(data) -> bytes:
    """Serialize data, floats keep their shortest exact repr."""
    return (
        dumps(data, indent=1, ensure_ascii=False, allow_nan=False) + "\n"
    ).encode("utf-8")


def _require(obj, key, path):
    if not isinstance(obj, dict):
        raise SchemaError(path or "document", "object expected")
    if key not in obj:
        raise SchemaError(_join(path, key), "missing")
    return obj[key]


def _join(path, key):
    return f"{path}.{key}" if path else key


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"number expected, got {value!r}")
    value = float(value)
    if not isfinite(value):
        raise SchemaError(path, "coordinate is not finite")
    return value


def _unit(value, path):
    value = _number(value, path)
    if not 0.0 <= value <= 1.0:
        raise SchemaError(path, f"{value} not in [0, 1]")
    return value


def _string(value, path):
    if not isinstance(value, str):
        raise SchemaError(path, f"string expected, got {value!r}")
    return value


def _points(value, path):
    if not isinstance(value, list) or len(value) < 2:  # noqa: PLR2004
        raise SchemaError(path, "list of at least 2 points expected")
    points = []
    for i, point in enumerate(value):
        where = f"{path}[{i}]"
        if not isinstance(point, list) or len(point) != 2:  # noqa: PLR2004
            raise SchemaError(where, "[x, y] pair expected")
        points.append((_number(point[0], where), _number(point[1], where)))
    return Polyline(tuple(points))


def _boundary_type(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"integer code expected, got {value!r}")
    try:
        return BoundaryType(value)
    except ValueError:
        codes = ", ".join(str(int(it)) for it in BoundaryType)
        raise SchemaError(path, f"code {value} not in {codes}") from None


def _element_class(value, path):
    try:
        return ElementClass(value)
    except ValueError:
        names = ", ".join(it.value for it in ElementClass)
        raise SchemaError(path, f"`{value}' not in {names}") from None


def _fov(value, path):
    if not isinstance(value, list) or len(value) != 4:  # noqa: PLR2004
        raise SchemaError(path, "[xmin, ymin, xmax, ymax] expected")
    return Fov(*(_number(it, f"{path}[{i}]") for i, it in enumerate(value)))


def segment_from_dict(obj, path="", *, normalize=True, warnings=None):
    """Return LaneSegment from exchange dictionary."""
    element_id = _string(_require(obj, "id", path), _join(path, "id"))
    polylines = {}
    for name in POLYLINES:
        field = _join(path, name)
        poly = _points(_require(obj, name, path), field)
        if normalize and len(poly) != POINT_COUNT:
            try:
                resampled = resample_polyline(poly)
            except ZeroLengthPolyline as err:
                raise SchemaError(field, str(err)) from err
            message = f"{field}: resampled {len(poly)} to {POINT_COUNT} points"
            log.warning("%s: resampled %d points", field, len(poly))
            if warnings is not None:
                warnings.append(message)
            poly = resampled
        polylines[name] = poly

    successors = obj.get("successors", [])
    if not isinstance(successors, list):
        raise SchemaError(_join(path, "successors"), "list expected")
    return LaneSegment(
        element_id=element_id,
        element_class=_element_class(
            _require(obj, "class", path),
            _join(path, "class"),
        ),
        left_type=_boundary_type(
            _require(obj, "left_type", path),
            _join(path, "left_type"),
        ),
        right_type=_boundary_type(
            _require(obj, "right_type", path),
            _join(path, "right_type"),
        ),
        successors=tuple(
            _string(it, f"{path}.successors[{i}]")
            for i, it in enumerate(successors)
        ),
        **polylines,
    )


def segment_to_dict(segment: LaneSegment) -> dict:
    """Return exchange dictionary of segment."""
    obj = {
        "id": segment.element_id,
        "class": segment.element_class.value,
    }
    for name, poly in zip(POLYLINES, segment.polylines):
        obj[name] = [list(point) for point in poly.points]
    obj["left_type"] = int(segment.left_type)
    obj["right_type"] = int(segment.right_type)
    obj["successors"] = list(segment.successors)
    return obj


def _frame_header(data, source):
    frame_id = _string(_require(data, "frame_id", ""), "frame_id")
    fov = _fov(data["fov"], "fov") if "fov" in data else Fov()
    elements = _require(data, "elements", "")
    if not isinstance(elements, list):
        raise SchemaError("elements", "list expected")
    log.debug("%s: frame %s with %d elements", source, frame_id, len(elements))
    return frame_id, fov, elements


def _header_dict(frame_id, fov):
    return {"frame_id": frame_id, "fov": fov.as_list()}


def map_from_dict(data, *, normalize=True, source=None) -> LocalMap:
    """Return LocalMap from parsed JSON document."""
    frame_id, fov, items = _frame_header(data, source)
    warnings = []
    elements = tuple(
        segment_from_dict(
            item,
            f"elements[{i}]",
            normalize=normalize,
            warnings=warnings,
        )
        for i, item in enumerate(items)
    )
    return LocalMap(frame_id, elements, fov, tuple(warnings))


def map_to_dict(local_map: LocalMap) -> dict:
    """Return JSON document of map."""
    data = _header_dict(local_map.frame_id, local_map.fov)
    data["elements"] = [segment_to_dict(it) for it in local_map.elements]
    return data


def with_source(func):
    """Add source name to SchemaError raised by loader."""

    @wraps(func)
    def wrapper(data, *, normalize=True, source=None):
        try:
            return func(data, normalize=normalize, source=source)
        except SchemaError as err:
            if source is None or err.source is not None:
                raise
            raise SchemaError(err.field, err.reason, source) from err

    return wrapper


@with_source
def load_map(data, *, normalize=True, source=None) -> LocalMap:
    """Load map from bytes or text.

    With ``normalize`` polylines of other than canonical point count are
    resampled and a warning is recorded on the map.
    """
    return map_from_dict(
        decode_json(data, source),
        normalize=normalize,
        source=source,
    )


def save_map(local_map: LocalMap) -> bytes:
    """Serialize map."""
    return encode_json(map_to_dict(local_map))


@with_source
def load_ground_truth(data, *, normalize=True, source=None):
    """Load change labeled frame."""
    frame_id, fov, items = _frame_header(decode_json(data, source), source)
    elements = []
    for i, item in enumerate(items):
        path = f"elements[{i}]"
        label = _require(item, "label", path)
        try:
            label = ChangeLabel(label)
        except ValueError:
            names = ", ".join(it.value for it in ChangeLabel)
            msg = f"`{label}' not in {names}"
            raise SchemaError(_join(path, "label"), msg) from None
        segment = segment_from_dict(item, path, normalize=normalize)
        elements.append(LabeledElement(segment, label))
    return FrameGroundTruth(frame_id, tuple(elements), fov)


def save_ground_truth(ground_truth: FrameGroundTruth) -> bytes:
    """Serialize change labeled frame."""
    data = _header_dict(ground_truth.frame_id, ground_truth.fov)
    data["elements"] = [
        {**segment_to_dict(it.segment), "label": it.label.value}
        for it in ground_truth.elements
    ]
    return encode_json(data)


@with_source
def load_prediction(data, *, normalize=True, source=None):
    """Load predicted frame."""
    frame_id, fov, items = _frame_header(decode_json(data, source), source)
    elements = []
    for i, item in enumerate(items):
        path = f"elements[{i}]"
        segment = segment_from_dict(item, path, normalize=normalize)
        elements.append(
            PredictedElement(
                segment,
                score=_unit(
                    _require(item, "score", path),
                    _join(path, "score"),
                ),
                ins_prob=_unit(item.get("ins_prob", 0.0), f"{path}.ins_prob"),
                del_prob=_unit(item.get("del_prob", 0.0), f"{path}.del_prob"),
            ),
        )
    return FramePrediction(frame_id, tuple(elements), fov)


def save_prediction(prediction: FramePrediction) -> bytes:
    """Serialize predicted frame."""
    data = _header_dict(prediction.frame_id, prediction.fov)
    data["elements"] = [
        {
            **segment_to_dict(it.segment),
            "score": it.score,
            "ins_prob": it.ins_prob,
            "del_prob": it.del_prob,
        }
        for it in prediction.elements
    ]
    return encode_json(data)
