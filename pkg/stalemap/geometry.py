"""Element distances and rasterized intersection over union."""

from __future__ import annotations

from math import ceil

import numpy as np
from scipy.spatial.distance import cdist
from shapely import make_valid
from shapely.geometry import Polygon
from skimage.draw import polygon as scan_polygon

from stalemap.errors import DegenerateElement, EmptySet
from stalemap.map_model import MIN_AREA, LaneSegment

DEFAULT_RESOLUTION = 0.1


def _point_set(points):
    data = np.asarray(points, dtype=float).reshape(-1, 2)
    if not data.size:
        msg = "point set is empty"
        raise EmptySet(msg)
    return data


def chamfer_distance(a, b) -> float:
    """Return symmetric mean nearest neighbour distance of two point sets."""
    dist = cdist(_point_set(a), _point_set(b))
    forward = float(dist.min(axis=1).mean())
    backward = float(dist.min(axis=0).mean())
    return 0.5 * (forward + backward)


def frechet_distance(p, q) -> float:
    """Return discrete Frechet distance of two polylines.

    Eiter and Mannila dynamic programming over the coupling lattice. Accepts
    Polyline or (n, 2) array like.
    """
    p = getattr(p, "array", p)
    q = getattr(q, "array", q)
    if len(p) == 0 or len(q) == 0:
        msg = "polyline must not be empty"
        raise ValueError(msg)
    dist = cdist(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
    rows = dist.tolist()

    # plain lists, canonical polylines are tiny
    previous = []
    for i, row in enumerate(rows):
        current = []
        for j, value in enumerate(row):
            if i == 0 and j == 0:
                reach = value
            elif i == 0:
                reach = max(current[j - 1], value)
            elif j == 0:
                reach = max(previous[0], value)
            else:
                reach = max(
                    min(previous[j], current[j - 1], previous[j - 1]),
                    value,
                )
            current.append(reach)
        previous = current
    return previous[-1]


def segment_distance(pred: LaneSegment, gt: LaneSegment) -> float:
    """Return matching distance of predicted element to ground truth one.

    Lanes mix boundary chamfer and centerline Frechet half and half.
    Crossings have no direction, only the boundary chamfer is used.
    """
    boundary = chamfer_distance(pred.boundary_points, gt.boundary_points)
    if gt.is_crossing:
        return boundary
    return 0.5 * (boundary + frechet_distance(pred.centerline, gt.centerline))


def _stacked(segments, attribute):
    arrays = [np.asarray(getattr(it, attribute)) for it in segments]
    if len({it.shape for it in arrays}) != 1:
        return None
    return np.stack(arrays)


def _pairwise_frechet(p, q):
    """Return Frechet distances of (n, k, 2) and (m, l, 2) polyline stacks."""
    n, k = p.shape[:2]
    m, l = q.shape[:2]  # noqa: E741
    dist = cdist(p.reshape(-1, 2), q.reshape(-1, 2)).reshape(n, k, m, l)
    dist = dist.transpose(1, 3, 0, 2)
    reach = np.empty_like(dist)
    reach[0, 0] = dist[0, 0]
    for j in range(1, l):
        reach[0, j] = np.maximum(reach[0, j - 1], dist[0, j])
    for i in range(1, k):
        reach[i, 0] = np.maximum(reach[i - 1, 0], dist[i, 0])
        for j in range(1, l):
            best = np.minimum(
                np.minimum(reach[i - 1, j], reach[i, j - 1]),
                reach[i - 1, j - 1],
            )
            reach[i, j] = np.maximum(best, dist[i, j])
    return reach[-1, -1]


def pairwise_segment_distances(preds, gts) -> np.ndarray:
    """Return segment_distance of every (pred, gt) pair as (n, m) matrix.

    Stacks of equally sampled elements are computed at once, anything else
    pair by pair.
    """
    preds, gts = list(preds), list(gts)
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)))

    pred_bounds = _stacked(preds, "boundary_points")
    gt_bounds = _stacked(gts, "boundary_points")
    pred_centers = _stacked([it.centerline for it in preds], "array")
    gt_centers = _stacked([it.centerline for it in gts], "array")
    if any(
        it is None
        for it in (pred_bounds, gt_bounds, pred_centers, gt_centers)
    ):
        return np.array(
            [[segment_distance(p, g) for g in gts] for p in preds],
        )

    n, k = pred_bounds.shape[:2]
    m, l = gt_bounds.shape[:2]  # noqa: E741
    dist = cdist(
        pred_bounds.reshape(-1, 2),
        gt_bounds.reshape(-1, 2),
    ).reshape(n, k, m, l)
    forward = dist.min(axis=3).mean(axis=1)
    backward = dist.min(axis=1).mean(axis=2)
    boundary = 0.5 * (forward + backward)

    crossing = np.array([it.is_crossing for it in gts])
    if crossing.all():
        return boundary
    frechet = _pairwise_frechet(pred_centers, gt_centers)
    return np.where(crossing, boundary, 0.5 * (boundary + frechet))


def element_polygon(segment: LaneSegment) -> Polygon:
    """Return element ring as polygon, left boundary then reversed right."""
    shape = Polygon(segment.ring)
    if not shape.area >= MIN_AREA:
        msg = f"element `{segment.element_id}' has no area"
        raise DegenerateElement(msg, segment.element_id)
    return shape


def _exact_iou(a, b):
    a, b = make_valid(a), make_valid(b)
    union = a.union(b).area
    if union <= 0:
        return float(a.equals(b))
    return float(a.intersection(b).area / union)


def polygon_iou(a: Polygon, b: Polygon, resolution=DEFAULT_RESOLUTION):
    """Return intersection over union counted in grid cells.

    Both polygons are scan converted onto one grid of ``resolution`` sized
    cells covering their joint bounding box. A cell counts when its center
    lies inside the polygon.
    """
    if not resolution > 0:
        msg = f"resolution must be positive, got {resolution}"
        raise ValueError(msg)
    for shape in (a, b):
        if not abs(shape.area) >= MIN_AREA:
            msg = "polygon has no area"
            raise DegenerateElement(msg)

    xmin = min(a.bounds[0], b.bounds[0])
    ymin = min(a.bounds[1], b.bounds[1])
    xmax = max(a.bounds[2], b.bounds[2])
    ymax = max(a.bounds[3], b.bounds[3])
    shape = (
        max(1, ceil((ymax - ymin) / resolution)),
        max(1, ceil((xmax - xmin) / resolution)),
    )

    masks = []
    for poly in (a, b):
        ring = np.asarray(poly.exterior.coords)[:-1]
        mask = np.zeros(shape, dtype=bool)
        rows, cols = scan_polygon(
            (ring[:, 1] - ymin) / resolution - 0.5,
            (ring[:, 0] - xmin) / resolution - 0.5,
            shape=shape,
        )
        mask[rows, cols] = True
        masks.append(mask)

    union = int(np.count_nonzero(masks[0] | masks[1]))
    if union == 0:
        # both smaller than a cell
        return _exact_iou(a, b)
    return int(np.count_nonzero(masks[0] & masks[1])) / union


def element_iou(pred: LaneSegment, gt: LaneSegment, resolution):
    """Return rasterized IoU of two element polygons."""
    return polygon_iou(
        element_polygon(pred),
        element_polygon(gt),
        resolution,
    )
