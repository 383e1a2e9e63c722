"""One to one optimal assignment of predicted to ground truth elements."""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum, inf, isclose

import numpy as np
from scipy.optimize import linear_sum_assignment

from stalemap.geometry import pairwise_segment_distances
from stalemap.map_model import LocalMap

TOLERANCE = 1e-9


@dataclass(frozen=True)
class Match:
    """Matched pair of prediction and ground truth indexes."""

    pred: int
    gt: int
    cost: float


@dataclass(frozen=True)
class Assignment:
    """Result of hungarian_assign."""

    matches: tuple[Match, ...] = ()
    unmatched_preds: tuple[int, ...] = ()
    unmatched_gts: tuple[int, ...] = ()

    @property
    def total_cost(self) -> float:
        """Return sum of matched costs."""
        return fsum(it.cost for it in self.matches)

    @property
    def mean_cost(self) -> float | None:
        """Return mean matched cost, None without matches."""
        if not self.matches:
            return None
        return self.total_cost / len(self.matches)

    def pairs(self) -> list[tuple[int, int]]:
        """Return (pred, gt) index pairs."""
        return [(it.pred, it.gt) for it in self.matches]


def _checked(costs):
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2:  # noqa: PLR2004
        msg = f"cost matrix must be two dimensional, got {costs.ndim}"
        raise ValueError(msg)
    if np.isnan(costs).any() or (costs < 0).any():
        msg = "cost matrix entries must be >= 0 or +inf"
        raise ValueError(msg)
    return costs


def _solve(costs, rows, cols):
    """Return finite pair count, their total cost and row to column map.

    Maximal count of finite pairs is preferred to lower cost: infinite
    entries are replaced by a penalty larger than any finite total.
    """
    if not rows or not cols:
        return 0, 0.0, {}
    sub = costs[np.ix_(rows, cols)]
    finite = np.isfinite(sub)
    if not finite.any():
        return 0, 0.0, {}
    penalty = float(sub[finite].sum()) + 1.0
    found_rows, found_cols = linear_sum_assignment(
        np.where(finite, sub, penalty),
    )
    pairs = {
        rows[r]: cols[c]
        for r, c in zip(found_rows, found_cols)
        if finite[r, c]
    }
    total = fsum(costs[r, c] for r, c in pairs.items())
    return len(pairs), total, pairs


def hungarian_assign(costs) -> Assignment:
    """Return optimal one to one assignment of cost matrix rows to columns.

    The assignment matches as many finite pairs as possible at minimal total
    cost. From equal optima the lexicographically smallest sorted pair
    sequence is chosen: rows are fixed in order, each to the smallest column
    which still allows an optimal completion.
    """
    costs = _checked(costs)
    n_rows, n_cols = costs.shape
    count, total, pairs = _solve(
        costs,
        list(range(n_rows)),
        list(range(n_cols)),
    )

    free = list(range(n_cols))
    fixed_count, fixed_total = 0, 0.0
    matches = []
    unmatched_preds = []
    for row in range(n_rows):
        rest = list(range(row + 1, n_rows))
        target = pairs.get(row)
        chosen = None
        for col in free:
            if target is not None and col > target:
                break
            if costs[row, col] == inf:
                continue
            if col == target:
                chosen = col
                break
            others = [it for it in free if it != col]
            sub_count, sub_total, sub_pairs = _solve(costs, rest, others)
            if fixed_count + 1 + sub_count == count and isclose(
                fixed_total + costs[row, col] + sub_total,
                total,
                rel_tol=TOLERANCE,
                abs_tol=TOLERANCE,
            ):
                chosen = col
                pairs = sub_pairs
                break

        if chosen is None:
            unmatched_preds.append(row)
            continue
        free.remove(chosen)
        fixed_count += 1
        fixed_total += costs[row, chosen]
        matches.append(Match(row, chosen, float(costs[row, chosen])))

    return Assignment(tuple(matches), tuple(unmatched_preds), tuple(free))


def _segments(frame):
    if isinstance(frame, LocalMap):
        return frame.elements
    return getattr(frame, "segments", frame)


def build_cost_matrix(preds, gts) -> np.ndarray:
    """Return matching distances, +inf where element classes differ.

    Accepts frames, local maps or plain sequences of lane segments.
    """
    preds, gts = _segments(preds), _segments(gts)
    same_class = np.array(
        [[p.element_class is g.element_class for g in gts] for p in preds],
        dtype=bool,
    ).reshape(len(preds), len(gts))
    return np.where(same_class, pairwise_segment_distances(preds, gts), inf)
