"""Evaluation report serialization, summaries and schema check."""

from __future__ import annotations

from html import escape
from io import StringIO
from logging import getLogger

from docutils.core import publish_string
from docutils.writers.html4css1 import Writer as Writer4css1

from stalemap.errors import QueryError
from stalemap.exchange import encode_json
from stalemap.metrics import SCHEMA_VERSION, STRATEGIES, macc_consistent
from stalemap.query import query_report, query_values

VALUE_LABELS = {
    "acc_pos": "Acc+",
    "acc_neg": "Acc-",
    "macc": "mAcc",
    "acc_loca": "Acc_loca",
    "acc_loca_c": "Acc_loca^c",
    "ap": "AP",
}

PARAMETER_LABELS = {
    "epsilon": "eps",
    "theta": "theta",
    "object_type": "",
}

UNDEFINED = "--"

HEADER = ("strategy", "modality", "change class", "parameter", "values")

# expression, minimal match count, check of every value
REQUIRED = (
    ("$.schema_version", 1, lambda it: it == SCHEMA_VERSION),
    ("$.config", 1, lambda it: isinstance(it, dict)),
    ("$.totals.frames", 1, lambda it: isinstance(it, int)),
    ("$.totals.sequences", 1, lambda it: isinstance(it, int)),
    ("$.totals.head_conflicts", 1, lambda it: isinstance(it, int)),
    ("$.strategies[*]", len(STRATEGIES), lambda it: isinstance(it, dict)),
    ("$.strategies[*].key", len(STRATEGIES), lambda it: isinstance(it, str)),
    (
        "$.strategies[*].rows[*].values.*",
        0,
        lambda it: it is None or (
            isinstance(it, (int, float)) and 0.0 <= it <= 1.0
        ),
    ),
    ("$.frames[*].frame_id", 0, lambda it: isinstance(it, str)),
    ("$.frames[*].head_conflicts", 0, lambda it: isinstance(it, int)),
)

log = getLogger(__name__)


def _row_to_dict(row):
    return {
        "change_class": row.change_class,
        "parameter_name": row.parameter_name,
        "parameter": row.parameter,
        "values": dict(row.values),
        "undefined": dict(row.undefined),
    }


def report_to_dict(report) -> dict:
    """Return JSON ready dictionary of EvalReport."""
    return {
        "schema_version": report.schema_version,
        "config": report.config,
        "totals": report.totals,
        "strategies": [
            {
                "key": block.key,
                "title": block.title,
                "modality": block.modality,
                "matcher": block.matcher,
                "error": block.error,
                "rows": [_row_to_dict(it) for it in block.rows],
            }
            for block in report.blocks
        ],
        "frames": [
            {
                "sequence_id": it.sequence_id,
                "frame_id": it.frame_id,
                "truth": it.truth,
                "verdicts": it.verdicts,
                "head_conflicts": it.head_conflicts,
                "matched": it.matched,
                "unmatched_preds": it.unmatched_preds,
                "unmatched_gts": it.unmatched_gts,
                "mean_cost": it.mean_cost,
            }
            for it in report.frames
        ],
    }


def dump_report(report) -> bytes:
    """Serialize report as JSON."""
    return encode_json(report_to_dict(report))


def _format_values(row):
    return ", ".join(
        f"{VALUE_LABELS.get(key, key)} "
        f"{UNDEFINED if value is None else f'{value:.2f}'}"
        for key, value in row["values"].items()
    )


def _format_parameter(row):
    label = PARAMETER_LABELS.get(row["parameter_name"], row["parameter_name"])
    if isinstance(row["parameter"], float):
        return f"{label}={row['parameter']:g}"
    return str(row["parameter"])


def _distinct(items) -> str:
    return ", ".join(dict.fromkeys(items))


def _format_result(row, with_class):
    label = _format_parameter(row)
    if with_class:
        label = f"{row['change_class']} {label}"
    return f"{label}: {_format_values(row)}"


def summary_rows(data) -> list[tuple[str, ...]]:
    """Return table rows of report dictionary, one per strategy block.

    Result rows of a block share one table row, its values cell lists them
    in order separated by semicolons. A failed strategy shows its error.
    """
    rows = []
    for block in data["strategies"]:
        key = f"({block['key']})"
        if block.get("error"):
            rows.append(
                (key, block["modality"], UNDEFINED, UNDEFINED,
                 f"error: {block['error']}"),
            )
            continue
        results = block["rows"]
        classes = _distinct(it["change_class"] for it in results)
        with_class = len({it["change_class"] for it in results}) > 1
        rows.append(
            (
                key,
                block["modality"],
                classes or UNDEFINED,
                _distinct(_format_parameter(it) for it in results)
                or UNDEFINED,
                "; ".join(_format_result(it, with_class) for it in results)
                or UNDEFINED,
            ),
        )
    return rows


def render_markdown(data) -> str:
    """Return Markdown summary table of report dictionary."""
    lines = [
        "| " + " | ".join(HEADER) + " |",
        "|" + "|".join("---" for _ in HEADER) + "|",
    ]
    lines.extend(
        "| " + " | ".join(it.replace("|", "\\|") for it in row) + " |"
        for row in summary_rows(data)
    )
    return "\n".join(lines) + "\n"


def _rst_cell(text):
    return text.replace("\\", "\\\\").replace("*", "\\*").replace("`", "\\`")


def render_rst(data) -> str:
    """Return reStructuredText list-table of report dictionary."""
    lines = [
        "Change detection evaluation",
        "===========================",
        "",
        f"Sequences: {data['totals']['sequences']}, "
        f"frames: {data['totals']['frames']}, "
        f"head conflicts: {data['totals']['head_conflicts']}",
        "",
        ".. list-table::",
        "   :header-rows: 1",
        "",
    ]
    for row in (HEADER, *summary_rows(data)):
        first, *rest = (_rst_cell(it) or UNDEFINED for it in row)
        lines.append(f"   * - {first}")
        lines.extend(f"     - {it}" for it in rest)
    return "\n".join(lines) + "\n"


def render_html(data) -> str:
    """Return standalone HTML summary published by docutils."""
    settings = {
        "warning_stream": StringIO(),
        "embed_stylesheet": True,
        "output_encoding": "utf-8",
        "title": escape("stalemap evaluation"),
    }
    return publish_string(
        source=render_rst(data),
        writer=Writer4css1(),
        settings_overrides=settings,
    ).decode("utf-8")


def validate_report(data) -> list[str]:
    """Return schema problems of report dictionary, empty when valid."""
    problems = []
    for expression, minimum, check in REQUIRED:
        try:
            found = query_report(data, expression)
        except QueryError as err:
            problems.append(str(err))
            continue
        if len(found) < minimum:
            problems.append(
                f"{expression}: {len(found)} matches, {minimum} expected",
            )
        problems.extend(
            f"{path or expression}: bad value {value!r}"
            for path, value in found
            if not check(value)
        )

    for row in query_values(data, "$.strategies[*].rows[*]"):
        for key, value in row.get("values", {}).items():
            if value is None and not row.get("undefined", {}).get(key):
                problems.append(f"{key}: undefined value without reason")
        values = row.get("values", {})
        if {"acc_pos", "acc_neg", "macc"} <= set(values) and None not in (
            values["acc_pos"],
            values["acc_neg"],
            values["macc"],
        ) and not macc_consistent(
            values["acc_pos"],
            values["acc_neg"],
            values["macc"],
            places=9,
        ):
            problems.append(f"mAcc {values['macc']} is not the mean")
    for problem in problems:
        log.debug("report: %s", problem)
    return problems
