"""JSONPath queries over evaluation reports and manifests."""

from __future__ import annotations

from jsonpath_ng.exceptions import JsonPathParserError
from jsonpath_ng.ext import parse as json_parse

from stalemap.errors import QueryError


def match_path(match) -> str:
    """Return dotted path of a match, empty string for the root."""
    path = str(match.full_path)
    return "" if path == "$" else path


def query_report(json_data, expression: str | None):
    """Return list of (path, value) matched by JSONPath expression.

    Blank expression matches the whole document.
    """
    if not expression or not expression.strip():
        return [("", json_data)]

    try:
        expr = json_parse(expression)
        matches = expr.find(json_data)
    except JsonPathParserError as err:
        msg = f"bad expression `{expression}': {err}"
        raise QueryError(msg) from err
    except Exception as err:
        msg = f"filter error in `{expression}': {err}"
        raise QueryError(msg) from err

    return [(match_path(it), it.value) for it in matches]


def query_values(json_data, expression: str) -> list:
    """Return only the matched values."""
    return [value for _, value in query_report(json_data, expression)]
