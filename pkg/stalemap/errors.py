"""Exceptions raised by stalemap."""


class StalemapError(Exception):
    """Base of all stalemap errors."""


class ParseError(StalemapError):
    """Input is not parseable JSON."""

    def __init__(self, msg, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)


class SchemaError(StalemapError):
    """Parsed document does not follow the exchange schema."""

    def __init__(self, field, msg, source=None):
        self.field = field
        self.reason = msg
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{field}: {msg}")


class InvalidMap(StalemapError):
    """Map breaks one or more invariants."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(it) for it in self.violations))


class ConfigError(StalemapError, ValueError):
    """Configuration value out of range or not convertible."""


class ZeroLengthPolyline(StalemapError, ValueError):
    """Polyline has no arclength."""


class EmptySet(StalemapError, ValueError):
    """Point set has no points."""


class DegenerateElement(StalemapError, ValueError):
    """Element polygon has no area."""

    def __init__(self, msg, element_id=None):
        self.element_id = element_id
        super().__init__(msg)


class NoHostLane(StalemapError):
    """Map has no lane which could host a synthetic crossing."""


class QueryError(StalemapError):
    """JSONPath expression could not be evaluated."""


class UndefinedMetric(StalemapError):
    """Metric has an empty denominator."""


class EmptyClass(UndefinedMetric):
    """No change or no no-change population to compute accuracy on."""


class NoDetections(UndefinedMetric):
    """No predicted changed element passed the score gate."""


class NoGroundTruth(UndefinedMetric):
    """No ground truth element to compute average precision against."""
