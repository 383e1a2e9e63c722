"""JSON configuration files of the evaluation, generator and simulator.

Keys mirror dataclass field names. Every value goes through a converter
picked by field name, unknown keys are logged and ignored.
"""

from __future__ import annotations

from dataclasses import MISSING, asdict, fields
from enum import Enum
from logging import getLogger
from os import cpu_count, environ

from stalemap.errors import ConfigError
from stalemap.exchange import decode_json, encode_json

THREADS_ENV = "STALEMAP_THREADS"
MAX_THREADS = 8

log = getLogger(__name__)


def smart_bool(value):
    """Make boolean value from any human form."""
    if isinstance(value, bool):
        return value
    if str(value).lower() in ("1", "true", "yes", "on", "enable"):
        return True
    if str(value).lower() in ("0", "false", "no", "off", "disable"):
        return False
    msg = f"{value} is not boolean value"
    raise ValueError(msg)


def _real(value):
    if isinstance(value, bool):
        msg = f"{value} is not a number"
        raise TypeError(msg)
    return float(value)


def float_list(value):
    """Return tuple of floats from list or comma separated string."""
    if isinstance(value, str):
        value = [it for it in value.split(",") if it.strip()]
    if not isinstance(value, (list, tuple)):
        msg = f"{value!r} is not a list"
        raise TypeError(msg)
    return tuple(_real(it) for it in value)


def optional_float(value):
    """Return float or None for null."""
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    return _real(value)


def optional_int(value):
    """Return integer or None for null."""
    if value is None:
        return None
    return integer(value)


def integer(value):
    """Return integer, refuse floats with a fraction."""
    if isinstance(value, bool):
        msg = f"{value} is not an integer"
        raise TypeError(msg)
    if isinstance(value, float) and not value.is_integer():
        msg = f"{value} is not an integer"
        raise ValueError(msg)
    return int(value)


def float_pair(value):
    """Return pair of floats."""
    pair = float_list(value)
    if len(pair) != 2:  # noqa: PLR2004
        msg = f"{value!r} is not a pair"
        raise ValueError(msg)
    return pair


def beta_params(value):
    """Return (alpha, beta) of a Beta distribution or None."""
    if value is None:
        return None
    pair = float_pair(value)
    if min(pair) <= 0:
        msg = f"Beta parameters must be positive, got {pair}"
        raise ValueError(msg)
    return pair


CONVERTERS = {
    # evaluation
    "epsilons": float_list,
    "thetas": float_list,
    "localization_epsilon": _real,
    "lane_thresholds": float_list,
    "crossing_thresholds": float_list,
    "iou_resolution": _real,
    "lane_change_thresholds": str,
    "class_gated_localization": smart_bool,
    # perturbation
    "rng_seed": integer,
    "deletion_probability": _real,
    "insertion_rate": _real,
    "crossing_length": _real,
    "target_ratio": optional_float,
    "forced_insertions": optional_int,
    # simulator
    "miss_rate": _real,
    "clutter_rate": _real,
    "jitter_sigma": _real,
    "flag_flip_rate": _real,
    "false_flag_rate": _real,
    "score_true": beta_params,
    "score_clutter": beta_params,
    "clutter_offset": float_pair,
    # synthetic world
    "lanes": integer,
    "lane_width": _real,
    "segment_length": _real,
    "road_length": _real,
    "max_curvature": _real,
    "crossings": integer,
    "fov_half_size": _real,
    # encoder
    "d": integer,
    "k": integer,
    "frequency_base": _real,
    # render
    "stroke_width": _real,
    "centerline_width": _real,
    "scale": _real,
    "margin": _real,
}


def smart_get(data, values, key, conv=str, source="config"):
    """Convert data[key] into values[key] when present."""
    if key not in data:
        return
    try:
        values[key] = conv(data[key])
    except (TypeError, ValueError) as err:
        msg = f"{source}: {key}: {err}"
        raise ConfigError(msg) from err


def read_config(cls, path=None, data=None, **overrides):
    """Return cls instance from JSON file or parsed dictionary.

    Overrides with None value are skipped, so CLI options which were not set
    do not hide file values.
    """
    source = str(path) if path is not None else "config"
    if path is not None:
        with open(path, "rb") as config:
            data = decode_json(config.read(), source)
    data = {} if data is None else data
    if not isinstance(data, dict):
        msg = f"{source}: JSON object expected"
        raise ConfigError(msg)

    names = [it.name for it in fields(cls)]
    for key in data:
        if key not in names:
            log.warning("%s: unknown key `%s' ignored", source, key)

    values = {}
    for field in fields(cls):
        conv = CONVERTERS.get(field.name, str)
        smart_get(data, values, field.name, conv, source)
    values.update({k: v for k, v in overrides.items() if v is not None})

    missing = [
        it.name
        for it in fields(cls)
        if it.name not in values
        and it.default is MISSING
        and it.default_factory is MISSING
    ]
    if missing:
        msg = f"{source}: missing {', '.join(missing)}"
        raise ConfigError(msg)
    try:
        return cls(**values)
    except (TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        msg = f"{source}: {err}"
        raise ConfigError(msg) from err


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_plain(it) for it in value]
    if isinstance(value, dict):
        return {key: _plain(it) for key, it in value.items()}
    return value


def config_to_dict(obj) -> dict:
    """Return configuration dataclass as JSON ready dictionary."""
    return _plain(asdict(obj))


def dump_config(obj) -> bytes:
    """Serialize configuration in the format read_config reads."""
    return encode_json(config_to_dict(obj))


def thread_count() -> int:
    """Return worker count of per frame thread pool."""
    default = min(MAX_THREADS, cpu_count() or 1)
    value = environ.get(THREADS_ENV)
    if not value:
        return default
    try:
        count = int(value)
    except ValueError:
        count = 0
    if count < 1:
        log.warning("Bad %s value `%s', using %d", THREADS_ENV, value, default)
        return default
    return count
