"""Positional encoding of a stale prior map into a polyline token matrix.

Each row describes one element: the 30 points of centerline, left and right
boundary, every point taking ``d`` columns (x and y encoded at ``d/2`` each),
followed by one-hot blocks of the left and right boundary type.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite

import numpy as np

from stalemap.errors import ConfigError, InvalidMap
from stalemap.map_model import (
    POINT_COUNT,
    BoundaryType,
    LocalMap,
    validate_map,
)

K = len(BoundaryType)
POINTS_PER_ELEMENT = 3 * POINT_COUNT


@dataclass(frozen=True)
class EncoderConfig:
    """Encoder dimensions."""

    d: int = 16
    k: int = K
    frequency_base: float = 1000.0

    def __post_init__(self):
        if self.d < 2 or self.d % 2:  # noqa: PLR2004
            msg = f"d must be even and at least 2, got {self.d}"
            raise ConfigError(msg)
        if self.k != K:
            msg = f"k must be {K}, got {self.k}"
            raise ConfigError(msg)
        if not (isfinite(self.frequency_base) and self.frequency_base > 0):
            msg = f"frequency_base must be positive, got {self.frequency_base}"
            raise ConfigError(msg)

    @property
    def columns(self) -> int:
        """Return row width of the prior encoding."""
        return POINTS_PER_ELEMENT * self.d + 2 * self.k

    def frequencies(self) -> np.ndarray:
        """Return the d/2 divisors of the sine/cosine ladder."""
        j = np.arange(self.d // 2, dtype=float)
        return self.frequency_base ** (2.0 * j / self.d)


@dataclass(frozen=True)
class PriorEncoding:
    """Encoded prior, one row per element in map order."""

    matrix: np.ndarray
    element_ids: tuple[str, ...]
    config: EncoderConfig

    @property
    def m_prior(self) -> int:
        """Return number of encoded elements."""
        return self.matrix.shape[0]


def positional_encode(value, cfg: EncoderConfig) -> np.ndarray:
    """Return interleaved sin, cos of value over the frequency ladder."""
    value = float(value)
    if not isfinite(value):
        msg = f"cannot encode non finite value {value}"
        raise ValueError(msg)
    angles = value / cfg.frequencies()
    out = np.empty(cfg.d)
    out[0::2] = np.sin(angles)
    out[1::2] = np.cos(angles)
    return out


def one_hot_boundary(boundary: BoundaryType) -> np.ndarray:
    """Return one-hot vector of boundary type ordinal."""
    out = np.zeros(K)
    out[int(BoundaryType(boundary))] = 1.0
    return out


def _half(cfg):
    return EncoderConfig(cfg.d // 2, cfg.k, cfg.frequency_base)


def encode_point(x, y, cfg: EncoderConfig) -> np.ndarray:
    """Return d columns of one point, x part first."""
    half = _half(cfg)
    return np.concatenate(
        (positional_encode(x, half), positional_encode(y, half)),
    )


def encode_points(points, cfg: EncoderConfig) -> np.ndarray:
    """Vectorized encode_point over (n, 2) points, returns (n, d)."""
    half = _half(cfg)
    angles = np.asarray(points, dtype=float)[:, :, None] / half.frequencies()
    out = np.empty((*angles.shape[:2], half.d))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out.reshape(len(angles), cfg.d)


def encode_prior(local_map: LocalMap, cfg: EncoderConfig) -> PriorEncoding:
    """Encode valid stale map, raise InvalidMap otherwise."""
    if cfg.d % 4:
        msg = f"d must be divisible by 4 to split a point, got {cfg.d}"
        raise ConfigError(msg)
    violations = validate_map(local_map)
    if violations:
        raise InvalidMap(violations)

    matrix = np.zeros((len(local_map.elements), cfg.columns))
    geometry = POINTS_PER_ELEMENT * cfg.d
    for row, segment in enumerate(local_map.elements):
        points = np.vstack([poly.array for poly in segment.polylines])
        matrix[row, :geometry] = encode_points(points, cfg).ravel()
        matrix[row, geometry:geometry + K] = one_hot_boundary(
            segment.left_type,
        )
        matrix[row, geometry + K:] = one_hot_boundary(segment.right_type)
    return PriorEncoding(matrix, local_map.ids, cfg)
