"""Tests of the prior encoding matrix."""

from dataclasses import replace

import numpy as np
import pytest
from conftest import make_crossing, make_lane

from stalemap.encoding import (
    EncoderConfig,
    encode_point,
    encode_prior,
    one_hot_boundary,
    positional_encode,
)
from stalemap.errors import ConfigError, InvalidMap
from stalemap.map_model import BoundaryType, LocalMap


@pytest.fixture
def five():
    return LocalMap(
        "f",
        (
            make_lane("a"),
            make_lane("b", y=3.5),
            make_lane("c", y=-3.5),
            make_crossing("d"),
            make_crossing("e", x=5),
        ),
    )


def test_config_validation():
    assert EncoderConfig().columns == 486
    with pytest.raises(ConfigError):
        EncoderConfig(d=3)
    with pytest.raises(ConfigError):
        EncoderConfig(k=4)
    with pytest.raises(ConfigError):
        EncoderConfig(frequency_base=0)


def test_positional_zero():
    cfg = EncoderConfig()
    assert np.array_equal(positional_encode(0, cfg), [0, 1] * (cfg.d // 2))


def test_positional_range_and_oracle():
    cfg = EncoderConfig(d=8, frequency_base=100)
    rng = np.random.default_rng(1)
    for value in rng.uniform(-50, 50, 40):
        code = positional_encode(value, cfg)
        assert np.all(np.abs(code) <= 1)
        for j in range(cfg.d // 2):
            omega = 100 ** (2 * j / cfg.d)
            assert code[2 * j] == pytest.approx(np.sin(value / omega))
            assert code[2 * j + 1] == pytest.approx(np.cos(value / omega))


def test_positional_non_finite():
    with pytest.raises(ValueError, match="non finite"):
        positional_encode(float("inf"), EncoderConfig())


@pytest.mark.parametrize(
    ("boundary", "expected"),
    [
        (BoundaryType.NON_VISIBLE, [1, 0, 0]),
        (BoundaryType.DASHED, [0, 1, 0]),
        (BoundaryType.SOLID, [0, 0, 1]),
    ],
)
def test_one_hot(boundary, expected):
    assert one_hot_boundary(boundary).tolist() == expected


def test_shape(five):
    encoding = encode_prior(five, EncoderConfig(d=16, k=3))
    assert encoding.matrix.shape == (5, 486)
    assert encoding.m_prior == 5
    assert encoding.element_ids == ("a", "b", "c", "d", "e")
    assert np.all(encoding.matrix[:, -6:-3].sum(axis=1) == 1)
    assert np.all(encoding.matrix[:, -3:].sum(axis=1) == 1)
    assert np.all(np.abs(encoding.matrix) <= 1)


def test_empty_map():
    assert encode_prior(LocalMap("f"), EncoderConfig()).matrix.shape == (
        0,
        486,
    )


def test_row_composition(lane):
    cfg = EncoderConfig(d=8)
    row = encode_prior(LocalMap("f", (lane,)), cfg).matrix[0]
    points = [p for poly in lane.polylines for p in poly.points]
    expected = np.concatenate(
        [encode_point(x, y, cfg) for x, y in points]
        + [
            one_hot_boundary(lane.left_type),
            one_hot_boundary(lane.right_type),
        ],
    )
    assert np.allclose(row, expected)


def test_rows_follow_permutation(five):
    cfg = EncoderConfig()
    forward = encode_prior(five, cfg).matrix
    backward = encode_prior(
        replace(five, elements=five.elements[::-1]),
        cfg,
    ).matrix
    assert np.array_equal(forward[::-1], backward)


def test_invalid_map(lane):
    with pytest.raises(InvalidMap, match="DuplicateId"):
        encode_prior(LocalMap("f", (lane, lane)), EncoderConfig())


def test_d_split_per_point(lane):
    with pytest.raises(ConfigError, match="divisible by 4"):
        encode_prior(LocalMap("f", (lane,)), EncoderConfig(d=6))
