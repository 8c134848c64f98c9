import pytest

from sdfeat import ExtractConfig, ExtractError, LEVEL_TABLE, level_shape, pad_amounts


def test_level_table_shapes():
    # 448x768 frame: level 3 -> 56x96x640, level 1 -> 14x24x1280
    assert level_shape(448, 768, 3) == (56, 96, 640)
    assert level_shape(448, 768, 1) == (14, 24, 1280)
    assert level_shape(448, 768, 2) == (28, 48, 1280)
    assert level_shape(448, 768, 4) == (56, 96, 320)


def test_level_table_constants():
    assert LEVEL_TABLE == {1: (32, 1280), 2: (16, 1280), 3: (8, 640), 4: (8, 320)}


def test_level_shape_requires_divisibility():
    with pytest.raises(ExtractError, match="not divisible"):
        level_shape(450, 768, 3)


def test_config_validation():
    ExtractConfig()  # defaults valid
    with pytest.raises(ExtractError, match="unknown backbone"):
        ExtractConfig(backbone="resnet-900")
    with pytest.raises(ExtractError, match="timestep"):
        ExtractConfig(timestep=0)
    with pytest.raises(ExtractError, match="timestep"):
        ExtractConfig(timestep=1001)
    with pytest.raises(ExtractError, match="level"):
        ExtractConfig(level=5)


def test_config_defaults():
    cfg = ExtractConfig()
    assert cfg.backbone == "sd-2.1"
    assert cfg.timestep == 200
    assert cfg.level == 3
    assert cfg.prompt == ""


def test_pad_amounts():
    assert pad_amounts(448, 768) == (0, 0, 0, 0)
    top, bottom, left, right = pad_amounts(427, 240)
    assert (427 + top + bottom) % 32 == 0
    assert (240 + left + right) % 32 == 0
    assert abs(top - bottom) <= 1 and abs(left - right) <= 1
