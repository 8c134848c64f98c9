import json

import numpy as np
import pytest

from sdfeat import ExtractConfig, ExtractError, WeightsError, extract_features
from sdfeat.cli import main


def test_synthetic_pipeline_shapes_and_fragment(frames_dir_factory, tmp_path):
    frames = frames_dir_factory([(64, 96), (64, 96)])
    cfg = ExtractConfig(backbone="synthetic", level=3)
    fragment_path = extract_features(frames, cfg, tmp_path / "out")
    fragment = json.loads(fragment_path.read_text())
    assert fragment["backbone"] == "synthetic"
    assert fragment["timestep"] == 200
    assert len(fragment["frames"]) == 2
    for entry in fragment["frames"]:
        assert entry["pad"] == [0, 0, 0, 0]
        assert (tmp_path / "out" / entry["features"]).exists()


def test_padding_recorded_for_odd_sizes(frames_dir_factory, tmp_path):
    frames = frames_dir_factory([(50, 70)])
    cfg = ExtractConfig(backbone="synthetic", level=3)
    fragment = json.loads(extract_features(frames, cfg, tmp_path / "o").read_text())
    entry = fragment["frames"][0]
    assert entry["original_size"] == [50, 70]
    assert entry["padded_size"] == [64, 96]
    top, bottom, left, right = entry["pad"]
    assert 50 + top + bottom == 64
    assert 70 + left + right == 96


def test_deterministic_across_runs(frames_dir_factory, tmp_path):
    frames = frames_dir_factory([(64, 64)])
    cfg = ExtractConfig(backbone="synthetic", seed=9)
    extract_features(frames, cfg, tmp_path / "a")
    extract_features(frames, cfg, tmp_path / "b")
    a = (tmp_path / "a" / "feat_00001.fmap").read_bytes()
    b = (tmp_path / "b" / "feat_00001.fmap").read_bytes()
    assert a == b


def test_seed_changes_output(frames_dir_factory, tmp_path):
    frames = frames_dir_factory([(64, 64)])
    extract_features(frames, ExtractConfig(backbone="synthetic", seed=1), tmp_path / "a")
    extract_features(frames, ExtractConfig(backbone="synthetic", seed=2), tmp_path / "b")
    assert (tmp_path / "a" / "feat_00001.fmap").read_bytes() != \
        (tmp_path / "b" / "feat_00001.fmap").read_bytes()


def test_unknown_backbone_lists_supported():
    with pytest.raises(ExtractError, match="sd-2.1.*dino"):
        ExtractConfig(backbone="hypernet")


def test_missing_weights_error(frames_dir_factory, tmp_path):
    frames = frames_dir_factory([(64, 64)])
    cfg = ExtractConfig(backbone="sd-2.1")  # no --weights
    with pytest.raises(WeightsError, match="weights"):
        extract_features(frames, cfg, tmp_path / "o")


def test_missing_weights_baseline(frames_dir_factory, tmp_path):
    from sdfeat import extract_baseline

    frames = frames_dir_factory([(64, 64)])
    with pytest.raises(WeightsError, match="weights"):
        extract_baseline(frames, "dino", tmp_path / "o")
    with pytest.raises(ExtractError, match="unknown baseline"):
        extract_baseline(frames, "vggnet", tmp_path / "o")


def test_cli_synthetic(frames_dir_factory, tmp_path, capsys):
    frames = frames_dir_factory([(64, 64)])
    rc = main(["extract", "--frames", str(frames), "--backbone", "synthetic",
               "--out", str(tmp_path / "o")])
    assert rc == 0
    assert (tmp_path / "o" / "features_manifest.json").exists()


def test_cli_error_codes(frames_dir_factory, tmp_path, capsys):
    frames = frames_dir_factory([(64, 64)])
    rc = main(["extract", "--frames", str(frames), "--backbone", "nope",
               "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "error [config]" in capsys.readouterr().err
    rc = main(["extract", "--frames", str(frames), "--backbone", "sd-2.1",
               "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "error [weights]" in capsys.readouterr().err


def test_all_values_finite(frames_dir_factory, tmp_path):
    import maskflow

    frames = frames_dir_factory([(64, 64)])
    extract_features(frames, ExtractConfig(backbone="synthetic"), tmp_path / "o")
    grid = maskflow.read_feature_map(tmp_path / "o" / "feat_00001.fmap")
    assert np.isfinite(grid).all()
