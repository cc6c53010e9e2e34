import hashlib
import os

import numpy as np
import pytest
import torch

from revisp.data import (
    DatasetIndex,
    load_dataset,
    load_pair,
    load_raw,
    load_srgb,
    pack_bayer,
    save_raw,
    save_raw_visualization,
    save_srgb,
    to_image,
    to_tensor,
    unpack_bayer,
    write_split_metadata,
)


def _write_pairs(root, track, n, size, seed=0):
    split = os.path.join(root, track, "train")
    os.makedirs(os.path.join(split, "srgb"))
    os.makedirs(os.path.join(split, "raw"))
    rng = np.random.default_rng(seed)
    for i in range(n):
        img = rng.uniform(0, 1, (size, size, 3))
        save_srgb(os.path.join(split, "srgb", f"{i:04d}.png"), img)
        save_raw(os.path.join(split, "raw", f"{i:04d}.png"), img * 0.5)
    write_split_metadata(split, track)
    return split


class TestSerialization:
    def test_srgb_endpoints(self, tmp_path):
        path = str(tmp_path / "a.png")
        save_srgb(path, np.stack([np.zeros((2, 2)), np.ones((2, 2)), np.ones((2, 2))], axis=-1))
        back = load_srgb(path)
        assert back[0, 0, 0] == 0.0
        assert back[0, 0, 1] == 1.0

    def test_srgb_roundtrip_quantization(self, tmp_path):
        img = np.random.default_rng(0).uniform(0, 1, (8, 8, 3))
        path = str(tmp_path / "b.png")
        save_srgb(path, img)
        assert np.abs(load_srgb(path) - img).max() <= 0.5 / 255 + 1e-12

    def test_raw_endpoints(self, tmp_path):
        path = str(tmp_path / "c.png")
        save_raw(path, np.concatenate([np.zeros((2, 2, 1)), np.ones((2, 2, 2))], axis=-1))
        back = load_raw(path)
        assert back[0, 0, 0] == 0.0
        assert back[0, 0, 2] == 1.0

    def test_raw_roundtrip_quantization(self, tmp_path):
        img = np.random.default_rng(1).uniform(0, 1, (6, 10, 3))
        path = str(tmp_path / "d.png")
        save_raw(path, img)
        assert np.abs(load_raw(path) - img).max() <= 0.5 / 65535 + 1e-12

    def test_raw_requantization_exact(self, tmp_path):
        # values already on the 16-bit grid survive a save/load bit-exactly
        grid = np.round(np.random.default_rng(2).uniform(0, 1, (4, 4, 3)) * 65535) / 65535
        path = str(tmp_path / "e.png")
        save_raw(path, grid)
        assert np.array_equal(load_raw(path), grid)

    def test_tensor_conversions(self):
        img = np.random.default_rng(3).uniform(0, 1, (5, 7, 3))
        t = to_tensor(img)
        assert t.shape == (3, 5, 7)
        back = to_image(t)
        assert np.abs(back - img).max() < 1e-6


class TestDatasetIndex:
    def test_lexicographic_order(self, tmp_path):
        _write_pairs(str(tmp_path), "synth", 3, 16)
        index = DatasetIndex.build(str(tmp_path), "synth")
        names = [os.path.basename(s) for s, _ in index.pairs]
        assert names == sorted(names)
        assert len(index) == 3

    def test_missing_raw_counterpart(self, tmp_path):
        split = _write_pairs(str(tmp_path), "synth", 2, 16)
        os.remove(os.path.join(split, "raw", "0001.png"))
        with pytest.raises(FileNotFoundError, match="0001"):
            DatasetIndex.build(str(tmp_path), "synth")

    def test_unknown_track(self, tmp_path):
        with pytest.raises(ValueError, match="track"):
            DatasetIndex.build(str(tmp_path), "s8")

    def test_empty_dataset(self, tmp_path):
        os.makedirs(tmp_path / "synth" / "train" / "srgb")
        os.makedirs(tmp_path / "synth" / "train" / "raw")
        with pytest.raises(FileNotFoundError, match="no image pairs"):
            DatasetIndex.build(str(tmp_path), "synth")

    def test_track_dim_validation_names_file_and_dims(self, tmp_path):
        _write_pairs(str(tmp_path), "s7", 1, 16)
        index = DatasetIndex.build(str(tmp_path), "s7")
        with pytest.raises(ValueError) as err:
            load_pair(index.pairs[0], index.expected_dims)
        assert "0000.png" in str(err.value)
        assert "504" in str(err.value)

    def test_load_dataset_order_and_scaling(self, tmp_path):
        _write_pairs(str(tmp_path), "synth", 2, 16)
        index = DatasetIndex.build(str(tmp_path), "synth")
        srgb, raw = load_dataset(index)
        assert srgb.shape == (2, 3, 16, 16)
        assert raw.shape == (2, 3, 16, 16)
        assert srgb.dtype == torch.float32
        assert float(srgb.max()) <= 1.0


class TestBayer:
    def test_hand_cell(self):
        mosaic = np.array([[1.0, 2.0], [3.0, 4.0]])
        planes = pack_bayer(mosaic)
        assert planes.shape == (1, 1, 4)
        assert list(planes[0, 0]) == [1.0, 2.0, 3.0, 4.0]

    def test_bijection(self):
        mosaic = np.random.default_rng(0).uniform(0, 1, (8, 12))
        assert np.array_equal(unpack_bayer(pack_bayer(mosaic)), mosaic)

    def test_checkerboard_gives_constant_planes(self):
        mosaic = np.indices((8, 8)).sum(axis=0) % 2
        planes = pack_bayer(mosaic.astype(float))
        for c in range(4):
            assert np.ptp(planes[..., c]) == 0.0

    def test_odd_dims_error(self):
        with pytest.raises(ValueError, match="even"):
            pack_bayer(np.zeros((5, 8)))


class TestVisualization:
    def test_black_and_white_endpoints(self, tmp_path):
        p0 = str(tmp_path / "zero.png")
        p1 = str(tmp_path / "one.png")
        save_raw_visualization(np.zeros((4, 4, 3)), p0)
        save_raw_visualization(np.ones((4, 4, 3)), p1)
        assert load_srgb(p0).max() == 0.0
        assert load_srgb(p1).min() == 1.0

    def test_byte_identical_across_runs(self, tmp_path):
        raw = np.random.default_rng(4).uniform(0, 1, (8, 8, 3))
        pa = str(tmp_path / "a.png")
        pb = str(tmp_path / "b.png")
        save_raw_visualization(raw, pa)
        save_raw_visualization(raw, pb)
        ha = hashlib.sha256(open(pa, "rb").read()).hexdigest()
        hb = hashlib.sha256(open(pb, "rb").read()).hexdigest()
        assert ha == hb

    def test_brightens_midtones(self, tmp_path):
        path = str(tmp_path / "mid.png")
        save_raw_visualization(np.full((4, 4, 3), 0.2), path)
        assert load_srgb(path)[0, 0, 0] > 0.2

    def test_out_of_range_error(self, tmp_path):
        with pytest.raises(ValueError):
            save_raw_visualization(np.full((4, 4, 3), 1.5), str(tmp_path / "x.png"))
